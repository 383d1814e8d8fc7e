#pragma once

#include "aef/nn/tensor.hpp"

#include <opencv2/core.hpp>

#include <algorithm>
#include <cmath>

namespace aef::nn {

// 8-bit BGR <-> {3,H,W} float in [0,1]. Channel order stays BGR throughout;
// nothing downstream assigns meaning to the order.
inline Tensor image_to_tensor(const cv::Mat& img) {
  Tensor t({3, img.rows, img.cols});
  const size_t plane = static_cast<size_t>(img.rows) * img.cols;
  for (int y = 0; y < img.rows; ++y) {
    const auto* row = img.ptr<cv::Vec3b>(y);
    for (int x = 0; x < img.cols; ++x) {
      const size_t i = static_cast<size_t>(y) * img.cols + x;
      for (int c = 0; c < 3; ++c)
        t.data[c * plane + i] = static_cast<float>(row[x][c]) / 255.0f;
    }
  }
  return t;
}

inline cv::Mat tensor_to_image(const Tensor& t) {
  const int h = t.dim(1), w = t.dim(2);
  const size_t plane = static_cast<size_t>(h) * w;
  cv::Mat img(h, w, CV_8UC3);
  for (int y = 0; y < h; ++y) {
    auto* row = img.ptr<cv::Vec3b>(y);
    for (int x = 0; x < w; ++x) {
      const size_t i = static_cast<size_t>(y) * w + x;
      for (int c = 0; c < 3; ++c) {
        const float v = std::clamp(t.data[c * plane + i], 0.0f, 1.0f);
        row[x][c] = static_cast<uint8_t>(std::lround(255.0f * v));
      }
    }
  }
  return img;
}

// {C,H,W} items of identical shape -> {N,C,H,W}
inline Tensor stack(const std::vector<Tensor>& items) {
  Tensor out({static_cast<int>(items.size()), items[0].dim(0), items[0].dim(1),
              items[0].dim(2)});
  const size_t stride = items[0].numel();
  for (size_t i = 0; i < items.size(); ++i)
    std::copy(items[i].data.begin(), items[i].data.end(),
              out.data.begin() + static_cast<long>(i * stride));
  return out;
}

// {C,H,W} -> {1,C,H,W}
inline Tensor unsqueeze(const Tensor& t) {
  Tensor out = t;
  out.shape.insert(out.shape.begin(), 1);
  return out;
}

}  // namespace aef::nn
