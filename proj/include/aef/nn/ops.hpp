#pragma once

#include "aef/nn/tensor.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <stdexcept>

// Convolution and friends, templated on scalar type. All parallel sections
// use a fixed chunk count so accumulation order (and thus the bit pattern of
// every result) does not depend on how many threads run.
namespace aef::nn {

inline constexpr int kGradChunks = 8;

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using ColMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor>;

inline int conv_out_dim(int in, int k, int stride, int pad) {
  return (in + 2 * pad - k) / stride + 1;
}

template <typename T>
void im2col(const T* x, int c, int h, int w, int k, int stride, int pad,
            T* col) {
  const int oh = conv_out_dim(h, k, stride, pad);
  const int ow = conv_out_dim(w, k, stride, pad);
  // col is (c*k*k) x (oh*ow), column-major over output positions.
  for (int ci = 0; ci < c; ++ci) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        T* dst = col + static_cast<size_t>((ci * k + ky) * k + kx);
        const T* src = x + static_cast<size_t>(ci) * h * w;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * stride - pad + ky;
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * stride - pad + kx;
            const bool inside = iy >= 0 && iy < h && ix >= 0 && ix < w;
            dst[static_cast<size_t>(oy * ow + ox) * (c * k * k)] =
                inside ? src[iy * w + ix] : T{0};
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_accum(const T* col, int c, int h, int w, int k, int stride, int pad,
                  T* x) {
  const int oh = conv_out_dim(h, k, stride, pad);
  const int ow = conv_out_dim(w, k, stride, pad);
  for (int ci = 0; ci < c; ++ci) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const T* src = col + static_cast<size_t>((ci * k + ky) * k + kx);
        T* dst = x + static_cast<size_t>(ci) * h * w;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= h) continue;
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * stride - pad + kx;
            if (ix < 0 || ix >= w) continue;
            dst[iy * w + ix] += src[static_cast<size_t>(oy * ow + ox) * (c * k * k)];
          }
        }
      }
    }
  }
}

// x {N,C,H,W}, w {O,C,k,k}, b {O} -> y {N,O,H',W'}
template <typename T>
TensorT<T> conv2d_forward(const TensorT<T>& x, const TensorT<T>& w,
                          const TensorT<T>& b, int stride, int pad) {
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const int o = w.dim(0), k = w.dim(2);
  if (w.dim(1) != c) throw std::runtime_error("conv2d: channel mismatch");
  const int oh = conv_out_dim(h, k, stride, pad);
  const int ow = conv_out_dim(wd, k, stride, pad);
  if (oh <= 0 || ow <= 0) throw std::runtime_error("conv2d: output would be empty");

  TensorT<T> y({n, o, oh, ow});
  const int ckk = c * k * k, hw = oh * ow;
  Eigen::Map<const RowMat<T>> wm(w.ptr(), o, ckk);

#pragma omp parallel
  {
    AlignedVec<T> col(static_cast<size_t>(ckk) * hw);
#pragma omp for schedule(static)
    for (int i = 0; i < n; ++i) {
      im2col(x.ptr() + static_cast<size_t>(i) * c * h * wd, c, h, wd, k, stride,
             pad, col.data());
      Eigen::Map<const ColMat<T>> cm(col.data(), ckk, hw);
      Eigen::Map<RowMat<T>> ym(y.ptr() + static_cast<size_t>(i) * o * hw, o, hw);
      ym.noalias() = wm * cm;
      for (int oc = 0; oc < o; ++oc) ym.row(oc).array() += b.data[oc];
    }
  }
  return y;
}

template <typename T>
struct Conv2dGrads {
  TensorT<T> dx, dw, db;
};

template <typename T>
Conv2dGrads<T> conv2d_backward(const TensorT<T>& x, const TensorT<T>& w,
                               const TensorT<T>& dy, int stride, int pad) {
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const int o = w.dim(0), k = w.dim(2);
  const int oh = dy.dim(2), ow = dy.dim(3);
  const int ckk = c * k * k, hw = oh * ow;

  Conv2dGrads<T> g{TensorT<T>(x.shape), TensorT<T>(w.shape),
                   TensorT<T>({o})};
  Eigen::Map<const RowMat<T>> wm(w.ptr(), o, ckk);

  const int chunks = std::min(kGradChunks, std::max(1, n));
  std::vector<TensorT<T>> dw_part(chunks, TensorT<T>(w.shape));
  std::vector<TensorT<T>> db_part(chunks, TensorT<T>({o}));

#pragma omp parallel
  {
    AlignedVec<T> col(static_cast<size_t>(ckk) * hw);
    AlignedVec<T> dcol(static_cast<size_t>(ckk) * hw);
#pragma omp for schedule(static)
    for (int ch = 0; ch < chunks; ++ch) {
      Eigen::Map<RowMat<T>> dwm(dw_part[ch].ptr(), o, ckk);
      const int lo = static_cast<int>(static_cast<long>(n) * ch / chunks);
      const int hi = static_cast<int>(static_cast<long>(n) * (ch + 1) / chunks);
      for (int i = lo; i < hi; ++i) {
        im2col(x.ptr() + static_cast<size_t>(i) * c * h * wd, c, h, wd, k,
               stride, pad, col.data());
        Eigen::Map<const ColMat<T>> cm(col.data(), ckk, hw);
        Eigen::Map<const RowMat<T>> dym(dy.ptr() + static_cast<size_t>(i) * o * hw,
                                        o, hw);
        dwm.noalias() += dym * cm.transpose();
        for (int oc = 0; oc < o; ++oc) db_part[ch].data[oc] += dym.row(oc).sum();

        Eigen::Map<ColMat<T>> dcm(dcol.data(), ckk, hw);
        dcm.noalias() = wm.transpose() * dym;
        col2im_accum(dcol.data(), c, h, wd, k, stride, pad,
                     g.dx.ptr() + static_cast<size_t>(i) * c * h * wd);
      }
    }
  }
  for (int ch = 0; ch < chunks; ++ch) {
    for (size_t j = 0; j < g.dw.data.size(); ++j) g.dw.data[j] += dw_part[ch].data[j];
    for (int oc = 0; oc < o; ++oc) g.db.data[oc] += db_part[ch].data[oc];
  }
  return g;
}

template <typename T>
TensorT<T> leaky_relu_forward(const TensorT<T>& x, T slope) {
  TensorT<T> y(x.shape);
  for (size_t i = 0; i < x.data.size(); ++i)
    y.data[i] = x.data[i] > T{0} ? x.data[i] : slope * x.data[i];
  return y;
}

template <typename T>
TensorT<T> leaky_relu_backward(const TensorT<T>& x, const TensorT<T>& dy, T slope) {
  TensorT<T> dx(x.shape);
  for (size_t i = 0; i < x.data.size(); ++i)
    dx.data[i] = x.data[i] > T{0} ? dy.data[i] : slope * dy.data[i];
  return dx;
}

// Nearest-neighbor 2x upsampling.
template <typename T>
TensorT<T> upsample2x_forward(const TensorT<T>& x) {
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  TensorT<T> y({n, c, 2 * h, 2 * w});
  for (int i = 0; i < n * c; ++i) {
    const T* src = x.ptr() + static_cast<size_t>(i) * h * w;
    T* dst = y.ptr() + static_cast<size_t>(i) * 4 * h * w;
    for (int yy = 0; yy < 2 * h; ++yy)
      for (int xx = 0; xx < 2 * w; ++xx)
        dst[yy * 2 * w + xx] = src[(yy / 2) * w + (xx / 2)];
  }
  return y;
}

template <typename T>
TensorT<T> upsample2x_backward(const TensorT<T>& dy) {
  const int n = dy.dim(0), c = dy.dim(1), h2 = dy.dim(2), w2 = dy.dim(3);
  const int h = h2 / 2, w = w2 / 2;
  TensorT<T> dx({n, c, h, w});
  for (int i = 0; i < n * c; ++i) {
    const T* src = dy.ptr() + static_cast<size_t>(i) * h2 * w2;
    T* dst = dx.ptr() + static_cast<size_t>(i) * h * w;
    for (int yy = 0; yy < h2; ++yy)
      for (int xx = 0; xx < w2; ++xx)
        dst[(yy / 2) * w + (xx / 2)] += src[yy * w2 + xx];
  }
  return dx;
}

// 3x3 stride-2 max pool, pad 1 (classifier stems). Argmax indices out.
template <typename T>
TensorT<T> maxpool3x3s2_forward(const TensorT<T>& x, std::vector<int>& argmax) {
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const int oh = conv_out_dim(h, 3, 2, 1), ow = conv_out_dim(w, 3, 2, 1);
  TensorT<T> y({n, c, oh, ow});
  argmax.assign(y.numel(), -1);
  for (int i = 0; i < n * c; ++i) {
    const T* src = x.ptr() + static_cast<size_t>(i) * h * w;
    T* dst = y.ptr() + static_cast<size_t>(i) * oh * ow;
    int* am = argmax.data() + static_cast<size_t>(i) * oh * ow;
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        T best{};
        int best_idx = -1;
        for (int ky = 0; ky < 3; ++ky) {
          const int iy = oy * 2 - 1 + ky;
          if (iy < 0 || iy >= h) continue;
          for (int kx = 0; kx < 3; ++kx) {
            const int ix = ox * 2 - 1 + kx;
            if (ix < 0 || ix >= w) continue;
            if (best_idx < 0 || src[iy * w + ix] > best) {
              best = src[iy * w + ix];
              best_idx = iy * w + ix;
            }
          }
        }
        dst[oy * ow + ox] = best;
        am[oy * ow + ox] = best_idx;
      }
    }
  }
  return y;
}

template <typename T>
TensorT<T> maxpool3x3s2_backward(const TensorT<T>& dy,
                                 const std::vector<int>& argmax,
                                 const std::vector<int>& in_shape) {
  TensorT<T> dx(in_shape);
  const int n = dy.dim(0), c = dy.dim(1), ohw = dy.dim(2) * dy.dim(3);
  const int hw = in_shape[2] * in_shape[3];
  for (int i = 0; i < n * c; ++i) {
    const T* src = dy.ptr() + static_cast<size_t>(i) * ohw;
    const int* am = argmax.data() + static_cast<size_t>(i) * ohw;
    T* dst = dx.ptr() + static_cast<size_t>(i) * hw;
    for (int j = 0; j < ohw; ++j)
      if (am[j] >= 0) dst[am[j]] += src[j];
  }
  return dx;
}

// {N,C,H,W} -> {N,C,1,1}
template <typename T>
TensorT<T> global_avg_pool_forward(const TensorT<T>& x) {
  const int n = x.dim(0), c = x.dim(1);
  const size_t hw = static_cast<size_t>(x.dim(2)) * x.dim(3);
  TensorT<T> y({n, c, 1, 1});
  for (int i = 0; i < n * c; ++i) {
    const T* src = x.ptr() + static_cast<size_t>(i) * hw;
    T acc{0};
    for (size_t j = 0; j < hw; ++j) acc += src[j];
    y.data[i] = acc / static_cast<T>(hw);
  }
  return y;
}

template <typename T>
TensorT<T> global_avg_pool_backward(const TensorT<T>& dy,
                                    const std::vector<int>& in_shape) {
  TensorT<T> dx(in_shape);
  const size_t hw = static_cast<size_t>(in_shape[2]) * in_shape[3];
  const int nc = in_shape[0] * in_shape[1];
  for (int i = 0; i < nc; ++i) {
    const T g = dy.data[i] / static_cast<T>(hw);
    T* dst = dx.ptr() + static_cast<size_t>(i) * hw;
    for (size_t j = 0; j < hw; ++j) dst[j] = g;
  }
  return dx;
}

template <typename T>
T sigmoid(T z) {
  return z >= T{0} ? T{1} / (T{1} + std::exp(-z))
                   : std::exp(z) / (T{1} + std::exp(z));
}

// Numerically stable BCE on raw logits; targets in {0,1}. Returns mean loss,
// writes d(loss)/d(logit).
template <typename T>
T bce_with_logits(const TensorT<T>& logits, const std::vector<T>& targets,
                  TensorT<T>& dlogits) {
  const size_t n = logits.numel();
  if (targets.size() != n) throw std::runtime_error("bce: size mismatch");
  dlogits = TensorT<T>(logits.shape);
  T loss{0};
  for (size_t i = 0; i < n; ++i) {
    const T z = logits.data[i], y = targets[i];
    loss += std::max(z, T{0}) - z * y + std::log1p(std::exp(-std::abs(z)));
    dlogits.data[i] = (sigmoid(z) - y) / static_cast<T>(n);
  }
  return loss / static_cast<T>(n);
}

// Mean squared error over all elements; writes d(loss)/dx.
template <typename T>
T mse_loss(const TensorT<T>& x, const TensorT<T>& target, TensorT<T>& dx) {
  if (!x.same_shape(target)) throw std::runtime_error("mse: shape mismatch");
  dx = TensorT<T>(x.shape);
  const T inv = T{1} / static_cast<T>(x.numel());
  T loss{0};
  for (size_t i = 0; i < x.data.size(); ++i) {
    const T d = x.data[i] - target.data[i];
    loss += d * d;
    dx.data[i] = T{2} * d * inv;
  }
  return loss * inv;
}

}  // namespace aef::nn
