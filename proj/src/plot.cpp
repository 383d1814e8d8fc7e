#include "aef/plot.hpp"

#include "aef/image_io.hpp"
#include "aef/log.hpp"
#include "aef/robustness.hpp"

#include <opencv2/imgproc.hpp>

#include <algorithm>
#include <cmath>

namespace aef {

namespace {
constexpr int kW = 720, kH = 480;
constexpr int kLeft = 70, kRight = 30, kTop = 50, kBottom = 60;
}  // namespace

void write_line_plot(const LinePlotSpec& spec, const std::filesystem::path& out) {
  if (spec.x.empty() || spec.x.size() != spec.y.size())
    throw UserError("plot: empty or mismatched series");

  double x_lo = spec.x.front(), x_hi = spec.x.front();
  for (double v : spec.x) {
    x_lo = std::min(x_lo, v);
    x_hi = std::max(x_hi, v);
  }
  if (x_hi == x_lo) x_hi = x_lo + 1.0;

  cv::Mat img(kH, kW, CV_8UC3, cv::Scalar(255, 255, 255));
  const auto axis_color = cv::Scalar(40, 40, 40);
  const auto line_color = cv::Scalar(180, 90, 20);
  const auto mark_color = cv::Scalar(60, 60, 200);

  auto px = [&](double x) {
    return kLeft + static_cast<int>(std::lround((x - x_lo) / (x_hi - x_lo) *
                                                (kW - kLeft - kRight)));
  };
  auto py = [&](double y) {
    const double t = (y - spec.y_min) / (spec.y_max - spec.y_min);
    return kH - kBottom -
           static_cast<int>(std::lround(t * (kH - kTop - kBottom)));
  };

  cv::line(img, {kLeft, kTop}, {kLeft, kH - kBottom}, axis_color, 1);
  cv::line(img, {kLeft, kH - kBottom}, {kW - kRight, kH - kBottom}, axis_color, 1);

  for (int i = 0; i <= 4; ++i) {
    const double y = spec.y_min + (spec.y_max - spec.y_min) * i / 4.0;
    const int yy = py(y);
    cv::line(img, {kLeft - 4, yy}, {kLeft, yy}, axis_color, 1);
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", y);
    cv::putText(img, buf, {8, yy + 4}, cv::FONT_HERSHEY_SIMPLEX, 0.4,
                axis_color, 1, cv::LINE_AA);
  }
  for (size_t i = 0; i < spec.x.size(); ++i) {
    const int xx = px(spec.x[i]);
    cv::line(img, {xx, kH - kBottom}, {xx, kH - kBottom + 4}, axis_color, 1);
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", spec.x[i]);
    cv::putText(img, buf, {xx - 14, kH - kBottom + 20}, cv::FONT_HERSHEY_SIMPLEX,
                0.38, axis_color, 1, cv::LINE_AA);
  }

  if (spec.marked_x) {
    const int xx = px(*spec.marked_x);
    for (int yy = kTop; yy < kH - kBottom; yy += 8)
      cv::line(img, {xx, yy}, {xx, std::min(yy + 4, kH - kBottom)}, mark_color, 1);
  }

  std::optional<cv::Point> prev;
  for (size_t i = 0; i < spec.x.size(); ++i) {
    if (std::isnan(spec.y[i])) {
      prev.reset();
      continue;
    }
    const cv::Point cur(px(spec.x[i]), py(spec.y[i]));
    cv::circle(img, cur, 3, line_color, cv::FILLED, cv::LINE_AA);
    if (prev) cv::line(img, *prev, cur, line_color, 2, cv::LINE_AA);
    prev = cur;
  }

  cv::putText(img, spec.title, {kLeft, 28}, cv::FONT_HERSHEY_SIMPLEX, 0.6,
              axis_color, 1, cv::LINE_AA);
  cv::putText(img, spec.x_label, {kW / 2 - 40, kH - 16},
              cv::FONT_HERSHEY_SIMPLEX, 0.45, axis_color, 1, cv::LINE_AA);
  cv::putText(img, spec.y_label, {8, kTop - 8}, cv::FONT_HERSHEY_SIMPLEX, 0.45,
              axis_color, 1, cv::LINE_AA);

  save_image(out, img, ContainerFormat::png);
}

void render_plot(const SweepCurve& c, const std::filesystem::path& out) {
  if (c.mean_scores.empty()) throw UserError("render_plot: empty curve");
  LinePlotSpec spec;
  spec.title = cat("mean score vs ", to_string(c.spec.kind), " (",
                   c.base_resolution_note, ")");
  spec.x_label = to_string(c.spec.kind);
  spec.y_label = "mean score";
  spec.x = c.spec.levels;
  spec.y = c.mean_scores;
  switch (c.spec.kind) {
    case SweepKind::resize_scale: spec.marked_x = 1.0; break;
    case SweepKind::blur_sigma:
    case SweepKind::noise_sigma: spec.marked_x = 0.0; break;
    case SweepKind::jpeg_quality:
    case SweepKind::webp_quality: spec.marked_x = 100.0; break;
    case SweepKind::downsample_to_fixed: break;
  }
  write_line_plot(spec, out);
}

}  // namespace aef
