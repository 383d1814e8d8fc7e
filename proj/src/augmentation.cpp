#include "aef/augmentation.hpp"

#include "aef/image_io.hpp"
#include "aef/log.hpp"

#include <nlohmann/json.hpp>
#include <opencv2/imgproc.hpp>

#include <cmath>

namespace aef {

using ordered_json = nlohmann::ordered_json;

static constexpr int kMinSourceSide = 8;

std::string AugmentationPolicy::str() const {
  ordered_json j;
  j["jpeg"] = {{"prob", jpeg_prob}, {"quality", {jpeg_quality_lo, jpeg_quality_hi}}};
  j["blur"] = {{"prob", blur_prob}, {"sigma", {blur_sigma_lo, blur_sigma_hi}}};
  j["grayscale"] = {{"prob", grayscale_prob}};
  j["cutout"] = {{"prob", cutout_prob}, {"frac", {cutout_frac_lo, cutout_frac_hi}}};
  j["noise"] = {{"prob", noise_prob}, {"sigma", {noise_sigma_lo, noise_sigma_hi}}};
  j["rrc"] = {{"area_pct", {rrc_area_lo, rrc_area_hi}}, {"out_side", rrc_out_side}};
  j["train_crop_side"] = train_crop_side;
  return j.dump();
}

AugmentationPolicy AugmentationPolicy::from_json_string(const std::string& s) {
  const ordered_json j = ordered_json::parse(s);
  AugmentationPolicy p;
  if (j.contains("jpeg")) {
    p.jpeg_prob = j["jpeg"].value("prob", p.jpeg_prob);
    if (j["jpeg"].contains("quality")) {
      p.jpeg_quality_lo = j["jpeg"]["quality"][0].get<int>();
      p.jpeg_quality_hi = j["jpeg"]["quality"][1].get<int>();
    }
  }
  if (j.contains("blur")) {
    p.blur_prob = j["blur"].value("prob", p.blur_prob);
    if (j["blur"].contains("sigma")) {
      p.blur_sigma_lo = j["blur"]["sigma"][0].get<double>();
      p.blur_sigma_hi = j["blur"]["sigma"][1].get<double>();
    }
  }
  if (j.contains("grayscale"))
    p.grayscale_prob = j["grayscale"].value("prob", p.grayscale_prob);
  if (j.contains("cutout")) {
    p.cutout_prob = j["cutout"].value("prob", p.cutout_prob);
    if (j["cutout"].contains("frac")) {
      p.cutout_frac_lo = j["cutout"]["frac"][0].get<double>();
      p.cutout_frac_hi = j["cutout"]["frac"][1].get<double>();
    }
  }
  if (j.contains("noise")) {
    p.noise_prob = j["noise"].value("prob", p.noise_prob);
    if (j["noise"].contains("sigma")) {
      p.noise_sigma_lo = j["noise"]["sigma"][0].get<double>();
      p.noise_sigma_hi = j["noise"]["sigma"][1].get<double>();
    }
  }
  if (j.contains("rrc")) {
    if (j["rrc"].contains("area_pct")) {
      p.rrc_area_lo = j["rrc"]["area_pct"][0].get<double>();
      p.rrc_area_hi = j["rrc"]["area_pct"][1].get<double>();
    }
    p.rrc_out_side = j["rrc"].value("out_side", p.rrc_out_side);
  }
  p.train_crop_side = j.value("train_crop_side", p.train_crop_side);
  return p;
}

std::string AugmentationParams::to_json() const {
  ordered_json j;
  j["src"] = {src_w, src_h};
  j["rrc_box"] = {rrc_box.x, rrc_box.y, rrc_box.w, rrc_box.h};
  j["rrc_out_side"] = rrc_out_side;
  if (jpeg) j["jpeg_quality"] = jpeg_quality;
  if (blur) j["blur_sigma"] = blur_sigma;
  if (grayscale) j["grayscale"] = true;
  if (noise) {
    j["noise_sigma"] = noise_sigma;
    j["noise_seed"] = noise_seed;
  }
  if (cutout) j["cutout_box"] = {cutout_box.x, cutout_box.y, cutout_box.w, cutout_box.h};
  j["final_crop"] = {final_crop.x, final_crop.y, final_crop.w, final_crop.h};
  return j.dump();
}

// Uniform-area crop box with log-uniform aspect jitter in [3/4, 4/3].
// An exact 100% draw admits only the full-image box (w<=W, h<=H and
// w*h = W*H force w=W, h=H), so that case short-circuits.
static Box sample_rrc_box(const AugmentationPolicy& policy, int width,
                          int height, Rng& rng) {
  const double area = static_cast<double>(width) * height;
  for (int attempt = 0; attempt < 10; ++attempt) {
    const double pct = rng.uniform(policy.rrc_area_lo, policy.rrc_area_hi);
    if (pct >= 100.0) return {0, 0, width, height};
    const double target = pct / 100.0 * area;
    const double log_lo = std::log(3.0 / 4.0), log_hi = std::log(4.0 / 3.0);
    const double aspect = std::exp(rng.uniform(log_lo, log_hi));
    const int w = static_cast<int>(std::lround(std::sqrt(target * aspect)));
    const int h = static_cast<int>(std::lround(std::sqrt(target / aspect)));
    if (w >= 1 && h >= 1 && w <= width && h <= height) {
      const int x = w < width ? rng.uniform_int(0, width - w) : 0;
      const int y = h < height ? rng.uniform_int(0, height - h) : 0;
      return {x, y, w, h};
    }
  }
  const int side = std::min(width, height);
  return {(width - side) / 2, (height - side) / 2, side, side};
}

AugmentationParams sample_params(const AugmentationPolicy& policy, int width,
                                 int height, Rng& rng) {
  if (width < kMinSourceSide || height < kMinSourceSide)
    throw UserError(cat("image ", width, "x", height,
                        " too small to augment (minimum side ", kMinSourceSide, ")"));
  if (policy.train_crop_side > policy.rrc_out_side)
    throw UserError("train_crop_side cannot exceed rrc output side");

  AugmentationParams p;
  p.src_w = width;
  p.src_h = height;
  p.rrc_out_side = policy.rrc_out_side;
  p.rrc_box = sample_rrc_box(policy, width, height, rng);

  p.jpeg = rng.bernoulli(policy.jpeg_prob);
  p.jpeg_quality = rng.uniform_int(policy.jpeg_quality_lo, policy.jpeg_quality_hi);

  p.blur = rng.bernoulli(policy.blur_prob);
  p.blur_sigma = rng.uniform(policy.blur_sigma_lo, policy.blur_sigma_hi);

  p.grayscale = rng.bernoulli(policy.grayscale_prob);

  p.noise = rng.bernoulli(policy.noise_prob);
  p.noise_sigma = rng.uniform(policy.noise_sigma_lo, policy.noise_sigma_hi);
  p.noise_seed = rng.next_u64();

  p.cutout = rng.bernoulli(policy.cutout_prob);
  {
    const double frac = rng.uniform(policy.cutout_frac_lo, policy.cutout_frac_hi);
    const int side = std::max(
        1, static_cast<int>(std::lround(frac * policy.rrc_out_side)));
    const int cx = rng.uniform_int(0, policy.rrc_out_side - side);
    const int cy = rng.uniform_int(0, policy.rrc_out_side - side);
    p.cutout_box = {cx, cy, side, side};
  }

  const int fx = rng.uniform_int(0, policy.rrc_out_side - policy.train_crop_side);
  const int fy = rng.uniform_int(0, policy.rrc_out_side - policy.train_crop_side);
  p.final_crop = {fx, fy, policy.train_crop_side, policy.train_crop_side};
  return p;
}

// Bilinear with antialiasing on downscale; a size-preserving resize is a
// plain copy so identity params stay bit-exact.
static cv::Mat resize_to(const cv::Mat& src, int out_w, int out_h) {
  if (src.cols == out_w && src.rows == out_h) return src.clone();
  cv::Mat dst;
  const bool down = out_w < src.cols || out_h < src.rows;
  cv::resize(src, dst, cv::Size(out_w, out_h), 0, 0,
             down ? cv::INTER_AREA : cv::INTER_LINEAR);
  return dst;
}

static void add_noise(cv::Mat& img, double sigma, uint64_t seed) {
  Rng rng(seed);
  for (int y = 0; y < img.rows; ++y) {
    auto* row = img.ptr<cv::Vec3b>(y);
    for (int x = 0; x < img.cols; ++x)
      for (int c = 0; c < 3; ++c) {
        const double v = row[x][c] + sigma * rng.gaussian();
        row[x][c] = static_cast<uint8_t>(std::clamp(std::lround(v), 0L, 255L));
      }
  }
}

cv::Mat apply(const cv::Mat& img, const AugmentationParams& p) {
  if (img.cols != p.src_w || img.rows != p.src_h)
    throw UserError(cat("augmentation params sampled for ", p.src_w, "x", p.src_h,
                        " applied to ", img.cols, "x", img.rows));

  cv::Mat cur = img(cv::Rect(p.rrc_box.x, p.rrc_box.y, p.rrc_box.w, p.rrc_box.h));
  cur = resize_to(cur, p.rrc_out_side, p.rrc_out_side);

  if (p.jpeg) {
    auto bytes = encode_image(cur, ContainerFormat::jpeg, p.jpeg_quality);
    cur = decode_image(bytes);
  }
  if (p.blur && p.blur_sigma > 0.0) {
    cv::Mat blurred;
    cv::GaussianBlur(cur, blurred, cv::Size(9, 9), p.blur_sigma, p.blur_sigma);
    cur = blurred;
  }
  if (p.grayscale) {
    cv::Mat gray;
    cv::cvtColor(cur, gray, cv::COLOR_BGR2GRAY);
    cv::cvtColor(gray, cur, cv::COLOR_GRAY2BGR);
  }
  if (p.noise && p.noise_sigma > 0.0) {
    if (!cur.isContinuous()) cur = cur.clone();
    add_noise(cur, p.noise_sigma, p.noise_seed);
  }
  if (p.cutout) {
    cur = cur.clone();
    cur(cv::Rect(p.cutout_box.x, p.cutout_box.y, p.cutout_box.w, p.cutout_box.h))
        .setTo(cv::Scalar(0, 0, 0));
  }
  return cur(cv::Rect(p.final_crop.x, p.final_crop.y, p.final_crop.w,
                      p.final_crop.h))
      .clone();
}

std::pair<cv::Mat, cv::Mat> paired_apply(const cv::Mat& x_real,
                                         const cv::Mat& x_fake,
                                         const AugmentationParams& p) {
  if (x_real.cols != x_fake.cols || x_real.rows != x_fake.rows)
    throw UserError(cat("paired_apply: dimension mismatch ", x_real.cols, "x",
                        x_real.rows, " vs ", x_fake.cols, "x", x_fake.rows));
  return {apply(x_real, p), apply(x_fake, p)};
}

}  // namespace aef
