#pragma once

#include "aef/rng.hpp"

#include <opencv2/core.hpp>

#include <cstdint>
#include <string>

namespace aef {

// Sampling distributions for the training-time pipeline. The paper's
// reference pipeline does not print its arming probabilities or ranges;
// these defaults are declared here and recorded in run metadata.
struct AugmentationPolicy {
  double jpeg_prob = 0.5;
  int jpeg_quality_lo = 30, jpeg_quality_hi = 100;

  double blur_prob = 0.5;                   // gaussian, kernel size 9
  double blur_sigma_lo = 0.0, blur_sigma_hi = 3.0;

  double grayscale_prob = 0.1;

  double cutout_prob = 0.1;                 // hole side as fraction of rrc output
  double cutout_frac_lo = 0.1, cutout_frac_hi = 0.33;

  double noise_prob = 0.1;                  // additive gaussian, [0,255] scale
  double noise_sigma_lo = 2.0, noise_sigma_hi = 10.0;

  double rrc_area_lo = 8.0, rrc_area_hi = 100.0;  // percent of image area
  int rrc_out_side = 256;

  int train_crop_side = 96;

  std::string str() const;
  static AugmentationPolicy from_json_string(const std::string& s);
};

struct Box {
  int x = 0, y = 0, w = 0, h = 0;
  bool operator==(const Box&) const = default;
};

// Fully realized per-image transform values. apply() is a pure function of
// (image, params), which is what lets a real/fake pair share one realization
// (including the noise field).
struct AugmentationParams {
  int src_w = 0, src_h = 0;  // dims the params were sampled for

  Box rrc_box;
  int rrc_out_side = 256;

  bool jpeg = false;
  int jpeg_quality = 100;

  bool blur = false;
  double blur_sigma = 0.0;

  bool grayscale = false;

  bool noise = false;
  double noise_sigma = 0.0;
  uint64_t noise_seed = 0;

  bool cutout = false;
  Box cutout_box;

  Box final_crop;  // side == train_crop_side

  bool operator==(const AugmentationParams&) const = default;
  std::string to_json() const;
};

// Pipeline order: rrc -> jpeg -> blur -> grayscale -> noise -> cutout ->
// final crop. Each transform arms independently with its probability.
AugmentationParams sample_params(const AugmentationPolicy& policy, int width,
                                 int height, Rng& rng);

cv::Mat apply(const cv::Mat& img, const AugmentationParams& p);

std::pair<cv::Mat, cv::Mat> paired_apply(const cv::Mat& x_real,
                                         const cv::Mat& x_fake,
                                         const AugmentationParams& p);

}  // namespace aef
