#include "aef/augmentation.hpp"

#include "aef/image_io.hpp"
#include "aef/log.hpp"

#include <doctest.h>
#include <opencv2/imgproc.hpp>

using namespace aef;

namespace {

cv::Mat random_image(int w, int h, uint64_t seed, int lo = 0, int hi = 255) {
  Rng rng(seed);
  cv::Mat img(h, w, CV_8UC3);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      img.at<cv::Vec3b>(y, x) =
          cv::Vec3b(static_cast<uint8_t>(rng.uniform_int(lo, hi)),
                    static_cast<uint8_t>(rng.uniform_int(lo, hi)),
                    static_cast<uint8_t>(rng.uniform_int(lo, hi)));
  return img;
}

AugmentationPolicy quiet_policy() {
  AugmentationPolicy p;
  p.jpeg_prob = p.blur_prob = p.grayscale_prob = p.cutout_prob = p.noise_prob = 0.0;
  return p;
}

}  // namespace

TEST_CASE("degenerate policy gives identity-equivalent params") {
  AugmentationPolicy p = quiet_policy();
  p.rrc_area_lo = p.rrc_area_hi = 100.0;
  p.rrc_out_side = 256;
  p.train_crop_side = 96;

  Rng rng(1);
  AugmentationParams params = sample_params(p, 256, 256, rng);
  CHECK(params.rrc_box == Box{0, 0, 256, 256});
  CHECK_FALSE(params.jpeg);
  CHECK_FALSE(params.blur);
  CHECK_FALSE(params.grayscale);
  CHECK_FALSE(params.noise);
  CHECK_FALSE(params.cutout);

  // the 96x96 output equals the source subregion (size-preserving resize)
  cv::Mat img = random_image(256, 256, 2);
  cv::Mat out = apply(img, params);
  CHECK(out.cols == 96);
  CHECK(out.rows == 96);
  cv::Mat region = img(cv::Rect(params.final_crop.x, params.final_crop.y, 96, 96));
  CHECK(cv::norm(out, region, cv::NORM_INF) == 0.0);
}

TEST_CASE("rrc area fraction stays in the configured range") {
  AugmentationPolicy p = quiet_policy();
  p.rrc_area_lo = 8.0;
  p.rrc_area_hi = 100.0;
  Rng rng(7);
  const double area = 640.0 * 480.0;
  for (int i = 0; i < 300; ++i) {
    AugmentationParams params = sample_params(p, 640, 480, rng);
    const double frac =
        100.0 * params.rrc_box.w * params.rrc_box.h / area;
    // rounding of box sides wiggles the freshly sampled target slightly
    CHECK(frac >= 7.0);
    CHECK(frac <= 100.5);
    CHECK(params.rrc_box.x + params.rrc_box.w <= 640);
    CHECK(params.rrc_box.y + params.rrc_box.h <= 480);
  }
}

TEST_CASE("sampling is deterministic given the rng state") {
  AugmentationPolicy p;  // all defaults armed
  Rng a(42), b(42);
  for (int i = 0; i < 20; ++i) {
    AugmentationParams pa = sample_params(p, 300, 200, a);
    AugmentationParams pb = sample_params(p, 300, 200, b);
    CHECK(pa == pb);
  }
}

TEST_CASE("apply is a pure function") {
  AugmentationPolicy p;
  p.jpeg_prob = p.blur_prob = 1.0;
  p.noise_prob = 1.0;
  p.rrc_out_side = 128;
  p.train_crop_side = 64;
  Rng rng(3);
  cv::Mat img = random_image(200, 150, 4);
  AugmentationParams params = sample_params(p, 200, 150, rng);
  cv::Mat o1 = apply(img, params);
  cv::Mat o2 = apply(img, params);
  CHECK(cv::norm(o1, o2, cv::NORM_INF) == 0.0);
  CHECK(o1.cols == 64);

  CHECK_THROWS_AS(apply(random_image(100, 100, 5), params), UserError);
  CHECK_THROWS_AS(sample_params(p, 4, 300, rng), UserError);
}

TEST_CASE("stronger jpeg compression re-encodes smaller") {
  AugmentationPolicy p = quiet_policy();
  p.rrc_area_lo = p.rrc_area_hi = 100.0;
  p.rrc_out_side = 128;
  p.train_crop_side = 128;
  Rng rng(9);
  AugmentationParams params = sample_params(p, 128, 128, rng);
  params.jpeg = true;

  cv::Mat img = random_image(128, 128, 10);
  params.jpeg_quality = 100;
  cv::Mat hi = apply(img, params);
  params.jpeg_quality = 10;
  cv::Mat lo = apply(img, params);
  const auto hi_bytes = encode_image(hi, ContainerFormat::jpeg, 95);
  const auto lo_bytes = encode_image(lo, ContainerFormat::jpeg, 95);
  CHECK(lo_bytes.size() < hi_bytes.size());
}

TEST_CASE("paired_apply: identical params, shared noise realization") {
  AugmentationPolicy p = quiet_policy();
  p.rrc_out_side = 96;
  p.train_crop_side = 48;
  Rng rng(11);

  // mid-range pixels keep the additive noise away from clipping
  cv::Mat real = random_image(150, 120, 12, 64, 192);
  cv::Mat fake = random_image(150, 120, 13, 64, 192);

  SUBCASE("identity pair gives identical outputs") {
    AugmentationParams params = sample_params(p, 150, 120, rng);
    auto [a, b] = paired_apply(real, real, params);
    CHECK(cv::norm(a, b, cv::NORM_INF) == 0.0);
  }

  SUBCASE("noise field is identical across the pair") {
    AugmentationParams params = sample_params(p, 150, 120, rng);
    params.noise = true;
    params.noise_sigma = 5.0;

    auto [na, nb] = paired_apply(real, fake, params);
    params.noise = false;
    auto [ca, cb] = paired_apply(real, fake, params);

    cv::Mat diff_noisy, diff_clean;
    cv::absdiff(na, nb, diff_noisy);
    cv::absdiff(ca, cb, diff_clean);
    CHECK(cv::norm(diff_noisy, diff_clean, cv::NORM_INF) == 0.0);
  }

  SUBCASE("dimension mismatch is fatal") {
    AugmentationParams params = sample_params(p, 150, 120, rng);
    CHECK_THROWS_AS(paired_apply(real, random_image(100, 120, 14), params),
                    UserError);
  }
}

TEST_CASE("rrc coverage: large images mix up/down scaling, small ones only upscale") {
  AugmentationPolicy p = quiet_policy();
  p.rrc_area_lo = 8.0;
  p.rrc_area_hi = 100.0;
  p.rrc_out_side = 256;
  Rng rng(21);

  int up = 0, down = 0;
  for (int i = 0; i < 200; ++i) {
    AugmentationParams params = sample_params(p, 512, 512, rng);
    const double crop_side =
        std::sqrt(static_cast<double>(params.rrc_box.w) * params.rrc_box.h);
    (crop_side < 256 ? up : down)++;
  }
  CHECK(up > 0);
  CHECK(down > 0);

  for (int i = 0; i < 200; ++i) {
    AugmentationParams params = sample_params(p, 256, 256, rng);
    CHECK(params.rrc_box.w <= 256);  // never a downscaling crop
    CHECK(params.rrc_box.h <= 256);
  }
}

TEST_CASE("params serialize for the audit log") {
  AugmentationPolicy p;
  Rng rng(31);
  AugmentationParams params = sample_params(p, 128, 128, rng);
  const std::string j = params.to_json();
  CHECK(j.find("rrc_box") != std::string::npos);
  CHECK(j.find("final_crop") != std::string::npos);
}
