#pragma once

#include "aef/detector.hpp"
#include "aef/manifest.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace aef {

// Randomized test-time corruption policy; per-image parameters derive from
// (seed, record id) so outputs never depend on processing order.
struct PostProcessPolicy {
  double jpeg_prob = 0.0;
  int jpeg_quality_lo = 40, jpeg_quality_hi = 100;

  double resize_prob = 0.0;
  double resize_scale_lo = 0.5, resize_scale_hi = 1.5;

  double blur_prob = 0.0;  // gaussian, kernel size 9
  double blur_sigma_lo = 0.5, blur_sigma_hi = 3.0;

  double jitter_prob = 0.0;  // brightness/contrast/saturation factors, hue shift
  double jitter_factor_lo = 0.75, jitter_factor_hi = 1.25;
  double jitter_hue_shift = 0.05;  // fraction of the hue circle

  uint64_t seed = 0;

  void validate() const;  // ranges sane, at least one transform armed
  std::string str() const;
  static PostProcessPolicy from_json_file(const std::filesystem::path& p);
};

// One processed image per record under out_root. Untouched records are
// byte-for-byte copies; transformed ones re-encode (jpeg if armed, else png).
// The applied-transform log lands in the manifest meta.
DatasetManifest build_postprocessed_manifest(const DatasetManifest& m,
                                             const PostProcessPolicy& policy,
                                             const std::filesystem::path& out_root);

enum class SweepKind {
  resize_scale,
  blur_sigma,
  noise_sigma,
  jpeg_quality,
  webp_quality,
  downsample_to_fixed
};

std::string to_string(SweepKind k);
SweepKind sweep_kind_from_string(const std::string& s);

struct SweepSpec {
  SweepKind kind = SweepKind::resize_scale;
  std::vector<double> levels;  // strictly monotone grid
  uint64_t seed = 0;           // noise realizations
  int min_score_side = 96;     // levels shrinking below this are skipped
};

struct SweepCurve {
  SweepSpec spec;
  std::vector<double> mean_scores;               // NaN for skipped levels
  std::vector<std::vector<double>> per_image;    // empty for skipped levels
  std::string base_resolution_note;
};

// Applies exactly one perturbation kind per level to every image at native
// resolution and scores it. Identity levels (scale 1.0, sigma 0, quality 100)
// skip the transform entirely, so they reproduce unperturbed scores
// bit for bit.
SweepCurve sweep(Detector& det, const DatasetManifest& m, const SweepSpec& spec);

// Non-aspect-preserving fixed-size protocol; always writes png.
DatasetManifest downsample_to_fixed(const DatasetManifest& m, int side,
                                    const std::filesystem::path& out_root);

// CSV schema: level,mean_score,n (17 significant digits; exact round-trip).
void export_curve(const SweepCurve& c, const std::filesystem::path& out);
SweepCurve read_curve_csv(const std::filesystem::path& file);

void render_plot(const SweepCurve& c, const std::filesystem::path& out);

}  // namespace aef
