#pragma once

#include "aef/manifest.hpp"
#include "aef/rng.hpp"

#include <opencv2/core.hpp>

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace aef {

// Expression tree over normalized pixel coordinates (u, v) in (0,1).
// Every node is total; scalar nodes feed per-channel color through
// palette_map nodes. Evaluation is resolution independent, so the same
// program renders consistently at any size.
struct TexNode {
  enum class Kind {
    sinusoid,       // leaf: sin(2pi(fu*u + fv*v) + phase)
    noise_lattice,  // leaf: periodic value noise, smoothstep interpolated
    poly_warp,      // unary: child evaluated at polynomially displaced coords
    rotation,       // unary: child evaluated at rotated coords
    palette_map,    // unary: cosine palette, per-channel phase offsets
    blend           // binary or ternary (mask) mix of children
  };
  Kind kind = Kind::sinusoid;
  std::array<double, 6> p{};      // kind-specific parameters
  std::array<double, 3> chan{};   // palette_map per-channel offsets
  uint64_t noise_seed = 0;        // noise_lattice hash seed
  std::vector<TexNode> kids;
  bool per_channel = false;       // true if a palette_map exists in subtree

  std::array<double, 3> eval(double u, double v) const;
  int depth() const;
};

struct TextureProgram {
  TexNode root;
  uint64_t seed = 0;
};

// Tree with depth exactly in [depth_range.first, depth_range.second];
// deterministic given rng state. The root is always a palette_map so the
// output varies across channels.
TextureProgram sample_program(Rng& rng, std::pair<int, int> depth_range);

// Deterministic per-pixel evaluation, quantized to 8-bit BGR.
cv::Mat render(const TextureProgram& p, int w, int h);

// Degenerate renders are resampled by callers; threshold on the byte-level
// standard deviation of the dominant channel.
bool is_near_constant(const cv::Mat& img);

struct TextureDatasetOptions {
  int n = 100;
  int side = 384;
  int jpeg_quality_lo = 70;
  int jpeg_quality_hi = 100;
  uint64_t seed = 0;
  std::pair<int, int> depth_range = {3, 6};
  std::string source_tag = "procedural";
};

// n JPEG textures under out_root plus the manifest describing them
// (label real). Per-image seeds derive from (seed, index).
DatasetManifest generate_texture_dataset(const TextureDatasetOptions& opt,
                                         const std::filesystem::path& out_root);

}  // namespace aef
