#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace aef {

// Analytic multiply-accumulate counts for dataset-creation pipelines.
// Counting conventions (documented, not universal):
//   conv       out_h * out_w * out_c * in_c * k^2, out = floor((in+2p-k)/s)+1
//   linear     tokens * in_dim * out_dim
//   attention  tokens^2 * dim + 4 * tokens * dim^2
// Bias adds, norms and activations are excluded; MACs only.
struct LayerDesc {
  enum class Type { conv, linear, attention };
  Type type = Type::conv;

  // conv; pad < 0 means same-padding, i.e. (k-1)/2
  int in_c = 0, out_c = 0, k = 0, stride = 1, in_h = 0, in_w = 0, pad = -1;

  // linear
  int64_t in_dim = 0, out_dim = 0;

  // linear + attention
  int64_t tokens = 0;

  // attention (heads kept for documentation; the count is head-agnostic)
  int64_t dim = 0, heads = 1;
};

struct NetworkCostConfig {
  std::string name;
  std::vector<LayerDesc> layers;
  std::string note;  // e.g. "approximation"
};

uint64_t macs_for_layer(const LayerDesc& d);
uint64_t total_macs(const NetworkCostConfig& cfg);

enum class PipelineMode { denoise, reconstruct, both };

struct MacReport {
  std::map<std::string, uint64_t> component_macs;  // per single forward pass
  uint64_t denoise_total = 0;      // n * (text + T*unet + dec)
  uint64_t reconstruct_total = 0;  // n * (enc + dec)
  std::optional<double> ratio;     // denoise / reconstruct, when both present
  uint64_t n_images = 1;
  int steps = 0;
  PipelineMode mode = PipelineMode::both;
};

// unet/text may be null in reconstruct mode; denoise requires both.
MacReport pipeline_macs(const NetworkCostConfig& enc,
                        const NetworkCostConfig& dec,
                        const NetworkCostConfig* unet,
                        const NetworkCostConfig* text, int steps,
                        uint64_t n_images, PipelineMode mode);

NetworkCostConfig load_cost_config(const std::filesystem::path& json_file);
std::string mac_report_to_json(const MacReport& r);

}  // namespace aef
