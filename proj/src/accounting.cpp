#include "aef/accounting.hpp"

#include "aef/log.hpp"

#include <nlohmann/json.hpp>

#include <fstream>

namespace aef {

using ordered_json = nlohmann::ordered_json;

uint64_t macs_for_layer(const LayerDesc& d) {
  switch (d.type) {
    case LayerDesc::Type::conv: {
      if (d.in_c <= 0 || d.out_c <= 0 || d.k <= 0 || d.stride <= 0 ||
          d.in_h <= 0 || d.in_w <= 0)
        throw UserError("conv layer descriptor has nonpositive dimensions");
      const int pad = d.pad < 0 ? (d.k - 1) / 2 : d.pad;
      const int out_h = (d.in_h + 2 * pad - d.k) / d.stride + 1;
      const int out_w = (d.in_w + 2 * pad - d.k) / d.stride + 1;
      if (out_h <= 0 || out_w <= 0)
        throw UserError("conv layer descriptor yields empty output");
      return static_cast<uint64_t>(out_h) * out_w * d.out_c * d.in_c * d.k * d.k;
    }
    case LayerDesc::Type::linear:
      if (d.in_dim <= 0 || d.out_dim <= 0 || d.tokens <= 0)
        throw UserError("linear layer descriptor has nonpositive dimensions");
      return static_cast<uint64_t>(d.tokens) * d.in_dim * d.out_dim;
    case LayerDesc::Type::attention:
      if (d.dim <= 0 || d.tokens <= 0 || d.heads <= 0)
        throw UserError("attention layer descriptor has nonpositive dimensions");
      return static_cast<uint64_t>(d.tokens) * d.tokens * d.dim +
             4ull * d.tokens * d.dim * d.dim;
  }
  throw UserError("unknown layer type");
}

uint64_t total_macs(const NetworkCostConfig& cfg) {
  uint64_t total = 0;
  for (const auto& l : cfg.layers) total += macs_for_layer(l);
  return total;
}

MacReport pipeline_macs(const NetworkCostConfig& enc,
                        const NetworkCostConfig& dec,
                        const NetworkCostConfig* unet,
                        const NetworkCostConfig* text, int steps,
                        uint64_t n_images, PipelineMode mode) {
  const bool want_denoise =
      mode == PipelineMode::denoise || mode == PipelineMode::both;
  const bool want_reconstruct =
      mode == PipelineMode::reconstruct || mode == PipelineMode::both;
  if (want_denoise && (!unet || !text))
    throw UserError("denoise pipeline requires unet and text configs");
  if (want_denoise && steps < 1)
    throw UserError("denoise pipeline requires steps >= 1");

  MacReport r;
  r.n_images = n_images;
  r.steps = want_denoise ? steps : 0;
  r.mode = mode;
  const uint64_t enc_macs = total_macs(enc);
  const uint64_t dec_macs = total_macs(dec);
  r.component_macs[enc.name] = enc_macs;
  r.component_macs[dec.name] = dec_macs;
  if (want_reconstruct) r.reconstruct_total = n_images * (enc_macs + dec_macs);
  if (want_denoise) {
    const uint64_t unet_macs = total_macs(*unet);
    const uint64_t text_macs = total_macs(*text);
    r.component_macs[unet->name] = unet_macs;
    r.component_macs[text->name] = text_macs;
    r.denoise_total =
        n_images * (text_macs + static_cast<uint64_t>(steps) * unet_macs + dec_macs);
  }
  if (want_denoise && want_reconstruct && r.reconstruct_total > 0)
    r.ratio = static_cast<double>(r.denoise_total) /
              static_cast<double>(r.reconstruct_total);
  return r;
}

NetworkCostConfig load_cost_config(const std::filesystem::path& json_file) {
  std::ifstream in(json_file);
  if (!in) throw UserError(cat("cannot read cost config: ", json_file.string()));
  ordered_json j = ordered_json::parse(in);
  NetworkCostConfig cfg;
  cfg.name = j.at("name").get<std::string>();
  cfg.note = j.value("note", "");
  for (const auto& lj : j.at("layers")) {
    LayerDesc d;
    const std::string type = lj.at("type").get<std::string>();
    if (type == "conv") {
      d.type = LayerDesc::Type::conv;
      d.in_c = lj.at("in_c").get<int>();
      d.out_c = lj.at("out_c").get<int>();
      d.k = lj.at("k").get<int>();
      d.stride = lj.value("stride", 1);
      d.in_h = lj.at("in_h").get<int>();
      d.in_w = lj.at("in_w").get<int>();
      d.pad = lj.value("pad", -1);
    } else if (type == "linear") {
      d.type = LayerDesc::Type::linear;
      d.in_dim = lj.at("in_dim").get<int64_t>();
      d.out_dim = lj.at("out_dim").get<int64_t>();
      d.tokens = lj.at("tokens").get<int64_t>();
    } else if (type == "attention") {
      d.type = LayerDesc::Type::attention;
      d.dim = lj.at("dim").get<int64_t>();
      d.heads = lj.value("heads", int64_t{1});
      d.tokens = lj.at("tokens").get<int64_t>();
    } else {
      throw UserError(cat("unknown layer type in cost config: ", type));
    }
    cfg.layers.push_back(d);
  }
  return cfg;
}

std::string mac_report_to_json(const MacReport& r) {
  ordered_json j;
  j["components"] = ordered_json::object();
  for (const auto& [name, macs] : r.component_macs) j["components"][name] = macs;
  j["n_images"] = r.n_images;
  j["steps"] = r.steps;
  switch (r.mode) {
    case PipelineMode::denoise: j["mode"] = "denoise"; break;
    case PipelineMode::reconstruct: j["mode"] = "reconstruct"; break;
    case PipelineMode::both: j["mode"] = "both"; break;
  }
  if (r.denoise_total) j["denoise_total"] = r.denoise_total;
  if (r.reconstruct_total) j["reconstruct_total"] = r.reconstruct_total;
  if (r.ratio) j["denoise_over_reconstruct"] = *r.ratio;
  return j.dump(2);
}

}  // namespace aef
