#pragma once

#include "aef/nn/layers.hpp"

#include <filesystem>
#include <map>

namespace aef::nn {

// Little-endian binary blob of named float tensors. Used for autoencoder and
// detector checkpoints.
void save_weights(const std::filesystem::path& file,
                  const std::vector<Param*>& params);
void load_weights(const std::filesystem::path& file,
                  const std::vector<Param*>& params);

std::map<std::string, Tensor> snapshot(const std::vector<Param*>& params);
void restore(const std::map<std::string, Tensor>& snap,
             const std::vector<Param*>& params);

}  // namespace aef::nn
