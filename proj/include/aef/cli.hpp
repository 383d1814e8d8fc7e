#pragma once

#include "aef/detector.hpp"
#include "aef/manifest.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace aef {

// Exit codes: 0 success, 2 user/argument error, 1 internal error.
int run_subcommand(int argc, const char* const* argv);

AugmentationPolicy policy_from_json(const nlohmann::ordered_json& j);
BackboneConfig backbone_from_json(const nlohmann::ordered_json& j);
TrainConfig train_config_from_json(const nlohmann::ordered_json& j);

// First n complete real/fake pairs after a seeded shuffle; co-travel holds
// by construction.
DatasetManifest subsample_pairs(const DatasetManifest& m, size_t n_pairs,
                                uint64_t seed);

struct RecipeConfig {
  uint64_t seed = 0;
  std::filesystem::path train_manifest;
  std::filesystem::path val_manifest;
  std::filesystem::path test_manifest;
  std::vector<int> sizes;  // pairs per cell
  std::vector<BatchVariant> variants = {BatchVariant::Random, BatchVariant::Sync};
  BackboneConfig backbone;
  TrainConfig train_base;
  double target_fpr = 0.05;
};

RecipeConfig recipe_config_from_file(const std::filesystem::path& p);

struct RecipeCell {
  int size = 0;
  BatchVariant variant = BatchVariant::Random;
  bool failed = false;
  double tpr_at_fpr = 0.0;
  double average_precision = 0.0;
};

struct RecipeResult {
  std::vector<RecipeCell> cells;
  std::string table_csv;  // rows = sizes, columns = variants, values TPR@FPR
};

// Dataset-size sweep: per (size, variant) cell, subsample, train, report
// TPR at the configured FPR on the test manifest. A failing cell is marked
// and the run continues.
RecipeResult experiment_recipe(const RecipeConfig& cfg,
                               const std::filesystem::path& out_dir);

}  // namespace aef
