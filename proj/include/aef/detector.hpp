#pragma once

#include "aef/augmentation.hpp"
#include "aef/manifest.hpp"
#include "aef/nn/layers.hpp"

#include <functional>
#include <map>
#include <memory>
#include <optional>

namespace aef {

enum class BackboneFamily { resnet50_like, small_cnn };
enum class BatchVariant { Random, Sync };

struct BackboneConfig {
  BackboneFamily family = BackboneFamily::small_cnn;
  bool stem_downsampling_removed = false;
  // "random" | "pretrained-imagenet" | "external:<weights-file>"
  std::string init = "random";
  uint64_t init_seed = 0;
  std::vector<int> small_cnn_widths = {16, 32, 32, 64};

  std::string family_str() const;
  std::string str() const;
};

// Fully convolutional classifier with a single-logit global-average-pooling
// head: any input at least as large as the training crop yields one logit.
class Detector {
 public:
  Detector(const BackboneConfig& cfg, std::unique_ptr<nn::Sequential> net);

  // logits {N,1,1,1}
  nn::Tensor forward(const nn::Tensor& x) { return net_->forward(x); }
  nn::Tensor backward(const nn::Tensor& dy) { return net_->backward(dy); }
  std::vector<nn::Param*> params();
  size_t parameter_count();
  void init_weights(Rng& rng) { net_->init_weights(rng); }
  const BackboneConfig& config() const { return cfg_; }

  // Feature map after the stem, for shape contracts.
  nn::Tensor stem_forward(const nn::Tensor& x);
  size_t stem_layers() const { return stem_layers_; }
  void set_stem_layers(size_t n) { stem_layers_ = n; }

 private:
  BackboneConfig cfg_;
  std::unique_ptr<nn::Sequential> net_;
  size_t stem_layers_ = 0;
};

std::shared_ptr<Detector> build_detector(const BackboneConfig& cfg);

struct PatienceSchedule {
  double improve_delta = 0.001;  // 0.1 percentage points of accuracy
  int window = 10;               // epochs
  double decay = 10.0;
  double terminal_lr = 1e-6;
};

struct TrainConfig {
  int batch_size = 128;
  double initial_lr = 1e-4;
  BatchVariant composer = BatchVariant::Sync;
  PatienceSchedule patience;
  uint64_t seed = 0;
  int max_epochs = 1000;
  AugmentationPolicy policy;
};

struct EpochStat {
  int epoch = 0;        // 1-based
  double val_accuracy = 0.0;
  double lr = 0.0;
  double train_loss = 0.0;
};

struct DetectorCheckpoint {
  BackboneConfig backbone;
  TrainConfig train_config;
  std::shared_ptr<Detector> detector;  // best-epoch weights
  std::vector<EpochStat> history;
  double threshold = 0.5;
  int best_epoch = 0;
  double best_accuracy = 0.0;
  std::map<std::string, std::string> provenance;
};

// Decoded-image cache so epochs do not re-read the dataset from disk.
class ImageCache {
 public:
  const cv::Mat& get(const DatasetManifest& m, const ImageRecord& r);

 private:
  std::map<std::string, cv::Mat> by_key_;
};

struct Batch {
  nn::Tensor x;                  // {B,3,side,side}
  std::vector<float> labels;     // real=0, fake=1
  std::vector<AugmentationParams> params_audit;
  std::vector<std::string> record_ids;
};

// Random: batch_size independent draws, params sampled per image.
// Sync: batch_size/2 pair draws; each pair shares one AugmentationParams via
// paired_apply and contributes labels 0 and 1.
Batch compose_batch(const DatasetManifest& train, BatchVariant variant,
                    const AugmentationPolicy& policy, int batch_size, Rng& rng,
                    ImageCache* cache = nullptr);

// Fraction of records classified correctly at threshold 0.5, whole images.
double validate(Detector& det, const DatasetManifest& m,
                ImageCache* cache = nullptr);

using ValScorer = std::function<double(Detector&, const DatasetManifest&)>;

// Adam + binary cross-entropy on the single logit. After each epoch the lr
// drops by the decay factor whenever the best validation accuracy has not
// improved by improve_delta within the last `window` epochs (the first epoch
// establishes the baseline); training stops when the drop would go below
// terminal_lr or max_epochs is reached. Returns the highest-accuracy epoch
// (earliest on ties).
DetectorCheckpoint train(std::shared_ptr<Detector> detector,
                         const DatasetManifest& train_m,
                         const DatasetManifest& val_m, const TrainConfig& cfg,
                         ValScorer val_scorer = nullptr);

// Per-record sigmoid(logit) on the full image, in manifest order. Records
// smaller than min_side on either side score NaN (flagged, excluded upstream).
std::vector<double> score_records(Detector& det, const DatasetManifest& m,
                                  int min_side, ImageCache* cache = nullptr);

// Same scoring contract on in-memory images (mixed sizes batched by shape).
std::vector<double> score_images(Detector& det, const std::vector<cv::Mat>& imgs);

void save_checkpoint(const DetectorCheckpoint& ckpt,
                     const std::filesystem::path& dir);
DetectorCheckpoint load_checkpoint(const std::filesystem::path& dir);

}  // namespace aef
