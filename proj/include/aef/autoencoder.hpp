#pragma once

#include "aef/accounting.hpp"
#include "aef/manifest.hpp"
#include "aef/nn/layers.hpp"

#include <opencv2/core.hpp>

#include <memory>
#include <string>

namespace aef {

// Encode/decode pair. Inputs to encode/decode are {N,3,H,W} float tensors in
// [0,1] with H, W multiples of the downsample factor; the padding protocol
// lives in reconstruct(). Handles are driven one batch at a time; image-level
// parallelism happens inside the tensor ops.
class AutoencoderHandle {
 public:
  virtual ~AutoencoderHandle() = default;
  virtual std::string identity() const = 0;
  virtual int downsample_factor() const = 0;
  virtual int latent_channels() const = 0;
  virtual nn::Tensor encode(const nn::Tensor& x) = 0;
  virtual nn::Tensor decode(const nn::Tensor& z) = 0;

  // Layer inventories for the MAC accounting of one H x W image.
  virtual NetworkCostConfig encoder_cost(int h, int w) const = 0;
  virtual NetworkCostConfig decoder_cost(int h, int w) const = 0;
};

struct ToyAutoencoderConfig {
  int f = 4;                            // power of two
  int latent_channels = 4;
  std::vector<int> widths = {16, 24, 32};  // one per scale, log2(f)+1 entries
  int epochs = 16;
  double learning_rate = 1e-3;
  int batch_size = 32;
  int crop_side = 64;
  double target_mse = 0.01;  // held-out, on [0,1] pixel scale
  uint64_t seed = 0;
};

// Strided-conv encoder, nearest-upsample+conv decoder, fully convolutional;
// any multiple-of-f input size is valid.
class ToyAutoencoder : public AutoencoderHandle {
 public:
  ToyAutoencoder(const ToyAutoencoderConfig& cfg, const std::string& identity);
  std::string identity() const override { return identity_; }
  int downsample_factor() const override { return cfg_.f; }
  int latent_channels() const override { return cfg_.latent_channels; }
  nn::Tensor encode(const nn::Tensor& x) override;
  nn::Tensor decode(const nn::Tensor& z) override;
  NetworkCostConfig encoder_cost(int h, int w) const override;
  NetworkCostConfig decoder_cost(int h, int w) const override;

  // Training-loop hooks; valid right after the matching forward pass.
  nn::Tensor decode_backward(const nn::Tensor& dy);
  nn::Tensor encode_backward(const nn::Tensor& dz);

  const ToyAutoencoderConfig& config() const { return cfg_; }
  std::vector<nn::Param*> params();
  void init_weights(uint64_t seed);

 private:
  ToyAutoencoderConfig cfg_;
  std::string identity_;
  nn::Sequential encoder_, decoder_;
};

// Space-to-depth stub: decode(encode(x)) == x bit for bit. Test hook.
class IdentityAutoencoder : public AutoencoderHandle {
 public:
  explicit IdentityAutoencoder(int f);
  std::string identity() const override;
  int downsample_factor() const override { return f_; }
  int latent_channels() const override { return 3 * f_ * f_; }
  nn::Tensor encode(const nn::Tensor& x) override;
  nn::Tensor decode(const nn::Tensor& z) override;
  NetworkCostConfig encoder_cost(int h, int w) const override;
  NetworkCostConfig decoder_cost(int h, int w) const override;

 private:
  int f_;
};

// Single encode-decode pass with the reflect-pad protocol: the input is
// padded up to the next multiple of f, reconstructed, and cropped back, so
// output dimensions always equal input dimensions.
cv::Mat reconstruct(AutoencoderHandle& ae, const cv::Mat& img);

// Batched variant; images may have mixed sizes (grouped internally).
std::vector<cv::Mat> reconstruct_images(AutoencoderHandle& ae,
                                        const std::vector<cv::Mat>& imgs);

struct SavePolicy {
  enum class Kind { match, jpeg_range };
  Kind kind = Kind::match;
  int quality_lo = 70;
  int quality_hi = 100;

  static SavePolicy parse(const std::string& s);  // "match" | "jpeg:70-100"
  std::string str() const;
};

// One fake per real record, pair-linked, written under out_root mirroring
// the source paths. Per-image save quality derives from (seed, record id).
DatasetManifest reconstruct_dataset(AutoencoderHandle& ae,
                                    const DatasetManifest& m,
                                    const std::filesystem::path& out_root,
                                    const SavePolicy& policy, uint64_t seed);

struct ToyTrainingResult {
  std::shared_ptr<ToyAutoencoder> handle;
  double held_out_mse = 0.0;
  bool reached_target = false;
  std::vector<double> epoch_mse;  // held-out curve
};

ToyTrainingResult train_toy_autoencoder(const ToyAutoencoderConfig& cfg,
                                        const DatasetManifest& m);

void save_autoencoder(const ToyAutoencoder& ae, const std::filesystem::path& dir);

// Specs: "toy:<dir>" (saved checkpoint), "identity:f=<n>" (stub),
// "seeded:f=<n>,ch=<c>,seed=<s>" (deterministic random-init architecture,
// stands in for externally trained weights).
std::shared_ptr<AutoencoderHandle> load_external_autoencoder(const std::string& spec);

}  // namespace aef
