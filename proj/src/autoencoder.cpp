#include "aef/autoencoder.hpp"

#include "aef/log.hpp"
#include "aef/nn/adam.hpp"
#include "aef/nn/image_tensor.hpp"
#include "aef/nn/ops.hpp"
#include "aef/nn/serialize.hpp"
#include "aef/rng.hpp"

#include <nlohmann/json.hpp>
#include <opencv2/core.hpp>

#include <fstream>
#include <map>

namespace aef {

namespace fs = std::filesystem;
using nn::Tensor;
using ordered_json = nlohmann::ordered_json;

static bool is_power_of_two(int v) { return v > 0 && (v & (v - 1)) == 0; }

ToyAutoencoder::ToyAutoencoder(const ToyAutoencoderConfig& cfg,
                               const std::string& identity)
    : cfg_(cfg), identity_(identity) {
  if (!is_power_of_two(cfg.f)) throw UserError("autoencoder f must be a power of two");
  const int stages = static_cast<int>(cfg.widths.size()) - 1;
  if (stages < 1 || (1 << stages) != cfg.f)
    throw UserError(cat("widths must have log2(f)+1 entries; f=", cfg.f, " needs ",
                        [](int f) { int s = 0; while (f > 1) { f >>= 1; ++s; } return s + 1; }(cfg.f)));

  const auto& w = cfg.widths;
  encoder_.add(std::make_unique<nn::Conv2d>("enc.in", 3, w[0], 3, 1, 1));
  encoder_.add(std::make_unique<nn::LeakyReLU>(0.1f));
  for (int i = 1; i <= stages; ++i) {
    encoder_.add(std::make_unique<nn::Conv2d>(cat("enc.down", i), w[i - 1], w[i], 3, 2, 1));
    encoder_.add(std::make_unique<nn::LeakyReLU>(0.1f));
  }
  encoder_.add(std::make_unique<nn::Conv2d>("enc.latent", w[stages],
                                            cfg.latent_channels, 3, 1, 1));

  decoder_.add(std::make_unique<nn::Conv2d>("dec.latent", cfg.latent_channels,
                                            w[stages], 3, 1, 1));
  decoder_.add(std::make_unique<nn::LeakyReLU>(0.1f));
  for (int i = stages; i >= 1; --i) {
    decoder_.add(std::make_unique<nn::Upsample2x>());
    decoder_.add(std::make_unique<nn::Conv2d>(cat("dec.up", i), w[i], w[i - 1], 3, 1, 1));
    decoder_.add(std::make_unique<nn::LeakyReLU>(0.1f));
  }
  decoder_.add(std::make_unique<nn::Conv2d>("dec.out", w[0], 3, 3, 1, 1));
  init_weights(cfg.seed);
}

void ToyAutoencoder::init_weights(uint64_t seed) {
  Rng rng = Rng(seed).derive("toy-ae-init");
  encoder_.init_weights(rng);
  decoder_.init_weights(rng);
}

std::vector<nn::Param*> ToyAutoencoder::params() {
  std::vector<nn::Param*> ps;
  encoder_.collect_params(ps);
  decoder_.collect_params(ps);
  return ps;
}

Tensor ToyAutoencoder::encode(const Tensor& x) { return encoder_.forward(x); }
Tensor ToyAutoencoder::decode(const Tensor& z) { return decoder_.forward(z); }
Tensor ToyAutoencoder::decode_backward(const Tensor& dy) { return decoder_.backward(dy); }
Tensor ToyAutoencoder::encode_backward(const Tensor& dz) { return encoder_.backward(dz); }

NetworkCostConfig ToyAutoencoder::encoder_cost(int h, int w) const {
  NetworkCostConfig cfg;
  cfg.name = "toy-encoder";
  const auto& ws = cfg_.widths;
  const int stages = static_cast<int>(ws.size()) - 1;
  auto conv = [&](int ic, int oc, int s, int ih, int iw) {
    LayerDesc d;
    d.type = LayerDesc::Type::conv;
    d.in_c = ic; d.out_c = oc; d.k = 3; d.stride = s; d.in_h = ih; d.in_w = iw;
    cfg.layers.push_back(d);
  };
  conv(3, ws[0], 1, h, w);
  int ch = h, cw = w;
  for (int i = 1; i <= stages; ++i) {
    conv(ws[i - 1], ws[i], 2, ch, cw);
    ch /= 2; cw /= 2;
  }
  conv(ws[stages], cfg_.latent_channels, 1, ch, cw);
  return cfg;
}

NetworkCostConfig ToyAutoencoder::decoder_cost(int h, int w) const {
  NetworkCostConfig cfg;
  cfg.name = "toy-decoder";
  const auto& ws = cfg_.widths;
  const int stages = static_cast<int>(ws.size()) - 1;
  auto conv = [&](int ic, int oc, int ih, int iw) {
    LayerDesc d;
    d.type = LayerDesc::Type::conv;
    d.in_c = ic; d.out_c = oc; d.k = 3; d.stride = 1; d.in_h = ih; d.in_w = iw;
    cfg.layers.push_back(d);
  };
  int ch = h / cfg_.f, cw = w / cfg_.f;
  conv(cfg_.latent_channels, ws[stages], ch, cw);
  for (int i = stages; i >= 1; --i) {
    ch *= 2; cw *= 2;
    conv(ws[i], ws[i - 1], ch, cw);
  }
  conv(ws[0], 3, ch, cw);
  return cfg;
}

IdentityAutoencoder::IdentityAutoencoder(int f) : f_(f) {
  if (!is_power_of_two(f)) throw UserError("identity autoencoder f must be a power of two");
}

std::string IdentityAutoencoder::identity() const { return cat("identity:f=", f_); }

Tensor IdentityAutoencoder::encode(const Tensor& x) {
  const int n = x.dim(0), h = x.dim(2), w = x.dim(3);
  Tensor z({n, 3 * f_ * f_, h / f_, w / f_});
  const int zh = h / f_, zw = w / f_;
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < h; ++y)
        for (int xx = 0; xx < w; ++xx) {
          const int zc = (c * f_ + y % f_) * f_ + xx % f_;
          z.data[((static_cast<size_t>(i) * 3 * f_ * f_ + zc) * zh + y / f_) * zw + xx / f_] =
              x.data[((static_cast<size_t>(i) * 3 + c) * h + y) * w + xx];
        }
  return z;
}

Tensor IdentityAutoencoder::decode(const Tensor& z) {
  const int n = z.dim(0), zh = z.dim(2), zw = z.dim(3);
  const int h = zh * f_, w = zw * f_;
  Tensor x({n, 3, h, w});
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < h; ++y)
        for (int xx = 0; xx < w; ++xx) {
          const int zc = (c * f_ + y % f_) * f_ + xx % f_;
          x.data[((static_cast<size_t>(i) * 3 + c) * h + y) * w + xx] =
              z.data[((static_cast<size_t>(i) * 3 * f_ * f_ + zc) * zh + y / f_) * zw + xx / f_];
        }
  return x;
}

NetworkCostConfig IdentityAutoencoder::encoder_cost(int, int) const {
  return {"identity-encoder", {}, "zero-cost stub"};
}
NetworkCostConfig IdentityAutoencoder::decoder_cost(int, int) const {
  return {"identity-decoder", {}, "zero-cost stub"};
}

cv::Mat reconstruct(AutoencoderHandle& ae, const cv::Mat& img) {
  std::vector<cv::Mat> one{img};
  return reconstruct_images(ae, one)[0];
}

static cv::Mat reflect_pad_to_multiple(const cv::Mat& img, int f) {
  const int h = img.rows, w = img.cols;
  const int ph = (f - h % f) % f;
  const int pw = (f - w % f) % f;
  if (ph == 0 && pw == 0) return img;
  cv::Mat padded;
  cv::copyMakeBorder(img, padded, 0, ph, 0, pw, cv::BORDER_REFLECT_101);
  return padded;
}

std::vector<cv::Mat> reconstruct_images(AutoencoderHandle& ae,
                                        const std::vector<cv::Mat>& imgs) {
  const int f = ae.downsample_factor();
  for (const auto& img : imgs) {
    if (img.empty() || img.channels() != 3)
      throw UserError("reconstruct: need non-empty 3-channel images");
    if (img.rows < f || img.cols < f)
      throw UserError(cat("reconstruct: image ", img.cols, "x", img.rows,
                          " is smaller than the downsample factor ", f));
  }

  // Group equal padded sizes into batches so the conv ops see real batches.
  std::vector<cv::Mat> out(imgs.size());
  std::map<std::pair<int, int>, std::vector<size_t>> groups;
  for (size_t i = 0; i < imgs.size(); ++i) {
    const cv::Mat padded = reflect_pad_to_multiple(imgs[i], f);
    groups[{padded.rows, padded.cols}].push_back(i);
  }
  constexpr size_t kBatch = 16;
  for (const auto& [size, idxs] : groups) {
    for (size_t start = 0; start < idxs.size(); start += kBatch) {
      const size_t end = std::min(idxs.size(), start + kBatch);
      std::vector<Tensor> items;
      for (size_t j = start; j < end; ++j)
        items.push_back(nn::image_to_tensor(reflect_pad_to_multiple(imgs[idxs[j]], f)));
      Tensor batch = nn::stack(items);
      Tensor recon = ae.decode(ae.encode(batch));
      for (size_t j = start; j < end; ++j) {
        Tensor one({3, size.first, size.second});
        std::copy(recon.data.begin() + static_cast<long>((j - start) * one.numel()),
                  recon.data.begin() + static_cast<long>((j - start + 1) * one.numel()),
                  one.data.begin());
        cv::Mat full = nn::tensor_to_image(one);
        out[idxs[j]] = full(cv::Rect(0, 0, imgs[idxs[j]].cols, imgs[idxs[j]].rows)).clone();
      }
    }
  }
  return out;
}

SavePolicy SavePolicy::parse(const std::string& s) {
  SavePolicy p;
  if (s == "match") {
    p.kind = Kind::match;
    return p;
  }
  if (s.rfind("jpeg:", 0) == 0) {
    const auto dash = s.find('-', 5);
    if (dash != std::string::npos) {
      p.kind = Kind::jpeg_range;
      p.quality_lo = std::stoi(s.substr(5, dash - 5));
      p.quality_hi = std::stoi(s.substr(dash + 1));
      if (p.quality_lo < 1 || p.quality_hi > 100 || p.quality_lo > p.quality_hi)
        throw UserError(cat("bad jpeg quality range: ", s));
      return p;
    }
  }
  throw UserError(cat("bad save policy (want match or jpeg:lo-hi): ", s));
}

std::string SavePolicy::str() const {
  if (kind == Kind::match) return "match";
  return cat("jpeg:", quality_lo, "-", quality_hi);
}

// Real paths rebased onto the output root so the combined manifest stands
// alone; falls back to an absolute path when no relative form exists.
static std::string rebase_path(const fs::path& old_root, const std::string& rel,
                               const fs::path& new_root) {
  const fs::path abs = fs::absolute(old_root / rel).lexically_normal();
  const fs::path based = abs.lexically_relative(fs::absolute(new_root).lexically_normal());
  return based.empty() ? abs.generic_string() : based.generic_string();
}

DatasetManifest reconstruct_dataset(AutoencoderHandle& ae,
                                    const DatasetManifest& m,
                                    const fs::path& out_root,
                                    const SavePolicy& policy, uint64_t seed) {
  for (const auto& r : m.records)
    if (r.label != Label::real)
      throw UserError(cat("reconstruct_dataset: record ", r.id, " is not real"));
  fs::create_directories(out_root);

  // The result is the combined dataset: the source reals (paths rebased)
  // plus one pair-linked fake per real.
  DatasetManifest out;
  out.root = out_root;
  out.meta["autoencoder"] = ae.identity();
  out.meta["seed"] = std::to_string(seed);
  out.meta["save_policy"] = policy.str();
  out.meta["source_manifest"] = manifest_digest(m);
  for (const auto& r : m.records) {
    ImageRecord real = r;
    real.path = rebase_path(m.root, r.path, out_root);
    out.records.push_back(std::move(real));
  }

  Rng base(seed);
  uint64_t mac_total = 0;
  size_t failures = 0;
  constexpr size_t kBatch = 16;

  for (size_t start = 0; start < m.records.size(); start += kBatch) {
    const size_t end = std::min(m.records.size(), start + kBatch);
    std::vector<cv::Mat> imgs;
    std::vector<size_t> ok_idx;
    for (size_t i = start; i < end; ++i) {
      cv::Mat img = load_image(m.abs_path(m.records[i]));
      if (img.empty()) {
        warn(cat("reconstruct: cannot decode ", m.abs_path(m.records[i]).string()));
        ++failures;
        continue;
      }
      imgs.push_back(std::move(img));
      ok_idx.push_back(i);
    }
    if (imgs.empty()) continue;
    std::vector<cv::Mat> recons = reconstruct_images(ae, imgs);

    for (size_t j = 0; j < recons.size(); ++j) {
      const ImageRecord& src = m.records[ok_idx[j]];
      const cv::Mat& recon = recons[j];

      ContainerFormat fmt = src.container_format;
      if (policy.kind == SavePolicy::Kind::jpeg_range) fmt = ContainerFormat::jpeg;
      int quality = 100;
      if (fmt != ContainerFormat::png) {
        Rng qrng = base.derive("save-quality").derive(fnv1a64(src.id));
        quality = qrng.uniform_int(policy.quality_lo, policy.quality_hi);
      }

      fs::path rel(src.path);
      const char* ext = fmt == ContainerFormat::jpeg   ? ".jpg"
                        : fmt == ContainerFormat::webp ? ".webp"
                                                       : ".png";
      rel.replace_extension(ext);
      fs::create_directories((out_root / rel).parent_path());
      save_image(out_root / rel, recon, fmt, quality);

      const int ph = (recon.rows + ae.downsample_factor() - 1) /
                     ae.downsample_factor() * ae.downsample_factor();
      const int pw = (recon.cols + ae.downsample_factor() - 1) /
                     ae.downsample_factor() * ae.downsample_factor();
      mac_total += total_macs(ae.encoder_cost(ph, pw)) +
                   total_macs(ae.decoder_cost(ph, pw));

      ImageRecord r;
      r.id = cat("recon:", rel.generic_string());  // distinct from the real's id
      r.path = rel.generic_string();
      r.width_px = recon.cols;
      r.height_px = recon.rows;
      r.container_format = fmt;
      r.label = Label::fake;
      r.source_tag = src.source_tag;
      r.pair_id = src.id;
      r.content_hash = sha256_file(out_root / rel);
      out.records.push_back(std::move(r));
    }
  }

  if (!m.records.empty() &&
      static_cast<double>(failures) > 0.01 * static_cast<double>(m.records.size()))
    throw std::runtime_error(cat("reconstruct_dataset: ", failures, " of ",
                                 m.records.size(), " images failed (>1%)"));
  out.meta["mac_total"] = std::to_string(mac_total);
  return out;
}

ToyTrainingResult train_toy_autoencoder(const ToyAutoencoderConfig& cfg,
                                        const DatasetManifest& m) {
  if (m.records.empty()) throw UserError("train_toy_autoencoder: empty manifest");

  auto handle = std::make_shared<ToyAutoencoder>(
      cfg, cat("toy:f=", cfg.f, ",ch=", cfg.latent_channels, ",seed=", cfg.seed));

  std::vector<Tensor> images;
  images.reserve(m.records.size());
  for (const auto& r : m.records) {
    cv::Mat img = load_image(m.abs_path(r));
    if (img.empty()) throw UserError(cat("cannot decode ", m.abs_path(r).string()));
    images.push_back(nn::image_to_tensor(reflect_pad_to_multiple(img, cfg.f)));
  }

  Rng rng = Rng(cfg.seed).derive("toy-ae-train");
  std::vector<size_t> order(images.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);
  const size_t holdout = std::max<size_t>(1, order.size() / 10);
  std::vector<size_t> val_idx(order.begin(), order.begin() + static_cast<long>(holdout));
  std::vector<size_t> train_idx(order.begin() + static_cast<long>(holdout), order.end());
  if (train_idx.empty()) train_idx = val_idx;

  nn::Adam adam(handle->params());

  auto random_crop = [&](const Tensor& img, Rng& r) {
    const int h = img.dim(1), w = img.dim(2);
    const int side = std::min({cfg.crop_side, h, w});
    const int y0 = h > side ? r.uniform_int(0, h - side) : 0;
    const int x0 = w > side ? r.uniform_int(0, w - side) : 0;
    Tensor out({3, side, side});
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < side; ++y)
        std::copy(
            img.data.begin() + ((static_cast<size_t>(c) * h + y0 + y) * w + x0),
            img.data.begin() + ((static_cast<size_t>(c) * h + y0 + y) * w + x0 + side),
            out.data.begin() + (static_cast<size_t>(c) * side + y) * side);
    return out;
  };

  // Held-out MSE on whole images; sizes may differ so images go one at a time.
  auto held_out_mse = [&]() {
    double total = 0.0;
    for (size_t i : val_idx) {
      Tensor x = nn::unsqueeze(images[i]);
      Tensor recon = handle->decode(handle->encode(x));
      Tensor dummy;
      total += nn::mse_loss(recon, x, dummy);
    }
    return val_idx.empty() ? 0.0 : total / static_cast<double>(val_idx.size());
  };

  ToyTrainingResult result;
  result.handle = handle;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng erng = rng.derive("epoch", static_cast<uint64_t>(epoch));
    std::vector<size_t> perm = train_idx;
    erng.shuffle(perm);
    for (size_t start = 0; start < perm.size();
         start += static_cast<size_t>(cfg.batch_size)) {
      const size_t end =
          std::min(perm.size(), start + static_cast<size_t>(cfg.batch_size));
      std::vector<Tensor> crops;
      for (size_t i = start; i < end; ++i) {
        Rng crng = erng.derive("crop", static_cast<uint64_t>(i));
        crops.push_back(random_crop(images[perm[i]], crng));
      }
      Tensor x = nn::stack(crops);
      Tensor recon = handle->decode(handle->encode(x));
      Tensor dloss;
      const double loss = nn::mse_loss(recon, x, dloss);
      if (!std::isfinite(loss))
        throw std::runtime_error(cat("toy autoencoder: non-finite loss at epoch ",
                                     epoch, " batch ", start / cfg.batch_size));
      adam.zero_grad();
      Tensor g = handle->decode_backward(dloss);
      handle->encode_backward(g);
      adam.step(cfg.learning_rate);
    }
    result.epoch_mse.push_back(held_out_mse());
  }
  result.held_out_mse = result.epoch_mse.empty() ? held_out_mse()
                                                 : result.epoch_mse.back();
  result.reached_target = result.held_out_mse <= cfg.target_mse;
  if (!result.reached_target)
    warn(cat("toy autoencoder held-out mse ", result.held_out_mse,
             " missed target ", cfg.target_mse));
  return result;
}

void save_autoencoder(const ToyAutoencoder& ae, const fs::path& dir) {
  fs::create_directories(dir);
  ordered_json j;
  const auto& c = ae.config();
  j["f"] = c.f;
  j["latent_channels"] = c.latent_channels;
  j["widths"] = c.widths;
  j["epochs"] = c.epochs;
  j["learning_rate"] = c.learning_rate;
  j["batch_size"] = c.batch_size;
  j["crop_side"] = c.crop_side;
  j["target_mse"] = c.target_mse;
  j["seed"] = c.seed;
  j["identity"] = ae.identity();
  std::ofstream(dir / "ae_config.json") << j.dump(2) << "\n";
  nn::save_weights(dir / "weights.bin",
                   const_cast<ToyAutoencoder&>(ae).params());
}

static std::shared_ptr<ToyAutoencoder> load_toy(const fs::path& dir) {
  std::ifstream in(dir / "ae_config.json");
  if (!in) throw UserError(cat("not an autoencoder checkpoint: ", dir.string()));
  ordered_json j = ordered_json::parse(in);
  ToyAutoencoderConfig cfg;
  cfg.f = j.at("f").get<int>();
  cfg.latent_channels = j.at("latent_channels").get<int>();
  cfg.widths = j.at("widths").get<std::vector<int>>();
  cfg.epochs = j.value("epochs", cfg.epochs);
  cfg.learning_rate = j.value("learning_rate", cfg.learning_rate);
  cfg.batch_size = j.value("batch_size", cfg.batch_size);
  cfg.crop_side = j.value("crop_side", cfg.crop_side);
  cfg.target_mse = j.value("target_mse", cfg.target_mse);
  cfg.seed = j.value("seed", uint64_t{0});
  auto ae = std::make_shared<ToyAutoencoder>(cfg, j.at("identity").get<std::string>());
  nn::load_weights(dir / "weights.bin", ae->params());
  return ae;
}

static std::map<std::string, std::string> parse_kv(const std::string& s) {
  std::map<std::string, std::string> kv;
  size_t pos = 0;
  while (pos < s.size()) {
    size_t comma = s.find(',', pos);
    if (comma == std::string::npos) comma = s.size();
    const std::string part = s.substr(pos, comma - pos);
    const size_t eq = part.find('=');
    if (eq == std::string::npos) throw UserError(cat("bad autoencoder spec field: ", part));
    kv[part.substr(0, eq)] = part.substr(eq + 1);
    pos = comma + 1;
  }
  return kv;
}

std::shared_ptr<AutoencoderHandle> load_external_autoencoder(const std::string& spec) {
  if (spec.rfind("toy:", 0) == 0) return load_toy(spec.substr(4));
  if (spec.rfind("identity:", 0) == 0) {
    auto kv = parse_kv(spec.substr(9));
    return std::make_shared<IdentityAutoencoder>(std::stoi(kv.at("f")));
  }
  if (spec.rfind("seeded:", 0) == 0) {
    auto kv = parse_kv(spec.substr(7));
    ToyAutoencoderConfig cfg;
    cfg.f = std::stoi(kv.at("f"));
    cfg.latent_channels = std::stoi(kv.at("ch"));
    cfg.seed = kv.count("seed") ? std::stoull(kv.at("seed")) : 0;
    cfg.widths.clear();
    int stages = 0;
    for (int f = cfg.f; f > 1; f >>= 1) ++stages;
    for (int i = 0; i <= stages; ++i) cfg.widths.push_back(16 << std::min(i, 2));
    return std::make_shared<ToyAutoencoder>(cfg, spec);
  }
  throw UserError(cat("unresolvable autoencoder spec: ", spec));
}

}  // namespace aef
