#include "aef/detector.hpp"

#include "aef/log.hpp"
#include "aef/nn/adam.hpp"
#include "aef/nn/image_tensor.hpp"
#include "aef/nn/ops.hpp"
#include "aef/nn/serialize.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

namespace aef {

namespace fs = std::filesystem;
using nn::Tensor;
using ordered_json = nlohmann::ordered_json;

std::string BackboneConfig::family_str() const {
  return family == BackboneFamily::resnet50_like ? "resnet50-like" : "small-cnn";
}

std::string BackboneConfig::str() const {
  ordered_json j;
  j["family"] = family_str();
  j["stem_downsampling_removed"] = stem_downsampling_removed;
  j["init"] = init;
  j["init_seed"] = init_seed;
  j["small_cnn_widths"] = small_cnn_widths;
  return j.dump();
}

Detector::Detector(const BackboneConfig& cfg, std::unique_ptr<nn::Sequential> net)
    : cfg_(cfg), net_(std::move(net)) {}

std::vector<nn::Param*> Detector::params() {
  std::vector<nn::Param*> ps;
  net_->collect_params(ps);
  return ps;
}

size_t Detector::parameter_count() { return nn::parameter_count(*net_); }

Tensor Detector::stem_forward(const Tensor& x) {
  Tensor cur = x;
  for (size_t i = 0; i < stem_layers_; ++i) cur = net_->at(i).forward(cur);
  return cur;
}

static std::unique_ptr<nn::Sequential> bottleneck(const std::string& name,
                                                  int in_c, int mid_c, int out_c,
                                                  int stride) {
  auto main = std::make_unique<nn::Sequential>();
  main->add(std::make_unique<nn::Conv2d>(name + ".a", in_c, mid_c, 1, 1, 0));
  main->add(std::make_unique<nn::LeakyReLU>(0.0f));
  main->add(std::make_unique<nn::Conv2d>(name + ".b", mid_c, mid_c, 3, stride, 1));
  main->add(std::make_unique<nn::LeakyReLU>(0.0f));
  main->add(std::make_unique<nn::Conv2d>(name + ".c", mid_c, out_c, 1, 1, 0));
  return main;
}

std::shared_ptr<Detector> build_detector(const BackboneConfig& cfg) {
  auto net = std::make_unique<nn::Sequential>();
  size_t stem_layers = 0;

  if (cfg.family == BackboneFamily::small_cnn) {
    const auto& w = cfg.small_cnn_widths;
    if (w.size() < 2) throw UserError("small-cnn needs at least 2 widths");
    // The stem conv is stride 1 either way; the flag only matters for the
    // resnet50-like family.
    net->add(std::make_unique<nn::Conv2d>("stem", 3, w[0], 3, 1, 1));
    net->add(std::make_unique<nn::LeakyReLU>(0.0f));
    stem_layers = 2;
    for (size_t i = 1; i < w.size(); ++i) {
      net->add(std::make_unique<nn::Conv2d>(cat("conv", i), w[i - 1], w[i], 3, 2, 1));
      net->add(std::make_unique<nn::LeakyReLU>(0.0f));
    }
    net->add(std::make_unique<nn::GlobalAvgPool>());
    net->add(std::make_unique<nn::Conv2d>("head", w.back(), 1, 1, 1, 0));
  } else {
    const int stem_stride = cfg.stem_downsampling_removed ? 1 : 2;
    net->add(std::make_unique<nn::Conv2d>("stem", 3, 64, 7, stem_stride, 3));
    net->add(std::make_unique<nn::LeakyReLU>(0.0f));
    stem_layers = 2;
    if (!cfg.stem_downsampling_removed) {
      net->add(std::make_unique<nn::MaxPool3x3s2>());
      stem_layers = 3;
    }
    const int blocks[4] = {3, 4, 6, 3};
    const int mids[4] = {64, 128, 256, 512};
    int in_c = 64;
    for (int s = 0; s < 4; ++s) {
      const int out_c = mids[s] * 4;
      for (int b = 0; b < blocks[s]; ++b) {
        const int stride = (b == 0 && s > 0) ? 2 : 1;
        std::unique_ptr<nn::Conv2d> proj;
        if (stride != 1 || in_c != out_c)
          proj = std::make_unique<nn::Conv2d>(cat("stage", s, ".", b, ".proj"),
                                              in_c, out_c, 1, stride, 0);
        net->add(std::make_unique<nn::Residual>(
            bottleneck(cat("stage", s, ".", b), in_c, mids[s], out_c, stride),
            std::move(proj)));
        in_c = out_c;
      }
    }
    net->add(std::make_unique<nn::GlobalAvgPool>());
    net->add(std::make_unique<nn::Conv2d>("head", in_c, 1, 1, 1, 0));
  }

  auto det = std::make_shared<Detector>(cfg, std::move(net));
  det->set_stem_layers(stem_layers);

  if (cfg.init == "random") {
    Rng rng = Rng(cfg.init_seed).derive("detector-init");
    det->init_weights(rng);
  } else if (cfg.init.rfind("external:", 0) == 0) {
    nn::load_weights(cfg.init.substr(9), det->params());
  } else if (cfg.init == "pretrained-imagenet") {
    const char* dir = std::getenv("AEF_PRETRAINED_DIR");
    if (!dir)
      throw UserError(
          "pretrained-imagenet init: set AEF_PRETRAINED_DIR to a directory "
          "containing resnet50_imagenet.bin, or use init external:<file>");
    nn::load_weights(fs::path(dir) / "resnet50_imagenet.bin", det->params());
  } else {
    throw UserError(cat("unknown detector init: ", cfg.init));
  }
  return det;
}

const cv::Mat& ImageCache::get(const DatasetManifest& m, const ImageRecord& r) {
  const std::string key = (m.root / r.path).string();
  auto it = by_key_.find(key);
  if (it != by_key_.end()) return it->second;
  cv::Mat img = load_image(m.abs_path(r));
  if (img.empty()) throw UserError(cat("cannot decode ", key));
  return by_key_.emplace(key, std::move(img)).first->second;
}

struct PairIndex {
  std::vector<std::pair<size_t, size_t>> pairs;  // (real idx, fake idx)
};

static PairIndex build_pairs(const DatasetManifest& m) {
  std::map<std::string, size_t> real_by_id;
  for (size_t i = 0; i < m.records.size(); ++i)
    if (m.records[i].label == Label::real) real_by_id[m.records[i].id] = i;
  PairIndex idx;
  for (size_t i = 0; i < m.records.size(); ++i) {
    const auto& r = m.records[i];
    if (r.label != Label::fake || !r.pair_id) continue;
    auto it = real_by_id.find(*r.pair_id);
    if (it != real_by_id.end()) idx.pairs.push_back({it->second, i});
  }
  return idx;
}

// Shared slot-filling used by compose_batch and the training epochs.
static void fill_sync_slots(const DatasetManifest& m,
                            const std::vector<std::pair<size_t, size_t>>& pairs,
                            const AugmentationPolicy& policy, Rng& rng,
                            ImageCache& cache, std::vector<nn::Tensor>& xs,
                            Batch& out) {
  for (const auto& [ri, fi] : pairs) {
    const auto& real = m.records[ri];
    const auto& fake = m.records[fi];
    Rng prng = rng.derive("params", fnv1a64(real.id));
    AugmentationParams p = sample_params(policy, real.width_px, real.height_px, prng);
    auto [a, b] = paired_apply(cache.get(m, real), cache.get(m, fake), p);
    xs.push_back(nn::image_to_tensor(a));
    out.labels.push_back(0.0f);
    out.params_audit.push_back(p);
    out.record_ids.push_back(real.id);
    xs.push_back(nn::image_to_tensor(b));
    out.labels.push_back(1.0f);
    out.params_audit.push_back(p);
    out.record_ids.push_back(fake.id);
  }
}

static void fill_random_slots(const DatasetManifest& m,
                              const std::vector<size_t>& indices,
                              const AugmentationPolicy& policy, Rng& rng,
                              ImageCache& cache, std::vector<nn::Tensor>& xs,
                              Batch& out) {
  for (size_t slot = 0; slot < indices.size(); ++slot) {
    const auto& r = m.records[indices[slot]];
    Rng prng = rng.derive("params", slot).derive(fnv1a64(r.id));
    AugmentationParams p = sample_params(policy, r.width_px, r.height_px, prng);
    xs.push_back(nn::image_to_tensor(apply(cache.get(m, r), p)));
    out.labels.push_back(r.label == Label::fake ? 1.0f : 0.0f);
    out.params_audit.push_back(p);
    out.record_ids.push_back(r.id);
  }
}

Batch compose_batch(const DatasetManifest& train, BatchVariant variant,
                    const AugmentationPolicy& policy, int batch_size, Rng& rng,
                    ImageCache* cache) {
  if (train.records.empty()) throw UserError("compose_batch: empty manifest");
  ImageCache local;
  ImageCache& c = cache ? *cache : local;
  Batch out;
  std::vector<nn::Tensor> xs;

  if (variant == BatchVariant::Sync) {
    if (batch_size % 2 != 0)
      throw UserError("Sync composer requires an even batch size");
    PairIndex idx = build_pairs(train);
    if (idx.pairs.empty())
      throw UserError("Sync composer requires a pair-linked manifest");
    std::vector<std::pair<size_t, size_t>> chosen;
    for (int i = 0; i < batch_size / 2; ++i)
      chosen.push_back(idx.pairs[rng.uniform_u64(idx.pairs.size())]);
    fill_sync_slots(train, chosen, policy, rng, c, xs, out);
  } else {
    std::vector<size_t> chosen;
    for (int i = 0; i < batch_size; ++i)
      chosen.push_back(rng.uniform_u64(train.records.size()));
    fill_random_slots(train, chosen, policy, rng, c, xs, out);
  }
  out.x = nn::stack(xs);
  return out;
}

std::vector<double> score_images(Detector& det, const std::vector<cv::Mat>& imgs) {
  std::vector<double> scores(imgs.size(),
                             std::numeric_limits<double>::quiet_NaN());
  // Group by size so full-image scoring still runs in batches.
  std::map<std::pair<int, int>, std::vector<size_t>> groups;
  for (size_t i = 0; i < imgs.size(); ++i)
    groups[{imgs[i].rows, imgs[i].cols}].push_back(i);
  constexpr size_t kBatch = 32;
  for (const auto& [size, idxs] : groups) {
    for (size_t start = 0; start < idxs.size(); start += kBatch) {
      const size_t end = std::min(idxs.size(), start + kBatch);
      std::vector<nn::Tensor> xs;
      for (size_t j = start; j < end; ++j)
        xs.push_back(nn::image_to_tensor(imgs[idxs[j]]));
      nn::Tensor logits = det.forward(nn::stack(xs));
      for (size_t j = start; j < end; ++j)
        scores[idxs[j]] =
            nn::sigmoid(static_cast<double>(logits.data[j - start]));
    }
  }
  return scores;
}

std::vector<double> score_records(Detector& det, const DatasetManifest& m,
                                  int min_side, ImageCache* cache) {
  ImageCache local;
  ImageCache& c = cache ? *cache : local;
  std::vector<double> scores(m.records.size(),
                             std::numeric_limits<double>::quiet_NaN());
  std::vector<cv::Mat> imgs;
  std::vector<size_t> kept;
  for (size_t i = 0; i < m.records.size(); ++i) {
    const auto& r = m.records[i];
    if (r.width_px < min_side || r.height_px < min_side) {
      warn(cat("record ", r.id, " smaller than ", min_side, "px; not scored"));
      continue;
    }
    imgs.push_back(c.get(m, r));
    kept.push_back(i);
  }
  std::vector<double> s = score_images(det, imgs);
  for (size_t j = 0; j < kept.size(); ++j) scores[kept[j]] = s[j];
  return scores;
}

double validate(Detector& det, const DatasetManifest& m, ImageCache* cache) {
  if (m.records.empty()) throw UserError("validate: empty manifest");
  const int min_side = 1;  // whole-image scoring; size gating happens upstream
  std::vector<double> scores = score_records(det, m, min_side, cache);
  size_t correct = 0, counted = 0;
  for (size_t i = 0; i < scores.size(); ++i) {
    if (std::isnan(scores[i])) continue;
    const bool say_fake = scores[i] >= 0.5;
    const bool is_fake = m.records[i].label == Label::fake;
    correct += say_fake == is_fake;
    ++counted;
  }
  if (counted == 0) throw UserError("validate: no scorable records");
  return static_cast<double>(correct) / static_cast<double>(counted);
}

DetectorCheckpoint train(std::shared_ptr<Detector> detector,
                         const DatasetManifest& train_m,
                         const DatasetManifest& val_m, const TrainConfig& cfg,
                         ValScorer val_scorer) {
  if (val_m.count_label(Label::real) == 0 || val_m.count_label(Label::fake) == 0)
    throw UserError("train: validation manifest needs both labels");
  if (cfg.composer == BatchVariant::Sync && cfg.batch_size % 2 != 0)
    throw UserError("train: Sync composer requires an even batch size");

  ImageCache cache;
  PairIndex pair_idx;
  std::vector<size_t> record_idx;
  if (cfg.composer == BatchVariant::Sync) {
    pair_idx = build_pairs(train_m);
    if (pair_idx.pairs.empty())
      throw UserError("train: Sync composer requires a pair-linked manifest");
  } else {
    record_idx.resize(train_m.records.size());
    for (size_t i = 0; i < record_idx.size(); ++i) record_idx[i] = i;
  }

  nn::Adam adam(detector->params());
  Rng base = Rng(cfg.seed).derive("detector-train");

  DetectorCheckpoint ckpt;
  ckpt.backbone = detector->config();
  ckpt.train_config = cfg;
  ckpt.detector = detector;
  ckpt.provenance["train_manifest"] = manifest_digest(train_m);
  ckpt.provenance["val_manifest"] = manifest_digest(val_m);
  ckpt.provenance["seed"] = std::to_string(cfg.seed);
  ckpt.provenance["policy"] = cfg.policy.str();

  double lr = cfg.initial_lr;
  double sched_best = 0.0;
  bool sched_best_set = false;
  int epochs_since_improve = 0;
  double ckpt_best = -1.0;
  std::map<std::string, nn::Tensor> best_weights;

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    Rng erng = base.derive("epoch", static_cast<uint64_t>(epoch));
    double epoch_loss = 0.0;
    size_t batches = 0;

    auto run_batch = [&](Batch& batch) {
      nn::Tensor logits = detector->forward(batch.x);
      nn::Tensor dlogits;
      const double loss = nn::bce_with_logits(logits, batch.labels, dlogits);
      if (!std::isfinite(loss))
        throw std::runtime_error(cat("train: non-finite loss at epoch ", epoch,
                                     " batch ", batches));
      adam.zero_grad();
      detector->backward(dlogits);
      adam.step(lr);
      epoch_loss += loss;
      ++batches;
    };

    if (cfg.composer == BatchVariant::Sync) {
      auto pairs = pair_idx.pairs;
      erng.shuffle(pairs);
      const size_t per_batch = static_cast<size_t>(cfg.batch_size) / 2;
      for (size_t start = 0; start < pairs.size(); start += per_batch) {
        const size_t end = std::min(pairs.size(), start + per_batch);
        std::vector<std::pair<size_t, size_t>> chunk(pairs.begin() + start,
                                                     pairs.begin() + end);
        Batch batch;
        std::vector<nn::Tensor> xs;
        Rng brng = erng.derive("batch", start / per_batch);
        fill_sync_slots(train_m, chunk, cfg.policy, brng, cache, xs, batch);
        batch.x = nn::stack(xs);
        run_batch(batch);
      }
    } else {
      auto order = record_idx;
      erng.shuffle(order);
      const size_t per_batch = static_cast<size_t>(cfg.batch_size);
      for (size_t start = 0; start < order.size(); start += per_batch) {
        const size_t end = std::min(order.size(), start + per_batch);
        std::vector<size_t> chunk(order.begin() + start, order.begin() + end);
        Batch batch;
        std::vector<nn::Tensor> xs;
        Rng brng = erng.derive("batch", start / per_batch);
        fill_random_slots(train_m, chunk, cfg.policy, brng, cache, xs, batch);
        batch.x = nn::stack(xs);
        run_batch(batch);
      }
    }

    const double val_acc = val_scorer ? val_scorer(*detector, val_m)
                                      : validate(*detector, val_m, &cache);
    ckpt.history.push_back({epoch, val_acc, lr,
                            batches ? epoch_loss / static_cast<double>(batches) : 0.0});

    if (val_acc > ckpt_best) {
      ckpt_best = val_acc;
      ckpt.best_epoch = epoch;
      ckpt.best_accuracy = val_acc;
      best_weights = nn::snapshot(detector->params());
    }

    // Patience: the first epoch only establishes the baseline; improvement
    // means beating the recorded best by at least improve_delta.
    if (!sched_best_set) {
      sched_best = val_acc;
      sched_best_set = true;
      epochs_since_improve = 1;
    } else if (val_acc >= sched_best + cfg.patience.improve_delta) {
      sched_best = val_acc;
      epochs_since_improve = 0;
    } else {
      ++epochs_since_improve;
    }
    if (epochs_since_improve >= cfg.patience.window) {
      const double next = lr / cfg.patience.decay;
      if (next < cfg.patience.terminal_lr - 1e-15) break;
      lr = next;
      epochs_since_improve = 0;
    }
  }

  if (!best_weights.empty()) nn::restore(best_weights, detector->params());
  return ckpt;
}

void save_checkpoint(const DetectorCheckpoint& ckpt, const fs::path& dir) {
  fs::create_directories(dir);
  ordered_json j;
  j["backbone"] = ordered_json::parse(ckpt.backbone.str());
  j["train_config"] = {
      {"batch_size", ckpt.train_config.batch_size},
      {"initial_lr", ckpt.train_config.initial_lr},
      {"composer", ckpt.train_config.composer == BatchVariant::Sync ? "Sync" : "Random"},
      {"max_epochs", ckpt.train_config.max_epochs},
      {"seed", ckpt.train_config.seed},
      {"patience",
       {{"improve_delta", ckpt.train_config.patience.improve_delta},
        {"window", ckpt.train_config.patience.window},
        {"decay", ckpt.train_config.patience.decay},
        {"terminal_lr", ckpt.train_config.patience.terminal_lr}}},
      {"policy", ordered_json::parse(ckpt.train_config.policy.str())}};
  j["threshold"] = ckpt.threshold;
  j["best_epoch"] = ckpt.best_epoch;
  j["best_accuracy"] = ckpt.best_accuracy;
  j["provenance"] = ckpt.provenance;
  std::ofstream(dir / "checkpoint.json") << j.dump(2) << "\n";

  std::ofstream hist(dir / "history.jsonl");
  for (const auto& h : ckpt.history) {
    ordered_json hj;
    hj["epoch"] = h.epoch;
    hj["val_accuracy"] = h.val_accuracy;
    hj["lr"] = h.lr;
    hj["train_loss"] = h.train_loss;
    hist << hj.dump() << "\n";
  }
  nn::save_weights(dir / "weights.bin", ckpt.detector->params());
}

DetectorCheckpoint load_checkpoint(const fs::path& dir) {
  std::ifstream in(dir / "checkpoint.json");
  if (!in) throw UserError(cat("not a checkpoint directory: ", dir.string()));
  ordered_json j = ordered_json::parse(in);

  DetectorCheckpoint ckpt;
  const auto& bj = j.at("backbone");
  BackboneConfig bc;
  bc.family = bj.at("family").get<std::string>() == "resnet50-like"
                  ? BackboneFamily::resnet50_like
                  : BackboneFamily::small_cnn;
  bc.stem_downsampling_removed = bj.at("stem_downsampling_removed").get<bool>();
  bc.init = "random";  // weights come from the blob below
  bc.init_seed = bj.at("init_seed").get<uint64_t>();
  bc.small_cnn_widths = bj.at("small_cnn_widths").get<std::vector<int>>();
  ckpt.backbone = bc;

  const auto& tj = j.at("train_config");
  ckpt.train_config.batch_size = tj.at("batch_size").get<int>();
  ckpt.train_config.initial_lr = tj.at("initial_lr").get<double>();
  ckpt.train_config.composer = tj.at("composer").get<std::string>() == "Sync"
                                   ? BatchVariant::Sync
                                   : BatchVariant::Random;
  ckpt.train_config.max_epochs = tj.at("max_epochs").get<int>();
  ckpt.train_config.seed = tj.at("seed").get<uint64_t>();
  if (tj.contains("patience")) {
    const auto& pj = tj.at("patience");
    ckpt.train_config.patience.improve_delta = pj.at("improve_delta").get<double>();
    ckpt.train_config.patience.window = pj.at("window").get<int>();
    ckpt.train_config.patience.decay = pj.at("decay").get<double>();
    ckpt.train_config.patience.terminal_lr = pj.at("terminal_lr").get<double>();
  }
  if (tj.contains("policy"))
    ckpt.train_config.policy =
        AugmentationPolicy::from_json_string(tj.at("policy").dump());

  ckpt.threshold = j.at("threshold").get<double>();
  ckpt.best_epoch = j.at("best_epoch").get<int>();
  ckpt.best_accuracy = j.at("best_accuracy").get<double>();
  for (const auto& [k, v] : j.at("provenance").items())
    ckpt.provenance[k] = v.get<std::string>();

  std::ifstream hist(dir / "history.jsonl");
  std::string line;
  double prev_lr = std::numeric_limits<double>::infinity();
  while (std::getline(hist, line)) {
    if (line.empty()) continue;
    ordered_json hj = ordered_json::parse(line);
    EpochStat s;
    s.epoch = hj.at("epoch").get<int>();
    s.val_accuracy = hj.at("val_accuracy").get<double>();
    s.lr = hj.at("lr").get<double>();
    s.train_loss = hj.value("train_loss", 0.0);
    if (s.lr > prev_lr + 1e-15)
      throw UserError("checkpoint history has an increasing lr sequence");
    prev_lr = s.lr;
    ckpt.history.push_back(s);
  }

  ckpt.detector = build_detector(bc);
  nn::load_weights(dir / "weights.bin", ckpt.detector->params());
  return ckpt;
}

}  // namespace aef
