// Acceptance suite: one line per criterion, [PASS]/[FAIL], nonzero exit on
// any failure. Run a subset with `acceptance 1 4 9`; artifacts land under
// the work directory (env AEF_ACCEPT_WORK overrides the default temp path).

#include "aef/accounting.hpp"
#include "aef/autoencoder.hpp"
#include "aef/cli.hpp"
#include "aef/detector.hpp"
#include "aef/evaluation.hpp"
#include "aef/log.hpp"
#include "aef/robustness.hpp"
#include "aef/textures.hpp"

#include "../oracles.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iostream>
#include <set>

using namespace aef;
namespace fs = std::filesystem;

namespace {

struct Failure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

#define EXPECT(cond, msg)                                          \
  do {                                                             \
    if (!(cond)) throw Failure(cat("line ", __LINE__, ": ", msg)); \
  } while (0)

fs::path g_work;

// ---------------------------------------------------------------------------
// Shared desk-scale fixtures (built on first use, reused across criteria):
// 2,000 procedural textures at 128x128 split 80/10/10, a trained f=4 toy
// autoencoder, and reconstruction datasets for each split.
struct Fixtures {
  DatasetManifest train_ds, val_ds, test_ds;
  std::shared_ptr<ToyAutoencoder> autoencoder;
  double ae_holdout_mse = 0.0;
  double build_seconds = 0.0;  // counted toward the C4 pipeline budget
};

const Fixtures& fixtures() {
  static Fixtures f = [] {
    const auto t0 = std::chrono::steady_clock::now();
    Fixtures fx;
    const fs::path root = g_work / "fixtures";

    info("[fixtures] generating 2000 textures at 128x128");
    TextureDatasetOptions opt;
    opt.n = 2000;
    opt.side = 128;
    opt.seed = 424242;
    DatasetManifest reals = generate_texture_dataset(opt, root / "textures");

    auto splits = split_manifest(reals, {0.8, 0.1, 0.1}, 7);

    info("[fixtures] training the toy autoencoder (f=4)");
    ToyAutoencoderConfig ae_cfg;
    ae_cfg.f = 4;
    ae_cfg.latent_channels = 4;
    ae_cfg.widths = {16, 24, 32};
    ae_cfg.epochs = 10;
    ae_cfg.learning_rate = 1e-3;
    ae_cfg.batch_size = 32;
    ae_cfg.crop_side = 64;
    ae_cfg.target_mse = 0.01;
    ae_cfg.seed = 99;
    ToyTrainingResult ae = train_toy_autoencoder(ae_cfg, splits[0]);
    fx.autoencoder = ae.handle;
    fx.ae_holdout_mse = ae.held_out_mse;
    info(cat("[fixtures] autoencoder held-out mse ", ae.held_out_mse));

    SavePolicy policy = SavePolicy::parse("jpeg:70-100");
    info("[fixtures] reconstructing the three splits");
    fx.train_ds = reconstruct_dataset(*ae.handle, splits[0], root / "train", policy, 11);
    fx.val_ds = reconstruct_dataset(*ae.handle, splits[1], root / "val", policy, 12);
    fx.test_ds = reconstruct_dataset(*ae.handle, splits[2], root / "test", policy, 13);
    fx.build_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    info(cat("[fixtures] built in ", fx.build_seconds, "s"));
    return fx;
  }();
  return f;
}

AugmentationPolicy paper_policy() {
  return AugmentationPolicy{};  // defaults: jpeg/blur 0.5, gray/cutout/noise 0.1,
                                // rrc [8,100] out 256, crop 96
}

// ---------------------------------------------------------------------------

// C1: average_precision and tpr_at_fpr match brute-force oracles to 1e-12 on
// 1,000 random score sets of size <= 1,000.
std::string c1_metric_oracles() {
  Rng rng(20240901);
  double worst_ap = 0.0, worst_tpr = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    Rng r = rng.derive("set", trial);
    const size_t n = 10 + r.uniform_u64(991);
    ScoreSet s = oracle::random_scoreset(r, n, trial % 2 == 0);
    const double ap_err =
        std::abs(average_precision(s) - oracle::average_precision(s));
    const double tpr_err = std::abs(tpr_at_fpr(s, 0.05) - oracle::tpr_at_fpr(s, 0.05));
    worst_ap = std::max(worst_ap, ap_err);
    worst_tpr = std::max(worst_tpr, tpr_err);
    EXPECT(ap_err <= 1e-12, cat("AP mismatch ", ap_err, " on trial ", trial));
    EXPECT(tpr_err <= 1e-12, cat("TPR mismatch ", tpr_err, " on trial ", trial));
  }
  return cat("1000 sets, max |dAP|=", worst_ap, ", max |dTPR|=", worst_tpr);
}

// C2: over >= 500 reconstructions: 100% dimension preservation, bijective
// pair linkage, nonzero residual.
std::string c2_alignment_invariants() {
  const Fixtures& fx = fixtures();
  const DatasetManifest& ds = fx.train_ds;

  std::vector<const ImageRecord*> fakes;
  for (const auto& r : ds.records)
    if (r.label == Label::fake) fakes.push_back(&r);
  EXPECT(fakes.size() >= 500, cat("only ", fakes.size(), " reconstructions"));

  std::set<std::string> used;
  size_t checked = 0;
  double residual_sum = 0.0;
  for (const ImageRecord* f : fakes) {
    EXPECT(f->pair_id.has_value(), cat(f->id, " has no pair link"));
    const ImageRecord* real = ds.find(*f->pair_id);
    EXPECT(real && real->label == Label::real, cat(f->id, " pair broken"));
    EXPECT(used.insert(real->id).second, cat(real->id, " linked twice"));
    EXPECT(real->width_px == f->width_px && real->height_px == f->height_px,
           cat(f->id, " dimension mismatch"));

    if (checked < 500) {
      cv::Mat a = load_image(ds.abs_path(*real));
      cv::Mat b = load_image(ds.abs_path(*f));
      EXPECT(!a.empty() && !b.empty(), "decode failure");
      EXPECT(a.cols == b.cols && a.rows == b.rows, "on-disk dimension mismatch");
      const double res = cv::norm(a, b, cv::NORM_L1) /
                         (255.0 * a.rows * a.cols * 3);
      EXPECT(res > 0.0, cat(f->id, " reconstruction is the identity"));
      residual_sum += res;
      ++checked;
    }
  }
  return cat(fakes.size(), " pairs bijective, 500 residuals checked, mean |res| ",
             residual_sum / static_cast<double>(checked));
}

// C3: 1,000 Sync batches share params within pairs with opposite labels;
// Random batches draw >= 99% distinct param sets.
std::string c3_sync_batches() {
  const Fixtures& fx = fixtures();
  AugmentationPolicy policy = paper_policy();
  ImageCache cache;
  Rng rng(31337);

  for (int b = 0; b < 1000; ++b) {
    Rng brng = rng.derive("sync", b);
    Batch batch = compose_batch(fx.train_ds, BatchVariant::Sync, policy, 16,
                                brng, &cache);
    for (size_t i = 0; i < batch.labels.size(); i += 2) {
      EXPECT(batch.params_audit[i] == batch.params_audit[i + 1],
             cat("batch ", b, " slot ", i, ": params differ within pair"));
      EXPECT(batch.labels[i] == 0.0f && batch.labels[i + 1] == 1.0f,
             cat("batch ", b, " slot ", i, ": labels not opposite"));
    }
  }

  size_t total = 0, distinct_total = 0;
  for (int b = 0; b < 100; ++b) {
    Rng brng = rng.derive("random", b);
    Batch batch = compose_batch(fx.train_ds, BatchVariant::Random, policy, 64,
                                brng, &cache);
    std::set<std::string> distinct;
    for (const auto& p : batch.params_audit) distinct.insert(p.to_json());
    total += batch.params_audit.size();
    distinct_total += distinct.size();
  }
  const double frac = static_cast<double>(distinct_total) / total;
  EXPECT(frac >= 0.99, cat("only ", frac, " of Random params distinct"));
  return cat("1000 Sync batches pair-exact; Random distinct fraction ", frac);
}

// C4: textures -> toy autoencoder -> aligned pairs -> small-cnn (Sync);
// held-out AP >= 0.95 and calibrated accuracy >= 0.90.
std::string c4_desk_scale_detection() {
  const Fixtures& fx = fixtures();

  BackboneConfig backbone;
  backbone.family = BackboneFamily::small_cnn;
  backbone.small_cnn_widths = {16, 32, 32, 64};
  backbone.init_seed = 5;

  TrainConfig cfg;
  cfg.batch_size = 128;
  cfg.composer = BatchVariant::Sync;
  cfg.policy = paper_policy();
  cfg.max_epochs = 12;
  cfg.seed = 6;

  auto det = build_detector(backbone);
  DetectorCheckpoint ckpt = train(det, fx.train_ds, fx.val_ds, cfg);
  save_checkpoint(ckpt, g_work / "c4_checkpoint");

  ScoreSet test_scores = score(*ckpt.detector, fx.test_ds, cfg.policy.train_crop_side);
  const double ap = average_precision(test_scores);

  ScoreSet val_scores = score(*ckpt.detector, fx.val_ds, cfg.policy.train_crop_side);
  const double threshold =
      std::clamp(calibrate_threshold(val_scores), 1e-9, 1.0 - 1e-9);
  const double acc = accuracy_at_threshold(test_scores, threshold).overall;

  EXPECT(ap >= 0.95, cat("held-out AP ", ap, " < 0.95"));
  EXPECT(acc >= 0.90, cat("calibrated accuracy ", acc, " < 0.90"));
  return cat("AP ", ap, ", calibrated acc ", acc, " (t=", threshold,
             "), best val ", ckpt.best_accuracy, " @ epoch ", ckpt.best_epoch,
             "; pipeline incl. fixtures ", fx.build_seconds, "s extra");
}

// C5: misaligned training (reals at native sizes, fakes at one fixed side)
// vs aligned training on the same textures; under the resize sweep the
// misaligned fake-score drop from 1.0 to 0.5 exceeds the aligned drop by
// >= 0.10.
std::string c5_spurious_direction() {
  const Fixtures& fx = fixtures();
  const fs::path root = g_work / "c5";

  // Mixed native sizes, multiples of 8 in [128, 192].
  info("[c5] rendering mixed-size textures");
  fs::create_directories(root / "src");
  Rng rng(555);
  const int n = 360;
  for (int i = 0; i < n; ++i) {
    Rng r = rng.derive("tex", i);
    const int side = 128 + 8 * r.uniform_int(0, 8);
    TextureProgram prog;
    cv::Mat img;
    for (int attempt = 0; attempt < 10; ++attempt) {
      prog = sample_program(r, {3, 6});
      img = render(prog, side, side);
      if (!is_near_constant(img)) break;
    }
    char name[32];
    std::snprintf(name, sizeof name, "t%04d.jpg", i);
    save_image(root / "src" / name, img, ContainerFormat::jpeg,
               r.uniform_int(70, 100));
  }
  DatasetManifest reals = ingest_directory(root / "src", Label::real, "mixed");
  auto splits = split_manifest(reals, {0.85, 0.15}, 3);

  SavePolicy policy = SavePolicy::parse("jpeg:70-100");
  auto& ae = *fx.autoencoder;
  DatasetManifest aligned_train =
      reconstruct_dataset(ae, splits[0], root / "aligned", policy, 21);
  DatasetManifest held_out =
      reconstruct_dataset(ae, splits[1], root / "held", policy, 22);

  // Misaligned variant: same reals, fakes downsampled to the rrc output side
  // so fake crops only ever upscale (the reals mostly downscale).
  DatasetManifest fakes_only;
  fakes_only.root = aligned_train.root;
  fakes_only.meta = aligned_train.meta;
  for (const auto& r : aligned_train.records)
    if (r.label == Label::fake) fakes_only.records.push_back(r);
  DatasetManifest fakes_fixed = downsample_to_fixed(fakes_only, 64, root / "fixed");

  DatasetManifest misaligned_train;
  misaligned_train.root = root;
  for (const auto& r : aligned_train.records) {
    if (r.label != Label::real) continue;
    ImageRecord nr = r;
    nr.path = (fs::path("aligned") / r.path).lexically_normal().generic_string();
    misaligned_train.records.push_back(nr);
  }
  for (const auto& r : fakes_fixed.records) {
    ImageRecord nr = r;
    nr.path = (fs::path("fixed") / r.path).generic_string();
    nr.pair_id.reset();  // dims differ; this is the point
    misaligned_train.records.push_back(nr);
  }

  AugmentationPolicy aug;
  aug.rrc_out_side = 64;
  aug.train_crop_side = 32;

  BackboneConfig backbone;
  backbone.family = BackboneFamily::small_cnn;
  backbone.small_cnn_widths = {16, 32, 32};
  backbone.init_seed = 12;

  TrainConfig cfg;
  cfg.batch_size = 32;
  cfg.policy = aug;
  cfg.max_epochs = 20;
  cfg.seed = 13;

  info("[c5] training the aligned detector (Sync)");
  cfg.composer = BatchVariant::Sync;
  auto aligned_det = build_detector(backbone);
  train(aligned_det, aligned_train, held_out, cfg);

  info("[c5] training the misaligned detector (Random)");
  cfg.composer = BatchVariant::Random;
  BackboneConfig backbone2 = backbone;
  backbone2.init_seed = 14;
  auto misaligned_det = build_detector(backbone2);
  train(misaligned_det, misaligned_train, held_out, cfg);

  // Held-out fakes at native sizes, swept over resize scales.
  DatasetManifest held_fakes;
  held_fakes.root = held_out.root;
  for (const auto& r : held_out.records)
    if (r.label == Label::fake) held_fakes.records.push_back(r);

  SweepSpec spec;
  spec.kind = SweepKind::resize_scale;
  spec.levels = {0.25, 0.5, 0.75, 1.0};
  spec.min_score_side = aug.train_crop_side;

  SweepCurve mis = sweep(*misaligned_det, held_fakes, spec);
  SweepCurve ali = sweep(*aligned_det, held_fakes, spec);
  export_curve(mis, root / "misaligned_curve.csv");
  export_curve(ali, root / "aligned_curve.csv");
  render_plot(mis, root / "misaligned_curve.png");
  render_plot(ali, root / "aligned_curve.png");

  const double mis_drop = mis.mean_scores[3] - mis.mean_scores[1];
  const double ali_drop = ali.mean_scores[3] - ali.mean_scores[1];
  EXPECT(mis_drop - ali_drop >= 0.10,
         cat("drop gap ", mis_drop - ali_drop, " < 0.10 (misaligned ", mis_drop,
             ", aligned ", ali_drop, ")"));
  return cat("fake-score drop 1.0->0.5: misaligned ", mis_drop, ", aligned ",
             ali_drop, ", gap ", mis_drop - ali_drop);
}

// C6: frozen validation scorer -> exactly two /10 drops and termination
// after the third 10-epoch window.
std::string c6_lr_schedule() {
  const fs::path root = g_work / "c6";
  TextureDatasetOptions opt;
  opt.n = 4;
  opt.side = 48;
  opt.seed = 61;
  DatasetManifest reals = generate_texture_dataset(opt, root / "tex");
  auto ae = load_external_autoencoder("seeded:f=4,ch=4,seed=6");
  DatasetManifest ds = reconstruct_dataset(*ae, reals, root / "ds", SavePolicy{}, 1);

  AugmentationPolicy aug;
  aug.jpeg_prob = aug.blur_prob = aug.grayscale_prob = 0.0;
  aug.cutout_prob = aug.noise_prob = 0.0;
  aug.rrc_area_lo = 50.0;
  aug.rrc_out_side = 48;
  aug.train_crop_side = 32;

  BackboneConfig backbone;
  backbone.small_cnn_widths = {4, 8};

  TrainConfig cfg;
  cfg.batch_size = 4;
  cfg.composer = BatchVariant::Sync;
  cfg.policy = aug;
  cfg.max_epochs = 500;

  auto det = build_detector(backbone);
  DetectorCheckpoint ckpt = train(
      det, ds, ds, cfg, [](Detector&, const DatasetManifest&) { return 0.5; });

  EXPECT(ckpt.history.size() == 30,
         cat("expected 30 epochs, got ", ckpt.history.size()));
  int drops = 0;
  for (size_t e = 1; e < ckpt.history.size(); ++e) {
    const double prev = ckpt.history[e - 1].lr, cur = ckpt.history[e].lr;
    EXPECT(cur <= prev, "lr increased");
    if (cur < prev) {
      EXPECT(std::abs(prev / cur - 10.0) < 1e-9, "drop is not /10");
      ++drops;
    }
    EXPECT(cur >= 1e-6 * (1.0 - 1e-12), "epoch ran below the terminal lr");
  }
  EXPECT(drops == 2, cat("expected 2 drops, got ", drops));
  auto near = [](double a, double b) { return std::abs(a - b) <= 1e-12 * b; };
  EXPECT(near(ckpt.history[0].lr, 1e-4) && near(ckpt.history[9].lr, 1e-4) &&
             near(ckpt.history[10].lr, 1e-5) && near(ckpt.history[19].lr, 1e-5) &&
             near(ckpt.history[20].lr, 1e-6) && near(ckpt.history.back().lr, 1e-6),
         "trajectory is not 1e-4 -> 1e-5 -> 1e-6");
  return "30 epochs, drops at 10 and 20, terminal lr 1e-6";
}

// C7: bundled configs give denoise/reconstruct >= 10 at T=50, text share
// < 5% of the U-Net term, and layer counts match the multiply oracle on 50
// random small layers.
std::string c7_mac_ratio() {
  const fs::path dir = fs::path(AEF_SOURCE_DIR) / "configs" / "ldm";
  NetworkCostConfig enc = load_cost_config(dir / "encoder.json");
  NetworkCostConfig dec = load_cost_config(dir / "decoder.json");
  NetworkCostConfig unet = load_cost_config(dir / "unet.json");
  NetworkCostConfig text = load_cost_config(dir / "text_encoder.json");

  MacReport r = pipeline_macs(enc, dec, &unet, &text, 50, 1, PipelineMode::both);
  EXPECT(r.ratio.has_value(), "ratio missing");
  EXPECT(*r.ratio >= 10.0, cat("ratio ", *r.ratio, " < 10"));
  const double text_share =
      static_cast<double>(r.component_macs.at("text-encoder")) /
      (50.0 * static_cast<double>(r.component_macs.at("unet")));
  EXPECT(text_share < 0.05, cat("text share ", text_share, " >= 5%"));

  Rng rng(71);
  for (int trial = 0; trial < 50; ++trial) {
    Rng rr = rng.derive("layer", trial);
    LayerDesc d;
    switch (trial % 3) {
      case 0:
        d.type = LayerDesc::Type::conv;
        d.in_c = rr.uniform_int(1, 4);
        d.out_c = rr.uniform_int(1, 4);
        d.k = std::vector<int>{1, 3, 5}[rr.uniform_int(0, 2)];
        d.stride = rr.uniform_int(1, 2);
        d.in_h = rr.uniform_int(d.k, 9);
        d.in_w = rr.uniform_int(d.k, 9);
        d.pad = rr.bernoulli(0.5) ? -1 : rr.uniform_int(0, 2);
        EXPECT(macs_for_layer(d) == oracle::conv_multiplies(d),
               cat("conv count mismatch on trial ", trial));
        break;
      case 1:
        d.type = LayerDesc::Type::linear;
        d.in_dim = rr.uniform_int(1, 24);
        d.out_dim = rr.uniform_int(1, 24);
        d.tokens = rr.uniform_int(1, 8);
        EXPECT(macs_for_layer(d) == oracle::linear_multiplies(d),
               cat("linear count mismatch on trial ", trial));
        break;
      case 2:
        d.type = LayerDesc::Type::attention;
        d.dim = rr.uniform_int(1, 12);
        d.heads = rr.uniform_int(1, 4);
        d.tokens = rr.uniform_int(1, 10);
        EXPECT(macs_for_layer(d) == oracle::attention_multiplies(d),
               cat("attention count mismatch on trial ", trial));
        break;
    }
  }
  return cat("ratio ", *r.ratio, ", text share ", text_share * 100,
             "%, 50 layer counts exact");
}

// C8: identity sweep levels reproduce unperturbed scores bit for bit;
// fixed-seed sweeps and post-processed sets hash identically across runs.
std::string c8_sweep_exactness() {
  const fs::path root = g_work / "c8";
  TextureDatasetOptions opt;
  opt.n = 24;
  opt.side = 64;
  opt.seed = 81;
  DatasetManifest m = generate_texture_dataset(opt, root / "tex");

  BackboneConfig backbone;
  backbone.small_cnn_widths = {8, 16};
  backbone.init_seed = 82;
  auto det = build_detector(backbone);

  std::vector<cv::Mat> originals;
  for (const auto& r : m.records) originals.push_back(load_image(m.abs_path(r)));
  const std::vector<double> base = score_images(*det, originals);
  double base_mean = 0.0;
  for (double s : base) base_mean += s;
  base_mean /= static_cast<double>(base.size());

  SweepSpec spec;
  spec.min_score_side = 16;
  struct IdentityCase {
    SweepKind kind;
    std::vector<double> levels;
    size_t identity_index;
  };
  for (const IdentityCase& c :
       {IdentityCase{SweepKind::resize_scale, {0.5, 1.0}, 1},
        IdentityCase{SweepKind::blur_sigma, {0.0, 2.0}, 0},
        IdentityCase{SweepKind::noise_sigma, {0.0, 8.0}, 0},
        IdentityCase{SweepKind::jpeg_quality, {50.0, 100.0}, 1},
        IdentityCase{SweepKind::webp_quality, {50.0, 100.0}, 1}}) {
    spec.kind = c.kind;
    spec.levels = c.levels;
    spec.seed = 83;
    SweepCurve curve = sweep(*det, m, spec);
    EXPECT(curve.mean_scores[c.identity_index] == base_mean,
           cat(to_string(c.kind), ": identity level diverges"));
    for (size_t i = 0; i < base.size(); ++i)
      EXPECT(curve.per_image[c.identity_index][i] == base[i],
             cat(to_string(c.kind), ": per-image identity diverges"));

    SweepCurve again = sweep(*det, m, spec);
    for (size_t li = 0; li < curve.mean_scores.size(); ++li)
      EXPECT(curve.mean_scores[li] == again.mean_scores[li],
             cat(to_string(c.kind), ": sweep not reproducible"));
  }

  PostProcessPolicy policy;
  policy.jpeg_prob = 0.6;
  policy.resize_prob = 0.6;
  policy.blur_prob = 0.4;
  policy.jitter_prob = 0.4;
  policy.seed = 84;
  DatasetManifest p1 = build_postprocessed_manifest(m, policy, root / "p1");
  DatasetManifest p2 = build_postprocessed_manifest(m, policy, root / "p2");
  for (size_t i = 0; i < p1.records.size(); ++i)
    EXPECT(p1.records[i].content_hash == p2.records[i].content_hash,
           cat("post-process hash differs for ", p1.records[i].id));
  return "5 identity levels bit-exact; sweeps and post-processed sets reproducible";
}

// C9: dataset-size protocol at {250, 1000} pairs; TPR@5FPR nondecreasing in
// size for the Sync (aligned) variant within 2 points.
std::string c9_dataset_size_protocol() {
  const Fixtures& fx = fixtures();
  const fs::path root = g_work / "c9";
  fs::create_directories(root);
  write_manifest(fx.train_ds, root / "train.jsonl");
  write_manifest(fx.val_ds, root / "val.jsonl");
  write_manifest(fx.test_ds, root / "test.jsonl");

  RecipeConfig cfg;
  cfg.seed = 91;
  cfg.train_manifest = root / "train.jsonl";
  cfg.val_manifest = root / "val.jsonl";
  cfg.test_manifest = root / "test.jsonl";
  cfg.sizes = {250, 1000};
  cfg.variants = {BatchVariant::Random, BatchVariant::Sync};
  cfg.backbone.family = BackboneFamily::small_cnn;
  cfg.backbone.small_cnn_widths = {16, 32, 32, 64};
  cfg.train_base.batch_size = 32;
  cfg.train_base.max_epochs = 8;
  cfg.train_base.policy = paper_policy();
  cfg.target_fpr = 0.05;

  RecipeResult result = experiment_recipe(cfg, root / "out");
  EXPECT(result.cells.size() == 4, "expected a 4-cell table");
  double sync_small = -1.0, sync_large = -1.0;
  for (const auto& cell : result.cells) {
    EXPECT(!cell.failed, cat("cell size=", cell.size, " failed"));
    if (cell.variant == BatchVariant::Sync) {
      (cell.size == 250 ? sync_small : sync_large) = cell.tpr_at_fpr;
    }
  }
  EXPECT(sync_large >= sync_small - 0.02,
         cat("TPR@5FPR decreased with size: ", sync_small, " -> ", sync_large));
  return cat("Sync TPR@5FPR ", sync_small, " (250) -> ", sync_large,
             " (1000); table at ", (root / "out" / "table.csv").string());
}

// C10: calibrated threshold dominates 0.5 and matches the 10,001-point grid.
std::string c10_calibration_dominance() {
  Rng rng(101010);
  for (int trial = 0; trial < 200; ++trial) {
    Rng r = rng.derive("cal", trial);
    const size_t n = 20 + r.uniform_u64(481);
    ScoreSet s = oracle::random_scoreset(r, n, trial % 2 == 0);
    const double t = calibrate_threshold(s);
    const double acc = oracle::accuracy_at(s, t);
    EXPECT(acc + 1e-12 >= oracle::accuracy_at(s, 0.5),
           cat("trial ", trial, ": calibrated accuracy below 0.5-threshold"));
    EXPECT(acc + 1e-12 >= oracle::grid_max_accuracy(s),
           cat("trial ", trial, ": calibrated accuracy below the grid max"));
  }
  return "200 sets: calibrated accuracy dominates 0.5 and the 10,001-point grid";
}

struct Criterion {
  int number;
  const char* name;
  std::function<std::string()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const char* env_work = std::getenv("AEF_ACCEPT_WORK");
  g_work = env_work ? fs::path(env_work)
                    : fs::temp_directory_path() / "aef_acceptance";
  fs::remove_all(g_work);
  fs::create_directories(g_work);

  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  // Shared pipeline artifacts are built up front so per-criterion timings
  // measure the criterion itself; the build cost is reported on its own and
  // belongs to the C4 pipeline budget.
  const bool needs_fixtures =
      selected.empty() || selected.count(2) || selected.count(3) ||
      selected.count(4) || selected.count(5) || selected.count(9);
  if (needs_fixtures) fixtures();

  const std::vector<Criterion> criteria = {
      {1, "metric-oracle-equivalence", c1_metric_oracles},
      {2, "alignment-invariants", c2_alignment_invariants},
      {3, "sync-batch-contract", c3_sync_batches},
      {4, "desk-scale-detection", c4_desk_scale_detection},
      {5, "spurious-feature-direction", c5_spurious_direction},
      {6, "lr-schedule-conformance", c6_lr_schedule},
      {7, "mac-ratio", c7_mac_ratio},
      {8, "sweep-harness-exactness", c8_sweep_exactness},
      {9, "dataset-size-protocol", c9_dataset_size_protocol},
      {10, "calibration-dominance", c10_calibration_dominance},
  };

  int failures = 0;
  for (const auto& c : criteria) {
    if (!selected.empty() && !selected.count(c.number)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      const std::string detail = c.run();
      const double secs =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
              .count();
      std::printf("[PASS] C%-2d %-28s (%.1fs) %s\n", c.number, c.name, secs,
                  detail.c_str());
    } catch (const std::exception& e) {
      const double secs =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
              .count();
      std::printf("[FAIL] C%-2d %-28s (%.1fs) %s\n", c.number, c.name, secs,
                  e.what());
      ++failures;
    }
    std::fflush(stdout);
  }
  if (failures) std::printf("%d criterion(s) failed\n", failures);
  return failures == 0 ? 0 : 1;
}
