#include "aef/cli.hpp"

#include "aef/accounting.hpp"
#include "aef/autoencoder.hpp"
#include "aef/evaluation.hpp"
#include "aef/log.hpp"
#include "aef/plot.hpp"
#include "aef/robustness.hpp"
#include "aef/textures.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <sstream>

namespace aef {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

AugmentationPolicy policy_from_json(const ordered_json& j) {
  return AugmentationPolicy::from_json_string(j.dump());
}

BackboneConfig backbone_from_json(const ordered_json& j) {
  BackboneConfig c;
  const std::string fam = j.value("family", "small-cnn");
  if (fam == "resnet50-like") c.family = BackboneFamily::resnet50_like;
  else if (fam == "small-cnn") c.family = BackboneFamily::small_cnn;
  else throw UserError(cat("unknown backbone family: ", fam));
  c.stem_downsampling_removed = j.value("stem_downsampling_removed", false);
  c.init = j.value("init", std::string("random"));
  c.init_seed = j.value("init_seed", uint64_t{0});
  if (j.contains("small_cnn_widths"))
    c.small_cnn_widths = j["small_cnn_widths"].get<std::vector<int>>();
  return c;
}

TrainConfig train_config_from_json(const ordered_json& j) {
  TrainConfig c;
  c.batch_size = j.value("batch_size", c.batch_size);
  c.initial_lr = j.value("initial_lr", c.initial_lr);
  const std::string composer = j.value("composer", "Sync");
  if (composer == "Sync") c.composer = BatchVariant::Sync;
  else if (composer == "Random") c.composer = BatchVariant::Random;
  else throw UserError(cat("unknown composer: ", composer));
  c.max_epochs = j.value("max_epochs", c.max_epochs);
  c.seed = j.value("seed", uint64_t{0});
  if (j.contains("patience")) {
    const auto& pj = j["patience"];
    c.patience.improve_delta = pj.value("improve_delta", c.patience.improve_delta);
    c.patience.window = pj.value("window", c.patience.window);
    c.patience.decay = pj.value("decay", c.patience.decay);
    c.patience.terminal_lr = pj.value("terminal_lr", c.patience.terminal_lr);
  }
  if (j.contains("augmentation")) c.policy = policy_from_json(j["augmentation"]);
  return c;
}

DatasetManifest subsample_pairs(const DatasetManifest& m, size_t n_pairs,
                                uint64_t seed) {
  std::map<std::string, size_t> real_by_id;
  for (size_t i = 0; i < m.records.size(); ++i)
    if (m.records[i].label == Label::real) real_by_id[m.records[i].id] = i;
  std::vector<std::pair<size_t, size_t>> pairs;
  for (size_t i = 0; i < m.records.size(); ++i) {
    const auto& r = m.records[i];
    if (r.label != Label::fake || !r.pair_id) continue;
    auto it = real_by_id.find(*r.pair_id);
    if (it != real_by_id.end()) pairs.push_back({it->second, i});
  }
  if (pairs.size() < n_pairs)
    throw UserError(cat("subsample: asked for ", n_pairs, " pairs, have ",
                        pairs.size()));
  Rng rng = Rng(seed).derive("subsample");
  rng.shuffle(pairs);
  pairs.resize(n_pairs);

  DatasetManifest out;
  out.root = m.root;
  out.meta = m.meta;
  out.meta["subsample_pairs"] = std::to_string(n_pairs);
  out.meta["subsample_seed"] = std::to_string(seed);
  for (const auto& [ri, fi] : pairs) {
    out.records.push_back(m.records[ri]);
    out.records.push_back(m.records[fi]);
  }
  std::sort(out.records.begin(), out.records.end(),
            [](const ImageRecord& a, const ImageRecord& b) { return a.path < b.path; });
  return out;
}

RecipeConfig recipe_config_from_file(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw UserError(cat("cannot read recipe config: ", p.string()));
  ordered_json j = ordered_json::parse(in);
  RecipeConfig cfg;
  cfg.seed = j.value("seed", uint64_t{0});
  cfg.train_manifest = j.at("train_manifest").get<std::string>();
  cfg.val_manifest = j.at("val_manifest").get<std::string>();
  cfg.test_manifest = j.at("test_manifest").get<std::string>();
  cfg.sizes = j.at("sizes").get<std::vector<int>>();
  if (j.contains("variants")) {
    cfg.variants.clear();
    for (const auto& v : j["variants"]) {
      const std::string s = v.get<std::string>();
      if (s == "Random") cfg.variants.push_back(BatchVariant::Random);
      else if (s == "Sync") cfg.variants.push_back(BatchVariant::Sync);
      else throw UserError(cat("unknown variant: ", s));
    }
  }
  if (j.contains("backbone")) cfg.backbone = backbone_from_json(j["backbone"]);
  if (j.contains("train")) cfg.train_base = train_config_from_json(j["train"]);
  cfg.target_fpr = j.value("target_fpr", 0.05);
  return cfg;
}

static const char* variant_name(BatchVariant v) {
  return v == BatchVariant::Sync ? "Sync" : "Random";
}

RecipeResult experiment_recipe(const RecipeConfig& cfg, const fs::path& out_dir) {
  DatasetManifest train_m = read_manifest(cfg.train_manifest);
  DatasetManifest val_m = read_manifest(cfg.val_manifest);
  DatasetManifest test_m = read_manifest(cfg.test_manifest);
  fs::create_directories(out_dir);

  RecipeResult result;
  std::ostringstream csv;
  csv << "size";
  for (auto v : cfg.variants) csv << "," << variant_name(v);
  csv << "\n";

  for (int size : cfg.sizes) {
    csv << size;
    DatasetManifest sub = subsample_pairs(
        train_m, static_cast<size_t>(size),
        Rng(cfg.seed).derive("size", static_cast<uint64_t>(size)).next_u64());
    for (auto variant : cfg.variants) {
      RecipeCell cell;
      cell.size = size;
      cell.variant = variant;
      try {
        BackboneConfig bc = cfg.backbone;
        bc.init_seed = Rng(cfg.seed)
                           .derive("cell-init", static_cast<uint64_t>(size),
                                   static_cast<uint64_t>(variant))
                           .next_u64();
        TrainConfig tc = cfg.train_base;
        tc.composer = variant;
        tc.seed = Rng(cfg.seed)
                      .derive("cell-train", static_cast<uint64_t>(size),
                              static_cast<uint64_t>(variant))
                      .next_u64();
        auto det = build_detector(bc);
        DetectorCheckpoint ckpt = train(det, sub, val_m, tc);
        ScoreSet scores = score(*ckpt.detector, test_m, tc.policy.train_crop_side);
        cell.tpr_at_fpr = tpr_at_fpr(scores, cfg.target_fpr);
        cell.average_precision = average_precision(scores);
        info(cat("recipe cell size=", size, " variant=", variant_name(variant),
                 " tpr@", cfg.target_fpr, "=", cell.tpr_at_fpr));
      } catch (const std::exception& e) {
        warn(cat("recipe cell size=", size, " variant=", variant_name(variant),
                 " failed: ", e.what()));
        cell.failed = true;
      }
      result.cells.push_back(cell);
      char buf[32];
      if (cell.failed) {
        csv << ",failed";
      } else {
        std::snprintf(buf, sizeof buf, "%.6f", cell.tpr_at_fpr);
        csv << "," << buf;
      }
    }
    csv << "\n";
  }
  result.table_csv = csv.str();

  std::ofstream(out_dir / "table.csv") << result.table_csv;
  std::ofstream cells(out_dir / "cells.jsonl");
  for (const auto& c : result.cells) {
    ordered_json j;
    j["size"] = c.size;
    j["variant"] = variant_name(c.variant);
    j["failed"] = c.failed;
    if (!c.failed) {
      j["tpr_at_fpr"] = c.tpr_at_fpr;
      j["average_precision"] = c.average_precision;
    }
    cells << j.dump() << "\n";
  }
  return result;
}

// ---------------------------------------------------------------------------
// Subcommand wiring

static void write_snapshot(const fs::path& dir, const ordered_json& effective,
                           int argc, const char* const* argv) {
  ordered_json j;
  j["argv"] = ordered_json::array();
  for (int i = 0; i < argc; ++i) j["argv"].push_back(argv[i]);
  j["config"] = effective;
  fs::create_directories(dir);
  std::ofstream(dir / "run_config.json") << j.dump(2) << "\n";
}

static void require_file(const fs::path& p, const std::string& what) {
  if (!fs::exists(p)) throw UserError(cat(what, " not found: ", p.string()));
}

static ordered_json load_json_file(const fs::path& p, const std::string& what) {
  std::ifstream in(p);
  if (!in) throw UserError(cat("cannot read ", what, ": ", p.string()));
  return ordered_json::parse(in);
}

int run_subcommand(int argc, const char* const* argv) {
  CLI::App app{"aligned real/fake dataset construction and detector toolkit"};
  app.require_subcommand(1);
  std::function<int()> action;

  // ingest
  {
    auto* cmd = app.add_subcommand("ingest", "catalog a directory of images");
    auto root = std::make_shared<std::string>();
    auto label = std::make_shared<std::string>("real");
    auto source = std::make_shared<std::string>("unspecified");
    auto out = std::make_shared<std::string>();
    cmd->add_option("--root", *root, "image directory")->required();
    cmd->add_option("--label", *label, "real|fake");
    cmd->add_option("--source", *source, "source tag");
    cmd->add_option("--out", *out, "manifest file to write")->required();
    cmd->callback([=, &action]() {
      action = [=]() {
        auto l = label_from_string(*label);
        if (!l) throw UserError(cat("bad label: ", *label));
        DatasetManifest m = ingest_directory(*root, *l, *source);
        write_manifest(m, *out);
        info(cat("ingested ", m.records.size(), " records -> ", *out));
        return 0;
      };
    });
  }

  // gen-textures
  {
    auto* cmd = app.add_subcommand("gen-textures", "generate procedural textures");
    auto opt = std::make_shared<TextureDatasetOptions>();
    auto quality = std::make_shared<std::string>("70:100");
    auto out = std::make_shared<std::string>();
    cmd->add_option("--n", opt->n, "image count")->required();
    cmd->add_option("--side", opt->side, "square side in px");
    cmd->add_option("--quality", *quality, "jpeg quality range lo:hi");
    cmd->add_option("--seed", opt->seed, "seed");
    cmd->add_option("--out", *out, "output directory")->required();
    cmd->callback([=, &action, argc, argv]() {
      action = [=]() {
        const size_t colon = quality->find(':');
        if (colon == std::string::npos)
          throw UserError(cat("bad quality range (want lo:hi): ", *quality));
        opt->jpeg_quality_lo = std::stoi(quality->substr(0, colon));
        opt->jpeg_quality_hi = std::stoi(quality->substr(colon + 1));
        DatasetManifest m = generate_texture_dataset(*opt, *out);
        write_manifest(m, fs::path(*out) / "manifest.jsonl");
        ordered_json eff;
        eff["n"] = opt->n;
        eff["side"] = opt->side;
        eff["quality"] = {opt->jpeg_quality_lo, opt->jpeg_quality_hi};
        eff["seed"] = opt->seed;
        write_snapshot(*out, eff, argc, argv);
        info(cat("wrote ", m.records.size(), " textures under ", *out));
        return 0;
      };
    });
  }

  // reconstruct
  {
    auto* cmd = app.add_subcommand("reconstruct", "encode-decode a real manifest");
    auto manifest = std::make_shared<std::string>();
    auto ae_spec = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto policy = std::make_shared<std::string>("match");
    auto seed = std::make_shared<uint64_t>(0);
    cmd->add_option("--manifest", *manifest, "real manifest")->required();
    cmd->add_option("--ae", *ae_spec, "autoencoder spec")->required();
    cmd->add_option("--out", *out, "output directory")->required();
    cmd->add_option("--save-policy", *policy, "match | jpeg:lo-hi");
    cmd->add_option("--seed", *seed, "seed");
    cmd->callback([=, &action, argc, argv]() {
      action = [=]() {
        require_file(*manifest, "manifest");
        DatasetManifest m = read_manifest(*manifest);
        auto ae = load_external_autoencoder(*ae_spec);
        SavePolicy sp = SavePolicy::parse(*policy);
        DatasetManifest fakes = reconstruct_dataset(*ae, m, *out, sp, *seed);
        write_manifest(fakes, fs::path(*out) / "manifest.jsonl");
        ordered_json eff;
        eff["ae"] = *ae_spec;
        eff["save_policy"] = sp.str();
        eff["seed"] = *seed;
        eff["source_manifest"] = *manifest;
        write_snapshot(*out, eff, argc, argv);
        info(cat("reconstructed ", fakes.records.size(), " images under ", *out));
        return 0;
      };
    });
  }

  // train-ae
  {
    auto* cmd = app.add_subcommand("train-ae", "train the toy autoencoder");
    auto manifest = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto config = std::make_shared<std::string>();
    cmd->add_option("--manifest", *manifest, "real manifest")->required();
    cmd->add_option("--out", *out, "checkpoint directory")->required();
    cmd->add_option("--config", *config, "json config (ToyAutoencoderConfig)");
    cmd->callback([=, &action, argc, argv]() {
      action = [=]() {
        require_file(*manifest, "manifest");
        ToyAutoencoderConfig cfg;
        ordered_json eff = ordered_json::object();
        if (!config->empty()) {
          ordered_json j = load_json_file(*config, "autoencoder config");
          cfg.f = j.value("f", cfg.f);
          cfg.latent_channels = j.value("latent_channels", cfg.latent_channels);
          if (j.contains("widths")) cfg.widths = j["widths"].get<std::vector<int>>();
          cfg.epochs = j.value("epochs", cfg.epochs);
          cfg.learning_rate = j.value("learning_rate", cfg.learning_rate);
          cfg.batch_size = j.value("batch_size", cfg.batch_size);
          cfg.crop_side = j.value("crop_side", cfg.crop_side);
          cfg.target_mse = j.value("target_mse", cfg.target_mse);
          cfg.seed = j.value("seed", uint64_t{0});
          eff = j;
        }
        DatasetManifest m = read_manifest(*manifest);
        ToyTrainingResult r = train_toy_autoencoder(cfg, m);
        save_autoencoder(*r.handle, *out);
        ordered_json log;
        log["held_out_mse"] = r.held_out_mse;
        log["reached_target"] = r.reached_target;
        log["epoch_mse"] = r.epoch_mse;
        std::ofstream(fs::path(*out) / "training_log.json") << log.dump(2) << "\n";
        write_snapshot(*out, eff, argc, argv);
        info(cat("autoencoder held-out mse ", r.held_out_mse, " -> ", *out));
        return 0;
      };
    });
  }

  // train
  {
    auto* cmd = app.add_subcommand("train", "train a detector");
    auto train_p = std::make_shared<std::string>();
    auto val_p = std::make_shared<std::string>();
    auto config = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    cmd->add_option("--train", *train_p, "train manifest")->required();
    cmd->add_option("--val", *val_p, "validation manifest")->required();
    cmd->add_option("--config", *config, "json config")->required();
    cmd->add_option("--out", *out, "checkpoint directory")->required();
    cmd->callback([=, &action, argc, argv]() {
      action = [=]() {
        require_file(*train_p, "train manifest");
        require_file(*val_p, "val manifest");
        require_file(*config, "config");
        ordered_json j = load_json_file(*config, "train config");
        BackboneConfig bc = j.contains("backbone")
                                ? backbone_from_json(j["backbone"])
                                : BackboneConfig{};
        TrainConfig tc = j.contains("train") ? train_config_from_json(j["train"])
                                             : TrainConfig{};
        DatasetManifest train_m = read_manifest(*train_p);
        DatasetManifest val_m = read_manifest(*val_p);
        auto det = build_detector(bc);
        DetectorCheckpoint ckpt = train(det, train_m, val_m, tc);
        save_checkpoint(ckpt, *out);
        write_snapshot(*out, j, argc, argv);
        info(cat("best val accuracy ", ckpt.best_accuracy, " at epoch ",
                 ckpt.best_epoch, " -> ", *out));
        return 0;
      };
    });
  }

  // eval
  {
    auto* cmd = app.add_subcommand("eval", "score a manifest and report metrics");
    auto ckpt_p = std::make_shared<std::string>();
    auto manifest = std::make_shared<std::string>();
    auto threshold = std::make_shared<double>(-1.0);
    auto calibrate_p = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto fpr = std::make_shared<double>(0.05);
    cmd->add_option("--checkpoint", *ckpt_p, "checkpoint directory")->required();
    cmd->add_option("--manifest", *manifest, "manifest to evaluate")->required();
    cmd->add_option("--threshold", *threshold, "decision threshold");
    cmd->add_option("--calibrate", *calibrate_p, "validation manifest for threshold");
    cmd->add_option("--target-fpr", *fpr, "FPR for the TPR metric");
    cmd->add_option("--out", *out, "output directory")->required();
    cmd->callback([=, &action, argc, argv]() {
      action = [=]() {
        require_file(fs::path(*ckpt_p) / "checkpoint.json", "checkpoint");
        require_file(*manifest, "manifest");
        if (*threshold > 0 && !calibrate_p->empty())
          throw UserError("--threshold and --calibrate are mutually exclusive");
        DetectorCheckpoint ckpt = load_checkpoint(*ckpt_p);
        const int min_side = ckpt.train_config.policy.train_crop_side;
        double t = ckpt.threshold;
        if (*threshold > 0) t = *threshold;
        if (!calibrate_p->empty()) {
          DatasetManifest val_m = read_manifest(*calibrate_p);
          ScoreSet val_scores = score(*ckpt.detector, val_m, min_side);
          t = std::clamp(calibrate_threshold(val_scores), 1e-9, 1.0 - 1e-9);
          info(cat("calibrated threshold ", t));
        }
        DatasetManifest m = read_manifest(*manifest);
        ScoreSet s = score(*ckpt.detector, m, min_side);
        EvalReport report = evaluate(s, t, *fpr);
        report.skipped = m.records.size() - s.entries.size();
        fs::create_directories(*out);
        std::ofstream(fs::path(*out) / "report.json") << report.to_json() << "\n";
        std::ofstream(fs::path(*out) / "report.csv") << report.to_csv();
        {
          std::ofstream sc(fs::path(*out) / "scores.csv");
          sc << "id,score,label,source\n";
          sc.precision(17);
          for (const auto& e : s.entries)
            sc << e.record_id << "," << e.score << "," << to_string(e.label)
               << "," << e.source_tag << "\n";
        }
        ordered_json eff;
        eff["checkpoint"] = *ckpt_p;
        eff["threshold"] = t;
        eff["target_fpr"] = *fpr;
        write_snapshot(*out, eff, argc, argv);
        info(cat("overall accuracy ", report.overall_accuracy, ", AP ",
                 report.average_precision));
        return 0;
      };
    });
  }

  // calibrate
  {
    auto* cmd = app.add_subcommand("calibrate", "pick the accuracy-maximizing threshold");
    auto ckpt_p = std::make_shared<std::string>();
    auto manifest = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    cmd->add_option("--checkpoint", *ckpt_p, "checkpoint directory")->required();
    cmd->add_option("--manifest", *manifest, "validation manifest")->required();
    cmd->add_option("--out", *out, "updated checkpoint directory")->required();
    cmd->callback([=, &action, argc, argv]() {
      action = [=]() {
        require_file(fs::path(*ckpt_p) / "checkpoint.json", "checkpoint");
        require_file(*manifest, "manifest");
        DetectorCheckpoint ckpt = load_checkpoint(*ckpt_p);
        DatasetManifest val_m = read_manifest(*manifest);
        ScoreSet s = score(*ckpt.detector, val_m,
                           ckpt.train_config.policy.train_crop_side);
        ckpt.threshold = std::clamp(calibrate_threshold(s), 1e-9, 1.0 - 1e-9);
        save_checkpoint(ckpt, *out);
        ordered_json eff;
        eff["threshold"] = ckpt.threshold;
        write_snapshot(*out, eff, argc, argv);
        info(cat("calibrated threshold ", ckpt.threshold, " -> ", *out));
        return 0;
      };
    });
  }

  // sweep
  {
    auto* cmd = app.add_subcommand("sweep", "single-axis perturbation sweep");
    auto ckpt_p = std::make_shared<std::string>();
    auto manifest = std::make_shared<std::string>();
    auto kind = std::make_shared<std::string>();
    auto grid = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto seed = std::make_shared<uint64_t>(0);
    cmd->add_option("--checkpoint", *ckpt_p, "checkpoint directory")->required();
    cmd->add_option("--manifest", *manifest, "manifest to perturb")->required();
    cmd->add_option("--kind", *kind, "resize|blur|noise|jpeg|webp|downsample")->required();
    cmd->add_option("--grid", *grid, "comma-separated levels")->required();
    cmd->add_option("--seed", *seed, "noise seed");
    cmd->add_option("--out", *out, "output directory")->required();
    cmd->callback([=, &action, argc, argv]() {
      action = [=]() {
        require_file(fs::path(*ckpt_p) / "checkpoint.json", "checkpoint");
        require_file(*manifest, "manifest");
        SweepSpec spec;
        spec.kind = sweep_kind_from_string(*kind);
        std::stringstream ss(*grid);
        std::string tok;
        while (std::getline(ss, tok, ',')) spec.levels.push_back(std::stod(tok));
        spec.seed = *seed;
        DetectorCheckpoint ckpt = load_checkpoint(*ckpt_p);
        spec.min_score_side = ckpt.train_config.policy.train_crop_side;
        DatasetManifest m = read_manifest(*manifest);
        SweepCurve curve = sweep(*ckpt.detector, m, spec);
        fs::create_directories(*out);
        export_curve(curve, fs::path(*out) / "curve.csv");
        render_plot(curve, fs::path(*out) / "curve.png");
        ordered_json eff;
        eff["kind"] = *kind;
        eff["grid"] = spec.levels;
        eff["seed"] = *seed;
        write_snapshot(*out, eff, argc, argv);
        return 0;
      };
    });
  }

  // postprocess
  {
    auto* cmd = app.add_subcommand("postprocess", "randomized corruption set");
    auto manifest = std::make_shared<std::string>();
    auto policy_p = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    cmd->add_option("--manifest", *manifest, "manifest to process")->required();
    cmd->add_option("--policy", *policy_p, "post-process policy json")->required();
    cmd->add_option("--out", *out, "output directory")->required();
    cmd->callback([=, &action, argc, argv]() {
      action = [=]() {
        require_file(*manifest, "manifest");
        require_file(*policy_p, "policy");
        PostProcessPolicy policy = PostProcessPolicy::from_json_file(*policy_p);
        policy.validate();
        DatasetManifest m = read_manifest(*manifest);
        DatasetManifest processed = build_postprocessed_manifest(m, policy, *out);
        write_manifest(processed, fs::path(*out) / "manifest.jsonl");
        ordered_json eff = ordered_json::parse(policy.str());
        write_snapshot(*out, eff, argc, argv);
        info(cat("post-processed ", processed.records.size(), " images"));
        return 0;
      };
    });
  }

  // macs
  {
    auto* cmd = app.add_subcommand("macs", "analytic MAC accounting");
    auto pipeline = std::make_shared<std::string>("both");
    auto configs = std::make_shared<std::string>();
    auto steps = std::make_shared<int>(50);
    auto n = std::make_shared<uint64_t>(1);
    auto out = std::make_shared<std::string>();
    cmd->add_option("--pipeline", *pipeline, "denoise|reconstruct|both");
    cmd->add_option("--configs", *configs, "directory of cost configs")->required();
    cmd->add_option("--steps", *steps, "denoising steps T");
    cmd->add_option("--n", *n, "image count");
    cmd->add_option("--out", *out, "report file (default stdout)");
    cmd->callback([=, &action, argc, argv]() {
      action = [=]() {
        PipelineMode mode;
        if (*pipeline == "denoise") mode = PipelineMode::denoise;
        else if (*pipeline == "reconstruct") mode = PipelineMode::reconstruct;
        else if (*pipeline == "both") mode = PipelineMode::both;
        else throw UserError(cat("unknown pipeline: ", *pipeline));
        const fs::path dir(*configs);
        require_file(dir / "encoder.json", "encoder config");
        require_file(dir / "decoder.json", "decoder config");
        NetworkCostConfig enc = load_cost_config(dir / "encoder.json");
        NetworkCostConfig dec = load_cost_config(dir / "decoder.json");
        std::optional<NetworkCostConfig> unet, text;
        if (mode != PipelineMode::reconstruct) {
          require_file(dir / "unet.json", "unet config");
          require_file(dir / "text_encoder.json", "text encoder config");
          unet = load_cost_config(dir / "unet.json");
          text = load_cost_config(dir / "text_encoder.json");
        }
        MacReport r = pipeline_macs(enc, dec, unet ? &*unet : nullptr,
                                    text ? &*text : nullptr, *steps, *n, mode);
        const std::string body = mac_report_to_json(r);
        if (out->empty()) {
          std::cout << body << "\n";
        } else {
          std::ofstream(fs::path(*out)) << body << "\n";
          ordered_json eff;
          eff["pipeline"] = *pipeline;
          eff["steps"] = *steps;
          eff["n"] = *n;
          write_snapshot(fs::path(*out).parent_path().empty()
                             ? fs::path(".")
                             : fs::path(*out).parent_path(),
                         eff, argc, argv);
        }
        return 0;
      };
    });
  }

  // recipe
  {
    auto* cmd = app.add_subcommand("recipe", "dataset-size sweep protocol");
    auto config = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    cmd->add_option("--config", *config, "recipe config json")->required();
    cmd->add_option("--out", *out, "output directory")->required();
    cmd->callback([=, &action, argc, argv]() {
      action = [=]() {
        require_file(*config, "recipe config");
        RecipeConfig cfg = recipe_config_from_file(*config);
        require_file(cfg.train_manifest, "train manifest");
        require_file(cfg.val_manifest, "val manifest");
        require_file(cfg.test_manifest, "test manifest");
        experiment_recipe(cfg, *out);
        write_snapshot(*out, load_json_file(*config, "recipe config"), argc, argv);
        return 0;
      };
    });
  }

  try {
    app.parse(argc, const_cast<char**>(argv));
  } catch (const CLI::CallForHelp& e) {
    app.exit(e);
    return 0;
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    return action();
  } catch (const UserError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace aef
