#include "aef/robustness.hpp"

#include "aef/image_io.hpp"
#include "aef/log.hpp"
#include "aef/rng.hpp"

#include <nlohmann/json.hpp>
#include <opencv2/imgproc.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

namespace aef {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

void PostProcessPolicy::validate() const {
  if (jpeg_prob + resize_prob + blur_prob + jitter_prob <= 0.0)
    throw UserError("post-process policy arms no transform");
  if (jpeg_quality_lo < 1 || jpeg_quality_hi > 100 ||
      jpeg_quality_lo > jpeg_quality_hi)
    throw UserError("post-process policy: bad jpeg quality range");
  if (resize_scale_lo <= 0.0 || resize_scale_lo > resize_scale_hi)
    throw UserError("post-process policy: bad resize scale range");
  if (blur_sigma_lo < 0.0 || blur_sigma_lo > blur_sigma_hi)
    throw UserError("post-process policy: bad blur sigma range");
  if (jitter_factor_lo <= 0.0 || jitter_factor_lo > jitter_factor_hi)
    throw UserError("post-process policy: bad jitter factor range");
}

std::string PostProcessPolicy::str() const {
  ordered_json j;
  j["jpeg"] = {{"prob", jpeg_prob}, {"quality", {jpeg_quality_lo, jpeg_quality_hi}}};
  j["resize"] = {{"prob", resize_prob}, {"scale", {resize_scale_lo, resize_scale_hi}}};
  j["blur"] = {{"prob", blur_prob}, {"sigma", {blur_sigma_lo, blur_sigma_hi}}};
  j["color_jitter"] = {{"prob", jitter_prob},
                       {"factor", {jitter_factor_lo, jitter_factor_hi}},
                       {"hue_shift", jitter_hue_shift}};
  j["seed"] = seed;
  return j.dump();
}

PostProcessPolicy PostProcessPolicy::from_json_file(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw UserError(cat("cannot read post-process policy: ", p.string()));
  ordered_json j = ordered_json::parse(in);
  PostProcessPolicy out;
  if (j.contains("jpeg")) {
    out.jpeg_prob = j["jpeg"].value("prob", 0.0);
    if (j["jpeg"].contains("quality")) {
      out.jpeg_quality_lo = j["jpeg"]["quality"][0].get<int>();
      out.jpeg_quality_hi = j["jpeg"]["quality"][1].get<int>();
    }
  }
  if (j.contains("resize")) {
    out.resize_prob = j["resize"].value("prob", 0.0);
    if (j["resize"].contains("scale")) {
      out.resize_scale_lo = j["resize"]["scale"][0].get<double>();
      out.resize_scale_hi = j["resize"]["scale"][1].get<double>();
    }
  }
  if (j.contains("blur")) {
    out.blur_prob = j["blur"].value("prob", 0.0);
    if (j["blur"].contains("sigma")) {
      out.blur_sigma_lo = j["blur"]["sigma"][0].get<double>();
      out.blur_sigma_hi = j["blur"]["sigma"][1].get<double>();
    }
  }
  if (j.contains("color_jitter")) {
    out.jitter_prob = j["color_jitter"].value("prob", 0.0);
    if (j["color_jitter"].contains("factor")) {
      out.jitter_factor_lo = j["color_jitter"]["factor"][0].get<double>();
      out.jitter_factor_hi = j["color_jitter"]["factor"][1].get<double>();
    }
    out.jitter_hue_shift = j["color_jitter"].value("hue_shift", 0.05);
  }
  out.seed = j.value("seed", uint64_t{0});
  return out;
}

static cv::Mat resize_scale(const cv::Mat& src, double scale) {
  const int w = std::max(1, static_cast<int>(std::lround(src.cols * scale)));
  const int h = std::max(1, static_cast<int>(std::lround(src.rows * scale)));
  if (w == src.cols && h == src.rows) return src.clone();
  cv::Mat dst;
  cv::resize(src, dst, cv::Size(w, h), 0, 0,
             scale < 1.0 ? cv::INTER_AREA : cv::INTER_LINEAR);
  return dst;
}

static cv::Mat gaussian_blur9(const cv::Mat& src, double sigma) {
  cv::Mat dst;
  cv::GaussianBlur(src, dst, cv::Size(9, 9), sigma, sigma);
  return dst;
}

static cv::Mat add_gaussian_noise(const cv::Mat& src, double sigma, uint64_t seed) {
  cv::Mat dst = src.clone();
  Rng rng(seed);
  for (int y = 0; y < dst.rows; ++y) {
    auto* row = dst.ptr<cv::Vec3b>(y);
    for (int x = 0; x < dst.cols; ++x)
      for (int c = 0; c < 3; ++c) {
        const double v = row[x][c] + sigma * rng.gaussian();
        row[x][c] = static_cast<uint8_t>(std::clamp(std::lround(v), 0L, 255L));
      }
  }
  return dst;
}

static cv::Mat jpeg_roundtrip(const cv::Mat& src, int quality) {
  return decode_image(encode_image(src, ContainerFormat::jpeg, quality));
}

static cv::Mat webp_roundtrip(const cv::Mat& src, int quality) {
  return decode_image(encode_image(src, ContainerFormat::webp, quality));
}

struct JitterParams {
  double brightness = 1.0, contrast = 1.0, saturation = 1.0, hue = 0.0;
};

static cv::Mat color_jitter(const cv::Mat& src, const JitterParams& p) {
  cv::Mat f;
  src.convertTo(f, CV_32FC3, 1.0 / 255.0);
  // brightness: scale; contrast: blend with the mean gray; saturation: blend
  // with the per-pixel gray; hue: rotate in HSV.
  f *= p.brightness;
  cv::Mat gray;
  cv::cvtColor(f, gray, cv::COLOR_BGR2GRAY);
  const double mean_gray = cv::mean(gray)[0];
  f = f * p.contrast + cv::Scalar::all((1.0 - p.contrast) * mean_gray);
  cv::Mat gray3;
  cv::cvtColor(gray, gray3, cv::COLOR_GRAY2BGR);
  f = f * p.saturation + gray3 * (1.0 - p.saturation);
  cv::min(f, 1.0, f);
  cv::max(f, 0.0, f);
  if (p.hue != 0.0) {
    cv::Mat hsv;
    cv::cvtColor(f, hsv, cv::COLOR_BGR2HSV);
    std::vector<cv::Mat> ch;
    cv::split(hsv, ch);
    ch[0] += static_cast<float>(p.hue * 360.0);
    for (int y = 0; y < ch[0].rows; ++y) {
      auto* row = ch[0].ptr<float>(y);
      for (int x = 0; x < ch[0].cols; ++x) {
        if (row[x] >= 360.0f) row[x] -= 360.0f;
        if (row[x] < 0.0f) row[x] += 360.0f;
      }
    }
    cv::merge(ch, hsv);
    cv::cvtColor(hsv, f, cv::COLOR_HSV2BGR);
  }
  cv::Mat out;
  f.convertTo(out, CV_8UC3, 255.0);
  return out;
}

DatasetManifest build_postprocessed_manifest(const DatasetManifest& m,
                                             const PostProcessPolicy& policy,
                                             const fs::path& out_root) {
  if (m.records.empty()) throw UserError("postprocess: empty manifest");
  fs::create_directories(out_root);

  DatasetManifest out;
  out.root = out_root;
  out.meta = m.meta;
  out.meta["postprocess_policy"] = policy.str();
  ordered_json log = ordered_json::object();

  Rng base(policy.seed);
  for (const auto& rec : m.records) {
    try {
      Rng rng = base.derive("postprocess").derive(fnv1a64(rec.id));
      const bool do_resize = rng.bernoulli(policy.resize_prob);
      const double scale = rng.uniform(policy.resize_scale_lo, policy.resize_scale_hi);
      const bool do_blur = rng.bernoulli(policy.blur_prob);
      const double sigma = rng.uniform(policy.blur_sigma_lo, policy.blur_sigma_hi);
      const bool do_jitter = rng.bernoulli(policy.jitter_prob);
      JitterParams jp;
      jp.brightness = rng.uniform(policy.jitter_factor_lo, policy.jitter_factor_hi);
      jp.contrast = rng.uniform(policy.jitter_factor_lo, policy.jitter_factor_hi);
      jp.saturation = rng.uniform(policy.jitter_factor_lo, policy.jitter_factor_hi);
      jp.hue = rng.uniform(-policy.jitter_hue_shift, policy.jitter_hue_shift);
      const bool do_jpeg = rng.bernoulli(policy.jpeg_prob);
      const int quality = rng.uniform_int(policy.jpeg_quality_lo, policy.jpeg_quality_hi);

      ImageRecord nr = rec;
      fs::create_directories((out_root / rec.path).parent_path());

      if (!do_resize && !do_blur && !do_jitter && !do_jpeg) {
        fs::copy_file(m.abs_path(rec), out_root / rec.path,
                      fs::copy_options::overwrite_existing);
        log[rec.id] = "copy";
      } else {
        cv::Mat img = load_image(m.abs_path(rec));
        if (img.empty()) throw std::runtime_error("decode failed");
        ordered_json applied = ordered_json::object();
        if (do_resize) {
          img = resize_scale(img, scale);
          applied["resize_scale"] = scale;
        }
        if (do_blur) {
          img = gaussian_blur9(img, sigma);
          applied["blur_sigma"] = sigma;
        }
        if (do_jitter) {
          img = color_jitter(img, jp);
          applied["jitter"] = {jp.brightness, jp.contrast, jp.saturation, jp.hue};
        }
        fs::path rel(rec.path);
        if (do_jpeg) {
          applied["jpeg_quality"] = quality;
          rel.replace_extension(".jpg");
          nr.container_format = ContainerFormat::jpeg;
          save_image(out_root / rel, img, ContainerFormat::jpeg, quality);
        } else {
          rel.replace_extension(".png");
          nr.container_format = ContainerFormat::png;
          save_image(out_root / rel, img, ContainerFormat::png);
        }
        nr.id = rel.generic_string();
        nr.path = rel.generic_string();
        nr.width_px = img.cols;
        nr.height_px = img.rows;
        // Resize may break the pair-dimension invariant on purpose; the
        // processed set is a test set, so the link is dropped when dims drift.
        if (nr.pair_id && (nr.width_px != rec.width_px || nr.height_px != rec.height_px))
          nr.pair_id.reset();
        log[rec.id] = applied;
      }
      nr.content_hash = sha256_file(out_root / nr.path);
      out.records.push_back(std::move(nr));
    } catch (const std::exception& e) {
      warn(cat("postprocess: skipping ", rec.id, ": ", e.what()));
    }
  }
  out.meta["transform_log"] = log.dump();
  return out;
}

std::string to_string(SweepKind k) {
  switch (k) {
    case SweepKind::resize_scale: return "resize";
    case SweepKind::blur_sigma: return "blur";
    case SweepKind::noise_sigma: return "noise";
    case SweepKind::jpeg_quality: return "jpeg";
    case SweepKind::webp_quality: return "webp";
    case SweepKind::downsample_to_fixed: return "downsample";
  }
  return "resize";
}

SweepKind sweep_kind_from_string(const std::string& s) {
  if (s == "resize") return SweepKind::resize_scale;
  if (s == "blur") return SweepKind::blur_sigma;
  if (s == "noise") return SweepKind::noise_sigma;
  if (s == "jpeg") return SweepKind::jpeg_quality;
  if (s == "webp") return SweepKind::webp_quality;
  if (s == "downsample") return SweepKind::downsample_to_fixed;
  throw UserError(cat("unknown sweep kind: ", s));
}

static bool is_identity_level(SweepKind kind, double level) {
  switch (kind) {
    case SweepKind::resize_scale: return level == 1.0;
    case SweepKind::blur_sigma:
    case SweepKind::noise_sigma: return level == 0.0;
    case SweepKind::jpeg_quality:
    case SweepKind::webp_quality: return level == 100.0;
    case SweepKind::downsample_to_fixed: return false;
  }
  return false;
}

static cv::Mat perturb(const cv::Mat& img, SweepKind kind, double level,
                       uint64_t noise_seed) {
  switch (kind) {
    case SweepKind::resize_scale: return resize_scale(img, level);
    case SweepKind::blur_sigma: return gaussian_blur9(img, level);
    case SweepKind::noise_sigma: return add_gaussian_noise(img, level, noise_seed);
    case SweepKind::jpeg_quality:
      return jpeg_roundtrip(img, static_cast<int>(level));
    case SweepKind::webp_quality:
      return webp_roundtrip(img, static_cast<int>(level));
    case SweepKind::downsample_to_fixed: {
      const int side = static_cast<int>(level);
      cv::Mat dst;
      if (img.cols == side && img.rows == side) return img.clone();
      cv::resize(img, dst, cv::Size(side, side), 0, 0,
                 side < std::min(img.cols, img.rows) ? cv::INTER_AREA
                                                     : cv::INTER_LINEAR);
      return dst;
    }
  }
  return img.clone();
}

static void check_monotone(const std::vector<double>& levels) {
  if (levels.empty()) throw UserError("sweep: empty level grid");
  if (levels.size() == 1) return;
  const bool inc = levels[1] > levels[0];
  for (size_t i = 0; i + 1 < levels.size(); ++i) {
    const bool ok = inc ? levels[i + 1] > levels[i] : levels[i + 1] < levels[i];
    if (!ok) throw UserError("sweep: level grid must be strictly monotone");
  }
}

SweepCurve sweep(Detector& det, const DatasetManifest& m, const SweepSpec& spec) {
  check_monotone(spec.levels);
  if (m.records.empty()) throw UserError("sweep: empty manifest");

  std::vector<cv::Mat> originals;
  originals.reserve(m.records.size());
  for (const auto& r : m.records) {
    cv::Mat img = load_image(m.abs_path(r));
    if (img.empty()) throw UserError(cat("sweep: cannot decode ", r.id));
    originals.push_back(std::move(img));
  }

  SweepCurve curve;
  curve.spec = spec;
  {
    int lo_w = originals[0].cols, hi_w = originals[0].cols;
    for (const auto& img : originals) {
      lo_w = std::min(lo_w, std::min(img.cols, img.rows));
      hi_w = std::max(hi_w, std::max(img.cols, img.rows));
    }
    curve.base_resolution_note = cat("native sides ", lo_w, "..", hi_w);
  }

  for (size_t li = 0; li < spec.levels.size(); ++li) {
    const double level = spec.levels[li];
    std::vector<cv::Mat> perturbed;
    perturbed.reserve(originals.size());
    bool too_small = false;
    for (size_t i = 0; i < originals.size(); ++i) {
      cv::Mat p = is_identity_level(spec.kind, level)
                      ? originals[i].clone()
                      : perturb(originals[i], spec.kind, level,
                                Rng(spec.seed)
                                    .derive("sweep-noise", li)
                                    .derive(fnv1a64(m.records[i].id))
                                    .next_u64());
      if (std::min(p.cols, p.rows) < spec.min_score_side) {
        too_small = true;
        break;
      }
      perturbed.push_back(std::move(p));
    }
    if (too_small) {
      warn(cat("sweep: level ", level, " shrinks below ", spec.min_score_side,
               "px; skipped"));
      curve.mean_scores.push_back(std::numeric_limits<double>::quiet_NaN());
      curve.per_image.push_back({});
      continue;
    }
    std::vector<double> scores = score_images(det, perturbed);
    double total = 0.0;
    for (double s : scores) total += s;
    curve.mean_scores.push_back(total / static_cast<double>(scores.size()));
    curve.per_image.push_back(std::move(scores));
  }
  return curve;
}

DatasetManifest downsample_to_fixed(const DatasetManifest& m, int side,
                                    const fs::path& out_root) {
  if (side < 1) throw UserError("downsample_to_fixed: side must be positive");
  fs::create_directories(out_root);
  DatasetManifest out;
  out.root = out_root;
  out.meta = m.meta;
  out.meta["downsample_to_fixed"] = std::to_string(side);
  for (const auto& rec : m.records) {
    cv::Mat img = load_image(m.abs_path(rec));
    if (img.empty()) {
      warn(cat("downsample: cannot decode ", rec.id, "; skipped"));
      continue;
    }
    cv::Mat resized = perturb(img, SweepKind::downsample_to_fixed,
                              static_cast<double>(side), 0);
    ImageRecord nr = rec;
    fs::path rel(rec.path);
    rel.replace_extension(".png");
    fs::create_directories((out_root / rel).parent_path());
    save_image(out_root / rel, resized, ContainerFormat::png);
    nr.id = rel.generic_string();
    nr.path = rel.generic_string();
    nr.width_px = side;
    nr.height_px = side;
    nr.container_format = ContainerFormat::png;
    nr.content_hash = sha256_file(out_root / rel);
    out.records.push_back(std::move(nr));
  }
  return out;
}

void export_curve(const SweepCurve& c, const fs::path& out) {
  if (c.mean_scores.empty()) throw UserError("export_curve: empty curve");
  std::ofstream os(out, std::ios::trunc);
  if (!os) throw UserError(cat("cannot write curve: ", out.string()));
  os << "level,mean_score,n\n";
  char buf[64];
  for (size_t i = 0; i < c.mean_scores.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", c.spec.levels[i]);
    os << buf << ",";
    std::snprintf(buf, sizeof buf, "%.17g", c.mean_scores[i]);
    os << buf << "," << c.per_image[i].size() << "\n";
  }
}

SweepCurve read_curve_csv(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw UserError(cat("cannot read curve: ", file.string()));
  std::string line;
  std::getline(in, line);  // header
  SweepCurve c;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const size_t c1 = line.find(',');
    const size_t c2 = line.find(',', c1 + 1);
    c.spec.levels.push_back(std::strtod(line.substr(0, c1).c_str(), nullptr));
    c.mean_scores.push_back(std::strtod(line.substr(c1 + 1, c2 - c1 - 1).c_str(), nullptr));
    c.per_image.push_back(std::vector<double>(
        static_cast<size_t>(std::strtoul(line.substr(c2 + 1).c_str(), nullptr, 10))));
  }
  return c;
}

}  // namespace aef
