#include "aef/evaluation.hpp"

#include "aef/log.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace aef {

using ordered_json = nlohmann::ordered_json;

size_t ScoreSet::count_label(Label l) const {
  return static_cast<size_t>(std::count_if(
      entries.begin(), entries.end(),
      [&](const ScoreEntry& e) { return e.label == l; }));
}

ScoreSet score(Detector& det, const DatasetManifest& m, int min_side,
               ImageCache* cache) {
  ScoreSet out;
  out.detector_identity = det.config().str();
  out.manifest_hash = manifest_digest(m);
  std::vector<double> scores = score_records(det, m, min_side, cache);
  for (size_t i = 0; i < scores.size(); ++i) {
    if (std::isnan(scores[i])) continue;  // flagged by score_records
    out.entries.push_back({m.records[i].id, scores[i], m.records[i].label,
                           m.records[i].source_tag});
  }
  return out;
}

AccuracyBreakdown accuracy_at_threshold(const ScoreSet& s, double t) {
  if (t <= 0.0 || t >= 1.0)
    throw UserError(cat("threshold must lie in (0,1), got ", t));
  AccuracyBreakdown out;
  std::map<std::string, std::pair<size_t, size_t>> by_source;  // correct, total
  size_t correct = 0;
  for (const auto& e : s.entries) {
    const bool say_fake = e.score >= t;
    const bool ok = say_fake == (e.label == Label::fake);
    auto& [c, n] = by_source[e.source_tag];
    c += ok;
    ++n;
    correct += ok;
  }
  for (const auto& [tag, cn] : by_source) {
    if (cn.second == 0) {
      warn(cat("source ", tag, " has no entries; omitted"));
      continue;
    }
    out.per_source[tag] = static_cast<double>(cn.first) / cn.second;
    out.counts[tag] = cn.second;
  }
  out.overall = s.entries.empty()
                    ? 0.0
                    : static_cast<double>(correct) / s.entries.size();
  return out;
}

double average_precision(const ScoreSet& s) {
  const size_t pos = s.count_label(Label::fake);
  const size_t neg = s.count_label(Label::real);
  if (pos == 0 || neg == 0)
    throw UserError("average_precision needs both labels present");

  std::vector<const ScoreEntry*> sorted;
  sorted.reserve(s.entries.size());
  for (const auto& e : s.entries) sorted.push_back(&e);
  std::sort(sorted.begin(), sorted.end(),
            [](const ScoreEntry* a, const ScoreEntry* b) {
              return a->score > b->score;
            });

  double ap = 0.0;
  double prev_recall = 0.0;
  size_t tp = 0, fp = 0;
  size_t i = 0;
  while (i < sorted.size()) {
    size_t j = i;
    while (j < sorted.size() && sorted[j]->score == sorted[i]->score) {
      tp += sorted[j]->label == Label::fake;
      fp += sorted[j]->label == Label::real;
      ++j;
    }
    const double recall = static_cast<double>(tp) / static_cast<double>(pos);
    const double precision =
        static_cast<double>(tp) / static_cast<double>(tp + fp);
    ap += (recall - prev_recall) * precision;
    prev_recall = recall;
    i = j;
  }
  return ap;
}

double tpr_at_fpr(const ScoreSet& s, double target_fpr) {
  const size_t pos = s.count_label(Label::fake);
  const size_t neg = s.count_label(Label::real);
  if (pos == 0 || neg == 0) throw UserError("tpr_at_fpr needs both labels present");
  if (target_fpr <= 0.0 || target_fpr >= 1.0)
    throw UserError("target_fpr must lie in (0,1)");

  // Candidates ascending; FPR(t) = #{real >= t}/neg is nonincreasing in t,
  // so the first qualifying candidate is the most permissive threshold.
  std::vector<double> cands;
  cands.reserve(s.entries.size());
  for (const auto& e : s.entries) cands.push_back(e.score);
  std::sort(cands.begin(), cands.end());
  cands.erase(std::unique(cands.begin(), cands.end()), cands.end());

  std::vector<double> reals, fakes;
  for (const auto& e : s.entries)
    (e.label == Label::real ? reals : fakes).push_back(e.score);
  std::sort(reals.begin(), reals.end());
  std::sort(fakes.begin(), fakes.end());

  auto count_ge = [](const std::vector<double>& v, double t) {
    return static_cast<size_t>(v.end() -
                               std::lower_bound(v.begin(), v.end(), t));
  };

  for (double t : cands) {
    const double fpr =
        static_cast<double>(count_ge(reals, t)) / static_cast<double>(neg);
    if (fpr <= target_fpr)
      return static_cast<double>(count_ge(fakes, t)) / static_cast<double>(pos);
  }
  warn(cat("no observed threshold reaches FPR <= ", target_fpr,
           "; returning TPR at +inf (0)"));
  return 0.0;
}

double calibrate_threshold(const ScoreSet& val) {
  const size_t pos = val.count_label(Label::fake);
  const size_t neg = val.count_label(Label::real);
  if (pos == 0 || neg == 0)
    throw UserError("calibrate_threshold needs both labels present");

  std::vector<double> distinct;
  distinct.reserve(val.entries.size());
  for (const auto& e : val.entries) distinct.push_back(e.score);
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());

  std::vector<double> cands{0.0, 1.0};
  for (size_t i = 0; i + 1 < distinct.size(); ++i)
    cands.push_back(0.5 * (distinct[i] + distinct[i + 1]));
  std::sort(cands.begin(), cands.end());

  std::vector<double> reals, fakes;
  for (const auto& e : val.entries)
    (e.label == Label::real ? reals : fakes).push_back(e.score);
  std::sort(reals.begin(), reals.end());
  std::sort(fakes.begin(), fakes.end());

  auto accuracy_at = [&](double t) {
    const size_t fake_correct = static_cast<size_t>(
        fakes.end() - std::lower_bound(fakes.begin(), fakes.end(), t));
    const size_t real_correct = static_cast<size_t>(
        std::lower_bound(reals.begin(), reals.end(), t) - reals.begin());
    return static_cast<double>(fake_correct + real_correct) /
           static_cast<double>(val.entries.size());
  };

  double best_t = cands.front();
  double best_acc = -1.0;
  for (double t : cands) {
    const double acc = accuracy_at(t);
    if (acc > best_acc) {  // strict: keeps the lowest threshold on ties
      best_acc = acc;
      best_t = t;
    }
  }
  return best_t;
}

EvalReport evaluate(const ScoreSet& s, double threshold, double target_fpr) {
  EvalReport r;
  r.threshold = threshold;
  r.target_fpr = target_fpr;
  AccuracyBreakdown acc = accuracy_at_threshold(s, threshold);
  r.per_source_accuracy = acc.per_source;
  r.per_source_count = acc.counts;
  r.overall_accuracy = acc.overall;
  if (s.count_label(Label::real) > 0 && s.count_label(Label::fake) > 0) {
    r.average_precision = average_precision(s);
    r.tpr_at_fpr = tpr_at_fpr(s, target_fpr);
  } else {
    warn("single-label score set: AP and TPR@FPR not computed");
    r.average_precision = std::numeric_limits<double>::quiet_NaN();
    r.tpr_at_fpr = std::numeric_limits<double>::quiet_NaN();
  }
  return r;
}

std::string EvalReport::to_json() const {
  ordered_json j;
  j["threshold"] = threshold;
  j["overall_accuracy"] = overall_accuracy;
  j["average_precision"] = average_precision;
  j["tpr_at_fpr"] = tpr_at_fpr;
  j["target_fpr"] = target_fpr;
  j["per_source"] = ordered_json::object();
  for (const auto& [tag, acc] : per_source_accuracy) {
    j["per_source"][tag] = {{"accuracy", acc},
                            {"count", per_source_count.at(tag)}};
  }
  j["skipped"] = skipped;
  return j.dump(2);
}

std::string EvalReport::to_csv() const {
  std::ostringstream os;
  os.precision(17);
  os << "metric,source,value\n";
  for (const auto& [tag, acc] : per_source_accuracy)
    os << "accuracy," << tag << "," << acc << "\n";
  os << "accuracy,__overall__," << overall_accuracy << "\n";
  os << "average_precision,__overall__," << average_precision << "\n";
  os << "tpr_at_fpr_" << target_fpr << ",__overall__," << tpr_at_fpr << "\n";
  return os.str();
}

double mse_distance(const cv::Mat& a, const cv::Mat& b) {
  if (a.size() != b.size() || a.type() != b.type())
    throw UserError("mse_distance: shape mismatch");
  double total = 0.0;
  for (int y = 0; y < a.rows; ++y) {
    const auto* ra = a.ptr<cv::Vec3b>(y);
    const auto* rb = b.ptr<cv::Vec3b>(y);
    for (int x = 0; x < a.cols; ++x)
      for (int c = 0; c < 3; ++c) {
        const double d = (static_cast<double>(ra[x][c]) - rb[x][c]) / 255.0;
        total += d * d;
      }
  }
  return total / (static_cast<double>(a.rows) * a.cols * 3);
}

double reconstruction_distance_score(
    std::vector<std::shared_ptr<AutoencoderHandle>>& ensemble,
    const ImageDistance& dist, const cv::Mat& x) {
  if (ensemble.empty())
    throw UserError("reconstruction_distance_score: empty ensemble");
  double best = std::numeric_limits<double>::infinity();
  size_t failures = 0;
  for (auto& h : ensemble) {
    try {
      best = std::min(best, dist(x, reconstruct(*h, x)));
    } catch (const std::exception& e) {
      warn(cat("reconstruction failed on ", h->identity(), ": ", e.what()));
      ++failures;
    }
  }
  if (failures == ensemble.size())
    throw std::runtime_error("reconstruction failed on every ensemble member");
  return best;
}

}  // namespace aef
