#pragma once

#include "aef/autoencoder.hpp"
#include "aef/detector.hpp"
#include "aef/manifest.hpp"

#include <functional>
#include <map>
#include <string>
#include <vector>

namespace aef {

struct ScoreEntry {
  std::string record_id;
  double score = 0.0;  // in [0,1]
  Label label = Label::real;
  std::string source_tag;
};

struct ScoreSet {
  std::vector<ScoreEntry> entries;
  std::string detector_identity;
  std::string manifest_hash;

  size_t count_label(Label l) const;
};

struct EvalReport {
  std::map<std::string, double> per_source_accuracy;
  std::map<std::string, size_t> per_source_count;
  double overall_accuracy = 0.0;
  double average_precision = 0.0;
  double tpr_at_fpr = 0.0;
  double target_fpr = 0.05;
  double threshold = 0.5;
  size_t skipped = 0;

  std::string to_json() const;
  std::string to_csv() const;
};

// Full-image sigmoid scores. Records below min_side are excluded with a
// warning (they appear in the skipped count of downstream reports).
ScoreSet score(Detector& det, const DatasetManifest& m, int min_side,
               ImageCache* cache = nullptr);

struct AccuracyBreakdown {
  std::map<std::string, double> per_source;
  std::map<std::string, size_t> counts;
  double overall = 0.0;
};

// Classify fake iff score >= t.
AccuracyBreakdown accuracy_at_threshold(const ScoreSet& s, double t);

// Area under the precision-recall curve with fake as positive; tied scores
// enter the curve as one group.
double average_precision(const ScoreSet& s);

// TPR at the most permissive threshold whose FPR <= target; candidates are
// the observed scores plus +inf. Returns 0 with a warning if nothing
// qualifies below target.
double tpr_at_fpr(const ScoreSet& s, double target_fpr = 0.05);

// Accuracy-maximizing threshold over midpoints of adjacent distinct scores
// plus the boundary values 0 and 1; lowest on ties.
double calibrate_threshold(const ScoreSet& val);

EvalReport evaluate(const ScoreSet& s, double threshold,
                    double target_fpr = 0.05);

using ImageDistance = std::function<double(const cv::Mat&, const cv::Mat&)>;

double mse_distance(const cv::Mat& a, const cv::Mat& b);

// min over the ensemble of dist(x, reconstruct(h, x)). Classification rule:
// fake iff distance < threshold. The 0.018 threshold documented for the
// perceptual-distance variant does not transfer to other distances.
double reconstruction_distance_score(
    std::vector<std::shared_ptr<AutoencoderHandle>>& ensemble,
    const ImageDistance& dist, const cv::Mat& x);

}  // namespace aef
