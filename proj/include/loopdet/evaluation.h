#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "loopdet/types.h"

namespace loopdet {

struct EvalConfig {
  // Maximal pose distance of a true match.
  double d_near = 5.0;
  // Minimal pose distance of a false match; pairs strictly between the two
  // stay unclassified and are excluded from the counts.
  double d_far = 10.0;
  // Admission delay the detector ran with; determines which database
  // vertices were eligible when each query executed.
  double t_delay = 10.0;
  // Score thresholds to sweep. Empty: every distinct detection score.
  std::vector<double> sweep;
};

enum class MatchClass { kTrueMatch, kFalseMatch, kUnclassified };

struct PRPoint {
  double threshold = 0.0;
  std::uint64_t true_positives = 0;
  std::uint64_t false_positives = 0;
  std::uint64_t false_negatives = 0;
  double precision = 1.0;
  double recall = 0.0;
  // Set when precision had no support (no classified detections accepted).
  bool zero_support = false;
};

struct Detection {
  VertexId query = -1;
  VertexId matched = -1;
  double score = 0.0;  // higher accepts more confidently (e.g. -log10 pmf)
};

struct GroundtruthEntry {
  VertexId id = -1;
  double timestamp = 0.0;
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
};

MatchClass classify_pair(double distance, const EvalConfig& config);

// Precision/recall sweep. A detection with score >= threshold is accepted;
// accepted detections count as TP/FP by pose distance (unclassified ones are
// dropped). A query is a false negative when it has at least one eligible
// database vertex within d_near (eligible: admitted before the query per
// t_delay) but no accepted detection. Throws DataError when a detection
// references a vertex without groundtruth.
std::vector<PRPoint> pr_curve(const std::vector<Detection>& detections,
                              const std::vector<GroundtruthEntry>& groundtruth,
                              const EvalConfig& config);

// Largest recall among full-precision points backed by at least one true
// positive; 0 when no such point exists.
double max_recall_at_full_precision(const std::vector<PRPoint>& curve);

void write_pr_csv(const std::filesystem::path& path,
                  const std::vector<PRPoint>& curve,
                  double max_recall_full_precision);

}  // namespace loopdet
