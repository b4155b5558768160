#include "loopdet/evaluation.h"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <string>
#include <unordered_map>

namespace loopdet {

MatchClass classify_pair(double distance, const EvalConfig& config) {
  if (distance < 0.0) {
    throw std::invalid_argument("classify_pair: negative distance");
  }
  if (!(config.d_near > 0.0 && config.d_near < config.d_far)) {
    throw std::invalid_argument("classify_pair: need 0 < d_near < d_far");
  }
  if (distance <= config.d_near) {
    return MatchClass::kTrueMatch;
  }
  if (distance >= config.d_far) {
    return MatchClass::kFalseMatch;
  }
  return MatchClass::kUnclassified;
}

std::vector<PRPoint> pr_curve(const std::vector<Detection>& detections,
                              const std::vector<GroundtruthEntry>& groundtruth,
                              const EvalConfig& config) {
  std::unordered_map<VertexId, std::size_t> gt_index;
  for (std::size_t i = 0; i < groundtruth.size(); ++i) {
    gt_index[groundtruth[i].id] = i;
  }
  auto lookup = [&](VertexId id) -> const GroundtruthEntry& {
    auto it = gt_index.find(id);
    if (it == gt_index.end()) {
      throw DataError("pr_curve: no groundtruth for vertex " + std::to_string(id));
    }
    return groundtruth[it->second];
  };

  // A query counts toward recall when some database vertex admitted by its
  // query time lies within d_near.
  std::set<VertexId> eligible;
  for (const GroundtruthEntry& q : groundtruth) {
    for (const GroundtruthEntry& v : groundtruth) {
      if (v.timestamp <= q.timestamp - config.t_delay &&
          (q.position - v.position).norm() <= config.d_near) {
        eligible.insert(q.id);
        break;
      }
    }
  }

  struct Classified {
    VertexId query;
    double score;
    MatchClass match_class;
  };
  std::vector<Classified> classified;
  classified.reserve(detections.size());
  for (const Detection& det : detections) {
    const GroundtruthEntry& q = lookup(det.query);
    const GroundtruthEntry& m = lookup(det.matched);
    const double distance = (q.position - m.position).norm();
    classified.push_back({det.query, det.score, classify_pair(distance, config)});
  }

  std::vector<double> thresholds = config.sweep;
  if (thresholds.empty()) {
    for (const Detection& det : detections) {
      thresholds.push_back(det.score);
    }
    std::sort(thresholds.begin(), thresholds.end());
    thresholds.erase(std::unique(thresholds.begin(), thresholds.end()),
                     thresholds.end());
    if (thresholds.empty()) {
      thresholds.push_back(0.0);
    }
  }

  std::vector<PRPoint> curve;
  curve.reserve(thresholds.size());
  for (const double threshold : thresholds) {
    PRPoint point;
    point.threshold = threshold;
    std::set<VertexId> queries_with_accept;
    for (const Classified& det : classified) {
      if (det.score < threshold) {
        continue;
      }
      queries_with_accept.insert(det.query);
      if (det.match_class == MatchClass::kTrueMatch) {
        ++point.true_positives;
      } else if (det.match_class == MatchClass::kFalseMatch) {
        ++point.false_positives;
      }
    }
    for (const VertexId query : eligible) {
      if (queries_with_accept.count(query) == 0) {
        ++point.false_negatives;
      }
    }
    const std::uint64_t accepted_classified =
        point.true_positives + point.false_positives;
    if (accepted_classified == 0) {
      point.precision = 1.0;
      point.zero_support = true;
    } else {
      point.precision = static_cast<double>(point.true_positives) /
                        static_cast<double>(accepted_classified);
    }
    const std::uint64_t positives = point.true_positives + point.false_negatives;
    point.recall = positives == 0
                       ? 0.0
                       : static_cast<double>(point.true_positives) /
                             static_cast<double>(positives);
    curve.push_back(point);
  }
  return curve;
}

double max_recall_at_full_precision(const std::vector<PRPoint>& curve) {
  double best = 0.0;
  for (const PRPoint& point : curve) {
    if (point.precision == 1.0 && point.true_positives >= 1) {
      best = std::max(best, point.recall);
    }
  }
  return best;
}

void write_pr_csv(const std::filesystem::path& path,
                  const std::vector<PRPoint>& curve,
                  double max_recall_full_precision) {
  std::ofstream out(path);
  if (!out) {
    throw DataError("cannot write " + path.string());
  }
  out << "threshold,tp,fp,fn,precision,recall,zero_support\n";
  char buffer[256];
  for (const PRPoint& p : curve) {
    std::snprintf(buffer, sizeof(buffer), "%.17g,%llu,%llu,%llu,%.17g,%.17g,%d\n",
                  p.threshold, static_cast<unsigned long long>(p.true_positives),
                  static_cast<unsigned long long>(p.false_positives),
                  static_cast<unsigned long long>(p.false_negatives), p.precision,
                  p.recall, p.zero_support ? 1 : 0);
    out << buffer;
  }
  std::snprintf(buffer, sizeof(buffer), "# max_recall_at_full_precision=%.17g\n",
                max_recall_full_precision);
  out << buffer;
}

}  // namespace loopdet
