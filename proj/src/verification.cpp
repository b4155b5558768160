#include "loopdet/verification.h"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace loopdet {

namespace {

struct TwoNearest {
  int best = -1;
  double best_sq = std::numeric_limits<double>::infinity();
  double second_sq = std::numeric_limits<double>::infinity();
};

TwoNearest two_nearest(const Eigen::VectorXd& query,
                       const std::vector<ProjectedDescriptor>& pool) {
  TwoNearest out;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    const double sq = (pool[i].values - query).squaredNorm();
    if (sq < out.best_sq) {
      out.second_sq = out.best_sq;
      out.best_sq = sq;
      out.best = static_cast<int>(i);
    } else if (sq < out.second_sq) {
      out.second_sq = sq;
    }
  }
  return out;
}

// Lowe-style test on squared distances: d1/d2 < ratio. An exact duplicate
// (d1 = 0) always survives; so does a match without a second neighbor.
bool ratio_survives(const TwoNearest& nn, double ratio) {
  if (nn.best_sq == 0.0) {
    return true;
  }
  if (!std::isfinite(nn.second_sq)) {
    return true;
  }
  return nn.best_sq < ratio * ratio * nn.second_sq;
}

}  // namespace

VerificationResult verify_stub(
    const std::vector<ProjectedDescriptor>& query_descriptors,
    const std::vector<ProjectedDescriptor>& candidate_descriptors,
    double ratio, int min_matches) {
  if (!(ratio > 0.0 && ratio <= 1.0)) {
    throw std::invalid_argument("verify_stub: ratio must lie in (0, 1]");
  }
  VerificationResult result;
  result.method = "ratio_stub";
  if (query_descriptors.empty() || candidate_descriptors.empty()) {
    return result;
  }

  std::vector<TwoNearest> forward(query_descriptors.size());
  for (std::size_t q = 0; q < query_descriptors.size(); ++q) {
    forward[q] = two_nearest(query_descriptors[q].values, candidate_descriptors);
  }
  std::vector<TwoNearest> backward(candidate_descriptors.size());
  for (std::size_t c = 0; c < candidate_descriptors.size(); ++c) {
    backward[c] = two_nearest(candidate_descriptors[c].values, query_descriptors);
  }

  int survivors = 0;
  for (std::size_t q = 0; q < query_descriptors.size(); ++q) {
    const int c = forward[q].best;
    if (c < 0 || !ratio_survives(forward[q], ratio)) {
      continue;
    }
    const TwoNearest& back = backward[static_cast<std::size_t>(c)];
    if (back.best != static_cast<int>(q) || !ratio_survives(back, ratio)) {
      continue;
    }
    ++survivors;
  }
  result.inlier_count = survivors;
  result.accepted = survivors >= min_matches;
  return result;
}

}  // namespace loopdet
