#pragma once

#include <optional>

#include "loopdet/multi_index.h"

namespace loopdet {

enum class DetectorMode { kVertexToVertex, kVertexToMap };

// When to replace the exact binomial pmf with its Poisson limit. Applies
// when total votes n >= min_total_votes and lambda = n*p <= max_lambda.
struct ApproxPolicy {
  std::uint64_t min_total_votes = 200;
  double max_lambda = 1.0;
};

struct DetectorConfig {
  DetectorMode mode = DetectorMode::kVertexToVertex;

  // Rejection threshold on the vote pmf, in (0, 1).
  double alpha = 1e-3;
  // Threshold used when extracting the covisible candidate set in
  // vertex-to-map mode; defaults to alpha.
  std::optional<double> alpha_map;

  // Admission delay: a vertex enters the database once the query time has
  // advanced past its timestamp by at least this many seconds.
  double t_delay = 10.0;
  // Half-width of the timestamp window used by vertex-to-map voting.
  double dt = 1.0;

  IndexConfig index;
  // Overrides the adaptive nearest-neighbor count when set (mainly tests).
  std::optional<int> fixed_k;

  ApproxPolicy approx_v2v{200, 1.0};
  ApproxPolicy approx_v2m{2000, 20.0};

  // Ratio-test verification gate.
  bool verify = false;
  double verify_ratio = 0.8;
  int verify_min_matches = 8;

  double effective_alpha_map() const { return alpha_map.value_or(alpha); }

  const ApproxPolicy& approx_policy() const {
    return mode == DetectorMode::kVertexToMap ? approx_v2m : approx_v2v;
  }

  void validate() const {
    if (!(alpha > 0.0 && alpha < 1.0)) {
      throw std::invalid_argument("config: alpha must lie in (0, 1)");
    }
    if (alpha_map && !(*alpha_map > 0.0 && *alpha_map <= 1.0)) {
      throw std::invalid_argument("config: alpha_map must lie in (0, 1]");
    }
    if (t_delay < 0.0 || dt < 0.0) {
      throw std::invalid_argument("config: t_delay and dt must be >= 0");
    }
    if (!(index.max_distance > 0.0)) {
      throw std::invalid_argument("config: theta must be > 0");
    }
  }
};

}  // namespace loopdet
