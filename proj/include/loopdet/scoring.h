#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "loopdet/config.h"
#include "loopdet/map_database.h"
#include "loopdet/types.h"

namespace loopdet {

// Inputs of the null-model test for one vertex: n total votes, k votes on
// the vertex under test, p its share of the descriptor database.
struct ScoringInputs {
  std::uint64_t total_votes = 0;   // n = N(t)
  std::uint64_t vertex_votes = 0;  // k = x_i(t)
  double p = 0.0;                  // gamma_i / Gamma(t)

  double lambda() const { return static_cast<double>(total_votes) * p; }
};

// Natural-log pmf values. Computation runs in 80-bit extended precision on
// top of a grow-on-demand log-factorial table, which keeps the relative
// error of the exponentiated result near machine epsilon even for n in the
// thousands. Domain violations (k > n, p outside [0, 1], lambda < 0) throw
// std::invalid_argument.
double binomial_log_pmf(std::uint64_t n, std::uint64_t k, double p);
double poisson_log_pmf(double lambda, std::uint64_t k);

// exp() of the above.
double binomial_pmf(std::uint64_t n, std::uint64_t k, double p);
double poisson_pmf(double lambda, std::uint64_t k);

// Pr(X = k) under the null model, switching to the Poisson approximation
// when the policy's conditions hold (n >= min_total_votes and
// lambda <= max_lambda).
double vote_probability(const ScoringInputs& inputs, const ApproxPolicy& policy);
double vote_log_probability(const ScoringInputs& inputs, const ApproxPolicy& policy);

// Strict expectation gate x_i > N * gamma_i / Gamma, evaluated in exact
// integer arithmetic so boundary cases and gamma rescaling behave exactly.
bool expectation_gate(std::uint64_t vertex_votes, std::uint64_t total_votes,
                      std::uint64_t gamma_i, std::uint64_t gamma_total);

struct LoopCandidate {
  VertexId vertex = -1;
  double pmf = 1.0;                  // Pr(X_i = x_i)
  double probabilistic_score = 0.0;  // 1 - pmf
  double neg_log10_pmf = 0.0;        // computed in log space, never overflows
  // Vertex-to-map payload; filled by candidate_landmarks().
  std::vector<LandmarkId> landmarks;
};

struct VertexScore {
  double pmf = 1.0;
  double neg_log10 = 0.0;
  bool eq3_pass = false;
};

// Ordered by vertex id so diagnostic dumps are deterministic.
using ScoreMap = std::map<VertexId, VertexScore>;

// Minimum-pmf vertex among those passing the expectation gate (ties broken
// toward the lower vertex id), with no threshold applied. Vertices with
// gamma_i = 0 are never candidates: their null model is degenerate.
std::optional<LoopCandidate> best_scoring_vertex(const VoteTally& tally,
                                                 const MapDatabase& db,
                                                 const DetectorConfig& config);

// best_scoring_vertex() filtered by pmf < alpha.
std::optional<LoopCandidate> detect_loop(const VoteTally& tally,
                                         const MapDatabase& db,
                                         const DetectorConfig& config);

// Scores every admitted vertex for diagnostics and threshold sweeps.
// Vertices failing the expectation gate carry pmf 1 (neg-log score 0).
// Empty when no votes were cast.
ScoreMap score_all(const VoteTally& tally, const MapDatabase& db,
                   const DetectorConfig& config);

// Vertex-to-map candidate extraction: takes the covisible set of the best
// vertex, keeps those whose probabilistic score reaches 1 - alpha_map, and
// returns the union of landmarks they observe (ascending ids). The best
// vertex must appear in `scores`.
std::vector<LandmarkId> candidate_landmarks(const MapDatabase& db, VertexId best,
                                            const ScoreMap& scores,
                                            const DetectorConfig& config);

}  // namespace loopdet
