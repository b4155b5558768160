#include "loopdet/scoring.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace loopdet {

namespace {

constexpr double kLn10 = 2.302585092994045684;

// log(n!) table with doubling growth, accumulated in extended precision.
// One instance per thread keeps reads lock-free.
const std::vector<long double>& log_factorials(std::uint64_t n_needed) {
  thread_local std::vector<long double> table{0.0L, 0.0L};  // log 0!, log 1!
  if (table.size() <= n_needed) {
    std::size_t target = table.size();
    while (target <= n_needed) {
      target *= 2;
    }
    table.reserve(target);
    while (table.size() < target) {
      const auto n = static_cast<std::uint64_t>(table.size());
      table.push_back(table.back() + std::log(static_cast<long double>(n)));
    }
  }
  return table;
}

long double binomial_log_pmf_ld(std::uint64_t n, std::uint64_t k, double p) {
  if (k > n) {
    throw std::invalid_argument("binomial_pmf: k > n");
  }
  if (!(p >= 0.0 && p <= 1.0)) {
    throw std::invalid_argument("binomial_pmf: p outside [0, 1]");
  }
  if (p == 0.0) {
    return k == 0 ? 0.0L : -std::numeric_limits<long double>::infinity();
  }
  if (p == 1.0) {
    return k == n ? 0.0L : -std::numeric_limits<long double>::infinity();
  }
  const auto& lf = log_factorials(n);
  long double log_pmf = lf[n] - lf[k] - lf[n - k];
  if (k > 0) {
    log_pmf += static_cast<long double>(k) * std::log(static_cast<long double>(p));
  }
  if (n - k > 0) {
    log_pmf += static_cast<long double>(n - k) *
               std::log1p(static_cast<long double>(-p));
  }
  return log_pmf;
}

long double poisson_log_pmf_ld(double lambda, std::uint64_t k) {
  if (!(lambda >= 0.0)) {
    throw std::invalid_argument("poisson_pmf: lambda must be >= 0");
  }
  if (lambda == 0.0) {
    return k == 0 ? 0.0L : -std::numeric_limits<long double>::infinity();
  }
  const auto& lf = log_factorials(k);
  return -static_cast<long double>(lambda) +
         static_cast<long double>(k) * std::log(static_cast<long double>(lambda)) -
         lf[k];
}

long double vote_log_probability_ld(const ScoringInputs& inputs,
                                    const ApproxPolicy& policy) {
  const double lambda = inputs.lambda();
  if (inputs.total_votes >= policy.min_total_votes && lambda <= policy.max_lambda) {
    return poisson_log_pmf_ld(lambda, inputs.vertex_votes);
  }
  return binomial_log_pmf_ld(inputs.total_votes, inputs.vertex_votes, inputs.p);
}

double neg_log10_from_ld(long double log_pmf) {
  return static_cast<double>(-log_pmf / kLn10);
}

}  // namespace

double binomial_log_pmf(std::uint64_t n, std::uint64_t k, double p) {
  return static_cast<double>(binomial_log_pmf_ld(n, k, p));
}

double binomial_pmf(std::uint64_t n, std::uint64_t k, double p) {
  return static_cast<double>(std::exp(binomial_log_pmf_ld(n, k, p)));
}

double poisson_log_pmf(double lambda, std::uint64_t k) {
  return static_cast<double>(poisson_log_pmf_ld(lambda, k));
}

double poisson_pmf(double lambda, std::uint64_t k) {
  return static_cast<double>(std::exp(poisson_log_pmf_ld(lambda, k)));
}

double vote_probability(const ScoringInputs& inputs, const ApproxPolicy& policy) {
  return static_cast<double>(std::exp(vote_log_probability_ld(inputs, policy)));
}

double vote_log_probability(const ScoringInputs& inputs, const ApproxPolicy& policy) {
  return static_cast<double>(vote_log_probability_ld(inputs, policy));
}

bool expectation_gate(std::uint64_t vertex_votes, std::uint64_t total_votes,
                      std::uint64_t gamma_i, std::uint64_t gamma_total) {
  // x_i > N * gamma_i / Gamma  <=>  x_i * Gamma > N * gamma_i.
  return static_cast<unsigned __int128>(vertex_votes) * gamma_total >
         static_cast<unsigned __int128>(total_votes) * gamma_i;
}

namespace {

struct ScoredVertex {
  double pmf;
  long double log_pmf;
};

// Scores one gated vertex against the null model.
ScoredVertex score_vertex(std::uint64_t votes, std::uint64_t total,
                          std::uint64_t gamma_i, std::uint64_t gamma_total,
                          const DetectorConfig& config) {
  ScoringInputs inputs;
  inputs.total_votes = total;
  inputs.vertex_votes = votes;
  inputs.p = static_cast<double>(gamma_i) / static_cast<double>(gamma_total);
  const long double log_pmf = vote_log_probability_ld(inputs, config.approx_policy());
  return {static_cast<double>(std::exp(log_pmf)), log_pmf};
}

}  // namespace

std::optional<LoopCandidate> best_scoring_vertex(const VoteTally& tally,
                                                 const MapDatabase& db,
                                                 const DetectorConfig& config) {
  if (tally.empty() || tally.total == 0) {
    return std::nullopt;
  }
  const std::uint64_t gamma_total = db.total_descriptors();
  if (gamma_total == 0) {
    return std::nullopt;
  }

  // Ascending vertex ids make the strict-minimum tie-break (first wins)
  // deterministic and independent of hash iteration order.
  std::vector<VertexId> voted;
  voted.reserve(tally.votes.size());
  for (const auto& [vertex, votes] : tally.votes) {
    (void)votes;
    voted.push_back(vertex);
  }
  std::sort(voted.begin(), voted.end());

  std::optional<LoopCandidate> best;
  long double best_log_pmf = 0.0L;
  for (const VertexId vertex : voted) {
    const std::uint64_t votes = tally.count(vertex);
    const std::uint64_t gamma_i = db.descriptor_count(vertex);
    if (gamma_i == 0) {
      continue;  // degenerate null model, never a candidate
    }
    if (!expectation_gate(votes, tally.total, gamma_i, gamma_total)) {
      continue;
    }
    const ScoredVertex scored =
        score_vertex(votes, tally.total, gamma_i, gamma_total, config);
    // Log-space comparison stays discriminative even where the pmf
    // underflows double precision; strict < keeps the lowest id on ties.
    if (!best || scored.log_pmf < best_log_pmf) {
      LoopCandidate candidate;
      candidate.vertex = vertex;
      candidate.pmf = scored.pmf;
      candidate.probabilistic_score = 1.0 - scored.pmf;
      candidate.neg_log10_pmf = neg_log10_from_ld(scored.log_pmf);
      best = std::move(candidate);
      best_log_pmf = scored.log_pmf;
    }
  }
  return best;
}

std::optional<LoopCandidate> detect_loop(const VoteTally& tally,
                                         const MapDatabase& db,
                                         const DetectorConfig& config) {
  auto best = best_scoring_vertex(tally, db, config);
  if (best && best->pmf < config.alpha) {
    return best;
  }
  return std::nullopt;
}

ScoreMap score_all(const VoteTally& tally, const MapDatabase& db,
                   const DetectorConfig& config) {
  ScoreMap scores;
  if (tally.total == 0) {
    return scores;
  }
  const std::uint64_t gamma_total = db.total_descriptors();
  if (gamma_total == 0) {
    return scores;
  }
  for (VertexId vertex = 0; vertex < static_cast<VertexId>(db.vertex_count());
       ++vertex) {
    if (!db.vertex(vertex).admitted) {
      continue;
    }
    const std::uint64_t votes = tally.count(vertex);
    const std::uint64_t gamma_i = db.descriptor_count(vertex);
    VertexScore entry;
    if (gamma_i > 0 && expectation_gate(votes, tally.total, gamma_i, gamma_total)) {
      const ScoredVertex scored =
          score_vertex(votes, tally.total, gamma_i, gamma_total, config);
      entry.pmf = scored.pmf;
      entry.neg_log10 = neg_log10_from_ld(scored.log_pmf);
      entry.eq3_pass = true;
    }
    scores.emplace(vertex, entry);
  }
  return scores;
}

std::vector<LandmarkId> candidate_landmarks(const MapDatabase& db, VertexId best,
                                            const ScoreMap& scores,
                                            const DetectorConfig& config) {
  if (scores.find(best) == scores.end()) {
    throw std::invalid_argument("candidate_landmarks: best vertex " +
                                std::to_string(best) + " has no score");
  }
  const double alpha_map = config.effective_alpha_map();
  const std::vector<VertexId> covisible = db.covisible_vertices(best);

  std::vector<LandmarkId> landmarks;
  for (const VertexId vertex : covisible) {
    const auto it = scores.find(vertex);
    const double pmf = it == scores.end() ? 1.0 : it->second.pmf;
    // Probabilistic score 1 - pmf must reach 1 - alpha_map (non-strict).
    if (!(pmf <= alpha_map)) {
      continue;
    }
    const auto& observed = db.landmarks_of_vertex(vertex);
    landmarks.insert(landmarks.end(), observed.begin(), observed.end());
  }
  std::sort(landmarks.begin(), landmarks.end());
  landmarks.erase(std::unique(landmarks.begin(), landmarks.end()), landmarks.end());
  return landmarks;
}

}  // namespace loopdet
