#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>

#include "loopdet/multi_index.h"

using namespace loopdet;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<Eigen::VectorXd> gaussian_points(std::uint64_t seed, int count, int dim) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Eigen::VectorXd> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    Eigen::VectorXd v(dim);
    for (int d = 0; d < dim; ++d) {
      v[d] = normal(rng);
    }
    out.push_back(std::move(v));
  }
  return out;
}

// Clustered corpus: descriptor-like data with local structure.
std::vector<Eigen::VectorXd> mixture_points(std::uint64_t seed, int count, int dim,
                                            int n_clusters, double spread) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Eigen::VectorXd> centers;
  for (int c = 0; c < n_clusters; ++c) {
    Eigen::VectorXd v(dim);
    for (int d = 0; d < dim; ++d) {
      v[d] = 4.0 * normal(rng);
    }
    centers.push_back(std::move(v));
  }
  std::vector<Eigen::VectorXd> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    Eigen::VectorXd v = centers[rng() % n_clusters];
    for (int d = 0; d < dim; ++d) {
      v[d] += spread * normal(rng);
    }
    out.push_back(std::move(v));
  }
  return out;
}

std::vector<ProjectedDescriptor> as_entries(const std::vector<Eigen::VectorXd>& points) {
  std::vector<ProjectedDescriptor> out;
  out.reserve(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    out.push_back({points[i], static_cast<VertexId>(i), kNoLandmark});
  }
  return out;
}

InvertedMultiIndex build_index(const std::vector<Eigen::VectorXd>& points,
                               IndexConfig cfg) {
  InvertedMultiIndex index = InvertedMultiIndex::train(points, cfg);
  for (const ProjectedDescriptor& pd : as_entries(points)) {
    index.insert(pd);
  }
  return index;
}

bool matches_equal(const std::vector<NeighborMatch>& a,
                   const std::vector<NeighborMatch>& b) {
  if (a.size() != b.size()) {
    return false;
  }
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].entry_id != b[i].entry_id || a[i].owner != b[i].owner ||
        a[i].squared_distance != b[i].squared_distance) {
      return false;
    }
  }
  return true;
}

}  // namespace

TEST_CASE("K = 1 reduces knn to the exact oracle") {
  IndexConfig cfg;
  cfg.codebook_size = 1;
  cfg.probe_cells = 1;

  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    const int n = 100 + static_cast<int>(seed) * 450;
    const auto points = gaussian_points(seed, n, 10);
    const auto entries = as_entries(points);
    const InvertedMultiIndex index = build_index(points, cfg);
    const auto queries = gaussian_points(seed + 100, 50, 10);
    for (const auto& q : queries) {
      for (const int k : {1, 3, 10}) {
        for (const double theta : {kInf, 5.0, 0.5}) {
          CHECK(matches_equal(index.knn(q, k, theta),
                              exact_knn(entries, q, k, theta)));
        }
      }
    }
  }
}

TEST_CASE("exhaustive probing also reduces to the exact oracle") {
  IndexConfig cfg;
  cfg.codebook_size = 4;
  cfg.probe_cells = 16;  // T = K^2: every cell is visited
  const auto points = gaussian_points(77, 2000, 10);
  const auto entries = as_entries(points);
  const InvertedMultiIndex index = build_index(points, cfg);
  const auto queries = gaussian_points(78, 40, 10);
  for (const auto& q : queries) {
    CHECK(matches_equal(index.knn(q, 5, kInf), exact_knn(entries, q, 5, kInf)));
  }
}

TEST_CASE("cells partition the inserted entries") {
  IndexConfig cfg;
  cfg.codebook_size = 64;
  const auto points = mixture_points(5, 10000, 10, 50, 0.6);
  const InvertedMultiIndex index = build_index(points, cfg);

  std::set<std::uint64_t> seen;
  for (const auto& cell : index.cell_entry_ids()) {
    for (const std::uint64_t id : cell) {
      CHECK(seen.insert(id).second);  // no overlap between cells
    }
  }
  CHECK(seen.size() == points.size());
  CHECK(index.size() == points.size());
}

TEST_CASE("self retrieval at distance zero") {
  IndexConfig cfg;
  const auto points = mixture_points(9, 3000, 10, 30, 0.5);
  const InvertedMultiIndex index = build_index(points, cfg);
  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 100; ++trial) {
    const auto& q = points[rng() % points.size()];
    const auto matches = index.knn(q, 1, kInf);
    REQUIRE(matches.size() == 1);
    CHECK(matches[0].squared_distance == 0.0);
  }
}

TEST_CASE("insertion order does not change cell contents") {
  IndexConfig cfg;
  cfg.codebook_size = 16;
  const auto points = gaussian_points(12, 1000, 10);

  InvertedMultiIndex forward = InvertedMultiIndex::train(points, cfg);
  InvertedMultiIndex backward = InvertedMultiIndex::train(points, cfg);
  const auto entries = as_entries(points);
  for (const auto& e : entries) {
    forward.insert(e);
  }
  for (auto it = entries.rbegin(); it != entries.rend(); ++it) {
    backward.insert(*it);
  }

  // Entry ids differ between the two orders; compare per-cell owner sets
  // (owners are the point identities here).
  const auto cells_f = forward.cell_entry_ids();
  const auto cells_b = backward.cell_entry_ids();
  REQUIRE(cells_f.size() == cells_b.size());
  auto owner_of = [&](std::uint64_t entry_id, bool reversed) {
    return reversed ? static_cast<VertexId>(points.size() - 1 - entry_id)
                    : static_cast<VertexId>(entry_id);
  };
  for (std::size_t c = 0; c < cells_f.size(); ++c) {
    std::set<VertexId> owners_f;
    std::set<VertexId> owners_b;
    for (const auto id : cells_f[c]) {
      owners_f.insert(owner_of(id, false));
    }
    for (const auto id : cells_b[c]) {
      owners_b.insert(owner_of(id, true));
    }
    CHECK(owners_f == owners_b);
  }
}

TEST_CASE("theta filter and empty-index edge cases") {
  IndexConfig cfg;
  cfg.codebook_size = 1;
  const auto points = gaussian_points(20, 50, 10);
  InvertedMultiIndex index = InvertedMultiIndex::train(points, cfg);

  CHECK(index.knn(points[0], 3, kInf).empty());  // nothing inserted yet

  for (const auto& e : as_entries(points)) {
    index.insert(e);
  }
  // theta = 0 with no exact duplicate: the filter removes everything.
  Eigen::VectorXd off_query = points[0];
  off_query[0] += 0.125;
  CHECK(index.knn(off_query, 3, 0.0).empty());
  // the exact point is its own duplicate
  REQUIRE(index.knn(points[0], 3, 0.0).size() == 1);
  CHECK(index.knn(points[0], 3, 0.0)[0].squared_distance == 0.0);
}

TEST_CASE("knn(k) is a prefix of knn(k+1)") {
  IndexConfig cfg;
  cfg.codebook_size = 8;
  cfg.probe_cells = 6;
  const auto points = gaussian_points(31, 800, 10);
  const InvertedMultiIndex index = build_index(points, cfg);
  const auto queries = gaussian_points(32, 30, 10);
  for (const auto& q : queries) {
    for (int k = 1; k <= 6; ++k) {
      const auto smaller = index.knn(q, k, kInf);
      const auto larger = index.knn(q, k + 1, kInf);
      REQUIRE(smaller.size() <= larger.size());
      for (std::size_t i = 0; i < smaller.size(); ++i) {
        CHECK(smaller[i].entry_id == larger[i].entry_id);
      }
    }
  }
}

TEST_CASE("results are sorted and respect theta") {
  IndexConfig cfg;
  const auto points = mixture_points(41, 5000, 10, 40, 0.7);
  const InvertedMultiIndex index = build_index(points, cfg);
  const auto queries = gaussian_points(42, 50, 10);
  const double theta = 4.0;
  for (const auto& q : queries) {
    const auto matches = index.knn(q, 8, theta);
    for (std::size_t i = 0; i < matches.size(); ++i) {
      CHECK(matches[i].squared_distance <= theta);
      if (i > 0) {
        CHECK(matches[i - 1].squared_distance <= matches[i].squared_distance);
      }
    }
  }
}

TEST_CASE("recall@1 with default configuration clears 0.90") {
  IndexConfig cfg;  // defaults: K = 64, T = 32
  const auto points = mixture_points(2024, 10000, 10, 120, 0.5);
  const auto entries = as_entries(points);
  const InvertedMultiIndex index = build_index(points, cfg);

  // Queries are perturbed corpus points, like a revisit's descriptors.
  std::mt19937_64 rng(2025);
  std::normal_distribution<double> normal(0.0, 1.0);
  int hits = 0;
  int total = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    Eigen::VectorXd q = points[rng() % points.size()];
    for (int d = 0; d < q.size(); ++d) {
      q[d] += 0.3 * normal(rng);
    }
    const auto approx = index.knn(q, 1, kInf);
    const auto exact = exact_knn(entries, q, 1, kInf);
    REQUIRE(!exact.empty());
    REQUIRE(!approx.empty());
    ++total;
    hits += approx[0].entry_id == exact[0].entry_id ? 1 : 0;
  }
  CHECK(static_cast<double>(hits) / total >= 0.90);
}

TEST_CASE("training and insertion preconditions") {
  IndexConfig cfg;
  cfg.codebook_size = 64;
  CHECK_THROWS_AS(InvertedMultiIndex::train(gaussian_points(1, 10, 10), cfg),
                  std::invalid_argument);

  InvertedMultiIndex untrained;
  CHECK_THROWS_AS(untrained.insert({Eigen::VectorXd::Zero(10), 0, kNoLandmark}),
                  std::logic_error);
  CHECK_THROWS_AS(untrained.knn(Eigen::VectorXd::Zero(10), 1, kInf),
                  std::logic_error);
}

TEST_CASE("adaptive_k follows the database-size table") {
  CHECK(adaptive_k(0) == 1);
  CHECK(adaptive_k(9'999) == 1);
  CHECK(adaptive_k(10'000) == 2);
  CHECK(adaptive_k(99'999) == 2);
  CHECK(adaptive_k(100'000) == 3);
  CHECK(adaptive_k(999'999) == 3);
  CHECK(adaptive_k(1'000'000) == 6);
  CHECK(adaptive_k(10'000'000) == 8);
  CHECK(adaptive_k(50'000'000) == 8);
}
