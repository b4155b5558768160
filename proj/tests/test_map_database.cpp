#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>

#include "loopdet/map_database.h"

using namespace loopdet;

namespace {

RawDescriptor bits8(std::uint8_t pattern) {
  return RawDescriptor({pattern}, 8);
}

std::vector<RawDescriptor> some_descriptors(int n) {
  std::vector<RawDescriptor> out;
  for (int i = 0; i < n; ++i) {
    out.push_back(bits8(static_cast<std::uint8_t>(i)));
  }
  return out;
}

}  // namespace

TEST_CASE("add_vertex assigns ids in order and defers admission") {
  MapDatabase db;
  const VertexId a = db.add_vertex(0.0, std::nullopt, some_descriptors(3));
  CHECK(a == 0);
  CHECK(db.total_descriptors() == 0);  // not admitted yet
  CHECK(db.vertex(a).admitted == false);
  CHECK(db.vertex(a).raw_descriptors.size() == 3);

  const VertexId b = db.add_vertex(1.0, std::nullopt, {});
  CHECK(b == 1);

  // equal timestamps are allowed, regressions are not
  CHECK_NOTHROW(db.add_vertex(1.0, std::nullopt, {}));
  CHECK_THROWS_AS(db.add_vertex(0.5, std::nullopt, {}), std::invalid_argument);
}

TEST_CASE("landmark links must reference declared landmarks") {
  MapDatabase db;
  db.declare_landmark(7);
  std::vector<LandmarkId> links{7, kNoLandmark};
  CHECK_NOTHROW(db.add_vertex(0.0, std::nullopt, some_descriptors(2), &links));
  CHECK(db.landmark(7).observers == std::vector<VertexId>{0});

  std::vector<LandmarkId> dangling{99};
  CHECK_THROWS_AS(db.add_vertex(1.0, std::nullopt, some_descriptors(1), &dangling),
                  std::invalid_argument);

  std::vector<LandmarkId> duplicate{7, 7};
  CHECK_THROWS_AS(db.add_vertex(1.0, std::nullopt, some_descriptors(2), &duplicate),
                  std::invalid_argument);

  std::vector<LandmarkId> wrong_arity{7};
  CHECK_THROWS_AS(db.add_vertex(1.0, std::nullopt, some_descriptors(2), &wrong_arity),
                  std::invalid_argument);

  CHECK_THROWS_AS(db.declare_landmark(kNoLandmark), std::invalid_argument);
}

TEST_CASE("vertices_in_window is a closed interval") {
  MapDatabase db;
  for (const double t : {9.0, 10.0, 10.5, 12.0}) {
    db.add_vertex(t, std::nullopt, {});
  }
  CHECK(db.vertices_in_window(10.0, 1.0) == std::vector<VertexId>{0, 1, 2});
  CHECK(db.vertices_in_window(10.0, 0.0) == std::vector<VertexId>{1});
  CHECK(db.vertices_in_window(11.0, 1.0) == std::vector<VertexId>{1, 2, 3});
  CHECK(db.vertices_in_window(100.0, 1.0).empty());
  CHECK_THROWS_AS(db.vertices_in_window(10.0, -1.0), std::invalid_argument);

  MapDatabase empty;
  CHECK(empty.vertices_in_window(0.0, 5.0).empty());
}

TEST_CASE("window monotonicity in dt") {
  MapDatabase db;
  std::mt19937_64 rng(11);
  double t = 0.0;
  for (int i = 0; i < 60; ++i) {
    t += static_cast<double>(rng() % 100) / 25.0;
    db.add_vertex(t, std::nullopt, {});
  }
  for (int trial = 0; trial < 50; ++trial) {
    const double center = static_cast<double>(rng() % 200) / 2.0;
    const double dt_small = static_cast<double>(rng() % 40) / 10.0;
    const double dt_large = dt_small + static_cast<double>(rng() % 40) / 10.0;
    const auto small = db.vertices_in_window(center, dt_small);
    const auto large = db.vertices_in_window(center, dt_large);
    CHECK(std::includes(large.begin(), large.end(), small.begin(), small.end()));
  }
}

TEST_CASE("covisible_vertices follows shared landmark observations") {
  MapDatabase db;
  db.declare_landmark(1);
  std::vector<LandmarkId> link_l{1};
  db.add_vertex(0.0, std::nullopt, some_descriptors(1));           // 0
  db.add_vertex(1.0, std::nullopt, some_descriptors(1));           // 1
  db.add_vertex(2.0, std::nullopt, some_descriptors(1), &link_l);  // 2
  db.add_vertex(3.0, std::nullopt, some_descriptors(1), &link_l);  // 3

  CHECK(db.covisible_vertices(2) == std::vector<VertexId>{2, 3});
  CHECK(db.covisible_vertices(3) == std::vector<VertexId>{2, 3});
  // no observations: only itself
  CHECK(db.covisible_vertices(0) == std::vector<VertexId>{0});
  CHECK_THROWS_AS(db.covisible_vertices(99), std::invalid_argument);
}

namespace {

// Brute-force covisibility: pairwise landmark-set intersection.
std::vector<VertexId> covisible_oracle(const MapDatabase& db, VertexId query) {
  std::vector<VertexId> out;
  const auto& mine = db.landmarks_of_vertex(query);
  const std::set<LandmarkId> mine_set(mine.begin(), mine.end());
  for (VertexId v = 0; v < static_cast<VertexId>(db.vertex_count()); ++v) {
    if (v == query) {
      out.push_back(v);
      continue;
    }
    for (const LandmarkId lm : db.landmarks_of_vertex(v)) {
      if (mine_set.count(lm)) {
        out.push_back(v);
        break;
      }
    }
  }
  return out;
}

MapDatabase random_two_cluster_map(std::uint64_t seed, int n_vertices,
                                   int n_landmarks_per_cluster) {
  std::mt19937_64 rng(seed);
  MapDatabase db;
  for (int c = 0; c < 2; ++c) {
    for (int l = 0; l < n_landmarks_per_cluster; ++l) {
      db.declare_landmark(c * 1000 + l);
    }
  }
  for (int v = 0; v < n_vertices; ++v) {
    const int cluster = v < n_vertices / 2 ? 0 : 1;
    std::set<LandmarkId> chosen;
    const int n_links = static_cast<int>(rng() % 4);
    while (static_cast<int>(chosen.size()) < n_links) {
      chosen.insert(cluster * 1000 +
                    static_cast<LandmarkId>(rng() % n_landmarks_per_cluster));
    }
    std::vector<LandmarkId> links(chosen.begin(), chosen.end());
    db.add_vertex(static_cast<double>(v), std::nullopt,
                  some_descriptors(static_cast<int>(links.size())), &links);
  }
  return db;
}

}  // namespace

TEST_CASE("covisibility matches brute force and never crosses clusters") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const MapDatabase db = random_two_cluster_map(seed, 20, 6);
    for (VertexId v = 0; v < 20; ++v) {
      const auto got = db.covisible_vertices(v);
      CHECK(got == covisible_oracle(db, v));
      for (const VertexId other : got) {
        CHECK((v < 10) == (other < 10));  // clusters stay separate
      }
    }
  }
}

TEST_CASE("covisibility is symmetric") {
  for (std::uint64_t seed = 100; seed < 115; ++seed) {
    const MapDatabase db = random_two_cluster_map(seed, 16, 5);
    for (VertexId a = 0; a < 16; ++a) {
      const auto cov_a = db.covisible_vertices(a);
      for (const VertexId b : cov_a) {
        const auto cov_b = db.covisible_vertices(b);
        CHECK(std::binary_search(cov_b.begin(), cov_b.end(), a));
      }
    }
  }
}

TEST_CASE("admission bookkeeping keeps Gamma consistent") {
  MapDatabase db;
  db.add_vertex(0.0, std::nullopt, some_descriptors(3));
  db.add_vertex(1.0, std::nullopt, some_descriptors(5));
  db.add_vertex(2.0, std::nullopt, some_descriptors(2));

  db.mark_admitted(0, 3);
  CHECK(db.total_descriptors() == 3);
  CHECK(db.admitted_vertex_count() == 1);
  CHECK(db.first_unadmitted() == 1);

  db.mark_admitted(1, 5);
  CHECK(db.total_descriptors() == 8);
  std::uint64_t sum = 0;
  for (VertexId v = 0; v < 3; ++v) {
    sum += db.descriptor_count(v);
  }
  CHECK(sum == db.total_descriptors());

  CHECK_THROWS_AS(db.mark_admitted(0, 3), std::invalid_argument);
}
