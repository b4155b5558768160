#include <doctest.h>

#include <algorithm>
#include <map>
#include <random>
#include <set>

#include "loopdet/voting.h"

using namespace loopdet;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Identity projection on b raw bits: raw bit vectors are used as-is.
ProjectionModel identity_model(int bits) {
  ProjectionModel model;
  model.mean = Eigen::VectorXd::Zero(bits);
  model.basis = Eigen::MatrixXd::Identity(bits, bits);
  model.explained_variances = Eigen::VectorXd::Ones(bits);
  model.total_variance = bits;
  return model;
}

RawDescriptor bits4(bool b0, bool b1, bool b2, bool b3) {
  RawDescriptor d(4);
  d.set_bit(0, b0);
  d.set_bit(1, b1);
  d.set_bit(2, b2);
  d.set_bit(3, b3);
  return d;
}

InvertedMultiIndex flat_index(int dim) {
  IndexConfig cfg;
  cfg.codebook_size = 1;
  cfg.probe_cells = 1;
  // K = 1: one codeword per half; any values work.
  return InvertedMultiIndex::from_codebooks(
      Eigen::MatrixXd::Zero((dim + 1) / 2, 1),
      Eigen::MatrixXd::Zero(dim - (dim + 1) / 2, 1), cfg);
}

}  // namespace

TEST_CASE("admission respects the delay horizon") {
  const ProjectionModel model = identity_model(4);
  DetectorConfig cfg;
  cfg.t_delay = 10.0;

  MapDatabase db;
  db.add_vertex(0.0, std::nullopt, {bits4(0, 0, 0, 0)});
  db.add_vertex(4.0, std::nullopt, {bits4(0, 0, 0, 1)});
  db.add_vertex(6.0, std::nullopt, {bits4(0, 0, 1, 0)});
  InvertedMultiIndex index = flat_index(4);

  SUBCASE("negative database time admits nothing") {
    CHECK(admit_due_vertices(db, index, model, 5.0, cfg) == 0);
    CHECK(db.admitted_vertex_count() == 0);
    CHECK(index.size() == 0);
  }

  SUBCASE("vertices at or before t_q - t_delay are admitted") {
    CHECK(admit_due_vertices(db, index, model, 15.0, cfg) == 2);
    CHECK(db.vertex(0).admitted);
    CHECK(db.vertex(1).admitted);
    CHECK_FALSE(db.vertex(2).admitted);
    CHECK(db.total_descriptors() == 2);
    CHECK(db.admitted_vertex_count() == 2);
    CHECK(index.size() == 2);

    // boundary: timestamp == t_q - t_delay is due
    CHECK(admit_due_vertices(db, index, model, 16.0, cfg) == 1);
    CHECK(db.vertex(2).admitted);
  }
}

TEST_CASE("vertex-to-map admission retains only landmark-linked descriptors") {
  const ProjectionModel model = identity_model(4);
  DetectorConfig cfg;
  cfg.mode = DetectorMode::kVertexToMap;
  cfg.t_delay = 10.0;

  MapDatabase db;
  db.declare_landmark(1);
  db.declare_landmark(2);
  std::vector<RawDescriptor> descriptors(10, bits4(0, 1, 0, 1));
  std::vector<LandmarkId> links(10, kNoLandmark);
  links[3] = 1;
  links[7] = 2;
  db.add_vertex(0.0, std::nullopt, descriptors, &links);

  InvertedMultiIndex index = flat_index(4);
  admit_due_vertices(db, index, model, 20.0, cfg);
  CHECK(db.total_descriptors() == 2);  // only the linked pair
  CHECK(index.size() == 2);
  CHECK(db.descriptor_count(0) == 2);
}

TEST_CASE("vertex-to-vertex aggregation matches the exact-neighbor oracle") {
  const ProjectionModel model = identity_model(4);
  DetectorConfig cfg;
  cfg.t_delay = 10.0;

  MapDatabase db;
  const VertexId a = db.add_vertex(0.0, std::nullopt, {bits4(0, 0, 0, 0)});
  const VertexId b = db.add_vertex(1.0, std::nullopt, {bits4(1, 1, 1, 1)});
  const VertexId q =
      db.add_vertex(20.0, std::nullopt,
                    {bits4(0, 0, 0, 0), bits4(0, 0, 0, 0), bits4(0, 0, 0, 0)});

  InvertedMultiIndex index = flat_index(4);
  admit_due_vertices(db, index, model, 20.0, cfg);
  REQUIRE(index.size() == 2);
  const auto query = project_vertex_descriptors(db, model, q);

  SUBCASE("k = 1: every query descriptor votes for the nearest owner") {
    cfg.fixed_k = 1;
    const VoteTally tally = aggregate_v2v(query, index, cfg);
    CHECK(tally.total == 3);
    CHECK(tally.count(a) == 3);
    CHECK(tally.count(b) == 0);
  }

  SUBCASE("k = 2 with unbounded theta votes for both owners") {
    cfg.fixed_k = 2;
    const VoteTally tally = aggregate_v2v(query, index, cfg);
    CHECK(tally.total == 6);
    CHECK(tally.count(a) == 3);
    CHECK(tally.count(b) == 3);
  }

  SUBCASE("theta excludes the far owner") {
    cfg.fixed_k = 2;
    cfg.index.max_distance = 1.0;
    InvertedMultiIndex capped = flat_index(4);
    capped = InvertedMultiIndex::from_codebooks(
        capped.codebook_first(), capped.codebook_second(), cfg.index);
    DetectorConfig cfg2 = cfg;
    MapDatabase db2;
    db2.add_vertex(0.0, std::nullopt, {bits4(0, 0, 0, 0)});
    db2.add_vertex(1.0, std::nullopt, {bits4(1, 1, 1, 1)});
    const VertexId q2 = db2.add_vertex(20.0, std::nullopt, {bits4(0, 0, 0, 0)});
    admit_due_vertices(db2, capped, model, 20.0, cfg2);
    const auto query2 = project_vertex_descriptors(db2, model, q2);
    const VoteTally tally = aggregate_v2v(query2, capped, cfg2);
    // N equals the number of neighbor matches within theta
    CHECK(tally.total == 1);
    CHECK(tally.count(0) == 1);
  }

  SUBCASE("empty index yields an empty tally") {
    InvertedMultiIndex fresh = flat_index(4);
    const VoteTally tally = aggregate_v2v(query, fresh, cfg);
    CHECK(tally.total == 0);
    CHECK(tally.empty());
  }
}

TEST_CASE("vertex-to-map voting spreads over window and observers") {
  const ProjectionModel model = identity_model(4);
  DetectorConfig cfg;
  cfg.mode = DetectorMode::kVertexToMap;
  cfg.t_delay = 10.0;
  cfg.fixed_k = 1;

  MapDatabase db;
  db.declare_landmark(5);
  std::vector<LandmarkId> link{5};
  // Three observers of landmark 5 at t = 10, 10.5, 12; the t = 10 vertex
  // holds the best-matching descriptor.
  db.add_vertex(10.0, std::nullopt, {bits4(0, 0, 0, 0)}, &link);
  db.add_vertex(10.5, std::nullopt, {bits4(1, 1, 1, 1)}, &link);
  db.add_vertex(12.0, std::nullopt, {bits4(1, 1, 0, 0)}, &link);
  const VertexId q = db.add_vertex(30.0, std::nullopt, {bits4(0, 0, 0, 0)});

  InvertedMultiIndex index = flat_index(4);
  admit_due_vertices(db, index, model, 30.0, cfg);
  REQUIRE(index.size() == 3);
  const auto query = project_vertex_descriptors(db, model, q);

  SUBCASE("dt = 1: window keeps the t = 10 and t = 10.5 observers") {
    cfg.dt = 1.0;
    const VoteTally tally = aggregate_v2m(query, index, db, cfg);
    CHECK(tally.count(0) == 1);
    CHECK(tally.count(1) == 1);
    CHECK(tally.count(2) == 0);
    CHECK(tally.total == 2);
  }

  SUBCASE("dt = 0 reduces to the owner vertex") {
    cfg.dt = 0.0;
    const VoteTally tally = aggregate_v2m(query, index, db, cfg);
    CHECK(tally.count(0) == 1);
    CHECK(tally.total == 1);
  }
}

TEST_CASE("vertex-to-map rejects index entries without landmarks") {
  const ProjectionModel model = identity_model(4);
  DetectorConfig cfg;  // v2v admission keeps unlinked descriptors
  cfg.t_delay = 10.0;
  cfg.fixed_k = 1;

  MapDatabase db;
  db.add_vertex(0.0, std::nullopt, {bits4(0, 0, 0, 0)});
  const VertexId q = db.add_vertex(20.0, std::nullopt, {bits4(0, 0, 0, 0)});
  InvertedMultiIndex index = flat_index(4);
  admit_due_vertices(db, index, model, 20.0, cfg);
  const auto query = project_vertex_descriptors(db, model, q);

  DetectorConfig v2m = cfg;
  v2m.mode = DetectorMode::kVertexToMap;
  CHECK_THROWS_AS(aggregate_v2m(query, index, db, v2m), std::logic_error);
}

TEST_CASE("random vertex-to-map tallies match brute-force recomputation") {
  const ProjectionModel model = identity_model(8);
  std::mt19937_64 rng(99);

  for (int trial = 0; trial < 10; ++trial) {
    DetectorConfig cfg;
    cfg.mode = DetectorMode::kVertexToMap;
    cfg.t_delay = 5.0;
    cfg.dt = 1.0 + static_cast<double>(trial % 3);
    cfg.fixed_k = 1 + static_cast<int>(rng() % 3);

    MapDatabase db;
    const int n_landmarks = 6;
    for (LandmarkId lm = 0; lm < n_landmarks; ++lm) {
      db.declare_landmark(lm);
    }
    std::vector<ProjectedDescriptor> all_entries;
    for (int v = 0; v < 10; ++v) {
      const int n_desc = 1 + static_cast<int>(rng() % 3);
      std::vector<RawDescriptor> descriptors;
      std::vector<LandmarkId> links;
      std::set<LandmarkId> used;
      for (int d = 0; d < n_desc; ++d) {
        RawDescriptor raw(8);
        for (int bit = 0; bit < 8; ++bit) {
          raw.set_bit(bit, rng() & 1);
        }
        descriptors.push_back(raw);
        LandmarkId lm = static_cast<LandmarkId>(rng() % n_landmarks);
        while (used.count(lm)) {
          lm = (lm + 1) % n_landmarks;
        }
        used.insert(lm);
        links.push_back(lm);
      }
      db.add_vertex(static_cast<double>(v), std::nullopt, descriptors, &links);
    }
    const VertexId q = db.add_vertex(30.0, std::nullopt,
                                     {RawDescriptor({0x0f}, 8), RawDescriptor({0xf0}, 8)});

    InvertedMultiIndex index = flat_index(8);
    admit_due_vertices(db, index, model, 30.0, cfg);
    const auto query = project_vertex_descriptors(db, model, q);
    const VoteTally tally = aggregate_v2m(query, index, db, cfg);

    // Independent recomputation from exact neighbor lists.
    std::vector<ProjectedDescriptor> entries;
    for (VertexId v = 0; v < static_cast<VertexId>(db.vertex_count()) - 1; ++v) {
      const Vertex& vert = db.vertex(v);
      for (std::size_t i = 0; i < vert.raw_descriptors.size(); ++i) {
        entries.push_back({model.project(vert.raw_descriptors[i]), v,
                           vert.descriptor_landmarks[i]});
      }
    }
    std::map<VertexId, std::uint64_t> expected;
    std::uint64_t expected_total = 0;
    for (const auto& pd : query) {
      for (const auto& match : exact_knn(entries, pd.values, *cfg.fixed_k, kInf)) {
        const double t_match = db.vertex(match.owner).timestamp;
        for (const VertexId obs : db.landmark(match.landmark).observers) {
          const double t_obs = db.vertex(obs).timestamp;
          if (t_obs >= t_match - cfg.dt && t_obs <= t_match + cfg.dt) {
            ++expected[obs];
            ++expected_total;
          }
        }
      }
    }
    CHECK(tally.total == expected_total);
    for (const auto& [vertex, count] : expected) {
      CHECK(tally.count(vertex) == count);
    }
    for (const auto& [vertex, count] : tally.votes) {
      CHECK(expected[vertex] == count);
    }
  }
}

TEST_CASE("tally is invariant under query descriptor permutation") {
  const ProjectionModel model = identity_model(8);
  DetectorConfig cfg;
  cfg.t_delay = 1.0;
  cfg.fixed_k = 2;

  std::mt19937_64 rng(123);
  MapDatabase db;
  for (int v = 0; v < 6; ++v) {
    std::vector<RawDescriptor> descriptors;
    for (int d = 0; d < 4; ++d) {
      RawDescriptor raw(8);
      for (int bit = 0; bit < 8; ++bit) {
        raw.set_bit(bit, rng() & 1);
      }
      descriptors.push_back(raw);
    }
    db.add_vertex(static_cast<double>(v), std::nullopt, descriptors);
  }
  const VertexId q = db.add_vertex(20.0, std::nullopt,
                                   {RawDescriptor({0x11}, 8), RawDescriptor({0x22}, 8),
                                    RawDescriptor({0x44}, 8), RawDescriptor({0x88}, 8)});
  InvertedMultiIndex index = flat_index(8);
  admit_due_vertices(db, index, model, 20.0, cfg);

  auto query = project_vertex_descriptors(db, model, q);
  const VoteTally before = aggregate_v2v(query, index, cfg);
  std::shuffle(query.begin(), query.end(), rng);
  const VoteTally after = aggregate_v2v(query, index, cfg);
  CHECK(before.total == after.total);
  CHECK(before.votes == after.votes);
}

TEST_CASE("temporal firewall flags votes on too-recent vertices") {
  MapDatabase db;
  db.add_vertex(0.0, std::nullopt, {});
  db.add_vertex(8.0, std::nullopt, {});

  VoteTally ok;
  ok.add(0);
  CHECK(firewall_clear(ok, db, 12.0, 10.0));

  VoteTally bad;
  bad.add(1);  // vertex at t = 8 is younger than 12 - 10
  CHECK_FALSE(firewall_clear(bad, db, 12.0, 10.0));
}
