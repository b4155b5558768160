#include "loopdet/voting.h"

#include <stdexcept>
#include <string>

namespace loopdet {

std::vector<ProjectedDescriptor> project_vertex_descriptors(
    MapDatabase& db, const ProjectionModel& model, VertexId id) {
  Vertex& v = db.mutable_vertex(id);
  if (v.projected.size() != v.raw_descriptors.size()) {
    v.projected.clear();
    v.projected.reserve(v.raw_descriptors.size());
    for (const RawDescriptor& raw : v.raw_descriptors) {
      v.projected.push_back(model.project(raw));
    }
  }
  std::vector<ProjectedDescriptor> out;
  out.reserve(v.projected.size());
  for (std::size_t i = 0; i < v.projected.size(); ++i) {
    out.push_back({v.projected[i], id, v.descriptor_landmarks[i]});
  }
  return out;
}

std::size_t admit_due_vertices(MapDatabase& db, InvertedMultiIndex& index,
                               const ProjectionModel& model, double t_query,
                               const DetectorConfig& config) {
  const double t_database = t_query - config.t_delay;
  std::size_t admitted = 0;
  while (db.first_unadmitted() < static_cast<VertexId>(db.vertex_count())) {
    const VertexId id = db.first_unadmitted();
    if (db.vertex(id).timestamp > t_database) {
      break;
    }
    const auto descriptors = project_vertex_descriptors(db, model, id);
    std::uint64_t inserted = 0;
    for (const ProjectedDescriptor& pd : descriptors) {
      if (config.mode == DetectorMode::kVertexToMap && pd.landmark == kNoLandmark) {
        continue;  // only landmark-linked descriptors are retained
      }
      index.insert(pd);
      ++inserted;
    }
    db.mark_admitted(id, inserted);
    ++admitted;
  }
  return admitted;
}

namespace {

int neighbors_per_descriptor(const InvertedMultiIndex& index,
                             const DetectorConfig& config) {
  return config.fixed_k ? *config.fixed_k : adaptive_k(index.size());
}

}  // namespace

VoteTally aggregate_v2v(const std::vector<ProjectedDescriptor>& query_descriptors,
                        const InvertedMultiIndex& index,
                        const DetectorConfig& config) {
  VoteTally tally;
  if (index.size() == 0) {
    return tally;
  }
  const int k = neighbors_per_descriptor(index, config);
  for (const ProjectedDescriptor& pd : query_descriptors) {
    for (const NeighborMatch& match : index.knn(pd.values, k)) {
      tally.add(match.owner);
    }
  }
  return tally;
}

VoteTally aggregate_v2m(const std::vector<ProjectedDescriptor>& query_descriptors,
                        const InvertedMultiIndex& index, const MapDatabase& db,
                        const DetectorConfig& config) {
  VoteTally tally;
  if (index.size() == 0) {
    return tally;
  }
  const int k = neighbors_per_descriptor(index, config);
  for (const ProjectedDescriptor& pd : query_descriptors) {
    for (const NeighborMatch& match : index.knn(pd.values, k)) {
      if (match.landmark == kNoLandmark) {
        throw std::logic_error(
            "aggregate_v2m: index entry without landmark id (entry " +
            std::to_string(match.entry_id) + ")");
      }
      const double t_match = db.vertex(match.owner).timestamp;
      const auto [lo, hi] = db.window_range(t_match, config.dt);
      for (const VertexId observer : db.landmark(match.landmark).observers) {
        if (observer >= lo && observer < hi) {
          tally.add(observer);
        }
      }
    }
  }
  return tally;
}

bool firewall_clear(const VoteTally& tally, const MapDatabase& db,
                    double t_query, double t_delay) {
  const double t_database = t_query - t_delay;
  for (const auto& [vertex, votes] : tally.votes) {
    if (votes > 0 && db.vertex(vertex).timestamp > t_database) {
      return false;
    }
  }
  return true;
}

}  // namespace loopdet
