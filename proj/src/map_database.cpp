#include "loopdet/map_database.h"

#include <algorithm>
#include <set>
#include <string>

namespace loopdet {

VertexId MapDatabase::add_vertex(double timestamp,
                                 std::optional<Eigen::Vector3d> position,
                                 std::vector<RawDescriptor> descriptors,
                                 const std::vector<LandmarkId>* landmark_links) {
  if (!vertices_.empty() && timestamp < vertices_.back().timestamp) {
    throw std::invalid_argument(
        "add_vertex: timestamp " + std::to_string(timestamp) +
        " precedes last vertex at " + std::to_string(vertices_.back().timestamp));
  }
  if (landmark_links != nullptr && landmark_links->size() != descriptors.size()) {
    throw std::invalid_argument(
        "add_vertex: landmark_links must be parallel to descriptors");
  }

  const VertexId id = static_cast<VertexId>(vertices_.size());

  std::vector<LandmarkId> links(descriptors.size(), kNoLandmark);
  std::vector<LandmarkId> observed;
  if (landmark_links != nullptr) {
    std::set<LandmarkId> seen;
    for (std::size_t i = 0; i < landmark_links->size(); ++i) {
      const LandmarkId lm = (*landmark_links)[i];
      if (lm == kNoLandmark) {
        continue;
      }
      if (landmarks_.count(lm) == 0) {
        throw std::invalid_argument("add_vertex: dangling landmark id " +
                                    std::to_string(lm));
      }
      if (!seen.insert(lm).second) {
        throw std::invalid_argument(
            "add_vertex: duplicate link to landmark " + std::to_string(lm) +
            " (one descriptor per (vertex, landmark) observation)");
      }
      links[i] = lm;
    }
    observed.assign(seen.begin(), seen.end());
  }

  Vertex v;
  v.id = id;
  v.timestamp = timestamp;
  v.position = std::move(position);
  v.raw_descriptors = std::move(descriptors);
  v.descriptor_landmarks = std::move(links);
  vertices_.push_back(std::move(v));
  timestamps_.push_back(timestamp);
  vertex_landmarks_.push_back(observed);

  // Eager observer maintenance; ids arrive in timestamp order, so appending
  // keeps observer lists sorted by timestamp.
  for (const LandmarkId lm : observed) {
    landmarks_[lm].observers.push_back(id);
  }
  return id;
}

void MapDatabase::declare_landmark(LandmarkId id) {
  if (id == kNoLandmark) {
    throw std::invalid_argument("declare_landmark: reserved id -1");
  }
  auto [it, inserted] = landmarks_.try_emplace(id);
  if (inserted) {
    it->second.id = id;
  }
}

const Vertex& MapDatabase::vertex(VertexId id) const {
  if (!has_vertex(id)) {
    throw std::invalid_argument("unknown vertex id " + std::to_string(id));
  }
  return vertices_[static_cast<std::size_t>(id)];
}

Vertex& MapDatabase::mutable_vertex(VertexId id) {
  if (!has_vertex(id)) {
    throw std::invalid_argument("unknown vertex id " + std::to_string(id));
  }
  return vertices_[static_cast<std::size_t>(id)];
}

const Landmark& MapDatabase::landmark(LandmarkId id) const {
  auto it = landmarks_.find(id);
  if (it == landmarks_.end()) {
    throw std::invalid_argument("unknown landmark id " + std::to_string(id));
  }
  return it->second;
}

const std::vector<LandmarkId>& MapDatabase::landmarks_of_vertex(VertexId id) const {
  if (!has_vertex(id)) {
    throw std::invalid_argument("unknown vertex id " + std::to_string(id));
  }
  return vertex_landmarks_[static_cast<std::size_t>(id)];
}

std::pair<VertexId, VertexId> MapDatabase::window_range(double t_center,
                                                        double dt) const {
  if (dt < 0.0) {
    throw std::invalid_argument("window_range: dt must be >= 0");
  }
  auto lo = std::lower_bound(timestamps_.begin(), timestamps_.end(), t_center - dt);
  auto hi = std::upper_bound(timestamps_.begin(), timestamps_.end(), t_center + dt);
  return {static_cast<VertexId>(lo - timestamps_.begin()),
          static_cast<VertexId>(hi - timestamps_.begin())};
}

std::vector<VertexId> MapDatabase::vertices_in_window(double t_center,
                                                      double dt) const {
  const auto [lo, hi] = window_range(t_center, dt);
  std::vector<VertexId> out;
  out.reserve(static_cast<std::size_t>(hi - lo));
  for (VertexId id = lo; id < hi; ++id) {
    out.push_back(id);
  }
  return out;
}

std::vector<VertexId> MapDatabase::covisible_vertices(VertexId id) const {
  const auto& observed = landmarks_of_vertex(id);
  std::vector<VertexId> out;
  out.push_back(id);
  for (const LandmarkId lm : observed) {
    const auto& obs = landmark(lm).observers;
    out.insert(out.end(), obs.begin(), obs.end());
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

void MapDatabase::mark_admitted(VertexId id, std::uint64_t admitted_descriptors) {
  Vertex& v = mutable_vertex(id);
  if (v.admitted) {
    throw std::invalid_argument("vertex " + std::to_string(id) +
                                " already admitted");
  }
  v.admitted = true;
  v.descriptor_count = admitted_descriptors;
  total_descriptors_ += admitted_descriptors;
  ++admitted_count_;
  while (first_unadmitted_ < static_cast<VertexId>(vertices_.size()) &&
         vertices_[static_cast<std::size_t>(first_unadmitted_)].admitted) {
    ++first_unadmitted_;
  }
}

}  // namespace loopdet
