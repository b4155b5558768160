#pragma once

#include <Eigen/Core>
#include <optional>
#include <unordered_map>
#include <vector>

#include "loopdet/types.h"

namespace loopdet {

// Pose-graph node owning the descriptors observed at one timestamped place.
struct Vertex {
  VertexId id = -1;
  double timestamp = 0.0;
  // Groundtruth position, used only by the evaluation harness.
  std::optional<Eigen::Vector3d> position;
  // gamma_i: number of this vertex's descriptors admitted to the search
  // database. Zero until admission.
  std::uint64_t descriptor_count = 0;
  bool admitted = false;

  std::vector<RawDescriptor> raw_descriptors;
  // Parallel to raw_descriptors; kNoLandmark when a descriptor has no
  // landmark association.
  std::vector<LandmarkId> descriptor_landmarks;
  // Projection cache, filled the first time the vertex is projected.
  std::vector<Eigen::VectorXd> projected;
};

struct Landmark {
  LandmarkId id = kNoLandmark;
  // Observer vertex ids in timestamp order (vertices are inserted in
  // timestamp order, so this is also insertion order).
  std::vector<VertexId> observers;
};

// Vertices, landmarks and the descriptor bookkeeping the voting and scoring
// stages rely on. Single-writer: queries must not overlap mutations.
class MapDatabase {
 public:
  // Registers a vertex. Descriptors are retained pending admission; landmark
  // observer lists are updated eagerly. landmark_links, when given, must be
  // parallel to descriptors and reference declared landmarks (kNoLandmark
  // entries are allowed). Throws std::invalid_argument on a non-monotone
  // timestamp, a dangling landmark id, or a duplicate landmark link within
  // the vertex.
  VertexId add_vertex(double timestamp, std::optional<Eigen::Vector3d> position,
                      std::vector<RawDescriptor> descriptors,
                      const std::vector<LandmarkId>* landmark_links = nullptr);

  // Landmarks must be declared before a vertex may link to them.
  void declare_landmark(LandmarkId id);
  bool has_landmark(LandmarkId id) const { return landmarks_.count(id) != 0; }

  std::size_t vertex_count() const { return vertices_.size(); }
  bool has_vertex(VertexId id) const {
    return id >= 0 && id < static_cast<VertexId>(vertices_.size());
  }
  const Vertex& vertex(VertexId id) const;
  Vertex& mutable_vertex(VertexId id);

  const Landmark& landmark(LandmarkId id) const;
  std::size_t landmark_count() const { return landmarks_.size(); }

  // Distinct landmarks observed by the vertex, ascending by id.
  const std::vector<LandmarkId>& landmarks_of_vertex(VertexId id) const;

  // All vertices with timestamp in the closed interval
  // [t_center - dt, t_center + dt], ascending by id.
  std::vector<VertexId> vertices_in_window(double t_center, double dt) const;

  // Half-open id range [first, last) of the same window. Valid because ids
  // are assigned in nondecreasing timestamp order.
  std::pair<VertexId, VertexId> window_range(double t_center, double dt) const;

  // All vertices sharing at least one landmark observation with the given
  // vertex, always including the vertex itself. Ascending by id.
  std::vector<VertexId> covisible_vertices(VertexId id) const;

  // Admission bookkeeping, driven by voting::admit_due_vertices.
  void mark_admitted(VertexId id, std::uint64_t admitted_descriptors);
  std::uint64_t total_descriptors() const { return total_descriptors_; }  // Gamma
  std::size_t admitted_vertex_count() const { return admitted_count_; }   // n_database
  std::uint64_t descriptor_count(VertexId id) const { return vertex(id).descriptor_count; }
  // First vertex id that has not been admitted yet (== vertex_count() once
  // everything is admitted).
  VertexId first_unadmitted() const { return first_unadmitted_; }

 private:
  std::vector<Vertex> vertices_;
  std::vector<double> timestamps_;  // parallel to vertices_, for binary search
  std::vector<std::vector<LandmarkId>> vertex_landmarks_;
  std::unordered_map<LandmarkId, Landmark> landmarks_;
  std::uint64_t total_descriptors_ = 0;
  std::size_t admitted_count_ = 0;
  VertexId first_unadmitted_ = 0;
};

}  // namespace loopdet
