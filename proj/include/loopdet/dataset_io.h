#pragma once

#include <Eigen/Core>
#include <filesystem>
#include <optional>
#include <vector>

#include "loopdet/evaluation.h"
#include "loopdet/map_database.h"
#include "loopdet/types.h"

namespace loopdet {

// In-memory form of a dataset bundle: a directory holding
//   vertices.jsonl    one record per vertex: id, t, position [x,y,z]
//   descriptors.bin   per-vertex raw descriptor blocks with landmark ids
//   landmarks.jsonl   one record per landmark: id, observer vertex ids
struct DatasetVertex {
  VertexId id = -1;
  double timestamp = 0.0;
  std::optional<Eigen::Vector3d> position;
  std::vector<RawDescriptor> descriptors;
  // Parallel to descriptors; kNoLandmark when unlinked.
  std::vector<LandmarkId> landmark_links;
};

struct Dataset {
  int d_raw = 384;
  std::vector<DatasetVertex> vertices;  // sorted by timestamp, ids 0..n-1
  // Sorted by landmark id; observers sorted by vertex timestamp.
  std::vector<std::pair<LandmarkId, std::vector<VertexId>>> landmarks;

  bool has_landmarks() const { return !landmarks.empty(); }
};

// Reads and validates a bundle. Throws DataError naming the offending file
// (and line, for the jsonl members) on malformed input or broken referential
// integrity.
Dataset load_dataset(const std::filesystem::path& directory);

void save_dataset(const Dataset& dataset, const std::filesystem::path& directory);

// Declares the dataset's landmarks and adds every vertex; descriptors stay
// pending admission.
MapDatabase build_map_database(const Dataset& dataset);

// Groundtruth rows for the evaluation harness. Throws DataError if a vertex
// lacks a position.
std::vector<GroundtruthEntry> groundtruth_from_dataset(const Dataset& dataset);

}  // namespace loopdet
