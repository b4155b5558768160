#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <limits>
#include <vector>

#include "loopdet/types.h"

namespace loopdet {

struct IndexConfig {
  // Codewords per half (K). The cell grid has K*K cells.
  int codebook_size = 64;
  // Candidate cell pairs visited by multi-sequence traversal (T).
  int probe_cells = 32;
  // Maximum admissible squared distance in projected space (theta).
  // Disabled by default.
  double max_distance = std::numeric_limits<double>::infinity();
  int kmeans_iterations = 25;
  std::uint64_t seed = 42;
};

struct NeighborMatch {
  std::uint64_t entry_id = 0;
  VertexId owner = -1;
  LandmarkId landmark = kNoLandmark;
  double squared_distance = 0.0;
};

// Second-order inverted multi-index over projected descriptors. The vector is
// split into two coordinate halves, each quantized by its own k-means
// codebook; an entry lives in the cell addressed by its nearest codeword
// pair. Queries visit cell pairs in ascending sum of sub-distances
// (multi-sequence traversal) and re-rank the gathered candidates by exact
// projected-space distance.
//
// Single-writer, multi-reader: insert() must not overlap knn(); concurrent
// knn() calls are safe.
class InvertedMultiIndex {
 public:
  InvertedMultiIndex() = default;

  // Trains the two sub-codebooks by seeded k-means++ over the coordinate
  // halves of the training vectors. Requires at least K training vectors.
  static InvertedMultiIndex train(const std::vector<Eigen::VectorXd>& training,
                                  const IndexConfig& config);
  static InvertedMultiIndex train(const std::vector<ProjectedDescriptor>& training,
                                  const IndexConfig& config);

  // Rebuilds an empty index around previously trained codebooks
  // (dim1 x K and dim2 x K, columns are codewords).
  static InvertedMultiIndex from_codebooks(Eigen::MatrixXd first,
                                           Eigen::MatrixXd second,
                                           const IndexConfig& config);

  bool trained() const { return !cells_.empty(); }
  std::uint64_t size() const { return size_; }
  int dim() const { return dim_; }
  const IndexConfig& config() const { return config_; }
  const Eigen::MatrixXd& codebook_first() const { return codebook_first_; }
  const Eigen::MatrixXd& codebook_second() const { return codebook_second_; }

  // Appends an entry; it is retrievable immediately. Entry ids count up from
  // zero in insertion order. Throws std::logic_error if untrained.
  std::uint64_t insert(const ProjectedDescriptor& descriptor);

  // Up to k matches with squared distance <= max_sq_dist, ascending by
  // (distance, entry id), drawn from the first probe_cells visited cells.
  // Fewer than k are returned when candidates run out.
  std::vector<NeighborMatch> knn(const Eigen::VectorXd& query, int k,
                                 double max_sq_dist) const;
  // Same, with the configured max_distance.
  std::vector<NeighborMatch> knn(const Eigen::VectorXd& query, int k) const {
    return knn(query, k, config_.max_distance);
  }

  // Entry ids per cell, for diagnostics and partition tests.
  std::vector<std::vector<std::uint64_t>> cell_entry_ids() const;

 private:
  struct Cell {
    std::vector<std::uint64_t> ids;
    std::vector<VertexId> owners;
    std::vector<LandmarkId> landmarks;
    std::vector<double> vectors;  // dim doubles per entry, contiguous
  };

  int nearest_codeword(const Eigen::MatrixXd& codebook,
                       const Eigen::VectorXd& sub) const;

  IndexConfig config_;
  int dim_ = 0;
  int dim_first_ = 0;
  int dim_second_ = 0;
  Eigen::MatrixXd codebook_first_;   // dim_first x K
  Eigen::MatrixXd codebook_second_;  // dim_second x K
  std::vector<Cell> cells_;          // K * K, row-major (first * K + second)
  std::uint64_t size_ = 0;
};

// Exhaustive scan over the given entries; the testing oracle for knn().
// Entry ids are positions in `entries`.
std::vector<NeighborMatch> exact_knn(const std::vector<ProjectedDescriptor>& entries,
                                     const Eigen::VectorXd& query, int k,
                                     double max_sq_dist);

// Number of nearest neighbors searched per query descriptor, stepped by
// database size:
//   < 1e4 -> 1, < 1e5 -> 2, < 1e6 -> 3, < 1e7 -> 6, >= 1e7 -> 8.
int adaptive_k(std::uint64_t database_size);

}  // namespace loopdet
