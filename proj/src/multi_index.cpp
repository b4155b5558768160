#include "loopdet/multi_index.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <random>
#include <stdexcept>
#include <string>

namespace loopdet {

namespace {

double uniform_unit(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double squared_distance(const double* a, const double* b, int dim) {
  double acc = 0.0;
  for (int i = 0; i < dim; ++i) {
    const double diff = a[i] - b[i];
    acc += diff * diff;
  }
  return acc;
}

// Seeded k-means++ initialization followed by a fixed number of Lloyd
// iterations. Data columns are samples; returns dim x k centroids. Empty
// clusters are re-seeded with the point farthest from its centroid.
Eigen::MatrixXd kmeans(const Eigen::MatrixXd& data, int k, int iterations,
                       std::mt19937_64& rng) {
  const int dim = static_cast<int>(data.rows());
  const auto n = data.cols();
  Eigen::MatrixXd centroids(dim, k);

  // k-means++ seeding.
  std::vector<double> min_sq(n, std::numeric_limits<double>::infinity());
  const auto first = static_cast<Eigen::Index>(uniform_unit(rng) * static_cast<double>(n));
  centroids.col(0) = data.col(std::min(first, n - 1));
  for (int c = 1; c < k; ++c) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double d = (data.col(i) - centroids.col(c - 1)).squaredNorm();
      min_sq[i] = std::min(min_sq[i], d);
      total += min_sq[i];
    }
    Eigen::Index chosen = n - 1;
    if (total > 0.0) {
      const double target = uniform_unit(rng) * total;
      double acc = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        acc += min_sq[i];
        if (acc >= target) {
          chosen = i;
          break;
        }
      }
    } else {
      chosen = static_cast<Eigen::Index>(uniform_unit(rng) * static_cast<double>(n));
      chosen = std::min(chosen, n - 1);
    }
    centroids.col(c) = data.col(chosen);
  }

  std::vector<int> assignment(n, 0);
  std::vector<double> assigned_sq(n, 0.0);
  for (int iter = 0; iter < iterations; ++iter) {
    for (Eigen::Index i = 0; i < n; ++i) {
      int best = 0;
      double best_sq = (data.col(i) - centroids.col(0)).squaredNorm();
      for (int c = 1; c < k; ++c) {
        const double d = (data.col(i) - centroids.col(c)).squaredNorm();
        if (d < best_sq) {
          best_sq = d;
          best = c;
        }
      }
      assignment[i] = best;
      assigned_sq[i] = best_sq;
    }

    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(dim, k);
    std::vector<Eigen::Index> counts(k, 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.col(assignment[i]) += data.col(i);
      ++counts[assignment[i]];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[c] > 0) {
        centroids.col(c) = sums.col(c) / static_cast<double>(counts[c]);
      } else {
        const auto farthest = static_cast<Eigen::Index>(
            std::max_element(assigned_sq.begin(), assigned_sq.end()) -
            assigned_sq.begin());
        centroids.col(c) = data.col(farthest);
        assigned_sq[farthest] = 0.0;
      }
    }
  }
  return centroids;
}

}  // namespace

InvertedMultiIndex InvertedMultiIndex::train(
    const std::vector<Eigen::VectorXd>& training, const IndexConfig& config) {
  if (config.codebook_size < 1 || config.probe_cells < 1) {
    throw std::invalid_argument("train: codebook_size and probe_cells must be >= 1");
  }
  if (training.size() < static_cast<std::size_t>(config.codebook_size)) {
    throw std::invalid_argument(
        "train: need at least " + std::to_string(config.codebook_size) +
        " training descriptors, got " + std::to_string(training.size()));
  }
  const int dim = static_cast<int>(training.front().size());
  if (dim < 2) {
    throw std::invalid_argument("train: descriptor dimension must be >= 2");
  }
  const int dim_first = (dim + 1) / 2;
  const int dim_second = dim - dim_first;

  Eigen::MatrixXd first(dim_first, training.size());
  Eigen::MatrixXd second(dim_second, training.size());
  for (std::size_t i = 0; i < training.size(); ++i) {
    if (training[i].size() != dim) {
      throw std::invalid_argument("train: inconsistent descriptor dimensions");
    }
    first.col(static_cast<Eigen::Index>(i)) = training[i].head(dim_first);
    second.col(static_cast<Eigen::Index>(i)) = training[i].tail(dim_second);
  }

  std::mt19937_64 rng(config.seed);
  Eigen::MatrixXd cb1 = kmeans(first, config.codebook_size,
                               config.kmeans_iterations, rng);
  Eigen::MatrixXd cb2 = kmeans(second, config.codebook_size,
                               config.kmeans_iterations, rng);
  return from_codebooks(std::move(cb1), std::move(cb2), config);
}

InvertedMultiIndex InvertedMultiIndex::train(
    const std::vector<ProjectedDescriptor>& training, const IndexConfig& config) {
  std::vector<Eigen::VectorXd> values;
  values.reserve(training.size());
  for (const ProjectedDescriptor& pd : training) {
    values.push_back(pd.values);
  }
  return train(values, config);
}

InvertedMultiIndex InvertedMultiIndex::from_codebooks(Eigen::MatrixXd first,
                                                      Eigen::MatrixXd second,
                                                      const IndexConfig& config) {
  if (first.cols() != second.cols() || first.cols() < 1) {
    throw std::invalid_argument("from_codebooks: codebooks must share K >= 1");
  }
  InvertedMultiIndex index;
  index.config_ = config;
  index.config_.codebook_size = static_cast<int>(first.cols());
  index.dim_first_ = static_cast<int>(first.rows());
  index.dim_second_ = static_cast<int>(second.rows());
  index.dim_ = index.dim_first_ + index.dim_second_;
  index.codebook_first_ = std::move(first);
  index.codebook_second_ = std::move(second);
  index.cells_.resize(static_cast<std::size_t>(index.config_.codebook_size) *
                      static_cast<std::size_t>(index.config_.codebook_size));
  return index;
}

int InvertedMultiIndex::nearest_codeword(const Eigen::MatrixXd& codebook,
                                         const Eigen::VectorXd& sub) const {
  int best = 0;
  double best_sq = (codebook.col(0) - sub).squaredNorm();
  for (int c = 1; c < codebook.cols(); ++c) {
    const double d = (codebook.col(c) - sub).squaredNorm();
    if (d < best_sq) {
      best_sq = d;
      best = c;
    }
  }
  return best;
}

std::uint64_t InvertedMultiIndex::insert(const ProjectedDescriptor& descriptor) {
  if (!trained()) {
    throw std::logic_error("insert: index has not been trained");
  }
  if (descriptor.values.size() != dim_) {
    throw std::invalid_argument("insert: descriptor dimension mismatch");
  }
  const int c1 = nearest_codeword(codebook_first_, descriptor.values.head(dim_first_));
  const int c2 = nearest_codeword(codebook_second_, descriptor.values.tail(dim_second_));
  Cell& cell = cells_[static_cast<std::size_t>(c1) *
                          static_cast<std::size_t>(config_.codebook_size) +
                      static_cast<std::size_t>(c2)];
  const std::uint64_t id = size_++;
  cell.ids.push_back(id);
  cell.owners.push_back(descriptor.owner);
  cell.landmarks.push_back(descriptor.landmark);
  cell.vectors.insert(cell.vectors.end(), descriptor.values.data(),
                      descriptor.values.data() + dim_);
  return id;
}

std::vector<NeighborMatch> InvertedMultiIndex::knn(const Eigen::VectorXd& query,
                                                   int k,
                                                   double max_sq_dist) const {
  if (!trained()) {
    throw std::logic_error("knn: index has not been trained");
  }
  if (query.size() != dim_) {
    throw std::invalid_argument("knn: query dimension mismatch");
  }
  if (k < 1 || size_ == 0) {
    return {};
  }

  const int K = config_.codebook_size;
  // Sub-distances to every codeword, sorted ascending (ties by codeword id).
  std::vector<std::pair<double, int>> d1(static_cast<std::size_t>(K));
  std::vector<std::pair<double, int>> d2(static_cast<std::size_t>(K));
  for (int c = 0; c < K; ++c) {
    d1[static_cast<std::size_t>(c)] = {
        (codebook_first_.col(c) - query.head(dim_first_)).squaredNorm(), c};
    d2[static_cast<std::size_t>(c)] = {
        (codebook_second_.col(c) - query.tail(dim_second_)).squaredNorm(), c};
  }
  std::sort(d1.begin(), d1.end());
  std::sort(d2.begin(), d2.end());

  // Multi-sequence traversal over rank pairs (i, j): pop in ascending
  // d1[i] + d2[j]; a successor is pushed once its other predecessor has been
  // popped, which keeps every pair enqueued exactly once.
  struct QueueEntry {
    double sum;
    int i;
    int j;
    bool operator>(const QueueEntry& other) const {
      if (sum != other.sum) return sum > other.sum;
      if (i != other.i) return i > other.i;
      return j > other.j;
    }
  };
  std::priority_queue<QueueEntry, std::vector<QueueEntry>, std::greater<QueueEntry>> queue;
  std::vector<char> popped(static_cast<std::size_t>(K) * static_cast<std::size_t>(K), 0);
  auto popped_at = [&](int i, int j) -> char& {
    return popped[static_cast<std::size_t>(i) * static_cast<std::size_t>(K) +
                  static_cast<std::size_t>(j)];
  };
  queue.push({d1[0].first + d2[0].first, 0, 0});

  std::vector<NeighborMatch> candidates;
  const double* qptr = query.data();
  int visited = 0;
  while (!queue.empty() && visited < config_.probe_cells) {
    const QueueEntry top = queue.top();
    queue.pop();
    popped_at(top.i, top.j) = 1;
    ++visited;

    const int c1 = d1[static_cast<std::size_t>(top.i)].second;
    const int c2 = d2[static_cast<std::size_t>(top.j)].second;
    const Cell& cell = cells_[static_cast<std::size_t>(c1) *
                                  static_cast<std::size_t>(K) +
                              static_cast<std::size_t>(c2)];
    for (std::size_t e = 0; e < cell.ids.size(); ++e) {
      const double sq = squared_distance(qptr, &cell.vectors[e * static_cast<std::size_t>(dim_)], dim_);
      if (sq <= max_sq_dist) {
        candidates.push_back({cell.ids[e], cell.owners[e], cell.landmarks[e], sq});
      }
    }

    if (top.i + 1 < K && (top.j == 0 || popped_at(top.i + 1, top.j - 1))) {
      queue.push({d1[static_cast<std::size_t>(top.i + 1)].first +
                      d2[static_cast<std::size_t>(top.j)].first,
                  top.i + 1, top.j});
    }
    if (top.j + 1 < K && (top.i == 0 || popped_at(top.i - 1, top.j + 1))) {
      queue.push({d1[static_cast<std::size_t>(top.i)].first +
                      d2[static_cast<std::size_t>(top.j + 1)].first,
                  top.i, top.j + 1});
    }
  }

  std::sort(candidates.begin(), candidates.end(),
            [](const NeighborMatch& a, const NeighborMatch& b) {
              if (a.squared_distance != b.squared_distance) {
                return a.squared_distance < b.squared_distance;
              }
              return a.entry_id < b.entry_id;
            });
  if (candidates.size() > static_cast<std::size_t>(k)) {
    candidates.resize(static_cast<std::size_t>(k));
  }
  return candidates;
}

std::vector<std::vector<std::uint64_t>> InvertedMultiIndex::cell_entry_ids() const {
  std::vector<std::vector<std::uint64_t>> out;
  out.reserve(cells_.size());
  for (const Cell& cell : cells_) {
    out.push_back(cell.ids);
  }
  return out;
}

std::vector<NeighborMatch> exact_knn(const std::vector<ProjectedDescriptor>& entries,
                                     const Eigen::VectorXd& query, int k,
                                     double max_sq_dist) {
  std::vector<NeighborMatch> matches;
  if (k < 1) {
    return matches;
  }
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (entries[i].values.size() != query.size()) {
      throw std::invalid_argument("exact_knn: dimension mismatch");
    }
    // Same scalar accumulation as the index path, so distances agree bitwise.
    const double sq = squared_distance(entries[i].values.data(), query.data(),
                                       static_cast<int>(query.size()));
    if (sq <= max_sq_dist) {
      matches.push_back({static_cast<std::uint64_t>(i), entries[i].owner,
                         entries[i].landmark, sq});
    }
  }
  std::sort(matches.begin(), matches.end(),
            [](const NeighborMatch& a, const NeighborMatch& b) {
              if (a.squared_distance != b.squared_distance) {
                return a.squared_distance < b.squared_distance;
              }
              return a.entry_id < b.entry_id;
            });
  if (matches.size() > static_cast<std::size_t>(k)) {
    matches.resize(static_cast<std::size_t>(k));
  }
  return matches;
}

int adaptive_k(std::uint64_t database_size) {
  if (database_size < 10'000) return 1;
  if (database_size < 100'000) return 2;
  if (database_size < 1'000'000) return 3;
  if (database_size < 10'000'000) return 6;
  return 8;
}

}  // namespace loopdet
