#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <stdexcept>
#include <unordered_map>
#include <vector>

namespace loopdet {

using VertexId = std::int64_t;
using LandmarkId = std::int64_t;

// Sentinel for descriptors without an associated landmark (serialized as -1).
inline constexpr LandmarkId kNoLandmark = -1;

// Binary feature descriptor, stored bit-packed. The search pipeline treats it
// as a real vector with each bit mapped to 0.0/1.0.
class RawDescriptor {
 public:
  RawDescriptor() = default;
  explicit RawDescriptor(int num_bits)
      : bytes_((num_bits + 7) / 8, 0), num_bits_(num_bits) {}
  RawDescriptor(std::vector<std::uint8_t> bytes, int num_bits)
      : bytes_(std::move(bytes)), num_bits_(num_bits) {
    if (static_cast<int>(bytes_.size()) * 8 < num_bits_) {
      throw std::invalid_argument("RawDescriptor: byte buffer too short");
    }
  }

  int size() const { return num_bits_; }

  bool bit(int i) const { return (bytes_[i >> 3] >> (i & 7)) & 1u; }

  void set_bit(int i, bool value) {
    if (value) {
      bytes_[i >> 3] |= static_cast<std::uint8_t>(1u << (i & 7));
    } else {
      bytes_[i >> 3] &= static_cast<std::uint8_t>(~(1u << (i & 7)));
    }
  }

  const std::vector<std::uint8_t>& bytes() const { return bytes_; }

  Eigen::VectorXd to_real() const {
    Eigen::VectorXd v(num_bits_);
    for (int i = 0; i < num_bits_; ++i) {
      v[i] = bit(i) ? 1.0 : 0.0;
    }
    return v;
  }

  bool operator==(const RawDescriptor& other) const {
    return num_bits_ == other.num_bits_ && bytes_ == other.bytes_;
  }

 private:
  std::vector<std::uint8_t> bytes_;
  int num_bits_ = 0;
};

// Low-dimensional real-valued descriptor plus provenance used by the index
// and the voting stages.
struct ProjectedDescriptor {
  Eigen::VectorXd values;
  VertexId owner = -1;
  LandmarkId landmark = kNoLandmark;
};

// Per-query vote counts x_i keyed by vertex id, plus the running total N.
struct VoteTally {
  std::unordered_map<VertexId, std::uint64_t> votes;
  std::uint64_t total = 0;

  void add(VertexId vertex, std::uint64_t count = 1) {
    votes[vertex] += count;
    total += count;
  }

  std::uint64_t count(VertexId vertex) const {
    auto it = votes.find(vertex);
    return it == votes.end() ? 0 : it->second;
  }

  bool empty() const { return votes.empty(); }
};

// Raised on malformed input data (datasets, model files, CSV). The CLI maps
// it to exit code 2, as opposed to usage errors (exit code 1).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace loopdet
