#pragma once

#include <cstdint>
#include <vector>

#include "loopdet/dataset_io.h"

namespace loopdet {

// Desk-scale synthetic world: distinct places on a grid, a tour visiting
// each once, then revisits of a chosen subset. Descriptors are generated
// from per-place latent vectors pushed through a fixed random bit-mapping;
// noise is added in latent space and re-lifted to raw bits, so retrieval
// difficulty scales smoothly with sigma. A deterministic subset of places
// additionally emits noisy copies of one shared descriptor pool, simulating
// perceptual aliasing and repetitive structure.
struct SynthParams {
  std::uint64_t seed = 1;
  int n_places = 200;
  int n_revisits = 40;
  // Vertices emitted per visit (>= 2 gives landmarks multiple observers).
  int dwell = 1;
  int descriptors_per_place_min = 40;
  int descriptors_per_place_max = 150;
  // Latent-space noise for every emission after a place's first vertex.
  double sigma = 0.0;
  // Target fraction of non-matching place pairs sharing the aliased pool.
  double aliasing_rate = 0.0;
  int alias_pool_size = 12;
  int d_raw = 384;
  int latent_dim = 10;
  double step_seconds = 1.0;
  double place_spacing = 20.0;
  double revisit_jitter = 1.0;
  bool with_landmarks = false;
  // Fraction of descriptors that carry a landmark link when landmarks are on.
  double landmark_fraction = 1.0;
};

// Generation truth kept outside the dataset, for tests and tuning.
struct SynthInfo {
  std::vector<int> vertex_place;        // place index per vertex
  std::vector<char> vertex_is_revisit;  // 1 for revisit vertices
  std::vector<int> aliased_places;      // ascending place indices
  int first_revisit_vertex = -1;        // vertex id, -1 if no revisits
};

struct SynthResult {
  Dataset dataset;
  SynthInfo info;
};

SynthResult synth_generate(const SynthParams& params);

}  // namespace loopdet
