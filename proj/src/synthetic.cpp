#include "loopdet/synthetic.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace loopdet {

namespace {

// Explicit uniform/gaussian sampling on top of mt19937_64 keeps datasets
// reproducible across standard library implementations.
double uniform_unit(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double gaussian(std::mt19937_64& rng) {
  double u1 = uniform_unit(rng);
  while (u1 == 0.0) {
    u1 = uniform_unit(rng);
  }
  const double u2 = uniform_unit(rng);
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

int uniform_int(std::mt19937_64& rng, int lo, int hi) {  // inclusive bounds
  const auto span = static_cast<std::uint64_t>(hi - lo + 1);
  return lo + static_cast<int>(rng() % span);
}

Eigen::VectorXd gaussian_vector(std::mt19937_64& rng, int dim) {
  Eigen::VectorXd v(dim);
  for (int i = 0; i < dim; ++i) {
    v[i] = gaussian(rng);
  }
  return v;
}

RawDescriptor lift_to_bits(const Eigen::MatrixXd& bit_map,
                           const Eigen::VectorXd& latent) {
  const Eigen::VectorXd activations = bit_map * latent;
  RawDescriptor d(static_cast<int>(activations.size()));
  for (int i = 0; i < activations.size(); ++i) {
    d.set_bit(i, activations[i] > 0.0);
  }
  return d;
}

// Smallest m with m*(m-1) >= rate * n * (n-1): aliasing all pairs within the
// first m places reaches at least the requested pair fraction.
int aliased_place_count(double rate, int n) {
  if (rate <= 0.0 || n < 2) {
    return 0;
  }
  const double target = rate * static_cast<double>(n) * static_cast<double>(n - 1);
  int m = 2;
  while (static_cast<double>(m) * static_cast<double>(m - 1) < target && m < n) {
    ++m;
  }
  return m;
}

}  // namespace

SynthResult synth_generate(const SynthParams& params) {
  if (params.n_places < 1 || params.dwell < 1 || params.d_raw < 8 ||
      params.d_raw % 8 != 0 || params.latent_dim < 1 ||
      params.descriptors_per_place_min < 1 ||
      params.descriptors_per_place_max < params.descriptors_per_place_min ||
      params.n_revisits < 0 || params.n_revisits > params.n_places ||
      params.sigma < 0.0 || params.aliasing_rate < 0.0 ||
      params.aliasing_rate > 1.0 || params.step_seconds <= 0.0) {
    throw std::invalid_argument("synth_generate: invalid parameters");
  }

  std::mt19937_64 rng(params.seed);
  SynthResult result;
  Dataset& dataset = result.dataset;
  dataset.d_raw = params.d_raw;

  const Eigen::MatrixXd bit_map =
      [&] {
        Eigen::MatrixXd m(params.d_raw, params.latent_dim);
        for (int r = 0; r < params.d_raw; ++r) {
          for (int c = 0; c < params.latent_dim; ++c) {
            m(r, c) = gaussian(rng);
          }
        }
        return m;
      }();

  // Place layout: grid with spacing wide enough that distinct places are
  // clear false matches.
  const int cols = static_cast<int>(std::ceil(std::sqrt(params.n_places)));
  std::vector<Eigen::Vector3d> place_positions(params.n_places);
  for (int p = 0; p < params.n_places; ++p) {
    place_positions[p] = Eigen::Vector3d((p % cols) * params.place_spacing,
                                         (p / cols) * params.place_spacing, 0.0);
  }

  // Aliased subset: a seeded shuffle picks which places share the pool.
  std::vector<int> place_order(params.n_places);
  for (int p = 0; p < params.n_places; ++p) {
    place_order[p] = p;
  }
  for (int i = params.n_places - 1; i > 0; --i) {
    std::swap(place_order[i], place_order[uniform_int(rng, 0, i)]);
  }
  const int n_aliased = aliased_place_count(params.aliasing_rate, params.n_places);
  std::vector<char> is_aliased(params.n_places, 0);
  for (int i = 0; i < n_aliased; ++i) {
    is_aliased[place_order[i]] = 1;
    result.info.aliased_places.push_back(place_order[i]);
  }
  std::sort(result.info.aliased_places.begin(), result.info.aliased_places.end());

  std::vector<Eigen::VectorXd> pool_latents;
  for (int i = 0; i < params.alias_pool_size; ++i) {
    pool_latents.push_back(gaussian_vector(rng, params.latent_dim));
  }

  // Per-place base latents; aliased places append the shared pool.
  std::vector<std::vector<Eigen::VectorXd>> place_latents(params.n_places);
  for (int p = 0; p < params.n_places; ++p) {
    const int unique = uniform_int(rng, params.descriptors_per_place_min,
                                   params.descriptors_per_place_max);
    for (int i = 0; i < unique; ++i) {
      place_latents[p].push_back(gaussian_vector(rng, params.latent_dim));
    }
    if (is_aliased[p]) {
      for (const Eigen::VectorXd& z : pool_latents) {
        place_latents[p].push_back(z);
      }
    }
  }

  LandmarkId next_landmark = 0;
  std::vector<std::pair<LandmarkId, std::vector<VertexId>>>& landmarks =
      dataset.landmarks;

  // Emits one visit (dwell vertices) of place p. The very first emission of
  // a place reproduces the base latents exactly; everything later is noisy.
  int vertex_counter = 0;
  std::vector<char> place_visited(params.n_places, 0);
  auto emit_visit = [&](int p, const Eigen::Vector3d& position, bool revisit) {
    const auto& latents = place_latents[p];
    // One landmark per place descriptor and visit, observed by the whole
    // dwell group. Revisits get fresh ids: loop closure has not linked them.
    std::vector<LandmarkId> visit_landmarks(latents.size(), kNoLandmark);
    if (params.with_landmarks) {
      for (std::size_t i = 0; i < latents.size(); ++i) {
        if (uniform_unit(rng) < params.landmark_fraction) {
          visit_landmarks[i] = next_landmark++;
        }
      }
    }
    std::vector<VertexId> dwell_group;
    for (int d = 0; d < params.dwell; ++d) {
      DatasetVertex v;
      v.id = vertex_counter;
      v.timestamp = vertex_counter * params.step_seconds;
      v.position = position;
      const bool exact = !place_visited[p] && d == 0;
      for (std::size_t i = 0; i < latents.size(); ++i) {
        Eigen::VectorXd z = latents[i];
        if (!exact && params.sigma > 0.0) {
          z += params.sigma * gaussian_vector(rng, params.latent_dim);
        }
        v.descriptors.push_back(lift_to_bits(bit_map, z));
        v.landmark_links.push_back(visit_landmarks[i]);
      }
      dataset.vertices.push_back(std::move(v));
      result.info.vertex_place.push_back(p);
      result.info.vertex_is_revisit.push_back(revisit ? 1 : 0);
      dwell_group.push_back(vertex_counter);
      ++vertex_counter;
    }
    if (params.with_landmarks) {
      for (std::size_t i = 0; i < latents.size(); ++i) {
        if (visit_landmarks[i] != kNoLandmark) {
          landmarks.emplace_back(visit_landmarks[i], dwell_group);
        }
      }
    }
    place_visited[p] = 1;
  };

  for (int p = 0; p < params.n_places; ++p) {
    emit_visit(p, place_positions[p], false);
  }

  // Revisit order reuses the alias shuffle from the back so the two subsets
  // are decorrelated.
  result.info.first_revisit_vertex = params.n_revisits > 0 ? vertex_counter : -1;
  std::vector<int> revisit_places(place_order.rbegin(),
                                  place_order.rbegin() + params.n_revisits);
  for (const int p : revisit_places) {
    const double angle = 2.0 * std::numbers::pi * uniform_unit(rng);
    const double radius = params.revisit_jitter * std::sqrt(uniform_unit(rng));
    const Eigen::Vector3d offset(radius * std::cos(angle),
                                 radius * std::sin(angle), 0.0);
    emit_visit(p, place_positions[p] + offset, true);
  }

  std::sort(landmarks.begin(), landmarks.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  return result;
}

}  // namespace loopdet
