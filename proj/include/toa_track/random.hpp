// Counter-based seed derivation.
//
// Every random draw in a simulation comes from an engine seeded by hashing the
// root seed together with a purpose tag and the coordinates of the draw (run
// index, time step). Work can therefore be split across threads in any order
// without changing a single number.
#pragma once

#include "toa_track/core.hpp"

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>

namespace toa {

using Engine = std::mt19937_64;

enum class StreamTag : std::uint64_t {
  Trajectory = 1,
  Measurement = 2,
  BallSampling = 3,
  ErrorScaling = 4,
  Benchmark = 5,
  Property = 6,
};

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t root, StreamTag tag,
                                    std::initializer_list<std::uint64_t> path) noexcept {
  std::uint64_t h = splitmix64(root ^ 0x6a09e667f3bcc909ULL);
  h = splitmix64(h ^ static_cast<std::uint64_t>(tag));
  for (std::uint64_t p : path) {
    h = splitmix64(h ^ p);
  }
  return h;
}

inline Engine make_stream(std::uint64_t root, StreamTag tag,
                          std::initializer_list<std::uint64_t> path = {}) {
  return Engine(derive_seed(root, tag, path));
}

/// Uniform direction on the unit sphere in R^n (normalized standard Gaussian).
template <int Dim>
Vec<Dim> unit_direction(Engine& rng, Eigen::Index n) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vec<Dim> u = detail::zero_vec<Dim>(n);
  double norm = 0.0;
  do {
    for (Eigen::Index k = 0; k < u.size(); ++k) {
      u[k] = normal(rng);
    }
    norm = u.norm();
  } while (norm == 0.0);
  return u / norm;
}

/// Uniform point in the closed ball B(center, radius).
template <int Dim>
Vec<Dim> uniform_in_ball(Engine& rng, const Vec<Dim>& center, double radius) {
  const auto n = center.size();
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Vec<Dim> dir = unit_direction<Dim>(rng, n);
  const double scale = radius * std::pow(unit(rng), 1.0 / static_cast<double>(n));
  return center + scale * dir;
}

}  // namespace toa
