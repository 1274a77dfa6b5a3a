#pragma once

#include <cstdint>
#include <initializer_list>
#include <cmath>
#include <random>

namespace specpoison {

// Engine used for every random stream in the simulator.
using RngStream = std::mt19937_64;

namespace detail {

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace detail

/// Labels for the independent substreams derived from a master seed. Each
/// consumer owns its own stream, so switching an attack or a defense on never
/// shifts the draws seen by traffic or by any channel link.
enum class StreamTag : std::uint64_t {
  traffic = 1,
  link_gain = 2,
  noise = 3,
  classifier_init = 4,
  defense = 5,
  hyperopt = 6,
  minibatch = 7,
};

/// Deterministically derives a 64-bit seed from `master` and a path of
/// integers (tag, phase, link, ...).
inline std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> path) noexcept {
  std::uint64_t h = detail::splitmix64(master);
  for (std::uint64_t p : path) h = detail::splitmix64(h ^ detail::splitmix64(p + 0x632be59bd9b4e019ULL));
  return h;
}

inline RngStream make_stream(std::uint64_t master, std::initializer_list<std::uint64_t> path) {
  return RngStream(derive_seed(master, path));
}

inline RngStream make_stream(std::uint64_t master, StreamTag tag, std::uint64_t a = 0, std::uint64_t b = 0) {
  return make_stream(master, {static_cast<std::uint64_t>(tag), a, b});
}

// Uniform double in [0, 1) with 53 random bits; portable across standard
// library implementations, unlike std::uniform_real_distribution.
inline double uniform01(RngStream& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline bool bernoulli(RngStream& rng, double p) { return uniform01(rng) < p; }

// Standard normal via Box-Muller; one draw per call keeps stream consumption
// fixed at two engine outputs per sample.
inline double standard_normal(RngStream& rng) {
  constexpr double two_pi = 6.283185307179586476925286766559;
  double u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  if (u1 < 1e-300) u1 = 1e-300;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
}

inline std::size_t uniform_index(RngStream& rng, std::size_t n) {
  return static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n)) % n;
}

}  // namespace specpoison
