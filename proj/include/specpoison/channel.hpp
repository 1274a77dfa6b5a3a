#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <variant>

#include "config.hpp"
#include "rng.hpp"

namespace specpoison {

/// Linear power gain of one link in one slot.
struct LinkGain {
  double value = 0.0;
};

/// One additive term g * P in a received-power sum.
struct PowerContribution {
  LinkGain gain;
  double transmit_power = 0.0;
  double received() const { return gain.value * transmit_power; }
};

/// Free-space mean power gain d^-2.
inline double mean_gain(double d) {
  if (!(d > 0.0)) throw std::domain_error("mean_gain requires d > 0");
  return 1.0 / (d * d);
}

/// Draws a nonnegative gain whose expectation is `mean` under `model`.
inline LinkGain sample_gain(const ChannelModel& model, double mean, RngStream& rng) {
  return std::visit(
      [&](const auto& m) -> LinkGain {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, GaussianFading>) {
          // Truncated at zero; the bias is negligible for relative_std <= 0.25.
          const double g = mean * (1.0 + m.relative_std * standard_normal(rng));
          return {g > 0.0 ? g : 0.0};
        } else if constexpr (std::is_same_v<M, RayleighFading>) {
          // Rayleigh amplitude => exponentially distributed power.
          double u = uniform01(rng);
          if (u < 1e-300) u = 1e-300;
          return {-mean * std::log(u)};
        } else if constexpr (std::is_same_v<M, RicianFading>) {
          const double k = m.k_factor;
          const double los = std::sqrt(k / (k + 1.0));
          const double sigma = std::sqrt(1.0 / (2.0 * (k + 1.0)));
          const double re = los + sigma * standard_normal(rng);
          const double im = sigma * standard_normal(rng);
          return {mean * (re * re + im * im)};
        } else {
          // 10^(X/10), X ~ N(mu, sigma_db) with mu chosen so E[10^(X/10)] = 1.
          const double s = m.sigma_db * std::log(10.0) / 10.0;
          return {mean * std::exp(-0.5 * s * s + s * standard_normal(rng))};
        }
      },
      model);
}

/// Per-slot noise draw: Gaussian around n0, floored at a small positive value.
inline double sample_noise(double n0, double relative_std, RngStream& rng) {
  const double v = n0 * (1.0 + relative_std * standard_normal(rng));
  return v > 1e-9 ? v : 1e-9;
}

/// Sensed power: noise plus the additive received power of every contribution.
inline double sensed_power(double noise, std::span<const PowerContribution> contributions) {
  double p = noise;
  for (const auto& c : contributions) p += c.received();
  return p;
}

struct TransmissionOutcome {
  bool success = false;
  double sinr = 0.0;
};

/// SINR test at the receiver; success iff SINR >= threshold.
inline TransmissionOutcome transmission_success(LinkGain signal, double transmit_power,
                                                std::span<const PowerContribution> interferers,
                                                double noise, double threshold) {
  if (!(noise > 0.0)) throw std::domain_error("transmission_success requires noise > 0");
  const double gamma = signal.value * transmit_power / sensed_power(noise, interferers);
  return {gamma >= threshold, gamma};
}

}  // namespace specpoison
