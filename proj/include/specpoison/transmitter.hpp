#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "config.hpp"
#include "metrics.hpp"
#include "neural.hpp"
#include "rng.hpp"

namespace specpoison {

/// Classifier input for one sensed power. Powers are floored before the
/// logarithm so a zero reading stays finite.
inline double sensing_feature(double power, SensingScale scale) {
  if (scale == SensingScale::linear) return power;
  return 10.0 * std::log10(std::max(power, 1e-12));
}

/// The most recent `capacity` sensed powers, oldest first.
class SensingWindow {
 public:
  explicit SensingWindow(int capacity = 10) : capacity_(static_cast<std::size_t>(capacity)) {
    if (capacity < 1) throw std::invalid_argument("window capacity must be >= 1");
  }

  void push(double p) {
    values_.push_back(p);
    if (values_.size() > capacity_) values_.pop_front();
  }
  bool full() const { return values_.size() == capacity_; }
  std::size_t size() const { return values_.size(); }
  std::size_t capacity() const { return capacity_; }
  std::vector<double> features() const { return {values_.begin(), values_.end()}; }
  void clear() { values_.clear(); }

 private:
  std::size_t capacity_;
  std::deque<double> values_;
};

/// Builds one sample per slot t >= n_new: features are powers t-n_new+1..t,
/// label is the slot's ground-truth class (1 = busy / ACK).
inline Dataset collect_windows(std::span<const double> powers, std::span<const int> labels, int n_new) {
  if (powers.size() != labels.size()) throw std::invalid_argument("powers and labels differ in length");
  if (n_new < 1) throw std::invalid_argument("n_new must be >= 1");
  const auto w = static_cast<std::size_t>(n_new);
  if (powers.size() < w) throw DatasetError("trace too short for the sensing window");
  Dataset d;
  d.samples.reserve(powers.size() - w);
  for (std::size_t t = w; t < powers.size(); ++t) {
    Sample s;
    s.features.assign(powers.begin() + static_cast<std::ptrdiff_t>(t + 1 - w),
                      powers.begin() + static_cast<std::ptrdiff_t>(t + 1));
    s.label = labels[t];
    d.samples.push_back(std::move(s));
  }
  return d;
}

/// Transmitter training data: sensed powers as features, busy/idle as label.
inline Dataset collect_training_data(std::span<const double> powers, std::span<const int> busy, int n_new) {
  return collect_windows(powers, busy, n_new);
}

enum class TransmitterMode { training_collection, test, retraining_collection };

struct TransmitterState {
  Classifier classifier;  // C_T, or the retrained instance after retrain()
  SensingWindow window;
  TransmitterMode mode = TransmitterMode::test;
  Hyperparams hyperparams;
};

struct Decision {
  bool transmit = false;
  double score = 0.0;
  int label = 1;  // label before any defense flip
  bool flipped = false;
};

/// Pushes p_t and classifies the window; transmits iff the label is idle.
inline Decision predict(TransmitterState& state, double sensed) {
  state.window.push(sensed);
  if (!state.window.full()) throw std::logic_error("predict called before the sensing window is full");
  const auto f = state.window.features();
  Decision d;
  d.score = state.classifier.score(f);
  d.label = Classifier::classify_score(d.score, state.classifier.decision_boundary);
  d.transmit = d.label == 0;
  return d;
}

/// Score thresholds of the confidence-gated defense. Scores strictly below
/// `low` or strictly above `high` are eligible for a label flip.
struct DefenseThresholds {
  double low = -std::numeric_limits<double>::infinity();   // tau0
  double high = std::numeric_limits<double>::infinity();   // tau1
};

/// Picks tau0 so that floor(P_d * |{p < tau}|) reference scores lie below it,
/// and tau1 so that floor(P_d * |{p > tau}|) lie above it.
inline DefenseThresholds select_defense_thresholds(std::span<const double> scores, double tau, double pd) {
  if (!(pd >= 0.0 && pd <= 1.0)) throw std::invalid_argument("P_d out of [0,1]");
  std::vector<double> below, above;
  for (double s : scores) {
    if (s < tau) below.push_back(s);
    else if (s > tau) above.push_back(s);
  }
  std::sort(below.begin(), below.end());
  std::sort(above.begin(), above.end(), std::greater<>());
  DefenseThresholds t;
  const auto k0 = static_cast<std::size_t>(std::floor(pd * static_cast<double>(below.size()) + 1e-9));
  const auto k1 = static_cast<std::size_t>(std::floor(pd * static_cast<double>(above.size()) + 1e-9));
  if (k0 > 0) t.low = k0 < below.size() ? below[k0] : tau;
  if (k1 > 0) t.high = k1 < above.size() ? above[k1] : tau;
  return t;
}

struct ActiveDefense {
  DefenseConfig config;
  DefenseThresholds thresholds;
};

inline bool defense_eligible(double score, const DefenseThresholds& t) { return score < t.low || score > t.high; }

/// Classifies the window, then flips the label with the configured
/// probability when the score falls outside [tau0, tau1].
inline Decision decide_with_defense(TransmitterState& state, double sensed, const ActiveDefense* defense,
                                    RngStream& rng) {
  Decision d = predict(state, sensed);
  if (defense && defense_eligible(d.score, defense->thresholds) && bernoulli(rng, defense->config.flip_probability)) {
    d.flipped = true;
    d.transmit = !d.transmit;
  }
  return d;
}

/// Retrains from scratch on a new trace (features possibly poisoned, labels
/// ground truth) with the incumbent hyperparameters.
inline void retrain(TransmitterState& state, std::span<const double> powers, std::span<const int> busy,
                    std::uint64_t seed) {
  if (powers.empty()) throw DatasetError("retraining trace is empty");
  const Dataset d = collect_training_data(powers, busy, static_cast<int>(state.window.capacity()));
  if (d.empty()) throw DatasetError("retraining trace too short");
  state.classifier = train(d, state.hyperparams, seed);
  state.mode = TransmitterMode::test;
}

}  // namespace specpoison
