#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "config.hpp"
#include "neural.hpp"
#include "transmitter.hpp"

namespace specpoison {

// ---------------------------------------------------------------------------
// Slot-structure inference.

/// Observed inter-arrival times between detected ACKs, in arbitrary time units.
struct AckTimeline {
  std::vector<double> intervals;
  double tolerance = 0.0;  // residues within this of zero count as zero
};

/// Reduces the interval list by repeated remainders against its smallest
/// element until one element is left. On exact integer multiples this is
/// the GCD; when every interval shares a factor k the result is k slots.
inline double infer_slot_length(const AckTimeline& timeline) {
  if (timeline.intervals.empty()) throw std::invalid_argument("empty ACK timeline");
  const double eps = timeline.tolerance;
  if (!(eps >= 0.0)) throw std::invalid_argument("tolerance must be >= 0");
  std::vector<double> items;
  for (double t : timeline.intervals) {
    if (!(t > 0.0) || !std::isfinite(t)) throw std::invalid_argument("inter-arrival times must be positive");
    items.push_back(t);
  }
  for (int round = 0; round < 100000; ++round) {
    const auto min_it = std::min_element(items.begin(), items.end());
    const double smallest = *min_it;
    std::vector<double> next{smallest};
    for (auto it = items.begin(); it != items.end(); ++it) {
      if (it == min_it) continue;
      const double k = std::floor(*it / smallest);
      const double residue = *it - k * smallest;
      // Jitter can land the residue just below one full period as well.
      if (residue <= eps || smallest - residue <= eps) continue;
      next.push_back(residue);
    }
    if (next.size() == 1) return smallest;
    items = std::move(next);
  }
  throw std::runtime_error("slot length inference did not converge; increase the tolerance");
}

/// Sub-slot power samples of one slot that carried an ACK.
using SubSlotTrace = std::vector<double>;

/// Estimates the sensing fraction from the power step-up at the start of the
/// data period in ACK-bearing slots (median over slots with a step).
inline SlotStructure identify_slot_phases(std::span<const SubSlotTrace> ack_slots, double min_step_ratio = 2.0) {
  std::vector<double> splits;
  for (const auto& trace : ack_slots) {
    if (trace.size() < 2) continue;
    const auto [lo, hi] = std::minmax_element(trace.begin(), trace.end());
    if (!(*hi >= min_step_ratio * std::max(*lo, 1e-12))) continue;
    const double level = 0.5 * (*lo + *hi);
    for (std::size_t i = 0; i < trace.size(); ++i)
      if (trace[i] > level) {
        splits.push_back(static_cast<double>(i) / static_cast<double>(trace.size()));
        break;
      }
  }
  if (splits.empty()) throw std::invalid_argument("no ACK-bearing slot with a power step observed");
  std::sort(splits.begin(), splits.end());
  const std::size_t n = splits.size();
  const double median = n % 2 ? splits[n / 2] : 0.5 * (splits[n / 2 - 1] + splits[n / 2]);
  return {median, 1.0 - median, 0.0};
}

// ---------------------------------------------------------------------------
// Exploratory attack: surrogate classifier of transmission outcomes.

/// Adversary training data: its own sensing windows, label 1 iff an ACK was
/// observed in that slot.
inline Dataset collect_adversary_data(std::span<const double> own_powers, std::span<const int> ack, int n_new) {
  return collect_windows(own_powers, ack, n_new);
}

struct AdversaryState {
  Classifier surrogate;  // C_A
  SensingWindow window;
  double transmit_power = 1000.0;
};

struct AckPrediction {
  bool ack = false;
  double score = 0.0;
};

inline AckPrediction predict_ack(AdversaryState& state, double sensed) {
  state.window.push(sensed);
  if (!state.window.full()) throw std::logic_error("predict_ack called before the sensing window is full");
  const double s = state.surrogate.score(state.window.features());
  return {Classifier::classify_score(s, state.surrogate.decision_boundary) == 1, s};
}

// ---------------------------------------------------------------------------
// Retraining-phase detection.

/// Least-squares spacing of change instants: minimizes
/// sum_i (t_i - (t_1 + (i-1) * delta))^2.
inline double estimate_retrain_period(std::span<const double> instants) {
  if (instants.size() < 2) throw std::invalid_argument("need at least two change instants");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 1; i < instants.size(); ++i) {
    const double k = static_cast<double>(i);
    num += k * (instants[i] - instants[0]);
    den += k * k;
  }
  return num / den;
}

/// Instants (window end indices) where windowed prediction accuracy moves by
/// more than `threshold` relative to the previous window.
inline std::vector<double> detect_accuracy_changes(std::span<const int> correct, int window, double threshold) {
  if (window < 1) throw std::invalid_argument("window must be >= 1");
  std::vector<double> out;
  const auto w = static_cast<std::size_t>(window);
  double previous = -1.0;
  for (std::size_t start = 0; start + w <= correct.size(); start += w) {
    double acc = 0.0;
    for (std::size_t i = start; i < start + w; ++i) acc += correct[i] ? 1.0 : 0.0;
    acc /= static_cast<double>(w);
    if (previous >= 0.0 && std::abs(acc - previous) > threshold) out.push_back(static_cast<double>(start));
    previous = acc;
  }
  return out;
}

/// Impact of a causative attack of the given length (larger = more damage).
using CausativeProbe = std::function<double(double length)>;

struct RetrainEstimate {
  double period = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  double step = 0.0;
  double length = 0.0;
  int probes = 0;
};

/// Bisection on the retraining length: probe l and l + step; equal impact
/// (within `same_tolerance`) means l already covers the phase.
inline RetrainEstimate resolve_retrain_length(double lower, double upper, double step, const CausativeProbe& probe,
                                              double same_tolerance = 0.01) {
  if (!(lower < upper)) throw std::invalid_argument("need lower < upper");
  if (!(step > 0.0)) throw std::invalid_argument("step must be > 0");
  RetrainEstimate est{0.0, lower, upper, step, lower, 0};
  while (est.upper - est.lower > step) {
    const double l = 0.5 * (est.lower + est.upper);
    const double a = probe(l);
    const double b = probe(l + step);
    est.probes += 2;
    if (std::abs(a - b) <= same_tolerance) est.upper = l;
    else est.lower = l;
  }
  est.length = est.lower;
  return est;
}

// ---------------------------------------------------------------------------
// Attack planning.

enum class AttackAction : std::uint8_t { none = 0, poison_sensing = 1, jam_data = 2 };

/// Per-slot actions plus the energy spent, in units of whole-slot transmissions.
struct AttackPlan {
  std::vector<AttackAction> actions;
  double energy = 0.0;

  std::size_t count(AttackAction a) const {
    return static_cast<std::size_t>(std::count(actions.begin(), actions.end(), a));
  }
};

inline double action_energy(AttackAction a, const SlotStructure& s) {
  switch (a) {
    case AttackAction::poison_sensing: return s.sensing_fraction;
    case AttackAction::jam_data: return s.data_fraction;
    case AttackAction::none: return 0.0;
  }
  return 0.0;
}

inline double plan_energy(const AttackPlan& plan, const SlotStructure& s) {
  return static_cast<double>(plan.count(AttackAction::poison_sensing)) * s.sensing_fraction +
         static_cast<double>(plan.count(AttackAction::jam_data)) * s.data_fraction;
}

/// Poison the sensing period of every slot where an ACK is predicted.
inline AttackPlan plan_evasion(std::span<const int> ack_predicted, const SlotStructure& s) {
  AttackPlan p;
  p.actions.reserve(ack_predicted.size());
  for (int a : ack_predicted) p.actions.push_back(a ? AttackAction::poison_sensing : AttackAction::none);
  p.energy = plan_energy(p, s);
  return p;
}

/// Half-open slot interval [begin, end).
struct SlotInterval {
  std::size_t begin = 0;
  std::size_t end = 0;
  bool contains(std::size_t t) const { return t >= begin && t < end; }
};

/// Poison only inside detected retraining collection windows.
inline AttackPlan plan_causative(std::span<const int> ack_predicted, std::span<const SlotInterval> retrain_windows,
                                 const SlotStructure& s) {
  AttackPlan p;
  p.actions.assign(ack_predicted.size(), AttackAction::none);
  for (std::size_t t = 0; t < ack_predicted.size(); ++t) {
    if (!ack_predicted[t]) continue;
    for (const auto& w : retrain_windows)
      if (w.contains(t)) {
        p.actions[t] = AttackAction::poison_sensing;
        break;
      }
  }
  p.energy = plan_energy(p, s);
  return p;
}

/// Number of data-period jams affordable with the energy of `reference`.
inline double energy_budget(const AttackPlan& reference, const SlotStructure& s) {
  if (!(s.data_fraction > 0.0)) throw std::invalid_argument("data_fraction must be > 0");
  return static_cast<double>(reference.count(AttackAction::poison_sensing)) * s.sensing_fraction / s.data_fraction;
}

/// Reference plan that poisons the sensing period of every one of `slots`.
inline AttackPlan full_poisoning_plan(std::size_t slots, const SlotStructure& s) {
  AttackPlan p;
  p.actions.assign(slots, AttackAction::poison_sensing);
  p.energy = plan_energy(p, s);
  return p;
}

/// Jams the data period of the `quota` predicted-ACK slots with the highest
/// ACK scores; ties go to the earlier slot.
inline AttackPlan plan_jamming(std::span<const double> ack_scores, double decision_boundary, double quota,
                               const SlotStructure& s) {
  if (!(quota >= 0.0)) throw std::invalid_argument("quota must be >= 0");
  AttackPlan p;
  p.actions.assign(ack_scores.size(), AttackAction::none);
  std::vector<std::size_t> order;
  for (std::size_t t = 0; t < ack_scores.size(); ++t)
    if (ack_scores[t] >= decision_boundary) order.push_back(t);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return ack_scores[a] > ack_scores[b]; });
  const auto n = std::min(order.size(), static_cast<std::size_t>(std::floor(quota + 1e-9)));
  for (std::size_t i = 0; i < n; ++i) p.actions[order[i]] = AttackAction::jam_data;
  p.energy = plan_energy(p, s);
  return p;
}

}  // namespace specpoison
