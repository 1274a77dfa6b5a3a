#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "adversary.hpp"
#include "channel.hpp"
#include "config.hpp"
#include "metrics.hpp"
#include "neural.hpp"
#include "traffic.hpp"
#include "transmitter.hpp"

namespace specpoison {

// ---------------------------------------------------------------------------
// Environment realization. Everything random about a phase (traffic, every
// link gain, every noise draw) is fixed before any node acts, so attack and
// defense choices never change the realization seen by other cells.

struct SlotEnvironment {
  ChannelState state = ChannelState::idle;
  double t_noise = 0.0, t_background = 0.0;  // at the transmitter
  double a_noise = 0.0, a_background = 0.0;  // at the adversary
  double r_noise = 0.0, r_background = 0.0;  // at the receiver
  LinkGain gain_tr, gain_at, gain_ar;

  bool busy() const { return state == ChannelState::busy; }
  double t_sensed() const { return t_noise + t_background; }
  double a_sensed() const { return a_noise + a_background; }
};

struct PhaseEnvironment {
  std::vector<SlotEnvironment> slots;
  std::size_t size() const { return slots.size(); }
};

enum class Phase : std::uint64_t {
  transmitter_collection = 0,
  adversary_observation = 1,
  retraining_collection = 2,
  attack_test = 3,
  mobility_test = 4,
};

namespace detail {

struct LinkMeans {
  double tr, at, ar;
  std::vector<double> bt, ba, br;
};

inline LinkMeans link_means(const ScenarioConfig& c, const std::vector<NodeSpec>& background) {
  LinkMeans m;
  m.tr = mean_gain(distance(c.transmitter.position, c.receiver.position));
  m.at = mean_gain(distance(c.adversary.position, c.transmitter.position));
  m.ar = mean_gain(distance(c.adversary.position, c.receiver.position));
  for (const auto& b : background) {
    m.bt.push_back(mean_gain(distance(b.position, c.transmitter.position)));
    m.ba.push_back(mean_gain(distance(b.position, c.adversary.position)));
    m.br.push_back(mean_gain(distance(b.position, c.receiver.position)));
  }
  return m;
}

}  // namespace detail

/// Realizes `slots` slots of phase `phase` for the scenario's seed. An
/// alternative background placement may be supplied for mobility studies;
/// traffic and fading draws are unchanged by it.
inline PhaseEnvironment generate_environment(const ScenarioConfig& c, Phase phase, std::size_t slots,
                                             const std::vector<NodeSpec>* background_override = nullptr) {
  const auto& background = background_override ? *background_override : c.background;
  if (background.size() != c.background.size())
    throw std::invalid_argument("background override must keep the number of sources");
  const auto means = detail::link_means(c, background);
  const auto pid = static_cast<std::uint64_t>(phase);
  const std::size_t nb = background.size();

  RngStream traffic = make_stream(c.seed, StreamTag::traffic, pid);
  RngStream tr = make_stream(c.seed, StreamTag::link_gain, pid, 0);
  RngStream at = make_stream(c.seed, StreamTag::link_gain, pid, 1);
  RngStream ar = make_stream(c.seed, StreamTag::link_gain, pid, 2);
  std::vector<RngStream> bt, ba, br;
  for (std::size_t i = 0; i < nb; ++i) {
    bt.push_back(make_stream(c.seed, StreamTag::link_gain, pid, 10 + 3 * i));
    ba.push_back(make_stream(c.seed, StreamTag::link_gain, pid, 11 + 3 * i));
    br.push_back(make_stream(c.seed, StreamTag::link_gain, pid, 12 + 3 * i));
  }
  RngStream nt = make_stream(c.seed, StreamTag::noise, pid, 0);
  RngStream na = make_stream(c.seed, StreamTag::noise, pid, 1);
  RngStream nr = make_stream(c.seed, StreamTag::noise, pid, 2);

  std::vector<BackgroundSource> sources(nb, BackgroundSource{0, false, c.arrival_rate, c.activation_probability});
  for (int i = 0; i < c.traffic_burn_in; ++i) channel_status(sources, traffic);

  PhaseEnvironment env;
  env.slots.reserve(slots);
  for (std::size_t t = 0; t < slots; ++t) {
    const SlotStatus status = channel_status(sources, traffic);
    SlotEnvironment s;
    s.state = status.state;
    s.gain_tr = sample_gain(c.channel_model, means.tr, tr);
    s.gain_at = sample_gain(c.channel_model, means.at, at);
    s.gain_ar = sample_gain(c.channel_model, means.ar, ar);
    for (std::size_t i = 0; i < nb; ++i) {
      const double p = background[i].transmit_power;
      const double gt = sample_gain(c.channel_model, means.bt[i], bt[i]).value;
      const double ga = sample_gain(c.channel_model, means.ba[i], ba[i]).value;
      const double gr = sample_gain(c.channel_model, means.br[i], br[i]).value;
      if (status.transmitting[i]) {
        s.t_background += gt * p;
        s.a_background += ga * p;
        s.r_background += gr * p;
      }
    }
    s.t_noise = sample_noise(c.noise_power, c.noise_relative_std, nt);
    s.a_noise = sample_noise(c.noise_power, c.noise_relative_std, na);
    s.r_noise = sample_noise(c.noise_power, c.noise_relative_std, nr);
    env.slots.push_back(s);
  }
  return env;
}

// ---------------------------------------------------------------------------
// Slot-level simulation.

enum class Outcome : std::uint8_t { none = 0, success = 1, failure = 2 };

struct SlotRecord {
  std::size_t index = 0;
  bool busy = false;
  double t_power_clean = 0.0;
  double t_power = 0.0;  // after any poisoning
  double a_power = 0.0;
  bool decided = false;  // false during window warm-up
  double score = 0.0;
  bool transmitted = false;
  Outcome outcome = Outcome::none;
  double sinr = 0.0;
  bool ack = false;
  AttackAction action = AttackAction::none;
  bool flipped = false;

  bool operator==(const SlotRecord&) const = default;
};

/// What acts during a phase. A null transmitter means T only senses.
struct PhaseAgents {
  TransmitterState* transmitter = nullptr;
  const ActiveDefense* defense = nullptr;
  RngStream* defense_rng = nullptr;
  const AttackPlan* plan = nullptr;
};

/// Runs every slot of `env`: sensing (with poisoning), decision (with
/// defense), SINR outcome at the receiver (with jamming), ACK.
inline std::vector<SlotRecord> run_phase(const ScenarioConfig& c, const PhaseEnvironment& env,
                                         const PhaseAgents& agents) {
  if (agents.plan && agents.plan->actions.size() != env.size())
    throw std::invalid_argument("attack plan length does not match the phase");
  if (agents.defense && !agents.defense_rng) throw std::invalid_argument("defense requires a random stream");
  std::vector<SlotRecord> out;
  out.reserve(env.size());
  if (agents.transmitter) agents.transmitter->window.clear();
  for (std::size_t t = 0; t < env.size(); ++t) {
    const SlotEnvironment& s = env.slots[t];
    SlotRecord r;
    r.index = t;
    r.busy = s.busy();
    r.action = agents.plan ? agents.plan->actions[t] : AttackAction::none;
    r.t_power_clean = s.t_sensed();
    r.t_power = r.t_power_clean;
    if (r.action == AttackAction::poison_sensing) r.t_power += s.gain_at.value * c.adversary.transmit_power;
    r.a_power = s.a_sensed();

    if (agents.transmitter) {
      TransmitterState& tx = *agents.transmitter;
      const double feature = sensing_feature(r.t_power, c.sensing_scale);
      if (tx.window.size() + 1 >= tx.window.capacity()) {
        RngStream unused;
        const Decision d =
            decide_with_defense(tx, feature, agents.defense, agents.defense_rng ? *agents.defense_rng : unused);
        r.decided = true;
        r.score = d.score;
        r.transmitted = d.transmit;
        r.flipped = d.flipped;
      } else {
        tx.window.push(feature);
      }
    }
    if (r.transmitted) {
      PowerContribution interference[2] = {{LinkGain{1.0}, s.r_background}, {s.gain_ar, 0.0}};
      if (r.action == AttackAction::jam_data) interference[1].transmit_power = c.adversary.transmit_power;
      const auto o = transmission_success(s.gain_tr, c.transmitter.transmit_power, interference, s.r_noise,
                                          c.sinr_threshold);
      r.sinr = o.sinr;
      r.outcome = o.success ? Outcome::success : Outcome::failure;
      r.ack = o.success;
    }
    out.push_back(r);
  }
  return out;
}

/// Throughput, success and transmission ratios of a record span.
struct RunMetrics {
  std::size_t successes = 0;
  std::size_t transmissions = 0;
  std::size_t idle_slots = 0;
  std::size_t total_slots = 0;
  std::optional<double> throughput;        // M_Th
  std::optional<double> success_ratio;     // M_Sr
  double transmission_ratio = 0.0;         // M_Tr
  ClassifierMetrics transmitter;           // effective decisions vs ground truth
  ClassifierMetrics adversary;             // surrogate on its held-out samples

  bool operator==(const RunMetrics&) const = default;
};

inline RunMetrics compute_metrics(std::span<const SlotRecord> records) {
  if (records.empty()) throw std::invalid_argument("cannot compute metrics of an empty record");
  RunMetrics m;
  std::vector<int> predicted, truth;
  predicted.reserve(records.size());
  truth.reserve(records.size());
  for (const auto& r : records) {
    ++m.total_slots;
    m.idle_slots += r.busy ? 0 : 1;
    m.transmissions += r.transmitted ? 1 : 0;
    m.successes += r.outcome == Outcome::success ? 1 : 0;
    predicted.push_back(r.transmitted ? 0 : 1);
    truth.push_back(r.busy ? 1 : 0);
  }
  if (m.idle_slots > 0) m.throughput = static_cast<double>(m.successes) / static_cast<double>(m.idle_slots);
  if (m.transmissions > 0)
    m.success_ratio = static_cast<double>(m.successes) / static_cast<double>(m.transmissions);
  m.transmission_ratio = static_cast<double>(m.transmissions) / static_cast<double>(m.total_slots);
  m.transmitter = evaluate(predicted, truth);
  return m;
}

// ---------------------------------------------------------------------------
// Phase pipeline.

namespace detail {

// Transmitter features as sensed, after any poisoning.
inline std::vector<double> column_t_features(std::span<const SlotRecord> r, SensingScale scale) {
  std::vector<double> v;
  v.reserve(r.size());
  for (const auto& x : r) v.push_back(sensing_feature(x.t_power, scale));
  return v;
}

inline std::vector<int> column_busy(std::span<const SlotRecord> r) {
  std::vector<int> v;
  v.reserve(r.size());
  for (const auto& x : r) v.push_back(x.busy ? 1 : 0);
  return v;
}

inline std::vector<int> column_ack(std::span<const SlotRecord> r) {
  std::vector<int> v;
  v.reserve(r.size());
  for (const auto& x : r) v.push_back(x.ack ? 1 : 0);
  return v;
}

inline ClassifierMetrics classifier_metrics(const Classifier& c, const Dataset& d) {
  std::vector<int> predicted, truth;
  for (const auto& s : d.samples) {
    predicted.push_back(c.classify(s.features));
    truth.push_back(s.label);
  }
  return evaluate(predicted, truth);
}

inline std::vector<double> scores(const Classifier& c, const Dataset& d) {
  std::vector<double> out;
  out.reserve(d.size());
  for (const auto& s : d.samples) out.push_back(c.score(s.features));
  return out;
}

}  // namespace detail

/// Result of the transmitter's initial collection and training.
struct TransmitterStage {
  Classifier classifier;
  Dataset train, validation;
  ClassifierMetrics validation_metrics;
};

inline TransmitterStage run_transmitter_stage(const ScenarioConfig& c) {
  validate(c);
  const std::size_t n = static_cast<std::size_t>(c.n_new + c.num_train_slots + c.num_test_slots);
  const auto env = generate_environment(c, Phase::transmitter_collection, n);
  const auto records = run_phase(c, env, {});
  const Dataset all = collect_training_data(detail::column_t_features(records, c.sensing_scale), detail::column_busy(records), c.n_new);
  TransmitterStage st;
  st.train = all.slice(0, static_cast<std::size_t>(c.num_train_slots));
  st.validation = all.slice(static_cast<std::size_t>(c.num_train_slots), all.size());
  st.classifier = train(st.train, c.hyperparams, derive_seed(c.seed, {0x54}));
  st.validation_metrics = detail::classifier_metrics(st.classifier, st.validation);
  return st;
}

/// Fits defense thresholds from the transmitter's held-out scores.
inline std::optional<ActiveDefense> make_defense(const Classifier& ct, const Dataset& validation,
                                                 std::optional<DefenseConfig> dc) {
  if (!dc || dc->max_action_ratio <= 0.0) return std::nullopt;
  const auto s = detail::scores(ct, validation);
  return ActiveDefense{*dc, select_defense_thresholds(s, ct.decision_boundary, dc->max_action_ratio)};
}

/// The adversary's surrogate; `trained` is false when its observations held
/// a single class, in which case it never predicts an ACK.
struct AdversaryStage {
  Classifier surrogate;
  bool trained = false;
  Dataset train, test;
  ClassifierMetrics test_metrics;
  std::vector<SlotRecord> records;
};

inline AdversaryStage run_observation_stage(const ScenarioConfig& c, const Classifier& ct,
                                            const std::optional<ActiveDefense>& defense) {
  const std::size_t n = static_cast<std::size_t>(c.n_new + c.num_train_slots + c.num_test_slots);
  const auto env = generate_environment(c, Phase::adversary_observation, n);
  TransmitterState tx{ct, SensingWindow(c.n_new), TransmitterMode::test, c.hyperparams};
  RngStream drng = make_stream(c.seed, StreamTag::defense, static_cast<std::uint64_t>(Phase::adversary_observation));
  AdversaryStage st;
  st.records = run_phase(c, env, {&tx, defense ? &*defense : nullptr, &drng, nullptr});
  std::vector<double> own;
  for (const auto& r : st.records) own.push_back(sensing_feature(r.a_power, c.sensing_scale));
  const Dataset all = collect_adversary_data(own, detail::column_ack(st.records), c.n_new);
  st.train = all.slice(0, static_cast<std::size_t>(c.num_train_slots));
  st.test = all.slice(static_cast<std::size_t>(c.num_train_slots), all.size());
  if (st.train.has_both_classes()) {
    st.surrogate = train(st.train, c.hyperparams, derive_seed(c.seed, {0x41}));
    st.trained = true;
    st.test_metrics = detail::classifier_metrics(st.surrogate, st.test);
  } else {
    std::vector<int> none(st.test.size(), 0), truth;
    for (const auto& s : st.test.samples) truth.push_back(s.label);
    if (!truth.empty()) st.test_metrics = evaluate(none, truth);
  }
  return st;
}

/// Surrogate ACK scores for every slot of a phase (0 during window warm-up).
inline std::vector<double> adversary_scores(const ScenarioConfig& c, const AdversaryStage& a,
                                            const PhaseEnvironment& env) {
  std::vector<double> out(env.size(), 0.0);
  if (!a.trained) return out;
  AdversaryState st{a.surrogate, SensingWindow(c.n_new), c.adversary.transmit_power};
  for (std::size_t t = 0; t < env.size(); ++t) {
    st.window.push(sensing_feature(env.slots[t].a_sensed(), c.sensing_scale));
    if (st.window.full()) out[t] = st.surrogate.score(st.window.features());
  }
  return out;
}

inline std::vector<int> ack_predictions(std::span<const double> scores, const AdversaryStage& a) {
  std::vector<int> out;
  out.reserve(scores.size());
  for (double s : scores) out.push_back(a.trained && s >= a.surrogate.decision_boundary ? 1 : 0);
  return out;
}

struct RetrainStage {
  Classifier classifier;  // retrained instance
  AttackPlan plan;
  std::vector<SlotRecord> records;
};

/// One retraining cycle. When `poison` is set the adversary poisons
/// predicted-ACK slots within the first `attack_length` slots of the window.
inline RetrainStage run_retrain_stage(const ScenarioConfig& c, const Classifier& ct,
                                      const std::optional<ActiveDefense>& defense, const AdversaryStage& a,
                                      bool poison, std::optional<std::size_t> attack_length = std::nullopt) {
  const std::size_t n = static_cast<std::size_t>(c.n_new + c.retrain.collection_slots);
  const auto env = generate_environment(c, Phase::retraining_collection, n);
  const auto sc = adversary_scores(c, a, env);
  const auto predicted = ack_predictions(sc, a);
  std::vector<SlotInterval> windows;
  if (poison) windows.push_back({0, attack_length ? std::min(n, *attack_length) : n});
  RetrainStage st;
  st.plan = plan_causative(predicted, windows, c.slot_structure);
  TransmitterState tx{ct, SensingWindow(c.n_new), TransmitterMode::retraining_collection, c.hyperparams};
  RngStream drng = make_stream(c.seed, StreamTag::defense, static_cast<std::uint64_t>(Phase::retraining_collection));
  st.records = run_phase(c, env, {&tx, defense ? &*defense : nullptr, &drng, &st.plan});
  retrain(tx, detail::column_t_features(st.records, c.sensing_scale), detail::column_busy(st.records), derive_seed(c.seed, {0x52}));
  st.classifier = tx.classifier;
  return st;
}

struct TestStage {
  AttackPlan plan;
  std::vector<SlotRecord> records;  // scored slots only
  RunMetrics metrics;
};

/// The attack window. Evasion poisons predicted-ACK slots; jamming spends the
/// energy of poisoning every slot on data-period jams of the most likely ACKs.
inline TestStage run_test_stage(const ScenarioConfig& c, const Classifier& classifier,
                                const std::optional<ActiveDefense>& defense, const AdversaryStage& a,
                                AttackKind attack) {
  const std::size_t n = static_cast<std::size_t>(c.n_new + c.num_test_slots);
  const auto env = generate_environment(c, Phase::attack_test, n);
  const auto sc = adversary_scores(c, a, env);
  TestStage st;
  if (has_evasion(attack)) {
    st.plan = plan_evasion(ack_predictions(sc, a), c.slot_structure);
  } else if (has_jamming(attack)) {
    std::vector<double> scored(sc.begin() + c.n_new, sc.end());
    const double quota = energy_budget(full_poisoning_plan(scored.size(), c.slot_structure), c.slot_structure);
    const double boundary = a.trained ? a.surrogate.decision_boundary : 2.0;
    AttackPlan inner = plan_jamming(scored, boundary, quota, c.slot_structure);
    st.plan.actions.assign(static_cast<std::size_t>(c.n_new), AttackAction::none);
    st.plan.actions.insert(st.plan.actions.end(), inner.actions.begin(), inner.actions.end());
    st.plan.energy = inner.energy;
  } else {
    st.plan.actions.assign(n, AttackAction::none);
  }
  TransmitterState tx{classifier, SensingWindow(c.n_new), TransmitterMode::test, c.hyperparams};
  RngStream drng = make_stream(c.seed, StreamTag::defense, static_cast<std::uint64_t>(Phase::attack_test));
  auto all = run_phase(c, env, {&tx, defense ? &*defense : nullptr, &drng, &st.plan});
  st.records.assign(all.begin() + c.n_new, all.end());
  st.metrics = compute_metrics(st.records);
  st.metrics.adversary = a.test_metrics;
  return st;
}

/// Impact probe for retraining-length resolution: the change in the ACK
/// rate the adversary observes on the attack-test window after a causative
/// attack of the given length, relative to the unattacked classifier.
inline CausativeProbe make_causative_probe(const ScenarioConfig& c, const TransmitterStage& ts,
                                           const AdversaryStage& as) {
  auto ack_rate = [c, &as](const Classifier& classifier) {
    const TestStage t = run_test_stage(c, classifier, std::nullopt, as, AttackKind::none);
    return static_cast<double>(t.metrics.successes) / static_cast<double>(t.metrics.total_slots);
  };
  const double baseline = ack_rate(ts.classifier);
  return [c, &ts, &as, ack_rate, baseline](double length) {
    const auto slots = static_cast<std::size_t>(std::max(0.0, std::round(length)));
    const RetrainStage r = run_retrain_stage(c, ts.classifier, std::nullopt, as, true, c.n_new + slots);
    return std::abs(baseline - ack_rate(r.classifier));
  };
}

// ---------------------------------------------------------------------------
// Experiments.

struct ExperimentSpec {
  ScenarioConfig scenario;
  std::vector<AttackKind> attacks{AttackKind::none};
  std::vector<double> defense_levels{0.0};
  std::vector<std::uint64_t> seeds{1};

  static std::vector<std::uint64_t> seed_range(std::uint64_t first, std::size_t count) {
    std::vector<std::uint64_t> s(count);
    for (std::size_t i = 0; i < count; ++i) s[i] = first + i;
    return s;
  }
};

/// Outcome of one (attack, defense level, seed) cell.
struct RunResult {
  AttackKind attack = AttackKind::none;
  double defense_level = 0.0;
  std::uint64_t seed = 0;
  RunMetrics metrics;
  ClassifierMetrics transmitter_validation;  // classifier used in the test window, on held-out data
  ClassifierMetrics adversary_validation;
  double adversary_energy = 0.0;
  std::size_t acks = 0;
};

struct Stat {
  std::optional<double> mean;
  std::optional<double> std;
  std::size_t count = 0;
  bool operator==(const Stat&) const = default;
};

inline Stat summarize(const std::vector<std::optional<double>>& values) {
  Stat s;
  double sum = 0.0;
  for (const auto& v : values)
    if (v) {
      sum += *v;
      ++s.count;
    }
  if (s.count == 0) return s;
  const double mean = sum / static_cast<double>(s.count);
  double ss = 0.0;
  for (const auto& v : values)
    if (v) ss += (*v - mean) * (*v - mean);
  s.mean = mean;
  s.std = s.count > 1 ? std::sqrt(ss / static_cast<double>(s.count - 1)) : 0.0;
  return s;
}

/// Aggregate over seeds of one (attack, defense level) cell.
struct CellSummary {
  std::string attack;
  double defense_level = 0.0;
  std::size_t seeds = 0;
  Stat throughput, success_ratio, transmission_ratio;
  Stat transmitter_e_md, transmitter_e_fa, adversary_e_md, adversary_e_fa;
  Stat adversary_energy;

  bool operator==(const CellSummary&) const = default;
};

struct ExperimentResult {
  std::vector<RunResult> runs;
  std::vector<CellSummary> cells;

  const CellSummary* find(AttackKind a, double pd) const {
    for (const auto& c : cells)
      if (c.attack == to_string(a) && std::abs(c.defense_level - pd) < 1e-12) return &c;
    return nullptr;
  }
};

inline std::vector<CellSummary> aggregate(const std::vector<RunResult>& runs) {
  std::map<std::pair<int, double>, std::vector<const RunResult*>> groups;
  for (const auto& r : runs) groups[{static_cast<int>(r.attack), r.defense_level}].push_back(&r);
  std::vector<CellSummary> out;
  for (const auto& [key, rs] : groups) {
    CellSummary c;
    c.attack = to_string(static_cast<AttackKind>(key.first));
    c.defense_level = key.second;
    c.seeds = rs.size();
    auto collect = [&](auto get) {
      std::vector<std::optional<double>> v;
      for (const RunResult* r : rs) v.push_back(get(*r));
      return summarize(v);
    };
    c.throughput = collect([](const RunResult& r) { return r.metrics.throughput; });
    c.success_ratio = collect([](const RunResult& r) { return r.metrics.success_ratio; });
    c.transmission_ratio = collect([](const RunResult& r) { return std::optional(r.metrics.transmission_ratio); });
    c.transmitter_e_md = collect([](const RunResult& r) { return r.transmitter_validation.e_md; });
    c.transmitter_e_fa = collect([](const RunResult& r) { return r.transmitter_validation.e_fa; });
    c.adversary_e_md = collect([](const RunResult& r) { return r.adversary_validation.e_md; });
    c.adversary_e_fa = collect([](const RunResult& r) { return r.adversary_validation.e_fa; });
    c.adversary_energy = collect([](const RunResult& r) { return std::optional(r.adversary_energy); });
    out.push_back(std::move(c));
  }
  return out;
}

/// Runs every (attack, defense level) cell for every seed. A no-attack,
/// no-defense baseline is always included. Cells sharing a seed see the same
/// traffic and channel realization.
inline ExperimentResult run_experiment(const ExperimentSpec& spec) {
  if (spec.seeds.empty()) throw std::invalid_argument("experiment needs at least one seed");
  if (spec.defense_levels.empty()) throw std::invalid_argument("experiment needs at least one defense level");
  validate(spec.scenario);
  std::vector<std::pair<AttackKind, double>> cells;
  for (double pd : spec.defense_levels) {
    if (!(pd >= 0.0 && pd <= 1.0)) throw std::invalid_argument("defense level out of [0,1]");
    for (AttackKind a : spec.attacks) cells.emplace_back(a, pd);
  }
  if (std::find(cells.begin(), cells.end(), std::pair{AttackKind::none, 0.0}) == cells.end())
    cells.emplace_back(AttackKind::none, 0.0);

  ExperimentResult result;
  for (std::uint64_t seed : spec.seeds) {
    ScenarioConfig c = spec.scenario;
    c.seed = seed;
    const TransmitterStage ts = run_transmitter_stage(c);
    std::map<double, std::vector<AttackKind>> by_level;
    for (const auto& [a, pd] : cells) by_level[pd].push_back(a);
    for (const auto& [pd, attacks] : by_level) {
      DefenseConfig dc = c.defense.value_or(DefenseConfig{});
      dc.max_action_ratio = pd;
      const auto defense = make_defense(ts.classifier, ts.validation, dc);
      // The surrogate is only needed when some cell at this level attacks.
      const bool attacked = std::any_of(attacks.begin(), attacks.end(), [](AttackKind a) { return a != AttackKind::none; });
      const AdversaryStage as = attacked ? run_observation_stage(c, ts.classifier, defense) : AdversaryStage{};
      std::optional<RetrainStage> rs;
      std::optional<ActiveDefense> retrained_defense;
      for (AttackKind a : attacks) {
        const Classifier* used = &ts.classifier;
        const std::optional<ActiveDefense>* def = &defense;
        double energy = 0.0;
        if (has_causative(a)) {
          if (!rs) {
            rs = run_retrain_stage(c, ts.classifier, defense, as, true);
            retrained_defense = make_defense(rs->classifier, ts.validation, dc);
          }
          used = &rs->classifier;
          def = &retrained_defense;
          energy += rs->plan.energy;
        }
        const TestStage test = run_test_stage(c, *used, *def, as, a);
        RunResult r;
        r.attack = a;
        r.defense_level = pd;
        r.seed = seed;
        r.metrics = test.metrics;
        r.transmitter_validation = detail::classifier_metrics(*used, ts.validation);
        r.adversary_validation = as.test_metrics;
        r.adversary_energy = energy + test.plan.energy;
        r.acks = static_cast<std::size_t>(
            std::count_if(test.records.begin(), test.records.end(), [](const SlotRecord& x) { return x.ack; }));
        result.runs.push_back(std::move(r));
      }
    }
  }
  result.cells = aggregate(result.runs);
  return result;
}

/// Grid argmax of the evaluator's mean throughput; ties keep the lower level.
inline double search_defense_level(std::span<const double> grid, const std::function<double(double)>& evaluator) {
  if (grid.empty()) throw std::invalid_argument("defense grid is empty");
  std::vector<double> sorted(grid.begin(), grid.end());
  std::sort(sorted.begin(), sorted.end());
  double best = sorted.front();
  double best_value = evaluator(best);
  for (std::size_t i = 1; i < sorted.size(); ++i) {
    const double v = evaluator(sorted[i]);
    if (v > best_value) {
      best = sorted[i];
      best_value = v;
    }
  }
  return best;
}

/// Evaluator reading mean throughput from an already-run sweep.
inline std::function<double(double)> sweep_evaluator(const ExperimentResult& sweep, AttackKind attack) {
  return [&sweep, attack](double pd) {
    const CellSummary* cell = sweep.find(attack, pd);
    if (!cell) throw std::invalid_argument("sweep has no cell for this attack and defense level");
    return cell->throughput.mean.value_or(0.0);
  };
}

/// Evaluator for search_defense_level backed by full simulations.
inline std::function<double(double)> throughput_evaluator(const ExperimentSpec& base, AttackKind attack) {
  return [base, attack](double pd) {
    ExperimentSpec s = base;
    s.attacks = {attack};
    s.defense_levels = {pd};
    const auto r = run_experiment(s);
    const CellSummary* cell = r.find(attack, pd);
    return cell && cell->throughput.mean ? *cell->throughput.mean : 0.0;
  };
}

// ---------------------------------------------------------------------------
// Transmitter-only studies (channel models, placement, mobility).

struct TransmitterStudyRun {
  std::uint64_t seed = 0;
  ClassifierMetrics metrics;
};

/// Trains C_T per seed and reports its held-out error.
inline std::vector<TransmitterStudyRun> run_transmitter_study(const ScenarioConfig& base,
                                                              std::span<const std::uint64_t> seeds) {
  std::vector<TransmitterStudyRun> out;
  for (std::uint64_t seed : seeds) {
    ScenarioConfig c = base;
    c.seed = seed;
    out.push_back({seed, run_transmitter_stage(c).validation_metrics});
  }
  return out;
}

/// Trains once per seed at the configured placement and reports held-out
/// error with the sources moved to each placement in `moved`.
inline std::vector<std::vector<TransmitterStudyRun>> run_mobility_study(
    const ScenarioConfig& base, std::span<const std::uint64_t> seeds,
    const std::vector<std::vector<NodeSpec>>& moved) {
  std::vector<std::vector<TransmitterStudyRun>> out(moved.size());
  for (std::uint64_t seed : seeds) {
    ScenarioConfig c = base;
    c.seed = seed;
    const TransmitterStage ts = run_transmitter_stage(c);
    const std::size_t n = static_cast<std::size_t>(c.n_new + c.num_test_slots);
    for (std::size_t i = 0; i < moved.size(); ++i) {
      const auto env = generate_environment(c, Phase::mobility_test, n, &moved[i]);
      const auto records = run_phase(c, env, {});
      const Dataset d =
          collect_training_data(detail::column_t_features(records, c.sensing_scale), detail::column_busy(records), c.n_new);
      out[i].push_back({seed, detail::classifier_metrics(ts.classifier, d)});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Reports.

namespace detail {

inline nlohmann::json stat_json(const Stat& s) {
  return {{"mean", s.mean ? nlohmann::json(*s.mean) : nlohmann::json(nullptr)},
          {"std", s.std ? nlohmann::json(*s.std) : nlohmann::json(nullptr)},
          {"count", s.count}};
}

inline Stat stat_from_json(const nlohmann::json& j) {
  Stat s;
  if (!j.at("mean").is_null()) s.mean = j.at("mean").get<double>();
  if (!j.at("std").is_null()) s.std = j.at("std").get<double>();
  s.count = j.at("count").get<std::size_t>();
  return s;
}

inline std::string csv_number(const std::optional<double>& v) {
  if (!v) return "";
  std::ostringstream os;
  os.precision(10);
  os << *v;
  return os.str();
}

}  // namespace detail

enum class ReportFormat { csv, json };

inline nlohmann::json cells_to_json(const std::vector<CellSummary>& cells) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& c : cells)
    arr.push_back({{"attack", c.attack},
                   {"defense_level", c.defense_level},
                   {"seeds", c.seeds},
                   {"throughput", detail::stat_json(c.throughput)},
                   {"success_ratio", detail::stat_json(c.success_ratio)},
                   {"transmission_ratio", detail::stat_json(c.transmission_ratio)},
                   {"transmitter", {{"e_md", detail::stat_json(c.transmitter_e_md)},
                                    {"e_fa", detail::stat_json(c.transmitter_e_fa)}}},
                   {"adversary", {{"e_md", detail::stat_json(c.adversary_e_md)},
                                  {"e_fa", detail::stat_json(c.adversary_e_fa)}}},
                   {"adversary_energy", detail::stat_json(c.adversary_energy)}});
  return {{"cells", arr}};
}

inline std::vector<CellSummary> cells_from_json(const nlohmann::json& j) {
  std::vector<CellSummary> out;
  for (const auto& e : j.at("cells")) {
    CellSummary c;
    c.attack = e.at("attack").get<std::string>();
    c.defense_level = e.at("defense_level").get<double>();
    c.seeds = e.at("seeds").get<std::size_t>();
    c.throughput = detail::stat_from_json(e.at("throughput"));
    c.success_ratio = detail::stat_from_json(e.at("success_ratio"));
    c.transmission_ratio = detail::stat_from_json(e.at("transmission_ratio"));
    c.transmitter_e_md = detail::stat_from_json(e.at("transmitter").at("e_md"));
    c.transmitter_e_fa = detail::stat_from_json(e.at("transmitter").at("e_fa"));
    c.adversary_e_md = detail::stat_from_json(e.at("adversary").at("e_md"));
    c.adversary_e_fa = detail::stat_from_json(e.at("adversary").at("e_fa"));
    c.adversary_energy = detail::stat_from_json(e.at("adversary_energy"));
    out.push_back(std::move(c));
  }
  return out;
}

inline std::string emit_report(const std::vector<CellSummary>& cells, ReportFormat format) {
  if (cells.empty()) throw std::invalid_argument("no results to report");
  if (format == ReportFormat::json) return cells_to_json(cells).dump(2) + "\n";
  std::ostringstream os;
  os << "attack,defense_level,seeds,m_th_mean,m_th_std,m_sr_mean,m_sr_std,m_tr_mean,m_tr_std,"
        "t_e_md,t_e_fa,a_e_md,a_e_fa,adversary_energy\n";
  using detail::csv_number;
  for (const auto& c : cells)
    os << c.attack << ',' << csv_number(c.defense_level) << ',' << c.seeds << ',' << csv_number(c.throughput.mean)
       << ',' << csv_number(c.throughput.std) << ',' << csv_number(c.success_ratio.mean) << ','
       << csv_number(c.success_ratio.std) << ',' << csv_number(c.transmission_ratio.mean) << ','
       << csv_number(c.transmission_ratio.std) << ',' << csv_number(c.transmitter_e_md.mean) << ','
       << csv_number(c.transmitter_e_fa.mean) << ',' << csv_number(c.adversary_e_md.mean) << ','
       << csv_number(c.adversary_e_fa.mean) << ',' << csv_number(c.adversary_energy.mean) << '\n';
  return os.str();
}

inline void write_report(const std::vector<CellSummary>& cells, ReportFormat format, const std::string& path) {
  const std::string text = emit_report(cells, format);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write report to '" + path + "'");
  out << text;
  if (!out) throw std::runtime_error("failed writing report to '" + path + "'");
}

}  // namespace specpoison
