#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include <specpoison/adversary.hpp>

using namespace specpoison;

namespace {

// Independent oracle: the squared-residual period fit, minimized by coarse-then-fine grid search.
double grid_argmin_period(const std::vector<double>& t) {
  auto cost = [&](double delta) {
    double s = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double r = t[i] - (t[0] + static_cast<double>(i) * delta);
      s += r * r;
    }
    return s;
  };
  double best = 0.0;
  for (double d = 0.0; d <= 200.0; d += 0.01)
    if (cost(d) < cost(best)) best = d;
  double fine = best;
  for (double d = best - 0.02; d <= best + 0.02; d += 1e-4)
    if (cost(d) < cost(fine)) fine = d;
  return fine;
}

SubSlotTrace step_trace(std::size_t ticks, std::size_t start, double low = 1.0, double high = 20.0) {
  SubSlotTrace t(ticks, low);
  for (std::size_t i = start; i < ticks; ++i) t[i] = high;
  return t;
}

}  // namespace

TEST(InferSlotLength, Examples) {
  EXPECT_EQ(infer_slot_length({{3, 6, 9}, 0.0}), 3.0);
  EXPECT_EQ(infer_slot_length({{4, 6}, 0.0}), 2.0);
  EXPECT_NEAR(infer_slot_length({{4.01, 5.99}, 0.05}), 2.0, 0.05);
  EXPECT_EQ(infer_slot_length({{7}, 0.0}), 7.0);
  EXPECT_THROW(infer_slot_length({{}, 0.0}), std::invalid_argument);
  EXPECT_THROW(infer_slot_length({{3, -1}, 0.0}), std::invalid_argument);
}

TEST(InferSlotLength, CommonMultipleIsReturned) {
  // Every interval is a multiple of 2 slots; the algorithm reports 2 slots.
  EXPECT_EQ(infer_slot_length({{10, 14, 22}, 0.0}), 2.0);
}

TEST(InferSlotLength, MatchesGcdOracleOnIntegerTimelines) {
  RngStream rng(1);
  for (int trial = 0; trial < 1000; ++trial) {
    const long base = 2 + static_cast<long>(uniform_index(rng, 19));
    const std::size_t m = 1 + uniform_index(rng, 10);
    std::vector<double> intervals;
    long g = 0;
    for (std::size_t i = 0; i < m; ++i) {
      const long k = 1 + static_cast<long>(uniform_index(rng, 50));
      intervals.push_back(static_cast<double>(k * base));
      g = std::gcd(g, k * base);
    }
    ASSERT_EQ(infer_slot_length({intervals, 0.0}), static_cast<double>(g)) << "trial " << trial;
  }
}

TEST(InferSlotLength, JitteredTimelinesWithinTolerance) {
  RngStream rng(2);
  for (int trial = 0; trial < 500; ++trial) {
    const double base = 2.0 + 18.0 * uniform01(rng);
    const double jitter = 1e-3;
    const int max_k = 20;
    std::vector<double> intervals{base + jitter * (2 * uniform01(rng) - 1)};
    for (int i = 0; i < 6; ++i) {
      const int k = 1 + static_cast<int>(uniform_index(rng, max_k));
      intervals.push_back(k * base + jitter * (2 * uniform01(rng) - 1));
    }
    // Residues of k * base against a jittered base carry up to (k + 1) jitters.
    const double eps = (max_k + 2) * jitter;
    EXPECT_NEAR(infer_slot_length({intervals, eps}), base, eps);
  }
}

TEST(IdentifySlotPhases, StepLocatesSensingPeriod) {
  const std::size_t ticks = 100;
  const double tick = 1.0 / ticks;
  std::vector<SubSlotTrace> ten{step_trace(ticks, 10), step_trace(ticks, 10), step_trace(ticks, 11)};
  EXPECT_NEAR(identify_slot_phases(ten).sensing_fraction, 0.10, tick);
  std::vector<SubSlotTrace> twenty{step_trace(ticks, 20)};
  const auto s = identify_slot_phases(twenty);
  EXPECT_NEAR(s.sensing_fraction, 0.20, tick);
  EXPECT_NEAR(s.sensing_fraction + s.data_fraction + s.feedback_fraction, 1.0, 1e-12);
}

TEST(IdentifySlotPhases, FlatSlotsExcluded) {
  std::vector<SubSlotTrace> traces{SubSlotTrace(100, 1.0), step_trace(100, 30), SubSlotTrace(100, 5.0)};
  EXPECT_NEAR(identify_slot_phases(traces).sensing_fraction, 0.30, 0.01);
  std::vector<SubSlotTrace> flat{SubSlotTrace(100, 1.0)};
  EXPECT_THROW(identify_slot_phases(flat), std::invalid_argument);
}

TEST(CollectAdversaryData, LabelsAreAckRecord) {
  std::vector<double> p(1000);
  std::vector<int> ack(1000);
  RngStream rng(3);
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = uniform01(rng);
    ack[i] = bernoulli(rng, 0.2);
  }
  const Dataset d = collect_adversary_data(p, ack, 10);
  ASSERT_EQ(d.size(), 990u);
  for (std::size_t k = 0; k < d.size(); ++k) ASSERT_EQ(d.samples[k].label, ack[k + 10]);
  const std::vector<int> none(1000, 0);
  EXPECT_THROW(train(collect_adversary_data(p, none, 10), Hyperparams{}, 1), DatasetError);
}

TEST(PredictAck, SymmetricModelIsConstant) {
  AdversaryState a{{Mlp<double>(3, std::vector<int>{4}), Standardizer::identity(3), 0.5}, SensingWindow(3), 1000.0};
  RngStream rng(4);
  for (int i = 0; i < 2; ++i) a.window.push(uniform01(rng));
  for (int i = 0; i < 100; ++i) EXPECT_TRUE(predict_ack(a, 10.0 * uniform01(rng)).ack);
}

TEST(PredictAck, MemorizesTrainingSample) {
  Dataset d;
  d.samples.push_back({{1.0, 2.0, 3.0}, 1});
  d.samples.push_back({{3.0, 2.0, 1.0}, 0});
  Hyperparams h = Hyperparams::uniform(1, 8);
  h.batch_size = 2;
  h.training_steps = 500;
  AdversaryState a{train(d, h, 5), SensingWindow(3), 1000.0};
  a.window.push(1.0);
  a.window.push(2.0);
  EXPECT_TRUE(predict_ack(a, 3.0).ack);
  AdversaryState early{a.surrogate, SensingWindow(3), 1000.0};
  EXPECT_THROW(predict_ack(early, 1.0), std::logic_error);
}

TEST(EstimateRetrainPeriod, Examples) {
  EXPECT_DOUBLE_EQ(estimate_retrain_period(std::vector<double>{0, 10, 20, 30}), 10.0);
  EXPECT_DOUBLE_EQ(estimate_retrain_period(std::vector<double>{0, 9, 21, 30}), 141.0 / 14.0);
  EXPECT_DOUBLE_EQ(estimate_retrain_period(std::vector<double>{5, 15}), 10.0);
  EXPECT_THROW(estimate_retrain_period(std::vector<double>{5}), std::invalid_argument);
}

TEST(EstimateRetrainPeriod, MatchesGridSearchOracle) {
  RngStream rng(6);
  for (int trial = 0; trial < 100; ++trial) {
    const double period = 5.0 + 45.0 * uniform01(rng);
    const std::size_t m = 2 + uniform_index(rng, 10);
    std::vector<double> t;
    const double start = 100.0 * uniform01(rng);
    for (std::size_t i = 0; i < m; ++i) t.push_back(start + static_cast<double>(i) * period + 3.0 * standard_normal(rng));
    EXPECT_NEAR(estimate_retrain_period(t), grid_argmin_period(t), 1e-3) << "trial " << trial;
  }
}

TEST(DetectAccuracyChanges, FindsStepChanges) {
  std::vector<int> correct;
  for (int block = 0; block < 6; ++block)
    for (int i = 0; i < 50; ++i) correct.push_back(block % 3 == 2 ? (i % 2) : 1);
  // Accuracy drops at block 2 and recovers at block 3, again at 5.
  EXPECT_EQ(detect_accuracy_changes(correct, 50, 0.1), (std::vector<double>{100, 150, 250}));
  EXPECT_THROW(detect_accuracy_changes(correct, 0, 0.1), std::invalid_argument);
}

TEST(ResolveRetrainLength, StepProbe) {
  const double truth = 40.0;
  auto probe = [&](double l) { return std::min(l, truth) / 100.0; };
  const auto est = resolve_retrain_length(0.0, 128.0, 8.0, probe);
  EXPECT_LE(std::abs(est.length - truth), 8.0);
  EXPECT_GE(est.length, est.lower);
  EXPECT_LE(est.length, est.upper);
}

TEST(ResolveRetrainLength, RandomTruthsWithinStep) {
  RngStream rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const double lo = 0.0, hi = 128.0 + 500.0 * uniform01(rng), delta = 1.0 + 10.0 * uniform01(rng);
    const double truth = lo + (hi - lo) * uniform01(rng);
    auto probe = [&](double l) { return std::min(l, truth) / hi; };
    EXPECT_LE(std::abs(resolve_retrain_length(lo, hi, delta, probe, 1e-9).length - truth), delta);
  }
}

TEST(ResolveRetrainLength, TruthAtUpperBound) {
  auto probe = [](double l) { return std::min(l, 128.0) / 100.0; };
  EXPECT_GE(resolve_retrain_length(0.0, 128.0, 8.0, probe).length, 128.0 - 8.0);
}

TEST(ResolveRetrainLength, ConstantProbeCollapsesToLower) {
  const auto est = resolve_retrain_length(0.0, 128.0, 8.0, [](double) { return 0.3; });
  EXPECT_EQ(est.length, 0.0);
  EXPECT_EQ(est.probes, 2 * static_cast<int>(std::ceil(std::log2(128.0 / 8.0))));
  EXPECT_THROW(resolve_retrain_length(5.0, 5.0, 1.0, [](double) { return 0.0; }), std::invalid_argument);
  EXPECT_THROW(resolve_retrain_length(0.0, 5.0, 0.0, [](double) { return 0.0; }), std::invalid_argument);
}

TEST(PlanEvasion, PoisonsPredictedAcks) {
  const SlotStructure s;
  const std::vector<int> none(50, 0);
  const auto empty = plan_evasion(none, s);
  EXPECT_EQ(empty.count(AttackAction::poison_sensing), 0u);
  EXPECT_EQ(empty.energy, 0.0);

  const std::vector<int> some{0, 1, 1, 0, 1};
  const auto p = plan_evasion(some, s);
  EXPECT_EQ(p.actions, (std::vector<AttackAction>{AttackAction::none, AttackAction::poison_sensing,
                                                  AttackAction::poison_sensing, AttackAction::none,
                                                  AttackAction::poison_sensing}));
  EXPECT_DOUBLE_EQ(p.energy, 3 * s.sensing_fraction);
}

TEST(PlanCausative, ConfinedToRetrainingWindows) {
  const SlotStructure s;
  RngStream rng(8);
  std::vector<int> ack(400);
  for (auto& a : ack) a = bernoulli(rng, 0.3);
  EXPECT_EQ(plan_causative(ack, {}, s).count(AttackAction::poison_sensing), 0u);
  const std::vector<SlotInterval> windows{{50, 100}, {300, 320}};
  const auto p = plan_causative(ack, windows, s);
  for (std::size_t t = 0; t < ack.size(); ++t) {
    const bool inside = windows[0].contains(t) || windows[1].contains(t);
    EXPECT_EQ(p.actions[t] == AttackAction::poison_sensing, inside && ack[t] == 1);
  }
  EXPECT_LE(p.energy, plan_evasion(ack, s).energy);
}

TEST(EnergyBudget, RatioArithmetic) {
  const SlotStructure slots;
  for (std::size_t n : {9u, 90u, 500u, 990u}) {
    const auto full = full_poisoning_plan(n, slots);
    const double q = energy_budget(full, slots);
    EXPECT_EQ(q, static_cast<double>(n) * slots.sensing_fraction / slots.data_fraction);
    EXPECT_DOUBLE_EQ(q, static_cast<double>(n) / 9.0);
  }
  EXPECT_EQ(energy_budget(AttackPlan{}, slots), 0.0);
  const SlotStructure wide{0.2, 0.8, 0.0};
  EXPECT_DOUBLE_EQ(energy_budget(full_poisoning_plan(100, wide), wide), 25.0);
  EXPECT_THROW(energy_budget(AttackPlan{}, SlotStructure{1.0, 0.0, 0.0}), std::invalid_argument);
}

TEST(PlanJamming, TopScoresWithEarlierSlotTieBreak) {
  const SlotStructure s;
  const std::vector<double> scores{0.9, 0.2, 0.95, 0.9, 0.6, 0.9};
  const auto p = plan_jamming(scores, 0.5, 3.0, s);
  EXPECT_EQ(p.actions, (std::vector<AttackAction>{AttackAction::jam_data, AttackAction::none, AttackAction::jam_data,
                                                  AttackAction::jam_data, AttackAction::none, AttackAction::none}));
  EXPECT_DOUBLE_EQ(p.energy, 3 * s.data_fraction);
  // Fractional quotas round down.
  EXPECT_EQ(plan_jamming(scores, 0.5, 2.99, s).count(AttackAction::jam_data), 2u);
  EXPECT_EQ(plan_jamming(scores, 0.5, 0.0, s).count(AttackAction::jam_data), 0u);
  // Saturation: only predicted-ACK slots are ever jammed.
  EXPECT_EQ(plan_jamming(scores, 0.5, 100.0, s).count(AttackAction::jam_data), 5u);
  EXPECT_THROW(plan_jamming(scores, 0.5, -1.0, s), std::invalid_argument);
}

TEST(PlanJamming, EnergyWithinReferenceLedger) {
  const SlotStructure s;
  RngStream rng(9);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 10 + uniform_index(rng, 1000);
    std::vector<double> scores(n);
    for (auto& x : scores) x = uniform01(rng);
    const auto reference = full_poisoning_plan(n, s);
    const auto jam = plan_jamming(scores, 0.5, energy_budget(reference, s), s);
    EXPECT_LE(jam.energy, reference.energy + 1e-12);
    EXPECT_GE(jam.energy, reference.energy - s.data_fraction - 1e-12);
    EXPECT_DOUBLE_EQ(plan_energy(jam, s), jam.energy);
  }
}
