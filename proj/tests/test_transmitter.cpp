#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <specpoison/harness.hpp>
#include <specpoison/transmitter.hpp>

using namespace specpoison;

namespace {

// Zero network: every window scores exactly 0.5.
Classifier constant_classifier(int dim, double boundary) {
  return {Mlp<double>(dim, std::vector<int>{2}), Standardizer::identity(static_cast<std::size_t>(dim)), boundary};
}

const TransmitterStage& trained_stage() {
  static const TransmitterStage st = run_transmitter_stage(ScenarioConfig{});
  return st;
}

TransmitterState state_for(const Classifier& c, int n_new = 10) {
  TransmitterState s{c, SensingWindow(n_new), TransmitterMode::test, Hyperparams{}};
  return s;
}

Dataset clean_dataset(const ScenarioConfig& c, Phase phase, const AttackPlan* plan = nullptr) {
  const auto env = generate_environment(c, phase, static_cast<std::size_t>(c.n_new + c.num_train_slots));
  const auto records = run_phase(c, env, {nullptr, nullptr, nullptr, plan});
  return collect_training_data(detail::column_t_features(records, c.sensing_scale), detail::column_busy(records),
                               c.n_new);
}

}  // namespace

TEST(SensingWindow, KeepsMostRecentValues) {
  SensingWindow w(3);
  EXPECT_FALSE(w.full());
  for (double v : {1.0, 2.0, 3.0, 4.0}) w.push(v);
  EXPECT_TRUE(w.full());
  EXPECT_EQ(w.features(), (std::vector<double>{2.0, 3.0, 4.0}));
  EXPECT_THROW(SensingWindow(0), std::invalid_argument);
}

TEST(CollectTrainingData, SampleCountsAndLayout) {
  std::vector<double> p(1000);
  std::vector<int> busy(1000);
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = static_cast<double>(i);
    busy[i] = i % 3 == 0;
  }
  const Dataset d = collect_training_data(p, busy, 10);
  ASSERT_EQ(d.size(), 990u);
  // Sample k ends at slot k + 10 and is labeled by that slot.
  EXPECT_EQ(d.samples[0].features.front(), 1.0);
  EXPECT_EQ(d.samples[0].features.back(), 10.0);
  EXPECT_EQ(d.samples[0].label, busy[10]);
  EXPECT_EQ(d.samples[989].features.back(), 999.0);

  const std::vector<double> short_p(10, 1.0);
  const std::vector<int> short_l(10, 0);
  EXPECT_EQ(collect_training_data(short_p, short_l, 10).size(), 0u);
  const std::vector<double> tiny(9, 1.0);
  const std::vector<int> tiny_l(9, 0);
  EXPECT_THROW(collect_training_data(tiny, tiny_l, 10), DatasetError);
}

TEST(CollectTrainingData, AllIdleTraceNearNoise) {
  ScenarioConfig c;
  c.arrival_rate = 0.0;
  const Dataset d = clean_dataset(c, Phase::transmitter_collection);
  EXPECT_EQ(d.count(1), 0u);
  // Noise alone: no feature above five standard deviations of the noise,
  // and the linear-domain mean recovers the unit noise power.
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& s : d.samples)
    for (double f : s.features) {
      EXPECT_LE(f, sensing_feature(1.0 + 5.0 * c.noise_relative_std, c.sensing_scale));
      sum += std::pow(10.0, f / 10.0);
      ++n;
    }
  EXPECT_NEAR(sum / static_cast<double>(n), c.noise_power, 0.04);
}

TEST(Predict, TrainedClassifierOnSyntheticWindows) {
  const Classifier& ct = trained_stage().classifier;
  const ScenarioConfig c;
  TransmitterState s = state_for(ct);
  for (int i = 0; i < 9; ++i) s.window.push(sensing_feature(1.0, c.sensing_scale));
  Decision d = predict(s, sensing_feature(1.0, c.sensing_scale));
  EXPECT_TRUE(d.transmit);
  EXPECT_EQ(d.label, 0);

  TransmitterState b = state_for(ct);
  for (int i = 0; i < 9; ++i) b.window.push(sensing_feature(11.0, c.sensing_scale));
  d = predict(b, sensing_feature(11.0, c.sensing_scale));
  EXPECT_FALSE(d.transmit);
  EXPECT_EQ(d.label, 1);
}

TEST(Predict, SymmetricModelHolds) {
  TransmitterState s = state_for(constant_classifier(10, 0.5));
  for (int i = 0; i < 9; ++i) EXPECT_THROW(predict(s, 1.0), std::logic_error);
  TransmitterState full = state_for(constant_classifier(10, 0.5));
  for (int i = 0; i < 9; ++i) full.window.push(1.0);
  const Decision d = predict(full, 1.0);
  EXPECT_EQ(d.score, 0.5);
  EXPECT_FALSE(d.transmit);
}

TEST(Evaluate, CountExamples) {
  std::vector<int> truth, pred;
  for (int i = 0; i < 403; ++i) {
    truth.push_back(1);
    pred.push_back(i < 3 ? 0 : 1);
  }
  for (int i = 0; i < 97; ++i) {
    truth.push_back(0);
    pred.push_back(0);
  }
  const auto m = evaluate(pred, truth);
  EXPECT_EQ(m.n_md, 3u);
  EXPECT_EQ(m.n_fa, 0u);
  EXPECT_NEAR(*m.e_md, 0.0074, 5e-5);
  EXPECT_EQ(*m.e_fa, 0.0);
  EXPECT_EQ(*m.e, *m.e_md);

  const auto same = evaluate(truth, truth);
  EXPECT_EQ(*same.e, 0.0);

  std::vector<int> inverted;
  for (int t : truth) inverted.push_back(1 - t);
  const auto inv = evaluate(inverted, truth);
  EXPECT_EQ(*inv.e_md, 1.0);
  EXPECT_EQ(*inv.e_fa, 1.0);

  EXPECT_THROW(evaluate(std::vector<int>{}, std::vector<int>{}), std::invalid_argument);
  const auto only_busy = evaluate(std::vector<int>{1, 0}, std::vector<int>{1, 1});
  EXPECT_FALSE(only_busy.e_fa.has_value());
  EXPECT_EQ(*only_busy.e, 0.5);
}

TEST(DefenseThresholds, DegenerateLevels) {
  std::vector<double> scores;
  RngStream rng(1);
  for (int i = 0; i < 100; ++i) scores.push_back(uniform01(rng));
  const auto none = select_defense_thresholds(scores, 0.5, 0.0);
  for (double s : scores) EXPECT_FALSE(defense_eligible(s, none));
  const auto all = select_defense_thresholds(scores, 0.5, 1.0);
  for (double s : scores) EXPECT_EQ(defense_eligible(s, all), s != 0.5);
  EXPECT_THROW(select_defense_thresholds(scores, 0.5, 1.5), std::invalid_argument);
}

TEST(DefenseThresholds, BruteForceCountingOracle) {
  RngStream rng(2);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 1 + uniform_index(rng, 300);
    std::vector<double> scores(n);
    for (auto& s : scores) s = uniform01(rng);
    if (trial % 5 == 0)  // heavy ties
      for (auto& s : scores) s = std::round(s * 10.0) / 10.0;
    const double tau = 0.2 + 0.6 * uniform01(rng);
    const double pd = uniform01(rng);
    const auto t = select_defense_thresholds(scores, tau, pd);
    std::size_t below = 0, above = 0, low_eligible = 0, high_eligible = 0;
    for (double s : scores) {
      below += s < tau;
      above += s > tau;
      low_eligible += s < t.low;
      high_eligible += s > t.high;
      ASSERT_TRUE(!defense_eligible(s, t) || s != tau);
    }
    const auto want_low = static_cast<long>(std::floor(pd * static_cast<double>(below)));
    const auto want_high = static_cast<long>(std::floor(pd * static_cast<double>(above)));
    // Ties at the quantile can only shrink the eligible set; distinct scores hit it exactly.
    EXPECT_LE(static_cast<long>(low_eligible), want_low);
    EXPECT_LE(static_cast<long>(high_eligible), want_high);
    if (trial % 5 != 0) {
      EXPECT_LE(std::abs(static_cast<long>(low_eligible) - want_low), 1);
      EXPECT_LE(std::abs(static_cast<long>(high_eligible) - want_high), 1);
    }
    EXPECT_LE(t.low, tau);
    EXPECT_GE(t.high, tau);
  }
}

TEST(DefenseThresholds, UniformScoresTenPercentPerSide) {
  std::vector<double> scores;
  for (int i = 0; i < 100; ++i) scores.push_back((i + 0.5) / 100.0);
  const auto t = select_defense_thresholds(scores, 0.5, 0.2);
  std::size_t low = 0, high = 0;
  for (double s : scores) {
    low += s < t.low;
    high += s > t.high;
  }
  EXPECT_EQ(low, 10u);
  EXPECT_EQ(high, 10u);
}

TEST(DecideWithDefense, FlipConcentration) {
  // Constant score 0.5 sits above tau1 = 0.4, so every slot is eligible.
  ActiveDefense def{{0.5, 0.5}, {-std::numeric_limits<double>::infinity(), 0.4}};
  TransmitterState s = state_for(constant_classifier(10, 0.5));
  RngStream rng = make_stream(3, StreamTag::defense);
  for (int i = 0; i < 9; ++i) s.window.push(1.0);
  int flips = 0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    const Decision d = decide_with_defense(s, 1.0, &def, rng);
    flips += d.flipped;
    EXPECT_EQ(d.transmit, d.flipped);  // base decision is hold
  }
  EXPECT_NEAR(static_cast<double>(flips) / n, 0.5, 0.02);
}

TEST(DecideWithDefense, ConfidentBusyCanTransmit) {
  ActiveDefense def{{0.5, 1.0}, {0.01, 0.4}};
  TransmitterState s = state_for(constant_classifier(10, 0.5));
  for (int i = 0; i < 9; ++i) s.window.push(1.0);
  RngStream rng(1);
  EXPECT_TRUE(decide_with_defense(s, 1.0, &def, rng).transmit);
}

TEST(DecideWithDefense, InsideBandNeverFlipped) {
  ActiveDefense def{{0.5, 1.0}, {0.3, 0.7}};
  TransmitterState s = state_for(constant_classifier(10, 0.5));
  for (int i = 0; i < 9; ++i) s.window.push(1.0);
  RngStream rng(1);
  for (int i = 0; i < 1000; ++i) EXPECT_FALSE(decide_with_defense(s, 1.0, &def, rng).flipped);
}

TEST(DecideWithDefense, NoDefenseEqualsPredict) {
  const Classifier& ct = trained_stage().classifier;
  TransmitterState a = state_for(ct), b = state_for(ct);
  RngStream rng(5), noise(6);
  for (int t = 0; t < 500; ++t) {
    const double p = sensing_feature(bernoulli(noise, 0.8) ? 11.0 : 1.0, SensingScale::decibel) + 0.3 * standard_normal(noise);
    if (!a.window.full() && a.window.size() + 1 < a.window.capacity()) {
      a.window.push(p);
      b.window.push(p);
      continue;
    }
    const Decision x = decide_with_defense(a, p, nullptr, rng);
    const Decision y = predict(b, p);
    EXPECT_EQ(x.transmit, y.transmit);
    EXPECT_EQ(x.score, y.score);
  }
}

TEST(Retrain, CleanTraceDoesNotDegrade) {
  const ScenarioConfig c;
  const TransmitterStage& st = trained_stage();
  const double before = *st.validation_metrics.e;
  const std::size_t n = static_cast<std::size_t>(c.n_new + c.num_train_slots);
  const auto records = run_phase(c, generate_environment(c, Phase::retraining_collection, n), {});
  TransmitterState s = state_for(st.classifier);
  retrain(s, detail::column_t_features(records, c.sensing_scale), detail::column_busy(records), 11);
  EXPECT_LE(*detail::classifier_metrics(s.classifier, st.validation).e, before + 0.01);
}

TEST(Retrain, FullyPoisonedTraceDegrades) {
  const ScenarioConfig c;
  const TransmitterStage& st = trained_stage();
  const std::size_t n = static_cast<std::size_t>(c.n_new + c.num_train_slots);
  const AttackPlan plan = full_poisoning_plan(n, c.slot_structure);
  const auto env = generate_environment(c, Phase::retraining_collection, n);
  const auto records = run_phase(c, env, {nullptr, nullptr, nullptr, &plan});
  TransmitterState s = state_for(st.classifier);
  retrain(s, detail::column_t_features(records, c.sensing_scale), detail::column_busy(records), 11);
  EXPECT_GE(*detail::classifier_metrics(s.classifier, st.validation).e, 0.2);
}

TEST(Retrain, EmptyTraceRejected) {
  TransmitterState s = state_for(constant_classifier(10, 0.5));
  EXPECT_THROW(retrain(s, {}, {}, 1), DatasetError);
}

TEST(TransmitterStage, DefaultHyperparamsReachLowError) {
  const TransmitterStage& st = trained_stage();
  EXPECT_LE(*st.validation_metrics.e, 0.02);
  EXPECT_TRUE(st.train.has_both_classes());
  EXPECT_TRUE(st.validation.has_both_classes());
}
