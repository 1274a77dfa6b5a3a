#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include <specpoison/channel.hpp>

using namespace specpoison;

TEST(MeanGain, InverseSquare) {
  EXPECT_DOUBLE_EQ(mean_gain(10.0), 0.01);
  EXPECT_DOUBLE_EQ(mean_gain(1.0), 1.0);
  EXPECT_NEAR(mean_gain(14.1421356237), 0.005, 1e-12);
  EXPECT_THROW(mean_gain(0.0), std::domain_error);
  EXPECT_THROW(mean_gain(-3.0), std::domain_error);
}

TEST(SampleGain, DegenerateModelsAreExact) {
  RngStream rng(7);
  for (int i = 0; i < 1000; ++i) {
    EXPECT_EQ(sample_gain(GaussianFading{0.0}, 0.01, rng).value, 0.01);
    EXPECT_DOUBLE_EQ(sample_gain(LogNormalFading{0.0}, 0.01, rng).value, 0.01);
  }
}

TEST(SampleGain, RayleighMeanByLawOfLargeNumbers) {
  // Exponential power: standard deviation equals the mean.
  RngStream rng(11);
  const int n = 1'000'000;
  const double mean = 0.01;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) sum += sample_gain(RayleighFading{}, mean, rng).value;
  EXPECT_NEAR(sum / n, mean, 3.0 * mean / std::sqrt(static_cast<double>(n)));
}

TEST(SampleGain, EveryVariantMatchesPathLossMean) {
  const double mean = mean_gain(10.0);
  const ChannelModel models[] = {GaussianFading{0.2}, RayleighFading{}, RicianFading{3.0}, LogNormalFading{3.0}};
  for (const auto& m : models) {
    RngStream rng(23);
    double sum = 0.0;
    const int n = 100'000;
    for (int i = 0; i < n; ++i) {
      const double g = sample_gain(m, mean, rng).value;
      ASSERT_GE(g, 0.0);
      sum += g;
    }
    EXPECT_NEAR(sum / n / mean, 1.0, 0.02) << channel_model_name(m);
  }
}

TEST(SampleGain, RicianWithZeroKIsRayleighInDistribution) {
  // K = 0 removes the line-of-sight term; the power is then exponential, so
  // P(g > mean) = e^-1.
  RngStream rng(5);
  const int n = 200'000;
  int above = 0;
  for (int i = 0; i < n; ++i) above += sample_gain(RicianFading{0.0}, 1.0, rng).value > 1.0 ? 1 : 0;
  EXPECT_NEAR(static_cast<double>(above) / n, std::exp(-1.0), 0.005);
}

TEST(SampleGain, DeterministicPerSeed) {
  RngStream a(99), b(99);
  for (int i = 0; i < 100; ++i)
    EXPECT_EQ(sample_gain(RicianFading{3.0}, 0.01, a).value, sample_gain(RicianFading{3.0}, 0.01, b).value);
}

TEST(SensedPower, Composition) {
  EXPECT_EQ(sensed_power(1.0, {}), 1.0);
  const PowerContribution one[] = {{LinkGain{0.01}, 1000.0}};
  EXPECT_DOUBLE_EQ(sensed_power(1.0, one), 11.0);
  const PowerContribution two[] = {{LinkGain{0.01}, 1000.0}, {LinkGain{0.008}, 1000.0}};
  EXPECT_DOUBLE_EQ(sensed_power(1.0, two), 19.0);
}

TEST(SampleNoise, ZeroSpreadIsExactAndFloorHolds) {
  RngStream rng(3);
  EXPECT_EQ(sample_noise(1.0, 0.0, rng), 1.0);
  for (int i = 0; i < 10000; ++i) EXPECT_GE(sample_noise(1.0, 5.0, rng), 1e-9);
}

TEST(TransmissionSuccess, Examples) {
  const auto clear = transmission_success(LinkGain{0.01}, 1000.0, {}, 1.0, 3.0);
  EXPECT_TRUE(clear.success);
  EXPECT_DOUBLE_EQ(clear.sinr, 10.0);

  // SINR exactly at the threshold succeeds.
  const auto edge = transmission_success(LinkGain{0.003}, 1000.0, {}, 1.0, 3.0);
  EXPECT_DOUBLE_EQ(edge.sinr, 3.0);
  EXPECT_TRUE(edge.success);

  const PowerContribution jam[] = {{LinkGain{0.009}, 1000.0}};
  const auto jammed = transmission_success(LinkGain{0.01}, 1000.0, jam, 1.0, 3.0);
  EXPECT_DOUBLE_EQ(jammed.sinr, 1.0);
  EXPECT_FALSE(jammed.success);

  EXPECT_THROW(transmission_success(LinkGain{0.01}, 1000.0, {}, 0.0, 3.0), std::domain_error);
}

TEST(TransmissionSuccess, AddingInterferenceNeverHelps) {
  RngStream rng(17);
  for (int trial = 0; trial < 2000; ++trial) {
    const LinkGain g{uniform01(rng) * 0.02};
    std::vector<PowerContribution> interferers;
    const int k = static_cast<int>(uniform_index(rng, 4));
    for (int i = 0; i < k; ++i) interferers.push_back({LinkGain{uniform01(rng) * 0.01}, 1000.0 * uniform01(rng)});
    const auto before = transmission_success(g, 1000.0, interferers, 1.0, 3.0);
    interferers.push_back({LinkGain{uniform01(rng) * 0.01}, 1000.0});
    const auto after = transmission_success(g, 1000.0, interferers, 1.0, 3.0);
    EXPECT_LE(after.sinr, before.sinr);
    EXPECT_TRUE(before.success || !after.success);
  }
}
