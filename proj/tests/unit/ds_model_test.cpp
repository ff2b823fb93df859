#include <cmath>

#include <gtest/gtest.h>

#include "deem/ds_model.hpp"
#include "deem/errors.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace deem;

namespace {

DsParams perfect(int k, std::size_t d) {
  std::vector<double> psi(d * static_cast<std::size_t>(k * k), 0.0);
  DsParams shape = DsParams::uniform(d, k);
  for (std::size_t i = 0; i < d; ++i)
    for (int m = 0; m < k; ++m) psi[shape.index(i, m, m)] = 1.0;
  return {d, k, std::move(psi), std::vector<double>(static_cast<std::size_t>(k), 1.0 / k)};
}

DsParams two_by_two() {
  // psi block rows l, columns m: [[0.8, 0.3], [0.2, 0.7]] for both classifiers.
  std::vector<double> psi = {0.8, 0.3, 0.2, 0.7, 0.8, 0.3, 0.2, 0.7};
  return {2, 2, std::move(psi), {0.6, 0.4}};
}

}  // namespace

TEST(DsJoint, PerfectClassifier) {
  const DsParams p = perfect(2, 1);
  EXPECT_DOUBLE_EQ(ds_joint_prob(p, std::vector<int>{0}, 0), 0.5);
  EXPECT_DOUBLE_EQ(ds_joint_prob(p, std::vector<int>{0}, 1), 0.0);
}

TEST(DsJoint, HandMultiplication) {
  EXPECT_NEAR(ds_joint_prob(two_by_two(), std::vector<int>{0, 1}, 0), 0.096, 1e-15);
  EXPECT_NEAR(ds_joint_prob(two_by_two(), std::vector<int>{0, 1}, 1), 0.084, 1e-15);
}

TEST(DsJoint, SumsToOneOverEveryConfiguration) {
  for (int k = 2; k <= 3; ++k)
    for (std::size_t d = 1; d <= 4; ++d) {
      const DsParams p = oracle::random_ds(k, d, static_cast<unsigned>(10 * k + d));
      double total = 0.0;
      for (const auto& row : oracle::all_rows(k, d))
        for (int y = 0; y < k; ++y) total += ds_joint_prob(p, row, y);
      EXPECT_NEAR(total, 1.0, 1e-9);
    }
}

TEST(DsPosterior, Examples) {
  const auto post = ds_posterior(perfect(2, 1), std::vector<int>{0});
  EXPECT_DOUBLE_EQ(post[0], 1.0);
  EXPECT_DOUBLE_EQ(post[1], 0.0);

  const std::vector<double> psi(2 * 9, 1.0 / 3.0);
  const DsParams flat(2, 3, psi, {0.2, 0.3, 0.5});
  const auto prior = ds_posterior(flat, std::vector<int>{2, 1});
  for (int t = 0; t < 3; ++t) EXPECT_NEAR(prior[static_cast<std::size_t>(t)], flat.pi(t), 1e-12);

  const auto hand = ds_posterior(two_by_two(), std::vector<int>{0, 1});
  EXPECT_NEAR(hand[0], 0.096 / 0.18, 1e-12);
  EXPECT_NEAR(hand[1], 0.084 / 0.18, 1e-12);
}

TEST(DsPosterior, ImpossibleObservationThrows) {
  // Classifier 1 is perfect and classifier 2 is perfect: disagreement has zero likelihood.
  EXPECT_THROW(ds_posterior(perfect(2, 2), std::vector<int>{0, 1}), AllZeroLikelihood);
}

TEST(DsPredict, ArgmaxOfPosterior) {
  const LabelMatrix labels = LabelMatrix::from_one_based(2, 2, 2, {1, 2, 2, 2});
  const LabelVector pred = ds_predict(two_by_two(), labels);
  EXPECT_EQ(pred[0], 0);
  EXPECT_EQ(pred[1], 1);
  EXPECT_EQ(ds_predict(perfect(2, 1), LabelMatrix::from_one_based(1, 1, 2, {2}))[0], 1);
}

TEST(DsParams, InvariantsAndFreeParameterCount) {
  EXPECT_THROW(DsParams(1, 2, {0.5, 0.5, 0.6, 0.5}, {0.5, 0.5}), InvalidArgument);
  EXPECT_THROW(DsParams(1, 2, {0.5, 0.5, 0.5, 0.5}, {0.7, 0.7}), InvalidArgument);
  EXPECT_THROW(DsParams(1, 2, {1.5, 0.5, -0.5, 0.5}, {0.5, 0.5}), InvalidArgument);
  for (int k = 2; k <= 4; ++k)
    for (std::size_t d = 1; d <= 6; ++d)
      EXPECT_EQ(DsParams::uniform(d, k).free_parameter_count(),
                (d * static_cast<std::size_t>(k) + 1) * static_cast<std::size_t>(k - 1));
}

TEST(DsSample, PerfectClassifiersCopyTheTruth) {
  const LabeledSample s = ds_sample(perfect(3, 4), 200, 5);
  for (std::size_t r = 0; r < 200; ++r)
    for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(s.labels(r, i), s.truth[r]);
}

TEST(DsSample, FrequenciesConverge) {
  const DsParams p = deem::testing::moderate_ds_params();
  const LabeledSample s = ds_sample(p, 50000, 17);
  std::vector<double> freq(3, 0.0);
  for (int y : s.truth.data()) freq[static_cast<std::size_t>(y)] += 1.0 / 50000.0;
  for (int t = 0; t < 3; ++t) EXPECT_LT(std::abs(freq[static_cast<std::size_t>(t)] - p.pi(t)), 0.02);
  const DsParams empirical = empirical_ds_params(s.labels, s.truth);
  for (std::size_t i = 0; i < p.psi_data().size(); ++i)
    EXPECT_LT(std::abs(empirical.psi_data()[i] - p.psi_data()[i]), 0.02);
}

TEST(DsSample, DeterministicGivenSeed) {
  const DsParams p = deem::testing::moderate_ds_params();
  EXPECT_EQ(ds_sample(p, 300, 4).labels.data(), ds_sample(p, 300, 4).labels.data());
  EXPECT_NE(ds_sample(p, 300, 4).labels.data(), ds_sample(p, 300, 5).labels.data());
}

TEST(DsEm, PerfectClassifiersRecovered) {
  const LabeledSample s = ds_sample(perfect(3, 4), 100, 2);
  const EmResult fit = ds_fit_em(s.labels);
  const DsParams aligned = deem::testing::align_by_predictions(fit.params, s.labels, s.truth);
  for (std::size_t i = 0; i < 4; ++i)
    for (int m = 0; m < 3; ++m) EXPECT_GE(aligned.psi(i, m, m), 0.99);
}

TEST(DsEm, RecoversKnownParameters) {
  const DsParams p = deem::testing::moderate_ds_params();
  const LabeledSample s = ds_sample(p, 50000, 23);
  const EmResult fit = ds_fit_em(s.labels);
  EXPECT_TRUE(fit.converged);
  const DsParams aligned = deem::testing::align_by_predictions(fit.params, s.labels, s.truth);
  EXPECT_LT(deem::testing::max_abs_difference(aligned, p), 0.03);
}

TEST(DsEm, LogLikelihoodMonotone) {
  for (unsigned seed = 0; seed < 5; ++seed) {
    const LabeledSample s = ds_sample(oracle::random_ds(3, 5, seed), 2000, seed);
    const EmResult fit = ds_fit_em(s.labels);
    for (std::size_t t = 1; t < fit.log_likelihood.size(); ++t)
      EXPECT_GE(fit.log_likelihood[t], fit.log_likelihood[t - 1] - 1e-12) << "seed " << seed << " iter " << t;
  }
}

TEST(DsEm, Deterministic) {
  const LabeledSample s = ds_sample(deem::testing::moderate_ds_params(), 3000, 8);
  EXPECT_EQ(ds_fit_em(s.labels).params.psi_data(), ds_fit_em(s.labels).params.psi_data());
}
