#include <random>

#include <gtest/gtest.h>

#include "deem/core_types.hpp"
#include "deem/errors.hpp"

using namespace deem;

TEST(OneHot, EncodesColumnsPerClassifier) {
  const auto labels = LabelMatrix::from_one_based(1, 4, 3, {1, 3, 2, 1});
  const OneHotBatch batch = encode_one_hot(labels);
  Eigen::MatrixXd expected(3, 4);
  expected << 1, 0, 0, 1,
              0, 0, 1, 0,
              0, 1, 0, 0;
  EXPECT_EQ(Eigen::MatrixXd(batch.sample(0)), expected);
  EXPECT_TRUE(batch.is_hard());
}

TEST(OneHot, SingleUnit) {
  const OneHotBatch batch = encode_one_hot(LabelMatrix::from_one_based(1, 1, 2, {1}));
  EXPECT_EQ(batch(0, 0, 0), 1.0);
  EXPECT_EQ(batch(0, 1, 0), 0.0);
}

TEST(OneHot, RoundTripRandomMatrix) {
  std::mt19937 gen(7);
  std::uniform_int_distribution<int> pick(0, 3);
  std::vector<int> raw(50 * 7);
  for (int& v : raw) v = pick(gen);
  const LabelMatrix labels(50, 7, 4, raw);
  EXPECT_EQ(decode_argmax(encode_one_hot(labels)).data(), labels.data());
}

TEST(OneHot, DecodeTiesAndSoftColumns) {
  Eigen::MatrixXd tie(2, 1);
  tie << 0.5, 0.5;
  EXPECT_EQ(decode_argmax(OneHotBatch(2, 1, tie))(0, 0), 0);
  Eigen::MatrixXd soft(3, 1);
  soft << 0.2, 0.7, 0.1;
  const OneHotBatch batch(3, 1, soft);
  EXPECT_FALSE(batch.is_hard());
  EXPECT_EQ(decode_argmax(batch)(0, 0), 1);
  EXPECT_EQ(decode_argmax(encode_one_hot(LabelMatrix::from_one_based(1, 2, 2, {2, 1}))).data(),
            (std::vector<int>{1, 0}));
}

TEST(OneHot, RejectsColumnsOffTheSimplex) {
  Eigen::MatrixXd bad(2, 1);
  bad << 0.6, 0.6;
  EXPECT_THROW(OneHotBatch(2, 1, bad), InvalidArgument);
  Eigen::MatrixXd negative(2, 1);
  negative << 1.5, -0.5;
  EXPECT_THROW(OneHotBatch(2, 1, negative), InvalidArgument);
}

TEST(Labels, ValidatesRange) {
  EXPECT_THROW(LabelMatrix::from_one_based(1, 2, 2, {1, 3}), LabelOutOfRange);
  EXPECT_THROW(LabelMatrix::from_one_based(1, 2, 2, {0, 1}), LabelOutOfRange);
  EXPECT_THROW(LabelMatrix(1, 2, 1, {0, 0}), InvalidArgument);
  EXPECT_THROW(LabelMatrix(0, 2, 2, {}), InvalidArgument);
  EXPECT_THROW(LabelMatrix(2, 2, 2, {0, 0, 0}), ShapeMismatch);
}

TEST(MajorityVote, StrictMajorityAndTies) {
  EXPECT_EQ(majority_vote(LabelMatrix::from_one_based(1, 3, 2, {1, 1, 2}))[0], 0);
  EXPECT_EQ(majority_vote(LabelMatrix::from_one_based(1, 2, 2, {1, 2}))[0], 0);
  EXPECT_EQ(majority_vote(LabelMatrix::from_one_based(1, 3, 3, {3, 2, 3}))[0], 2);
}

TEST(MajorityVote, BeatsSingleNoisyCopies) {
  const std::size_t n = 1000, d = 5;
  const int k = 3;
  std::mt19937 gen(11);
  std::uniform_int_distribution<int> cls(0, k - 1), wrong(0, k - 2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<int> truth(n), raw(n * d);
  for (std::size_t s = 0; s < n; ++s) {
    truth[s] = cls(gen);
    for (std::size_t i = 0; i < d; ++i) {
      int v = truth[s];
      if (u(gen) >= 0.8) {
        v = wrong(gen);
        if (v >= truth[s]) ++v;
      }
      raw[s * d + i] = v;
    }
  }
  const LabelMatrix labels(n, d, k, raw);
  const LabelVector mv = majority_vote(labels);
  std::size_t mv_hits = 0, best_single = 0;
  for (std::size_t s = 0; s < n; ++s) mv_hits += mv[s] == truth[s];
  for (std::size_t i = 0; i < d; ++i) {
    std::size_t hits = 0;
    for (std::size_t s = 0; s < n; ++s) hits += labels(s, i) == truth[s];
    best_single = std::max(best_single, hits);
  }
  EXPECT_GE(mv_hits, best_single);
}

TEST(MajorityVote, InvariantUnderColumnPermutation) {
  std::mt19937 gen(3);
  std::uniform_int_distribution<int> pick(0, 2);
  std::vector<int> raw(200 * 6);
  for (int& v : raw) v = pick(gen);
  const LabelMatrix labels(200, 6, 3, raw);
  const std::vector<std::size_t> order = {5, 2, 0, 4, 1, 3};
  EXPECT_EQ(majority_vote(labels).data(), majority_vote(labels.select_columns(order)).data());
}

TEST(RunConfig, DefaultsAreValidAndViolationsNamed) {
  RunConfig config;
  EXPECT_NO_THROW(config.validate());
  config.batch_size = 0;
  try {
    config.validate();
    FAIL();
  } catch (const InvalidArgument& e) {
    EXPECT_NE(std::string(e.what()).find("batch_size"), std::string::npos);
  }
  config = RunConfig{};
  config.step_size_alpha = 0.0;
  EXPECT_THROW(config.validate(), InvalidArgument);
  config = RunConfig{};
  config.layer_noise_sigma = -1.0;
  EXPECT_THROW(config.validate(), InvalidArgument);
}
