#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "deem/errors.hpp"
#include "deem/multinomial_layer.hpp"
#include "deem/sparsemax.hpp"
#include "oracles.hpp"

using namespace deem;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

Eigen::VectorXd random_vector(Eigen::Index n, std::mt19937& gen, double scale = 1.0) {
  std::normal_distribution<double> noise(0.0, scale);
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = noise(gen);
  return v;
}

MultinomialLayer random_layer(int k, std::size_t d, unsigned seed) {
  std::mt19937 gen(seed);
  MultinomialLayer layer = init_identity_noisy(k, d, 0.0, 0);
  layer.weights() += random_vector(layer.weights().size(), gen, 0.4).reshaped(layer.weights().rows(), layer.weights().cols());
  layer.bias() = random_vector(layer.bias().size(), gen, 0.4);
  return layer;
}

Eigen::MatrixXd random_simplex_batch(int k, std::size_t d, Eigen::Index b, std::mt19937& gen) {
  std::gamma_distribution<double> g(1.0, 1.0);
  Eigen::MatrixXd x(k * static_cast<Eigen::Index>(d), b);
  for (Eigen::Index c = 0; c < b; ++c)
    for (std::size_t i = 0; i < d; ++i) {
      auto block = x.col(c).segment(unit_index(k, 0, i), k);
      for (int l = 0; l < k; ++l) block(l) = g(gen);
      block /= block.sum();
    }
  return x;
}

// Smallest gap between any pre-activation and its column's threshold, so
// finite differences can stay clear of support changes.
double min_support_margin(const LayerCache& cache, int k) {
  double margin = INFINITY;
  for (Eigen::Index c = 0; c < cache.pre_activation.cols(); ++c)
    for (Eigen::Index j = 0; j < cache.pre_activation.rows() / k; ++j)
      for (int m = 0; m < k; ++m) {
        const Eigen::Index r = j * k + m;
        // tau = z - output on the support; any support member gives it.
        for (int s = 0; s < k; ++s)
          if (cache.output(j * k + s, c) > 0.0) {
            const double tau = cache.pre_activation(j * k + s, c) - cache.output(j * k + s, c);
            margin = std::min(margin, std::abs(cache.pre_activation(r, c) - tau));
            break;
          }
      }
  return margin;
}

}  // namespace

TEST(Sparsemax, HandExamples) {
  EXPECT_TRUE(sparsemax(vec({0, 0, 0})).isApprox(vec({1.0 / 3, 1.0 / 3, 1.0 / 3}), 1e-15));
  EXPECT_EQ(sparsemax(vec({10, 0, 0})), vec({1, 0, 0}));
  EXPECT_TRUE(sparsemax(vec({0.5, 0.3, -1})).isApprox(vec({0.6, 0.4, 0}), 1e-14));

  std::vector<double> z = {0.5, 0.3, -1}, out(3);
  bool support[3];
  EXPECT_NEAR(sparsemax(z, out, support), -0.1, 1e-15);
  EXPECT_TRUE(support[0] && support[1] && !support[2]);
  EXPECT_NEAR(sparsemax(std::vector<double>{10, 0, 0}, out, support), 9.0, 1e-15);
}

TEST(Sparsemax, BoundaryIndexJoinsSupport) {
  std::vector<double> out(3);
  bool support[3];
  const double tau = sparsemax(std::vector<double>{1, 0, 0}, out, support);
  EXPECT_EQ(tau, 0.0);
  EXPECT_EQ(out, (std::vector<double>{1, 0, 0}));
  EXPECT_TRUE(support[0] && support[1] && support[2]);
}

TEST(Sparsemax, MatchesSubsetEnumeration) {
  std::mt19937 gen(1);
  for (int trial = 0; trial < 500; ++trial) {
    const Eigen::VectorXd z = random_vector(2 + trial % 5, gen, 1.5);
    EXPECT_LT((sparsemax(z) - oracle::sparsemax_by_subsets(z)).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Sparsemax, SimplexShiftInvarianceAndIdempotence) {
  std::mt19937 gen(2);
  for (int trial = 0; trial < 200; ++trial) {
    const Eigen::VectorXd z = random_vector(4, gen);
    const Eigen::VectorXd p = sparsemax(z);
    EXPECT_NEAR(p.sum(), 1.0, 1e-12);
    EXPECT_GE(p.minCoeff(), 0.0);
    EXPECT_LT((sparsemax((z.array() + 3.7).matrix()) - p).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((sparsemax(p) - p).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(SparsemaxJacobian, AnnihilatesConstantsAndSingletons) {
  const Eigen::VectorXd uniform = Eigen::VectorXd::Constant(3, 1.0 / 3);
  EXPECT_LT(sparsemax_jacobian_vec(uniform, Eigen::VectorXd::Constant(3, 2.5)).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_EQ(sparsemax_jacobian_vec(vec({1, 0, 0}), vec({0.3, -2, 5})), Eigen::VectorXd::Zero(3));
  EXPECT_TRUE(sparsemax_jacobian_vec(vec({0.6, 0.4, 0}), vec({1, 3, 7})).isApprox(vec({-1, 1, 0}), 1e-15));
}

TEST(SparsemaxJacobian, MatchesFiniteDifferences) {
  std::mt19937 gen(3);
  int checked = 0;
  while (checked < 100) {
    const Eigen::VectorXd z = random_vector(4, gen);
    std::vector<double> out(4);
    bool support[4];
    const double tau = sparsemax(std::span<const double>(z.data(), 4), out, support);
    if (((z.array() - tau).abs() < 1e-3).any()) continue;
    const Eigen::VectorXd u = random_vector(4, gen);
    const Eigen::VectorXd analytic = sparsemax_jacobian_vec(sparsemax(z), u);
    const Eigen::VectorXd numeric =
        oracle::central_difference([&](const Eigen::VectorXd& x) { return u.dot(sparsemax(x)); }, z, 1e-6);
    EXPECT_LT(oracle::max_relative_error(analytic, numeric), 1e-4);
    ++checked;
  }
}

TEST(LayerForward, IdentityReproducesHardInput) {
  const MultinomialLayer layer = init_identity_noisy(3, 4, 0.0, 0);
  for (const auto& row : oracle::all_rows(3, 4)) {
    const Eigen::VectorXd x = oracle::one_hot(3, row);
    EXPECT_EQ(layer_forward(layer, x).output.col(0), x);
  }
}

TEST(LayerForward, ZeroParametersGiveUniform) {
  const MultinomialLayer layer(3, 2);
  const LayerCache cache = layer_forward(layer, oracle::one_hot(3, {0, 2}));
  EXPECT_TRUE(cache.output.isApprox(Eigen::MatrixXd::Constant(6, 1, 1.0 / 3), 1e-15));
}

TEST(LayerForward, SoftInputPassesThroughIdentity) {
  const MultinomialLayer layer = init_identity_noisy(3, 1, 0.0, 0);
  const LayerCache cache = layer_forward(layer, vec({0.6, 0.4, 0.0}));
  EXPECT_TRUE(cache.output.col(0).isApprox(vec({0.6, 0.4, 0.0}), 1e-15));
}

TEST(LayerForward, MatchesIndexFormulaAndStaysOnSimplex) {
  const MultinomialLayer layer = random_layer(3, 4, 4);
  std::mt19937 gen(5);
  const Eigen::MatrixXd x = random_simplex_batch(3, 4, 6, gen);
  const LayerCache cache = layer_forward(layer, x);
  for (Eigen::Index c = 0; c < x.cols(); ++c)
    for (std::size_t j = 0; j < 4; ++j) {
      Eigen::VectorXd z(3);
      for (int m = 0; m < 3; ++m) {
        double acc = layer.b(m, j);
        for (std::size_t i = 0; i < 4; ++i)
          for (int l = 0; l < 3; ++l) acc += layer.w(l, m, i, j) * x(unit_index(3, l, i), c);
        z(m) = acc;
        EXPECT_NEAR(cache.pre_activation(unit_index(3, m, j), c), acc, 1e-12);
      }
      const Eigen::VectorXd out = cache.output.col(c).segment(unit_index(3, 0, j), 3);
      EXPECT_NEAR(out.sum(), 1.0, 1e-9);
      EXPECT_LT((out - oracle::sparsemax_by_subsets(z)).cwiseAbs().maxCoeff(), 1e-12);
      for (int m = 0; m < 3; ++m)
        EXPECT_EQ(cache.support(unit_index(3, m, j), c), out(m) > 0.0);
    }
}

TEST(LayerForward, ShapeMismatch) {
  EXPECT_THROW(layer_forward(MultinomialLayer(3, 2), Eigen::MatrixXd::Zero(5, 1)), ShapeMismatch);
}

TEST(LayerBackward, ZeroUpstreamGivesZeroGradients) {
  const MultinomialLayer layer = random_layer(3, 2, 6);
  const LayerCache cache = layer_forward(layer, oracle::one_hot(3, {1, 2}));
  LayerGradients grads = LayerGradients::zeros_like(layer);
  const Eigen::MatrixXd input_grad = layer_backward(cache, layer, Eigen::MatrixXd::Zero(6, 1), grads);
  EXPECT_EQ(input_grad.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(grads.weights.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(grads.bias.cwiseAbs().maxCoeff(), 0.0);
}

TEST(LayerBackward, GradientsMatchFiniteDifferences) {
  const int k = 3;
  const std::size_t d = 4;
  std::mt19937 gen(7);
  const MultinomialLayer base = random_layer(k, d, 8);
  const Eigen::MatrixXd x = random_simplex_batch(k, d, 3, gen);
  const Eigen::MatrixXd upstream = random_vector(12 * 3, gen).reshaped(12, 3);
  const LayerCache cache = layer_forward(base, x);
  ASSERT_GT(min_support_margin(cache, k), 1e-4);

  LayerGradients grads = LayerGradients::zeros_like(base);
  const Eigen::MatrixXd input_grad = layer_backward(cache, base, upstream, grads);
  const auto loss = [&](const MultinomialLayer& layer, const Eigen::MatrixXd& in) {
    return (layer_forward(layer, in).output.array() * upstream.array()).sum();
  };

  Eigen::VectorXd params(base.weights().size() + base.bias().size());
  params << base.weights().reshaped(), base.bias();
  const Eigen::VectorXd numeric_params = oracle::central_difference(
      [&](const Eigen::VectorXd& p) {
        MultinomialLayer layer = base;
        layer.weights().reshaped() = p.head(base.weights().size());
        layer.bias() = p.tail(base.bias().size());
        return loss(layer, x);
      },
      params, 1e-6);
  Eigen::VectorXd analytic(params.size());
  analytic << grads.weights.reshaped(), grads.bias;
  EXPECT_LT(oracle::max_relative_error(analytic, numeric_params), 1e-4);

  const Eigen::VectorXd numeric_input = oracle::central_difference(
      [&](const Eigen::VectorXd& in) { return loss(base, in.reshaped(x.rows(), x.cols())); }, x.reshaped(), 1e-6);
  EXPECT_LT(oracle::max_relative_error(input_grad.reshaped(), numeric_input), 1e-4);
  EXPECT_LT((layer_input_grad(cache, base, upstream) - input_grad).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(LayerInit, NoiseStatisticsAndSeeds) {
  const MultinomialLayer a = init_identity_noisy(3, 4, 0.005, 1);
  const MultinomialLayer b = init_identity_noisy(3, 4, 0.005, 2);
  EXPECT_NE(a.weights(), b.weights());
  EXPECT_EQ(a.weights(), init_identity_noisy(3, 4, 0.005, 1).weights());

  const MultinomialLayer big = init_identity_noisy(10, 100, 0.005, 3);
  const Eigen::MatrixXd noise = big.weights() - Eigen::MatrixXd::Identity(1000, 1000);
  const double n = static_cast<double>(noise.size());
  const double mean = noise.sum() / n;
  const double sd = std::sqrt((noise.array() - mean).square().sum() / (n - 1));
  EXPECT_NEAR(sd, 0.005, 0.005 * 0.02);
}
