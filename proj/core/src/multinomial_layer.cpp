#include "deem/multinomial_layer.hpp"

#include <span>

#include "deem/core_types.hpp"
#include "deem/errors.hpp"
#include "deem/rng.hpp"
#include "deem/sparsemax.hpp"

namespace deem {

using Eigen::Index;
using Eigen::MatrixXd;

MultinomialLayer::MultinomialLayer(int num_classes, std::size_t units) : k_(num_classes), d_(units) {
  if (k_ < 2 || d_ < 1) throw InvalidArgument("MultinomialLayer needs K >= 2 and d >= 1");
  const Index size = static_cast<Index>(k_) * static_cast<Index>(d_);
  weights_ = MatrixXd::Zero(size, size);
  bias_ = Eigen::VectorXd::Zero(size);
}

double MultinomialLayer::w(int l, int m, std::size_t i, std::size_t j) const noexcept {
  return weights_(unit_index(k_, l, i), unit_index(k_, m, j));
}
double& MultinomialLayer::w(int l, int m, std::size_t i, std::size_t j) noexcept {
  return weights_(unit_index(k_, l, i), unit_index(k_, m, j));
}
double MultinomialLayer::b(int m, std::size_t j) const noexcept { return bias_(unit_index(k_, m, j)); }
double& MultinomialLayer::b(int m, std::size_t j) noexcept { return bias_(unit_index(k_, m, j)); }

LayerGradients LayerGradients::zeros_like(const MultinomialLayer& layer) {
  return {MatrixXd::Zero(layer.weights().rows(), layer.weights().cols()), Eigen::VectorXd::Zero(layer.bias().size())};
}

LayerCache layer_forward(const MultinomialLayer& layer, const Eigen::Ref<const MatrixXd>& input) {
  if (input.rows() != layer.weights().rows()) throw ShapeMismatch("layer input must have K*d rows");
  const auto k = static_cast<std::size_t>(layer.num_classes());
  LayerCache cache;
  cache.input = input;
  cache.pre_activation = (layer.weights().transpose() * input).colwise() + layer.bias();
  cache.output.resize(input.rows(), input.cols());
  cache.support.resize(input.rows(), input.cols());
  const Index rows = input.rows();
  for (Index c = 0; c < input.cols(); ++c) {
    const double* z = cache.pre_activation.data() + c * rows;
    double* out = cache.output.data() + c * rows;
    bool* mask = cache.support.data() + c * rows;
    for (std::size_t j = 0; j < layer.units(); ++j) {
      const std::size_t offset = j * k;
      sparsemax(std::span<const double>(z + offset, k), std::span<double>(out + offset, k),
                std::span<bool>(mask + offset, k));
    }
  }
  return cache;
}

namespace {

// Upstream gradient pulled back through the per-unit sparsemax Jacobians.
MatrixXd through_sparsemax(const LayerCache& cache, const MultinomialLayer& layer,
                           const Eigen::Ref<const MatrixXd>& upstream) {
  if (upstream.rows() != cache.output.rows() || upstream.cols() != cache.output.cols())
    throw ShapeMismatch("upstream gradient does not match the cached output");
  const auto k = static_cast<std::size_t>(layer.num_classes());
  const Index rows = upstream.rows();
  const MatrixXd up = upstream;
  MatrixXd g(rows, upstream.cols());
  for (Index c = 0; c < upstream.cols(); ++c) {
    const bool* mask = cache.support.data() + c * rows;
    const double* u = up.data() + c * rows;
    double* out = g.data() + c * rows;
    for (std::size_t j = 0; j < layer.units(); ++j) {
      const std::size_t offset = j * k;
      sparsemax_jacobian_vec(std::span<const bool>(mask + offset, k), std::span<const double>(u + offset, k),
                             std::span<double>(out + offset, k));
    }
  }
  return g;
}

}  // namespace

MatrixXd layer_backward(const LayerCache& cache, const MultinomialLayer& layer,
                        const Eigen::Ref<const MatrixXd>& upstream, LayerGradients& grads) {
  const MatrixXd g = through_sparsemax(cache, layer, upstream);
  grads.weights.noalias() += cache.input * g.transpose();
  grads.bias.noalias() += g.rowwise().sum();
  return layer.weights() * g;
}

MatrixXd layer_input_grad(const LayerCache& cache, const MultinomialLayer& layer,
                          const Eigen::Ref<const MatrixXd>& upstream) {
  return layer.weights() * through_sparsemax(cache, layer, upstream);
}

MultinomialLayer init_identity_noisy(int num_classes, std::size_t units, double sigma, std::uint64_t seed) {
  if (!(sigma >= 0.0)) throw InvalidArgument("sigma must be nonnegative");
  MultinomialLayer layer(num_classes, units);
  layer.weights().diagonal().setOnes();
  if (sigma > 0.0) {
    Rng rng(seed, "layer_init");
    for (Index c = 0; c < layer.weights().cols(); ++c)
      for (Index r = 0; r < layer.weights().rows(); ++r) layer.weights()(r, c) += rng.normal(0.0, sigma);
    for (Index r = 0; r < layer.bias().size(); ++r) layer.bias()(r) = rng.normal(0.0, sigma);
  }
  return layer;
}

}  // namespace deem
