#pragma once

#include <cstddef>
#include <cstdint>

#include <Eigen/Dense>

namespace deem {

/// Square multinomial layer: z(m, j) = sum_{l,i} w(l, m, i, j) x(l, i) + b(m, j),
/// followed by a sparsemax over m for each output unit j.
///
/// Weights are a (K*d) x (K*d) matrix indexed like RbmParams (row = input
/// unit_index, column = output unit_index).
class MultinomialLayer {
 public:
  MultinomialLayer(int num_classes, std::size_t units);

  int num_classes() const noexcept { return k_; }
  std::size_t units() const noexcept { return d_; }

  double w(int l, int m, std::size_t i, std::size_t j) const noexcept;
  double& w(int l, int m, std::size_t i, std::size_t j) noexcept;
  double b(int m, std::size_t j) const noexcept;
  double& b(int m, std::size_t j) noexcept;

  const Eigen::MatrixXd& weights() const noexcept { return weights_; }
  Eigen::MatrixXd& weights() noexcept { return weights_; }
  const Eigen::VectorXd& bias() const noexcept { return bias_; }
  Eigen::VectorXd& bias() noexcept { return bias_; }

 private:
  int k_;
  std::size_t d_;
  Eigen::MatrixXd weights_;
  Eigen::VectorXd bias_;
};

/// Everything backward needs, for a batch of B samples stored as (K*d) x B columns.
struct LayerCache {
  Eigen::MatrixXd input;
  Eigen::MatrixXd pre_activation;
  Eigen::MatrixXd output;
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> support;
};

struct LayerGradients {
  Eigen::MatrixXd weights;
  Eigen::VectorXd bias;

  static LayerGradients zeros_like(const MultinomialLayer& layer);
};

LayerCache layer_forward(const MultinomialLayer& layer, const Eigen::Ref<const Eigen::MatrixXd>& input);

/// Back-propagates `upstream` (dLoss/doutput, (K*d) x B) through sparsemax and
/// the linear map. Parameter gradients are summed over the batch into `grads`;
/// returns dLoss/dinput.
Eigen::MatrixXd layer_backward(const LayerCache& cache, const MultinomialLayer& layer,
                               const Eigen::Ref<const Eigen::MatrixXd>& upstream, LayerGradients& grads);

/// dLoss/dinput only, skipping parameter gradients.
Eigen::MatrixXd layer_input_grad(const LayerCache& cache, const MultinomialLayer& layer,
                                 const Eigen::Ref<const Eigen::MatrixXd>& upstream);

/// Identity map (w = [l == m][i == j]) plus N(0, sigma^2) noise on every weight and bias.
MultinomialLayer init_identity_noisy(int num_classes, std::size_t units, double sigma, std::uint64_t seed);

}  // namespace deem
