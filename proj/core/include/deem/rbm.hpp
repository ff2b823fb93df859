#pragma once

#include <cstddef>

#include <Eigen/Dense>

#include "deem/core_types.hpp"
#include "deem/ds_model.hpp"

namespace deem {

/// Fully multinomial RBM parameters lambda = (W, a, b).
///
/// The weight tensor w(l, m, i, j) is held as a (K*d_v) x (K*d_h) matrix with
/// row unit_index(K, l, i) and column unit_index(K, m, j); biases are flattened
/// the same way. With `identifiable` set, the first-class coefficients are
/// frozen to the identifiable-RBM constants:
///   a(0, i) = 0, b(0, j) = 0, w(l, m, i, j) = 0 when exactly one of l, m is 0,
///   w(0, 0, i, j) = 1.
class RbmParams {
 public:
  RbmParams(int num_classes, std::size_t visible_units, std::size_t hidden_units, bool identifiable);

  int num_classes() const noexcept { return k_; }
  std::size_t visible_units() const noexcept { return dv_; }
  std::size_t hidden_units() const noexcept { return dh_; }
  bool identifiable() const noexcept { return identifiable_; }

  double w(int l, int m, std::size_t i, std::size_t j) const noexcept {
    return weights_(unit_index(k_, l, i), unit_index(k_, m, j));
  }
  double& w(int l, int m, std::size_t i, std::size_t j) noexcept {
    return weights_(unit_index(k_, l, i), unit_index(k_, m, j));
  }
  double a(int l, std::size_t i) const noexcept { return visible_bias_(unit_index(k_, l, i)); }
  double& a(int l, std::size_t i) noexcept { return visible_bias_(unit_index(k_, l, i)); }
  double b(int m, std::size_t j) const noexcept { return hidden_bias_(unit_index(k_, m, j)); }
  double& b(int m, std::size_t j) noexcept { return hidden_bias_(unit_index(k_, m, j)); }

  const Eigen::MatrixXd& weights() const noexcept { return weights_; }
  Eigen::MatrixXd& weights() noexcept { return weights_; }
  const Eigen::VectorXd& visible_bias() const noexcept { return visible_bias_; }
  Eigen::VectorXd& visible_bias() noexcept { return visible_bias_; }
  const Eigen::VectorXd& hidden_bias() const noexcept { return hidden_bias_; }
  Eigen::VectorXd& hidden_bias() noexcept { return hidden_bias_; }

  // Frozen masks (true = constant). All false for a plain FM-RBM.
  const Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>& frozen_weights() const noexcept { return frozen_w_; }
  const Eigen::Array<bool, Eigen::Dynamic, 1>& frozen_visible_bias() const noexcept { return frozen_a_; }
  const Eigen::Array<bool, Eigen::Dynamic, 1>& frozen_hidden_bias() const noexcept { return frozen_b_; }

  /// Value a frozen weight entry must hold.
  static double frozen_weight_value(int l, int m) noexcept { return (l == 0 && m == 0) ? 1.0 : 0.0; }

  std::size_t free_parameter_count() const noexcept;

  /// True when every frozen entry holds exactly its constant.
  bool frozen_constants_intact() const noexcept;

  /// Writes the constants back into every frozen entry.
  void restore_frozen() noexcept;

 private:
  int k_;
  std::size_t dv_;
  std::size_t dh_;
  bool identifiable_;
  Eigen::MatrixXd weights_;
  Eigen::VectorXd visible_bias_;
  Eigen::VectorXd hidden_bias_;
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> frozen_w_;
  Eigen::Array<bool, Eigen::Dynamic, 1> frozen_a_;
  Eigen::Array<bool, Eigen::Dynamic, 1> frozen_b_;
};

/// Same-shaped gradient (or update) buffers for RbmParams.
struct RbmGradients {
  Eigen::MatrixXd weights;
  Eigen::VectorXd visible_bias;
  Eigen::VectorXd hidden_bias;

  static RbmGradients zeros_like(const RbmParams& params);
  /// Zeroes every entry that is frozen in `params`.
  void mask_frozen(const RbmParams& params);
};

/// E(v, h) = -(sum a v + sum b h + sum w v h); v is K x d_v, h is K x d_h.
double energy(const RbmParams& params, const Eigen::Ref<const Eigen::MatrixXd>& v,
              const Eigen::Ref<const Eigen::MatrixXd>& h);

/// p(h_j = e_m | v), returned K x d_h (one softmax per hidden unit).
Eigen::MatrixXd cond_prob_hidden(const RbmParams& params, const Eigen::Ref<const Eigen::MatrixXd>& v);

/// p(v_i = e_l | h), returned K x d_v.
Eigen::MatrixXd cond_prob_visible(const RbmParams& params, const Eigen::Ref<const Eigen::MatrixXd>& h);

/// -log sum_m exp(-E(v, e_m)); requires d_h = 1.
double free_energy(const RbmParams& params, const Eigen::Ref<const Eigen::MatrixXd>& v);

/// Batched free energy over the columns of `visible` ((K*d_v) x B, d_h = 1).
struct FreeEnergyBatch {
  Eigen::VectorXd free_energy;     // B
  Eigen::MatrixXd hidden_posterior;  // K x B
};
FreeEnergyBatch free_energy_batch(const RbmParams& params, const Eigen::Ref<const Eigen::MatrixXd>& visible);

/// Adds sum_s scale * dF(v_s)/dlambda to `grads` (frozen entries included; mask afterwards).
void accumulate_free_energy_param_grads(const RbmParams& params, const Eigen::Ref<const Eigen::MatrixXd>& visible,
                                        const FreeEnergyBatch& forward, double scale, RbmGradients& grads);

/// dF(v_s)/dv_s for every column, (K*d_v) x B.
Eigen::MatrixXd free_energy_visible_grad(const RbmParams& params, const FreeEnergyBatch& forward);

/// Identifiable RBM (d_h = 1) to Dawid-Skene parameters.
DsParams irbm_to_ds(const RbmParams& params);

/// Inverse map. Throws NonPositiveProbability when any psi or pi entry is <= 0.
RbmParams ds_to_irbm(const DsParams& params);

/// Posterior over the single hidden unit for every sample, n x K.
Eigen::MatrixXd irbm_posterior(const RbmParams& params, const OneHotBatch& batch);

}  // namespace deem
