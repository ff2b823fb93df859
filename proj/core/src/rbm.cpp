#include "deem/rbm.hpp"

#include <cmath>
#include <vector>

#include "deem/errors.hpp"

namespace deem {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

// In-place softmax of each consecutive K-block of `logits`, per column.
void block_softmax(MatrixXd& logits, int k) {
  const Index blocks = logits.rows() / k;
  for (Index c = 0; c < logits.cols(); ++c) {
    for (Index u = 0; u < blocks; ++u) {
      auto block = logits.col(c).segment(u * k, k);
      block = (block.array() - block.maxCoeff()).exp().matrix();
      block /= block.sum();
    }
  }
}

double log_sum_exp(const Eigen::Ref<const VectorXd>& v) {
  const double peak = v.maxCoeff();
  return peak + std::log((v.array() - peak).exp().sum());
}

Eigen::Map<const VectorXd> flat(const Eigen::Ref<const MatrixXd>& m) { return {m.data(), m.size()}; }

void check_visible(const RbmParams& p, const Eigen::Ref<const MatrixXd>& v) {
  if (v.rows() != p.num_classes() || v.cols() != static_cast<Index>(p.visible_units()))
    throw ShapeMismatch("visible configuration must be K x d_v");
}

void check_hidden(const RbmParams& p, const Eigen::Ref<const MatrixXd>& h) {
  if (h.rows() != p.num_classes() || h.cols() != static_cast<Index>(p.hidden_units()))
    throw ShapeMismatch("hidden configuration must be K x d_h");
}

void require_single_hidden(const RbmParams& p, const char* what) {
  if (p.hidden_units() != 1) throw InvalidArgument(std::string(what) + " requires a single hidden unit");
}

// log S_t = sum_i log sum_l exp(a(l, i) + w(l, t, i)): the visible sum factorises given h = e_t.
VectorXd log_partition_per_class(const RbmParams& p) {
  const int k = p.num_classes();
  VectorXd out = VectorXd::Zero(k);
  VectorXd z(k);
  for (int t = 0; t < k; ++t) {
    for (std::size_t i = 0; i < p.visible_units(); ++i) {
      for (int l = 0; l < k; ++l) z(l) = p.a(l, i) + p.w(l, t, i, 0);
      out(t) += log_sum_exp(z);
    }
  }
  return out;
}

}  // namespace

RbmParams::RbmParams(int num_classes, std::size_t visible_units, std::size_t hidden_units, bool identifiable)
    : k_(num_classes), dv_(visible_units), dh_(hidden_units), identifiable_(identifiable) {
  if (k_ < 2 || dv_ < 1 || dh_ < 1) throw InvalidArgument("RbmParams needs K >= 2, d_v >= 1, d_h >= 1");
  const Index rows = static_cast<Index>(k_) * static_cast<Index>(dv_);
  const Index cols = static_cast<Index>(k_) * static_cast<Index>(dh_);
  weights_ = MatrixXd::Zero(rows, cols);
  visible_bias_ = VectorXd::Zero(rows);
  hidden_bias_ = VectorXd::Zero(cols);
  frozen_w_ = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(rows, cols, false);
  frozen_a_ = Eigen::Array<bool, Eigen::Dynamic, 1>::Constant(rows, false);
  frozen_b_ = Eigen::Array<bool, Eigen::Dynamic, 1>::Constant(cols, false);
  if (!identifiable_) return;
  for (std::size_t i = 0; i < dv_; ++i) {
    frozen_a_(unit_index(k_, 0, i)) = true;
    for (std::size_t j = 0; j < dh_; ++j)
      for (int l = 0; l < k_; ++l)
        for (int m = 0; m < k_; ++m)
          if (l == 0 || m == 0) frozen_w_(unit_index(k_, l, i), unit_index(k_, m, j)) = true;
  }
  for (std::size_t j = 0; j < dh_; ++j) frozen_b_(unit_index(k_, 0, j)) = true;
  restore_frozen();
}

std::size_t RbmParams::free_parameter_count() const noexcept {
  return static_cast<std::size_t>((!frozen_w_).count() + (!frozen_a_).count() + (!frozen_b_).count());
}

bool RbmParams::frozen_constants_intact() const noexcept {
  for (std::size_t i = 0; i < dv_; ++i)
    for (std::size_t j = 0; j < dh_; ++j)
      for (int l = 0; l < k_; ++l)
        for (int m = 0; m < k_; ++m) {
          const Index r = unit_index(k_, l, i), c = unit_index(k_, m, j);
          if (frozen_w_(r, c) && weights_(r, c) != frozen_weight_value(l, m)) return false;
        }
  for (Index r = 0; r < visible_bias_.size(); ++r)
    if (frozen_a_(r) && visible_bias_(r) != 0.0) return false;
  for (Index c = 0; c < hidden_bias_.size(); ++c)
    if (frozen_b_(c) && hidden_bias_(c) != 0.0) return false;
  return true;
}

void RbmParams::restore_frozen() noexcept {
  for (std::size_t i = 0; i < dv_; ++i)
    for (std::size_t j = 0; j < dh_; ++j)
      for (int l = 0; l < k_; ++l)
        for (int m = 0; m < k_; ++m) {
          const Index r = unit_index(k_, l, i), c = unit_index(k_, m, j);
          if (frozen_w_(r, c)) weights_(r, c) = frozen_weight_value(l, m);
        }
  visible_bias_ = frozen_a_.select(VectorXd::Zero(visible_bias_.size()), visible_bias_);
  hidden_bias_ = frozen_b_.select(VectorXd::Zero(hidden_bias_.size()), hidden_bias_);
}

RbmGradients RbmGradients::zeros_like(const RbmParams& params) {
  return {MatrixXd::Zero(params.weights().rows(), params.weights().cols()),
          VectorXd::Zero(params.visible_bias().size()), VectorXd::Zero(params.hidden_bias().size())};
}

void RbmGradients::mask_frozen(const RbmParams& params) {
  weights = params.frozen_weights().select(MatrixXd::Zero(weights.rows(), weights.cols()), weights);
  visible_bias = params.frozen_visible_bias().select(VectorXd::Zero(visible_bias.size()), visible_bias);
  hidden_bias = params.frozen_hidden_bias().select(VectorXd::Zero(hidden_bias.size()), hidden_bias);
}

double energy(const RbmParams& params, const Eigen::Ref<const MatrixXd>& v, const Eigen::Ref<const MatrixXd>& h) {
  check_visible(params, v);
  check_hidden(params, h);
  const auto vf = flat(v);
  const auto hf = flat(h);
  return -(params.visible_bias().dot(vf) + params.hidden_bias().dot(hf) + vf.dot(params.weights() * hf));
}

MatrixXd cond_prob_hidden(const RbmParams& params, const Eigen::Ref<const MatrixXd>& v) {
  check_visible(params, v);
  MatrixXd logits = params.weights().transpose() * flat(v) + params.hidden_bias();
  block_softmax(logits, params.num_classes());
  return logits.reshaped(params.num_classes(), static_cast<Index>(params.hidden_units()));
}

MatrixXd cond_prob_visible(const RbmParams& params, const Eigen::Ref<const MatrixXd>& h) {
  check_hidden(params, h);
  MatrixXd logits = params.weights() * flat(h) + params.visible_bias();
  block_softmax(logits, params.num_classes());
  return logits.reshaped(params.num_classes(), static_cast<Index>(params.visible_units()));
}

double free_energy(const RbmParams& params, const Eigen::Ref<const MatrixXd>& v) {
  check_visible(params, v);
  require_single_hidden(params, "free_energy");
  const auto vf = flat(v);
  const VectorXd logits = params.weights().transpose() * vf + params.hidden_bias();
  return -params.visible_bias().dot(vf) - log_sum_exp(logits);
}

FreeEnergyBatch free_energy_batch(const RbmParams& params, const Eigen::Ref<const MatrixXd>& visible) {
  require_single_hidden(params, "free_energy_batch");
  if (visible.rows() != params.visible_bias().size()) throw ShapeMismatch("visible batch must have K*d_v rows");
  FreeEnergyBatch out;
  out.hidden_posterior = (params.weights().transpose() * visible).colwise() + params.hidden_bias();
  out.free_energy = -(visible.transpose() * params.visible_bias());
  for (Index c = 0; c < visible.cols(); ++c) {
    auto col = out.hidden_posterior.col(c);
    const double peak = col.maxCoeff();
    col = (col.array() - peak).exp().matrix();
    const double total = col.sum();
    out.free_energy(c) -= peak + std::log(total);
    col /= total;
  }
  return out;
}

void accumulate_free_energy_param_grads(const RbmParams& params, const Eigen::Ref<const MatrixXd>& visible,
                                        const FreeEnergyBatch& forward, double scale, RbmGradients& grads) {
  if (grads.weights.rows() != params.weights().rows() || grads.weights.cols() != params.weights().cols())
    throw ShapeMismatch("gradient buffers do not match the parameters");
  grads.visible_bias.noalias() -= scale * visible.rowwise().sum();
  grads.hidden_bias.noalias() -= scale * forward.hidden_posterior.rowwise().sum();
  grads.weights.noalias() -= scale * visible * forward.hidden_posterior.transpose();
}

MatrixXd free_energy_visible_grad(const RbmParams& params, const FreeEnergyBatch& forward) {
  MatrixXd grad = -(params.weights() * forward.hidden_posterior);
  grad.colwise() -= params.visible_bias();
  return grad;
}

DsParams irbm_to_ds(const RbmParams& params) {
  if (!params.identifiable()) throw InvalidArgument("irbm_to_ds requires identifiable RBM parameters");
  require_single_hidden(params, "irbm_to_ds");
  const int k = params.num_classes();
  const std::size_t d = params.visible_units();
  const auto ku = static_cast<std::size_t>(k);
  std::vector<double> psi(d * ku * ku);
  VectorXd z(k);
  for (std::size_t i = 0; i < d; ++i) {
    for (int m = 0; m < k; ++m) {
      for (int l = 0; l < k; ++l) z(l) = params.a(l, i) + params.w(l, m, i, 0);
      const double norm = log_sum_exp(z);
      for (int l = 0; l < k; ++l)
        psi[(i * ku + static_cast<std::size_t>(l)) * ku + static_cast<std::size_t>(m)] = std::exp(z(l) - norm);
    }
  }
  VectorXd log_prior = log_partition_per_class(params);
  for (int t = 0; t < k; ++t) log_prior(t) += params.b(t, 0);
  const double norm = log_sum_exp(log_prior);
  std::vector<double> pi(ku);
  for (int t = 0; t < k; ++t) pi[static_cast<std::size_t>(t)] = std::exp(log_prior(t) - norm);
  return {d, k, std::move(psi), std::move(pi)};
}

RbmParams ds_to_irbm(const DsParams& params) {
  const int k = params.num_classes();
  const std::size_t d = params.classifiers();
  for (double v : params.psi_data())
    if (!(v > 0.0)) throw NonPositiveProbability("ds_to_irbm needs every psi entry > 0");
  for (double v : params.pi_data())
    if (!(v > 0.0)) throw NonPositiveProbability("ds_to_irbm needs every pi entry > 0");

  RbmParams out(k, d, 1, true);
  const double anchor = RbmParams::frozen_weight_value(0, 0);
  for (std::size_t i = 0; i < d; ++i) {
    // Class 0 column: z(0) = w(0,0) = anchor and z(l) = a(l) for l >= 1.
    for (int l = 1; l < k; ++l) out.a(l, i) = std::log(params.psi(i, l, 0) / params.psi(i, 0, 0)) + anchor;
    // Other columns: z(0) = 0, so a(l) + w(l, m) is the log-odds against class 0.
    for (int m = 1; m < k; ++m)
      for (int l = 1; l < k; ++l)
        out.w(l, m, i, 0) = std::log(params.psi(i, l, m) / params.psi(i, 0, m)) - out.a(l, i);
  }
  const VectorXd log_s = log_partition_per_class(out);
  for (int t = 1; t < k; ++t)
    out.b(t, 0) = std::log(params.pi(t) / params.pi(0)) - (log_s(t) - log_s(0));
  return out;
}

MatrixXd irbm_posterior(const RbmParams& params, const OneHotBatch& batch) {
  require_single_hidden(params, "irbm_posterior");
  if (batch.num_classes() != params.num_classes() || batch.units() != params.visible_units())
    throw ShapeMismatch("batch shape does not match the iRBM");
  return free_energy_batch(params, batch.matrix()).hidden_posterior.transpose();
}

}  // namespace deem
