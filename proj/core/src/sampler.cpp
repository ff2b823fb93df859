#include "deem/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "deem/core_types.hpp"
#include "deem/errors.hpp"

namespace deem {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

int active_class(const double* unit, int k) {
  for (int l = 0; l < k; ++l)
    if (unit[l] == 1.0) return l;
  throw InvalidArgument("chain configuration is not one-hot");
}

// Log-softmax of the DLP logits for one unit, written into `out` (length K).
void unit_log_proposal(const double* grad, int current, double alpha, int k, double* out) {
  const double move_penalty = 1.0 / alpha;  // ||e_k - e_cur||^2 = 2
  double peak = -std::numeric_limits<double>::infinity();
  for (int l = 0; l < k; ++l) {
    out[l] = 0.5 * (grad[l] - grad[current]) - (l == current ? 0.0 : move_penalty);
    peak = std::max(peak, out[l]);
  }
  double total = 0.0;
  for (int l = 0; l < k; ++l) total += std::exp(out[l] - peak);
  const double norm = peak + std::log(total);
  for (int l = 0; l < k; ++l) out[l] -= norm;
}

void check_state(const ChainState& state) {
  const Index rows = static_cast<Index>(state.num_classes) * static_cast<Index>(state.units);
  if (state.configs.rows() != rows || state.grad.rows() != rows || state.grad.cols() != state.configs.cols() ||
      state.log_prob.size() != state.configs.cols())
    throw ShapeMismatch("chain state arrays disagree in shape");
}

}  // namespace

ChainState make_chains(const EnergyFunction& target, int num_classes, std::size_t units, MatrixXd configs) {
  if (configs.rows() != static_cast<Index>(num_classes) * static_cast<Index>(units))
    throw ShapeMismatch("chain configurations must have K*d rows");
  for (Index c = 0; c < configs.cols(); ++c)
    for (std::size_t i = 0; i < units; ++i) active_class(configs.col(c).data() + unit_index(num_classes, 0, i), num_classes);
  EnergyEvaluation eval = target(configs);
  return {num_classes, units, std::move(configs), std::move(eval.log_prob), std::move(eval.grad)};
}

VectorXd dlp_proposal_logits(const Eigen::Ref<const VectorXd>& grad, int current, double alpha) {
  if (!(alpha > 0.0)) throw InvalidArgument("alpha must be positive");
  VectorXd logits(grad.size());
  for (Index l = 0; l < grad.size(); ++l) {
    const double distance = (l == current) ? 0.0 : 2.0;
    logits(l) = 0.5 * (grad(l) - grad(current)) - distance / (2.0 * alpha);
  }
  return logits;
}

double dlp_log_proposal(const Eigen::Ref<const VectorXd>& from_grad, const Eigen::Ref<const VectorXd>& from,
                        const Eigen::Ref<const VectorXd>& to, int num_classes, double alpha) {
  const Index units = from.size() / num_classes;
  std::vector<double> logq(static_cast<std::size_t>(num_classes));
  double total = 0.0;
  for (Index i = 0; i < units; ++i) {
    const Index off = i * num_classes;
    const int current = active_class(from.data() + off, num_classes);
    const int next = active_class(to.data() + off, num_classes);
    unit_log_proposal(from_grad.data() + off, current, alpha, num_classes, logq.data());
    total += logq[static_cast<std::size_t>(next)];
  }
  return total;
}

std::size_t dmala_step(const EnergyFunction& target, ChainState& state, double alpha, Rng& rng) {
  if (!(alpha > 0.0)) throw InvalidArgument("alpha must be positive");
  check_state(state);
  const int k = state.num_classes;
  const auto ku = static_cast<std::size_t>(k);
  const Index chains = state.configs.cols();
  const Index rows = state.configs.rows();

  MatrixXd proposal = MatrixXd::Zero(rows, chains);
  VectorXd log_forward = VectorXd::Zero(chains);
  std::vector<double> logq(ku), probs(ku);

  for (Index c = 0; c < chains; ++c) {
    for (std::size_t i = 0; i < state.units; ++i) {
      const Index off = unit_index(k, 0, i);
      const int cur = active_class(state.configs.col(c).data() + off, k);
      unit_log_proposal(state.grad.col(c).data() + off, cur, alpha, k, logq.data());
      for (std::size_t l = 0; l < ku; ++l) probs[l] = std::exp(logq[l]);
      const int next = rng.categorical(probs);
      proposal(off + next, c) = 1.0;
      log_forward(c) += logq[static_cast<std::size_t>(next)];
    }
  }

  EnergyEvaluation at_proposal = target(proposal);
  std::size_t accepted = 0;
  for (Index c = 0; c < chains; ++c) {
    double log_reverse = 0.0;
    for (std::size_t i = 0; i < state.units; ++i) {
      const Index off = unit_index(k, 0, i);
      const int from = active_class(proposal.col(c).data() + off, k);
      const int back = active_class(state.configs.col(c).data() + off, k);
      unit_log_proposal(at_proposal.grad.col(c).data() + off, from, alpha, k, logq.data());
      log_reverse += logq[static_cast<std::size_t>(back)];
    }
    const double log_accept = at_proposal.log_prob(c) - state.log_prob(c) + log_reverse - log_forward(c);
    const double u = rng.uniform();
    if (log_accept >= 0.0 || std::log(u) < log_accept) {
      state.configs.col(c) = proposal.col(c);
      state.log_prob(c) = at_proposal.log_prob(c);
      state.grad.col(c) = at_proposal.grad.col(c);
      ++accepted;
    }
  }
  return accepted;
}

SamplerStats run_dmala(const EnergyFunction& target, ChainState& state, std::size_t steps, double alpha, Rng& rng) {
  SamplerStats stats;
  for (std::size_t t = 0; t < steps; ++t) {
    stats.accepted += dmala_step(target, state, alpha, rng);
    stats.proposals += static_cast<std::size_t>(state.configs.cols());
  }
  return stats;
}

namespace {

std::size_t enumeration_size(int num_classes, std::size_t units) {
  std::size_t total = 1;
  for (std::size_t i = 0; i < units; ++i) {
    total *= static_cast<std::size_t>(num_classes);
    if (total > kMaxEnumeration)
      throw EnumerationTooLarge("K^d exceeds the enumeration budget of " + std::to_string(kMaxEnumeration));
  }
  return total;
}

}  // namespace

MatrixXd enumerate_configs(int num_classes, std::size_t units) {
  const std::size_t total = enumeration_size(num_classes, units);
  MatrixXd configs = MatrixXd::Zero(static_cast<Index>(num_classes) * static_cast<Index>(units), static_cast<Index>(total));
  for (std::size_t c = 0; c < total; ++c) {
    std::size_t rest = c;
    for (std::size_t i = 0; i < units; ++i) {
      const int l = static_cast<int>(rest % static_cast<std::size_t>(num_classes));
      rest /= static_cast<std::size_t>(num_classes);
      configs(unit_index(num_classes, l, i), static_cast<Index>(c)) = 1.0;
    }
  }
  return configs;
}

std::size_t config_index(const Eigen::Ref<const VectorXd>& config, int num_classes, std::size_t units) {
  std::size_t index = 0;
  std::size_t stride = 1;
  for (std::size_t i = 0; i < units; ++i) {
    index += stride * static_cast<std::size_t>(active_class(config.data() + unit_index(num_classes, 0, i), num_classes));
    stride *= static_cast<std::size_t>(num_classes);
  }
  return index;
}

VectorXd exact_distribution(const EnergyFunction& target, int num_classes, std::size_t units) {
  const MatrixXd configs = enumerate_configs(num_classes, units);
  VectorXd log_prob = target(configs).log_prob;
  const double peak = log_prob.maxCoeff();
  VectorXd probs = (log_prob.array() - peak).exp().matrix();
  probs /= probs.sum();
  return probs;
}

MatrixXd exact_sampler(const EnergyFunction& target, int num_classes, std::size_t units, std::size_t count,
                       std::uint64_t seed) {
  const MatrixXd configs = enumerate_configs(num_classes, units);
  const VectorXd probs = exact_distribution(target, num_classes, units);
  std::vector<double> cumulative(static_cast<std::size_t>(probs.size()));
  double running = 0.0;
  for (Index c = 0; c < probs.size(); ++c) cumulative[static_cast<std::size_t>(c)] = (running += probs(c));
  Rng rng(seed, "exact_sampler");
  MatrixXd out(configs.rows(), static_cast<Index>(count));
  for (std::size_t s = 0; s < count; ++s) {
    const double u = rng.uniform() * running;
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    const auto c = std::min<std::size_t>(static_cast<std::size_t>(it - cumulative.begin()), cumulative.size() - 1);
    out.col(static_cast<Index>(s)) = configs.col(static_cast<Index>(c));
  }
  return out;
}

}  // namespace deem
