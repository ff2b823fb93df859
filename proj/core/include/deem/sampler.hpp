#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "deem/rng.hpp"

namespace deem {

/// U (unnormalised log-probability) and dU/dx for every column of a
/// (K*d) x B batch of one-hot configurations.
struct EnergyEvaluation {
  Eigen::VectorXd log_prob;
  Eigen::MatrixXd grad;
};

/// Must be safe to call concurrently; the sampler only reads through it.
using EnergyFunction = std::function<EnergyEvaluation(const Eigen::MatrixXd& configs)>;

/// A batch of independent chains. Every column of `configs` is an exact one-hot K x d matrix.
struct ChainState {
  int num_classes = 0;
  std::size_t units = 0;
  Eigen::MatrixXd configs;
  Eigen::VectorXd log_prob;
  Eigen::MatrixXd grad;
};

ChainState make_chains(const EnergyFunction& target, int num_classes, std::size_t units, Eigen::MatrixXd configs);

/// Discrete Langevin proposal logits for one unit:
///   0.5 * (grad_k - grad_current) - ||e_k - e_current||^2 / (2 alpha).
Eigen::VectorXd dlp_proposal_logits(const Eigen::Ref<const Eigen::VectorXd>& grad, int current, double alpha);

/// log q(to | from) for a full configuration: sum over units of the log-softmax
/// proposal probability of to's class, with gradients taken at `from`.
double dlp_log_proposal(const Eigen::Ref<const Eigen::VectorXd>& from_grad, const Eigen::Ref<const Eigen::VectorXd>& from,
                        const Eigen::Ref<const Eigen::VectorXd>& to, int num_classes, double alpha);

/// One DMALA step for every chain: parallel per-unit proposals, then a
/// Metropolis-Hastings correction. Returns the number of accepted moves.
std::size_t dmala_step(const EnergyFunction& target, ChainState& state, double alpha, Rng& rng);

struct SamplerStats {
  std::size_t proposals = 0;
  std::size_t accepted = 0;
  double acceptance_rate() const noexcept {
    return proposals == 0 ? 0.0 : static_cast<double>(accepted) / static_cast<double>(proposals);
  }
};

/// Runs `steps` DMALA steps.
SamplerStats run_dmala(const EnergyFunction& target, ChainState& state, std::size_t steps, double alpha, Rng& rng);

/// Largest K^d the exact sampler will enumerate.
inline constexpr std::size_t kMaxEnumeration = 200000;

/// All K^d one-hot configurations as columns, unit 0 varying fastest.
Eigen::MatrixXd enumerate_configs(int num_classes, std::size_t units);

/// Column index of a one-hot configuration inside enumerate_configs.
std::size_t config_index(const Eigen::Ref<const Eigen::VectorXd>& config, int num_classes, std::size_t units);

/// Exact Boltzmann probabilities exp(U) / Z over enumerate_configs.
Eigen::VectorXd exact_distribution(const EnergyFunction& target, int num_classes, std::size_t units);

/// i.i.d. draws from the exact distribution, one configuration per column.
Eigen::MatrixXd exact_sampler(const EnergyFunction& target, int num_classes, std::size_t units, std::size_t count,
                              std::uint64_t seed);

}  // namespace deem
