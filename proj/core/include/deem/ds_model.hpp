#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "deem/core_types.hpp"

namespace deem {

/// Dawid-Skene parameters: per-classifier confusion psi(i, l, m) = Pr(X_i = l | Y = m)
/// and class prior pi(t) = Pr(Y = t).
class DsParams {
 public:
  DsParams(std::size_t d, int num_classes, std::vector<double> psi, std::vector<double> pi);

  /// Every classifier uninformative (psi = 1/K), uniform prior.
  static DsParams uniform(std::size_t d, int num_classes);

  std::size_t classifiers() const noexcept { return d_; }
  int num_classes() const noexcept { return k_; }

  double psi(std::size_t i, int l, int m) const noexcept { return psi_[index(i, l, m)]; }
  double pi(int t) const noexcept { return pi_[static_cast<std::size_t>(t)]; }
  const std::vector<double>& psi_data() const noexcept { return psi_; }
  const std::vector<double>& pi_data() const noexcept { return pi_; }

  /// d*K*(K-1) + (K-1): the row-sum constraints remove one entry per column.
  std::size_t free_parameter_count() const noexcept;

  /// Relabels hidden classes: the result's class m is this model's class perm[m].
  DsParams permute_classes(const std::vector<int>& perm) const;

  std::size_t index(std::size_t i, int l, int m) const noexcept {
    return (i * static_cast<std::size_t>(k_) + static_cast<std::size_t>(l)) * static_cast<std::size_t>(k_) +
           static_cast<std::size_t>(m);
  }

 private:
  std::size_t d_;
  int k_;
  std::vector<double> psi_;
  std::vector<double> pi_;
};

double ds_joint_prob(const DsParams& params, std::span<const int> x, int y);

/// Pr(Y = . | X = x). Throws AllZeroLikelihood when no class explains x.
std::vector<double> ds_posterior(const DsParams& params, std::span<const int> x);

struct LabeledSample {
  LabelMatrix labels;
  LabelVector truth;
};

LabeledSample ds_sample(const DsParams& params, std::size_t n, std::uint64_t seed);

/// Mean per-sample observed-data log-likelihood.
double ds_mean_log_likelihood(const DsParams& params, const LabelMatrix& labels);

struct EmOptions {
  std::size_t max_iters = 100;
  double tol = 1e-6;
  double init_pseudo_count = 1.0;
};

struct EmResult {
  DsParams params;
  /// Mean log-likelihood after initialisation and after every EM iteration.
  std::vector<double> log_likelihood;
  std::size_t iterations = 0;
  bool converged = false;
};

/// EM from majority-vote hard assignments (smoothed by `init_pseudo_count`),
/// alternating exact E- and M-steps until the mean log-likelihood gain drops below tol.
EmResult ds_fit_em(const LabelMatrix& labels, const EmOptions& options = {});

LabelVector ds_predict(const DsParams& params, const LabelMatrix& labels);

/// Empirical confusion counts normalised per true class (columns of each
/// classifier's K x K block). Classes absent from `truth` get uniform columns.
DsParams empirical_ds_params(const LabelMatrix& labels, const LabelVector& truth);

}  // namespace deem
