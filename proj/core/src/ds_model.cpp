#include "deem/ds_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "deem/errors.hpp"
#include "deem/rng.hpp"

namespace deem {

namespace {

constexpr double kSumTolerance = 1e-9;

double log_sum_exp(std::span<const double> values) {
  const double peak = *std::max_element(values.begin(), values.end());
  if (peak == -std::numeric_limits<double>::infinity()) return peak;
  double total = 0.0;
  for (double v : values) total += std::exp(v - peak);
  return peak + std::log(total);
}

void check_row(const DsParams& params, std::span<const int> x) {
  if (x.size() != params.classifiers()) throw ShapeMismatch("observation length does not match d");
  for (int label : x)
    if (label < 0 || label >= params.num_classes()) throw LabelOutOfRange("observation label outside 1..K");
}

// Per-sample log joint over classes, using precomputed log tables.
struct LogTables {
  std::vector<double> log_psi;
  std::vector<double> log_pi;

  explicit LogTables(const DsParams& p) : log_psi(p.psi_data().size()), log_pi(p.pi_data().size()) {
    std::transform(p.psi_data().begin(), p.psi_data().end(), log_psi.begin(), [](double v) { return std::log(v); });
    std::transform(p.pi_data().begin(), p.pi_data().end(), log_pi.begin(), [](double v) { return std::log(v); });
  }
};

void log_joint_row(const DsParams& p, const LogTables& tables, std::span<const int> x, std::span<double> out) {
  for (int m = 0; m < p.num_classes(); ++m) {
    double acc = tables.log_pi[static_cast<std::size_t>(m)];
    for (std::size_t i = 0; i < x.size(); ++i) acc += tables.log_psi[p.index(i, x[i], m)];
    out[static_cast<std::size_t>(m)] = acc;
  }
}

// M-step from per-sample class responsibilities (n x K, row-major).
DsParams m_step(const LabelMatrix& labels, const std::vector<double>& resp, double pseudo_count) {
  const std::size_t n = labels.samples();
  const std::size_t d = labels.classifiers();
  const int k = labels.num_classes();
  const auto ku = static_cast<std::size_t>(k);
  std::vector<double> psi(d * ku * ku, pseudo_count);
  std::vector<double> class_mass(ku, 0.0);
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t m = 0; m < ku; ++m) {
      const double r = resp[s * ku + m];
      if (r == 0.0) continue;
      class_mass[m] += r;
      for (std::size_t i = 0; i < d; ++i)
        psi[(i * ku + static_cast<std::size_t>(labels(s, i))) * ku + m] += r;
    }
  }
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t m = 0; m < ku; ++m) {
      double column = 0.0;
      for (std::size_t l = 0; l < ku; ++l) column += psi[(i * ku + l) * ku + m];
      for (std::size_t l = 0; l < ku; ++l) {
        double& entry = psi[(i * ku + l) * ku + m];
        entry = column > 0.0 ? entry / column : 1.0 / static_cast<double>(k);
      }
    }
  }
  std::vector<double> pi(ku);
  const double total = static_cast<double>(n) + pseudo_count * static_cast<double>(k);
  for (std::size_t m = 0; m < ku; ++m) pi[m] = (class_mass[m] + pseudo_count) / total;
  return {d, k, std::move(psi), std::move(pi)};
}

}  // namespace

DsParams::DsParams(std::size_t d, int num_classes, std::vector<double> psi, std::vector<double> pi)
    : d_(d), k_(num_classes), psi_(std::move(psi)), pi_(std::move(pi)) {
  if (d_ < 1 || k_ < 2) throw InvalidArgument("DsParams needs d >= 1 and K >= 2");
  const auto ku = static_cast<std::size_t>(k_);
  if (psi_.size() != d_ * ku * ku || pi_.size() != ku) throw ShapeMismatch("DsParams arrays do not match (d, K)");
  for (std::size_t i = 0; i < d_; ++i) {
    for (int m = 0; m < k_; ++m) {
      double column = 0.0;
      for (int l = 0; l < k_; ++l) {
        const double v = psi_[index(i, l, m)];
        if (!(v >= 0.0)) throw InvalidArgument("psi entries must be nonnegative");
        column += v;
      }
      if (std::abs(column - 1.0) > kSumTolerance)
        throw InvalidArgument("psi column (classifier " + std::to_string(i + 1) + ", class " + std::to_string(m + 1) +
                              ") does not sum to 1");
    }
  }
  double total = 0.0;
  for (double v : pi_) {
    if (!(v >= 0.0)) throw InvalidArgument("pi entries must be nonnegative");
    total += v;
  }
  if (std::abs(total - 1.0) > kSumTolerance) throw InvalidArgument("pi does not sum to 1");
}

DsParams DsParams::uniform(std::size_t d, int num_classes) {
  const auto ku = static_cast<std::size_t>(num_classes);
  const double p = 1.0 / static_cast<double>(num_classes);
  return {d, num_classes, std::vector<double>(d * ku * ku, p), std::vector<double>(ku, p)};
}

std::size_t DsParams::free_parameter_count() const noexcept {
  const auto km1 = static_cast<std::size_t>(k_ - 1);
  return d_ * static_cast<std::size_t>(k_) * km1 + km1;
}

DsParams DsParams::permute_classes(const std::vector<int>& perm) const {
  std::vector<double> psi(psi_.size());
  std::vector<double> pi(pi_.size());
  for (int m = 0; m < k_; ++m) {
    const int src = perm[static_cast<std::size_t>(m)];
    pi[static_cast<std::size_t>(m)] = pi_[static_cast<std::size_t>(src)];
    for (std::size_t i = 0; i < d_; ++i)
      for (int l = 0; l < k_; ++l) psi[index(i, l, m)] = psi_[index(i, l, src)];
  }
  return {d_, k_, std::move(psi), std::move(pi)};
}

double ds_joint_prob(const DsParams& params, std::span<const int> x, int y) {
  check_row(params, x);
  if (y < 0 || y >= params.num_classes()) throw LabelOutOfRange("class outside 1..K");
  double p = params.pi(y);
  for (std::size_t i = 0; i < x.size(); ++i) p *= params.psi(i, x[i], y);
  return p;
}

std::vector<double> ds_posterior(const DsParams& params, std::span<const int> x) {
  check_row(params, x);
  const int k = params.num_classes();
  std::vector<double> post(static_cast<std::size_t>(k));
  // Log domain: products of many small confusions underflow quickly.
  for (int m = 0; m < k; ++m) {
    double acc = std::log(params.pi(m));
    for (std::size_t i = 0; i < x.size(); ++i) acc += std::log(params.psi(i, x[i], m));
    post[static_cast<std::size_t>(m)] = acc;
  }
  const double norm = log_sum_exp(post);
  if (!std::isfinite(norm)) throw AllZeroLikelihood("observation has zero likelihood under every class");
  for (double& v : post) v = std::exp(v - norm);
  return post;
}

LabeledSample ds_sample(const DsParams& params, std::size_t n, std::uint64_t seed) {
  if (n < 1) throw InvalidArgument("ds_sample needs n >= 1");
  Rng rng(seed, "ds_sample");
  const std::size_t d = params.classifiers();
  const int k = params.num_classes();
  std::vector<int> labels(n * d);
  std::vector<int> truth(n);
  std::vector<double> column(static_cast<std::size_t>(k));
  for (std::size_t s = 0; s < n; ++s) {
    const int y = rng.categorical(params.pi_data());
    truth[s] = y;
    for (std::size_t i = 0; i < d; ++i) {
      for (int l = 0; l < k; ++l) column[static_cast<std::size_t>(l)] = params.psi(i, l, y);
      labels[s * d + i] = rng.categorical(column);
    }
  }
  return {LabelMatrix(n, d, k, std::move(labels)), LabelVector(k, std::move(truth))};
}

double ds_mean_log_likelihood(const DsParams& params, const LabelMatrix& labels) {
  const LogTables tables(params);
  std::vector<double> joint(static_cast<std::size_t>(params.num_classes()));
  double total = 0.0;
  for (std::size_t s = 0; s < labels.samples(); ++s) {
    log_joint_row(params, tables, labels.row(s), joint);
    total += log_sum_exp(joint);
  }
  return total / static_cast<double>(labels.samples());
}

EmResult ds_fit_em(const LabelMatrix& labels, const EmOptions& options) {
  if (options.max_iters < 1) throw InvalidArgument("max_iters must be >= 1");
  if (!(options.tol > 0.0)) throw InvalidArgument("tol must be positive");
  const std::size_t n = labels.samples();
  const int k = labels.num_classes();
  const auto ku = static_cast<std::size_t>(k);

  std::vector<double> resp(n * ku, 0.0);
  const LabelVector mv = majority_vote(labels);
  for (std::size_t s = 0; s < n; ++s) resp[s * ku + static_cast<std::size_t>(mv[s])] = 1.0;
  DsParams params = m_step(labels, resp, options.init_pseudo_count);

  EmResult result{params, {}, 0, false};
  std::vector<double> joint(ku);
  for (;;) {
    // E-step, also yielding the log-likelihood of the current params.
    const LogTables tables(params);
    double total = 0.0;
    for (std::size_t s = 0; s < n; ++s) {
      log_joint_row(params, tables, labels.row(s), joint);
      const double norm = log_sum_exp(joint);
      total += norm;
      for (std::size_t m = 0; m < ku; ++m) resp[s * ku + m] = std::exp(joint[m] - norm);
    }
    result.log_likelihood.push_back(total / static_cast<double>(n));
    const std::size_t steps = result.log_likelihood.size();
    if (steps >= 2 && result.log_likelihood[steps - 1] - result.log_likelihood[steps - 2] < options.tol) {
      result.converged = true;
      break;
    }
    if (result.iterations == options.max_iters) break;
    params = m_step(labels, resp, 0.0);
    ++result.iterations;
  }
  result.params = std::move(params);
  return result;
}

LabelVector ds_predict(const DsParams& params, const LabelMatrix& labels) {
  if (labels.classifiers() != params.classifiers() || labels.num_classes() != params.num_classes())
    throw ShapeMismatch("label matrix shape does not match DsParams");
  const LogTables tables(params);
  std::vector<double> joint(static_cast<std::size_t>(params.num_classes()));
  std::vector<int> out(labels.samples());
  for (std::size_t s = 0; s < labels.samples(); ++s) {
    log_joint_row(params, tables, labels.row(s), joint);
    if (!std::isfinite(log_sum_exp(joint)))
      throw AllZeroLikelihood("sample " + std::to_string(s + 1) + " has zero likelihood under every class");
    out[s] = argmax_first(joint);
  }
  return {params.num_classes(), std::move(out)};
}

DsParams empirical_ds_params(const LabelMatrix& labels, const LabelVector& truth) {
  if (truth.size() != labels.samples()) throw ShapeMismatch("truth length does not match sample count");
  const std::size_t n = labels.samples();
  const auto ku = static_cast<std::size_t>(labels.num_classes());
  std::vector<double> resp(n * ku, 0.0);
  for (std::size_t s = 0; s < n; ++s) resp[s * ku + static_cast<std::size_t>(truth[s])] = 1.0;
  return m_step(labels, resp, 0.0);
}

}  // namespace deem
