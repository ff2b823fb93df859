#include "deem/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "deem/assignment.hpp"
#include "deem/errors.hpp"
#include "deem/rbm.hpp"

namespace deem {

namespace {

constexpr std::size_t kSmallSubset = 10;

void check_lengths(std::size_t a, std::size_t b, const char* what) {
  if (a != b) throw ShapeMismatch(std::string(what) + ": length " + std::to_string(a) + " vs " + std::to_string(b));
}

int category_count(std::span<const int> v) {
  int top = -1;
  for (int x : v) {
    if (x < 0) throw LabelOutOfRange("negative category");
    top = std::max(top, x);
  }
  return top + 1;
}

Eigen::MatrixXd contingency(std::span<const int> u, std::span<const int> w) {
  check_lengths(u.size(), w.size(), "contingency");
  Eigen::MatrixXd table = Eigen::MatrixXd::Zero(category_count(u), category_count(w));
  for (std::size_t s = 0; s < u.size(); ++s) table(u[s], w[s]) += 1.0;
  return table;
}

LabelMatrix column_argmax(const Eigen::MatrixXd& values, int k, std::size_t d) {
  const auto n = static_cast<std::size_t>(values.cols());
  std::vector<int> labels(n * d);
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t i = 0; i < d; ++i)
      labels[s * d + i] = argmax_first(values.col(static_cast<Eigen::Index>(s)).segment(unit_index(k, 0, i), k));
  return {n, d, k, std::move(labels)};
}

std::vector<double> with_initial(double initial, const std::vector<double>& series) {
  std::vector<double> out;
  out.reserve(series.size() + 1);
  out.push_back(initial);
  out.insert(out.end(), series.begin(), series.end());
  return out;
}

bool rising(const std::vector<double>& smoothed) {
  if (smoothed.size() < 2) return false;
  const double rise = smoothed.back() - smoothed.front();
  return trend_slope(smoothed) > 0.0 && rise > 0.02 * std::max(1.0, std::abs(smoothed.front()));
}

}  // namespace

double accuracy(const LabelVector& pred, const LabelVector& truth) {
  check_lengths(pred.size(), truth.size(), "accuracy");
  if (pred.size() == 0) return 0.0;
  std::size_t hits = 0;
  for (std::size_t s = 0; s < pred.size(); ++s) hits += pred[s] == truth[s];
  return static_cast<double>(hits) / static_cast<double>(pred.size());
}

SubsetAccuracy accuracy_quality(const LabelVector& pred, const LabelVector& truth, const LabelMatrix& ensemble) {
  check_lengths(pred.size(), truth.size(), "accuracy_quality");
  check_lengths(ensemble.samples(), truth.size(), "accuracy_quality");
  std::vector<bool> mask(truth.size());
  for (std::size_t s = 0; s < truth.size(); ++s) {
    const auto row = ensemble.row(s);
    mask[s] = std::find(row.begin(), row.end(), truth[s]) != row.end();
  }
  return masked_accuracy(pred, truth, mask, true);
}

SubsetAccuracy masked_accuracy(const LabelVector& pred, const LabelVector& truth, const std::vector<bool>& mask,
                               bool keep) {
  check_lengths(pred.size(), truth.size(), "masked_accuracy");
  check_lengths(mask.size(), truth.size(), "masked_accuracy");
  SubsetAccuracy out;
  std::size_t hits = 0;
  for (std::size_t s = 0; s < truth.size(); ++s) {
    if (mask[s] != keep) continue;
    ++out.subset_size;
    hits += pred[s] == truth[s];
  }
  out.empty_subset = out.subset_size == 0;
  out.value = out.empty_subset ? 0.0 : static_cast<double>(hits) / static_cast<double>(out.subset_size);
  return out;
}

double mutual_information_discrete(std::span<const int> u, std::span<const int> w) {
  if (u.empty()) {
    check_lengths(u.size(), w.size(), "mutual_information_discrete");
    return 0.0;
  }
  const Eigen::MatrixXd joint = contingency(u, w) / static_cast<double>(u.size());
  const Eigen::VectorXd pu = joint.rowwise().sum();
  const Eigen::RowVectorXd pw = joint.colwise().sum();
  double mi = 0.0;
  for (Eigen::Index a = 0; a < joint.rows(); ++a)
    for (Eigen::Index b = 0; b < joint.cols(); ++b)
      if (joint(a, b) > 0.0) mi += joint(a, b) * std::log(joint(a, b) / (pu(a) * pw(b)));
  return std::max(mi, 0.0);
}

double mutual_information_discrete(const LabelVector& u, const LabelVector& w) {
  return mutual_information_discrete(std::span<const int>(u.data()), std::span<const int>(w.data()));
}

Eigen::MatrixXd mutual_information_matrix(const LabelMatrix& labels) {
  const std::size_t d = labels.classifiers();
  std::vector<std::vector<int>> columns(d);
  for (std::size_t i = 0; i < d; ++i) columns[i] = labels.column(i);
  Eigen::MatrixXd mi(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i; j < d; ++j) {
      const double v = mutual_information_discrete(columns[i], columns[j]);
      mi(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
      mi(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = v;
    }
  return mi;
}

MiSummary summarize_mi(const Eigen::MatrixXd& mi) {
  MiSummary out;
  double sq = 0.0;
  for (Eigen::Index a = 0; a < mi.rows(); ++a)
    for (Eigen::Index b = 0; b < mi.cols(); ++b) {
      if (a == b) continue;
      out.max_off_diagonal = std::max(out.max_off_diagonal, mi(a, b));
      sq += mi(a, b) * mi(a, b);
    }
  out.frobenius_off_diagonal = std::sqrt(sq);
  return out;
}

std::vector<LabelMatrix> layer_argmax_labels(const DeemModel& model, const OneHotBatch& data) {
  const int k = model.num_classes();
  const std::size_t d = model.units();
  if (data.num_classes() != k || data.units() != d) throw ShapeMismatch("data shape does not match the model");
  const ForwardPass pass = model_forward(model, data.matrix());
  std::vector<LabelMatrix> out;
  out.push_back(decode_argmax(data));
  for (const LayerCache& cache : pass.caches) out.push_back(column_argmax(cache.output, k, d));
  return out;
}

MiReport mi_disentanglement_report(const DeemModel& model, const OneHotBatch& data, const LabelVector& truth) {
  check_lengths(truth.size(), data.samples(), "mi_disentanglement_report");
  const std::vector<LabelMatrix> layers = layer_argmax_labels(model, data);
  std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(truth.num_classes()));
  for (std::size_t s = 0; s < truth.size(); ++s) members[static_cast<std::size_t>(truth[s])].push_back(s);

  MiReport report;
  for (std::size_t layer = 0; layer < layers.size(); ++layer) {
    MiLayerEntry entry;
    entry.layer = layer;
    std::size_t counted = 0;
    for (std::size_t c = 0; c < members.size(); ++c) {
      MiClassEntry cls;
      cls.true_class = static_cast<int>(c);
      cls.samples = members[c].size();
      cls.small_subset = cls.samples < kSmallSubset;
      const auto d = static_cast<Eigen::Index>(layers[layer].classifiers());
      cls.mi = cls.samples == 0 ? Eigen::MatrixXd::Zero(d, d) : mutual_information_matrix(layers[layer].select_rows(members[c]));
      cls.summary = summarize_mi(cls.mi);
      if (cls.samples > 0) {
        entry.mean_max += cls.summary.max_off_diagonal;
        entry.mean_frobenius += cls.summary.frobenius_off_diagonal;
        ++counted;
      }
      entry.classes.push_back(std::move(cls));
    }
    if (counted > 0) {
      entry.mean_max /= static_cast<double>(counted);
      entry.mean_frobenius /= static_cast<double>(counted);
    }
    report.layers.push_back(std::move(entry));
  }
  return report;
}

RecoveryReport recovery_report(const DsParams& truth, const RbmParams& fitted) {
  return recovery_report(truth, irbm_to_ds(fitted));
}

RecoveryReport recovery_report(const DsParams& truth, const DsParams& recovered) {
  if (truth.classifiers() != recovered.classifiers() || truth.num_classes() != recovered.num_classes())
    throw ShapeMismatch("recovery_report: parameter shapes differ");
  const int k = truth.num_classes();
  const std::size_t d = truth.classifiers();
  Eigen::MatrixXd cost = Eigen::MatrixXd::Zero(k, k);
  for (int t = 0; t < k; ++t)
    for (int r = 0; r < k; ++r) {
      double c = std::abs(truth.pi(t) - recovered.pi(r));
      for (std::size_t i = 0; i < d; ++i)
        for (int l = 0; l < k; ++l) c += std::abs(truth.psi(i, l, t) - recovered.psi(i, l, r));
      cost(t, r) = c;
    }

  RecoveryReport out;
  out.alignment = solve_assignment(cost);
  const DsParams aligned = recovered.permute_classes(out.alignment);
  for (std::size_t i = 0; i < d; ++i)
    for (int l = 0; l < k; ++l)
      for (int m = 0; m < k; ++m)
        out.pairs.push_back({"psi[" + std::to_string(i + 1) + "," + std::to_string(l + 1) + "," + std::to_string(m + 1) + "]",
                             truth.psi(i, l, m), aligned.psi(i, l, m)});
  for (int t = 0; t < k; ++t) out.pairs.push_back({"pi[" + std::to_string(t + 1) + "]", truth.pi(t), aligned.pi(t)});

  std::vector<double> x, y;
  for (const RecoveryPair& p : out.pairs) {
    x.push_back(p.truth);
    y.push_back(p.recovered);
    out.max_abs_error = std::max(out.max_abs_error, std::abs(p.truth - p.recovered));
  }
  out.correlation = pearson_correlation(x, y);
  return out;
}

double pearson_correlation(std::span<const double> x, std::span<const double> y) {
  check_lengths(x.size(), y.size(), "pearson_correlation");
  if (x.size() < 2) return 0.0;
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

double cramers_v(std::span<const int> u, std::span<const int> w) {
  if (u.empty()) {
    check_lengths(u.size(), w.size(), "cramers_v");
    return 0.0;
  }
  const Eigen::MatrixXd raw = contingency(u, w);
  std::vector<Eigen::Index> rows, cols;
  for (Eigen::Index a = 0; a < raw.rows(); ++a)
    if (raw.row(a).sum() > 0.0) rows.push_back(a);
  for (Eigen::Index b = 0; b < raw.cols(); ++b)
    if (raw.col(b).sum() > 0.0) cols.push_back(b);
  const Eigen::MatrixXd table = raw(rows, cols);
  const auto q = std::min(table.rows(), table.cols());
  if (q < 2) return 0.0;
  const double n = static_cast<double>(u.size());
  const Eigen::VectorXd ru = table.rowwise().sum();
  const Eigen::RowVectorXd cw = table.colwise().sum();
  double chi2 = 0.0;
  for (Eigen::Index a = 0; a < table.rows(); ++a)
    for (Eigen::Index b = 0; b < table.cols(); ++b) {
      const double expected = ru(a) * cw(b) / n;
      const double diff = table(a, b) - expected;
      chi2 += diff * diff / expected;
    }
  return std::min(1.0, std::sqrt(chi2 / (n * static_cast<double>(q - 1))));
}

std::vector<double> learner_importance(const LabelMatrix& ensemble, const LabelVector& pred,
                                       const std::vector<bool>& mask) {
  check_lengths(pred.size(), ensemble.samples(), "learner_importance");
  if (!mask.empty()) check_lengths(mask.size(), ensemble.samples(), "learner_importance");
  std::vector<int> p;
  std::vector<std::size_t> keep;
  for (std::size_t s = 0; s < ensemble.samples(); ++s)
    if (mask.empty() || mask[s]) {
      keep.push_back(s);
      p.push_back(pred[s]);
    }
  std::vector<double> out(ensemble.classifiers());
  std::vector<int> column(keep.size());
  for (std::size_t i = 0; i < ensemble.classifiers(); ++i) {
    for (std::size_t j = 0; j < keep.size(); ++j) column[j] = ensemble(keep[j], i);
    out[i] = cramers_v(column, p);
  }
  return out;
}

std::vector<double> learner_importance(const DeemModel& model, const OneHotBatch& data, const std::vector<bool>& mask) {
  return learner_importance(decode_argmax(data), predict_latent(model, data), mask);
}

std::vector<double> exponential_moving_average(std::span<const double> series, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidArgument("ema alpha must lie in (0, 1)");
  std::vector<double> out(series.size());
  for (std::size_t t = 0; t < series.size(); ++t) out[t] = t == 0 ? series[0] : alpha * out[t - 1] + (1.0 - alpha) * series[t];
  return out;
}

double trend_slope(std::span<const double> series) {
  const std::size_t n = series.size();
  if (n < 2) return 0.0;
  const double mean_t = static_cast<double>(n - 1) / 2.0;
  const double mean_x = std::accumulate(series.begin(), series.end(), 0.0) / static_cast<double>(n);
  double num = 0.0, den = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    const double dt = static_cast<double>(t) - mean_t;
    num += dt * (series[t] - mean_x);
    den += dt * dt;
  }
  return num / den;
}

TraceVerdict energy_trace_postprocess(const EnergyTrace& trace, double ema_alpha) {
  TraceVerdict v;
  v.positive = exponential_moving_average(with_initial(trace.initial.positive, trace.positive), ema_alpha);
  v.negative = exponential_moving_average(with_initial(trace.initial.negative, trace.negative), ema_alpha);
  v.difference = exponential_moving_average(with_initial(trace.initial.difference, trace.difference), ema_alpha);
  v.positive_increasing = rising(v.positive);
  v.negative_increasing = rising(v.negative);
  const double floor = 0.01 * std::max(1.0, std::abs(trace.initial.positive));
  const double band = 2.5 * std::max(std::abs(trace.initial.difference), floor);
  const double last = v.difference.back();
  v.difference_exploded = !std::isfinite(last) || std::abs(last) > band;
  return v;
}

}  // namespace deem
