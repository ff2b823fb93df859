#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "deem/core_types.hpp"
#include "deem/ds_model.hpp"
#include "deem/trainer.hpp"

namespace deem {

double accuracy(const LabelVector& pred, const LabelVector& truth);

struct SubsetAccuracy {
  double value = 0.0;
  std::size_t subset_size = 0;
  bool empty_subset = false;
};

/// Accuracy over the samples where at least one classifier predicted the truth.
SubsetAccuracy accuracy_quality(const LabelVector& pred, const LabelVector& truth, const LabelMatrix& ensemble);

/// Accuracy over samples with mask[s] == keep.
SubsetAccuracy masked_accuracy(const LabelVector& pred, const LabelVector& truth, const std::vector<bool>& mask,
                               bool keep = true);

/// Plug-in mutual information (nats) from empirical co-occurrence counts.
double mutual_information_discrete(std::span<const int> u, std::span<const int> w);
double mutual_information_discrete(const LabelVector& u, const LabelVector& w);

/// d x d pairwise MI between the columns of `labels`.
Eigen::MatrixXd mutual_information_matrix(const LabelMatrix& labels);

/// Largest off-diagonal entry and off-diagonal Frobenius norm.
struct MiSummary {
  double max_off_diagonal = 0.0;
  double frobenius_off_diagonal = 0.0;
};
MiSummary summarize_mi(const Eigen::MatrixXd& mi);

struct MiClassEntry {
  int true_class = 0;
  std::size_t samples = 0;
  bool small_subset = false;  // fewer than 10 samples
  Eigen::MatrixXd mi;
  MiSummary summary;
};

struct MiLayerEntry {
  std::size_t layer = 0;  // 0 = model input, last = iRBM input
  std::vector<MiClassEntry> classes;
  double mean_max = 0.0;
  double mean_frobenius = 0.0;
};

struct MiReport {
  std::vector<MiLayerEntry> layers;
};

/// Per-unit argmax labels at every layer boundary (input first, iRBM input last).
std::vector<LabelMatrix> layer_argmax_labels(const DeemModel& model, const OneHotBatch& data);

/// Class-conditional MI matrices at each layer boundary.
MiReport mi_disentanglement_report(const DeemModel& model, const OneHotBatch& data, const LabelVector& truth);

struct RecoveryPair {
  std::string name;  // psi[i,l,m] or pi[t], 1-based
  double truth = 0.0;
  double recovered = 0.0;
};

struct RecoveryReport {
  std::vector<RecoveryPair> pairs;
  std::vector<int> alignment;  // recovered class used for each true class
  double correlation = 0.0;
  double max_abs_error = 0.0;
};

/// Maps `fitted` through irbm_to_ds, aligns its classes to `truth` by an
/// assignment on confusion-column distance, and pairs every psi and pi value.
RecoveryReport recovery_report(const DsParams& truth, const RbmParams& fitted);
RecoveryReport recovery_report(const DsParams& truth, const DsParams& recovered);

double pearson_correlation(std::span<const double> x, std::span<const double> y);

/// Bias-uncorrected Cramer's V of a contingency table over the observed categories.
double cramers_v(std::span<const int> u, std::span<const int> w);

/// Cramer's V between each classifier and `pred` on samples with mask[s] true
/// (empty mask = all samples).
std::vector<double> learner_importance(const LabelMatrix& ensemble, const LabelVector& pred,
                                       const std::vector<bool>& mask = {});
std::vector<double> learner_importance(const DeemModel& model, const OneHotBatch& data,
                                       const std::vector<bool>& mask = {});

struct TraceVerdict {
  std::vector<double> positive;
  std::vector<double> negative;
  std::vector<double> difference;
  bool positive_increasing = false;
  bool negative_increasing = false;
  bool difference_exploded = false;
  bool stable() const noexcept { return !positive_increasing && !negative_increasing && !difference_exploded; }
};

/// s_0 = x_0, s_t = alpha * s_{t-1} + (1 - alpha) * x_t.
std::vector<double> exponential_moving_average(std::span<const double> series, double alpha);

/// Least-squares slope of the series against its index.
double trend_slope(std::span<const double> series);

/// EMA smoothing plus the learning-rate screening flags.
TraceVerdict energy_trace_postprocess(const EnergyTrace& trace, double ema_alpha = 0.9);

}  // namespace deem
