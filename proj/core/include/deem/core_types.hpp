#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace deem {

// Labels are stored 0-based. Everything that crosses a file or CLI boundary
// is 1-based; conversion happens in the datasets/serialization layer.

/// n x d matrix of hard predictions, one row per sample, one column per classifier.
class LabelMatrix {
 public:
  LabelMatrix(std::size_t n, std::size_t d, int num_classes, std::vector<int> labels);

  /// Builds from 1-based labels as they appear in files.
  static LabelMatrix from_one_based(std::size_t n, std::size_t d, int num_classes,
                                    const std::vector<int>& labels);

  std::size_t samples() const noexcept { return n_; }
  std::size_t classifiers() const noexcept { return d_; }
  int num_classes() const noexcept { return k_; }

  int operator()(std::size_t s, std::size_t i) const noexcept { return labels_[s * d_ + i]; }
  std::span<const int> row(std::size_t s) const noexcept { return {labels_.data() + s * d_, d_}; }
  std::vector<int> column(std::size_t i) const;
  const std::vector<int>& data() const noexcept { return labels_; }

  /// Keeps the listed rows, in order.
  LabelMatrix select_rows(std::span<const std::size_t> rows) const;
  /// Keeps the listed columns, in order.
  LabelMatrix select_columns(std::span<const std::size_t> columns) const;

  friend bool operator==(const LabelMatrix&, const LabelMatrix&) = default;

 private:
  std::size_t n_;
  std::size_t d_;
  int k_;
  std::vector<int> labels_;
};

/// One label per sample (ground truth or a consensus prediction).
class LabelVector {
 public:
  LabelVector(int num_classes, std::vector<int> labels);
  static LabelVector from_one_based(int num_classes, const std::vector<int>& labels);

  std::size_t size() const noexcept { return labels_.size(); }
  int num_classes() const noexcept { return k_; }
  int operator[](std::size_t s) const noexcept { return labels_[s]; }
  const std::vector<int>& data() const noexcept { return labels_; }

  LabelVector select(std::span<const std::size_t> rows) const;

  friend bool operator==(const LabelVector&, const LabelVector&) = default;

 private:
  int k_;
  std::vector<int> labels_;
};

/// Flat index of class l of unit i inside a K x d sample matrix stored
/// column-major (each unit's K-vector is contiguous).
inline Eigen::Index unit_index(int num_classes, int l, std::size_t i) noexcept {
  return static_cast<Eigen::Index>(l) + static_cast<Eigen::Index>(num_classes) * static_cast<Eigen::Index>(i);
}

/// n samples, each a K x d matrix whose columns lie on the probability simplex.
///
/// Storage is a (K*d) x n Eigen matrix: column s is sample s flattened
/// column-major, so entry (l, i) of the sample sits at row l + K*i.
class OneHotBatch {
 public:
  OneHotBatch(int num_classes, std::size_t d, Eigen::MatrixXd data);

  std::size_t samples() const noexcept { return static_cast<std::size_t>(data_.cols()); }
  std::size_t units() const noexcept { return d_; }
  int num_classes() const noexcept { return k_; }

  const Eigen::MatrixXd& matrix() const noexcept { return data_; }
  double operator()(std::size_t s, int l, std::size_t i) const noexcept {
    return data_(unit_index(k_, l, i), static_cast<Eigen::Index>(s));
  }
  /// K x d view of one sample.
  Eigen::Map<const Eigen::MatrixXd> sample(std::size_t s) const noexcept;

  /// True when every column entry is exactly 0 or 1.
  bool is_hard() const noexcept { return hard_; }

  OneHotBatch select(std::span<const std::size_t> rows) const;

 private:
  int k_;
  std::size_t d_;
  Eigen::MatrixXd data_;
  bool hard_;
};

OneHotBatch encode_one_hot(const LabelMatrix& labels);

/// Per-unit argmax, ties to the smallest class index.
LabelMatrix decode_argmax(const OneHotBatch& batch);

/// Per-sample plurality label, ties to the smallest class index.
LabelVector majority_vote(const LabelMatrix& labels);

/// Index of the largest entry; the first one wins on ties.
int argmax_first(std::span<const double> values) noexcept;
int argmax_first(const Eigen::Ref<const Eigen::VectorXd>& values) noexcept;

struct RunConfig {
  std::uint64_t seed = 0;
  double learning_rate = 0.05;
  std::size_t batch_size = 1024;
  std::size_t epochs = 100;
  std::size_t sampler_steps = 5;
  double step_size_alpha = 0.5;
  double layer_noise_sigma = 0.005;
  double irbm_noise_sigma = 0.01;
  std::size_t num_layers = 1;
  bool persistent_chains = false;

  /// Throws InvalidArgument naming the first violated constraint.
  void validate() const;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

}  // namespace deem
