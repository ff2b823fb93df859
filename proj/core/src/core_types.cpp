#include "deem/core_types.hpp"

#include <cmath>
#include <string>

#include "deem/errors.hpp"

namespace deem {

namespace {

void check_label(int label, int num_classes, std::size_t where) {
  if (label < 0 || label >= num_classes) {
    throw LabelOutOfRange("label " + std::to_string(label + 1) + " at position " + std::to_string(where) +
                          " outside 1.." + std::to_string(num_classes));
  }
}

}  // namespace

LabelMatrix::LabelMatrix(std::size_t n, std::size_t d, int num_classes, std::vector<int> labels)
    : n_(n), d_(d), k_(num_classes), labels_(std::move(labels)) {
  if (n_ < 1 || d_ < 1) throw InvalidArgument("LabelMatrix needs n >= 1 and d >= 1");
  if (k_ < 2) throw InvalidArgument("LabelMatrix needs K >= 2");
  if (labels_.size() != n_ * d_) throw ShapeMismatch("LabelMatrix data size does not match n*d");
  for (std::size_t p = 0; p < labels_.size(); ++p) check_label(labels_[p], k_, p);
}

LabelMatrix LabelMatrix::from_one_based(std::size_t n, std::size_t d, int num_classes,
                                        const std::vector<int>& labels) {
  std::vector<int> zero_based(labels.size());
  for (std::size_t p = 0; p < labels.size(); ++p) zero_based[p] = labels[p] - 1;
  return {n, d, num_classes, std::move(zero_based)};
}

std::vector<int> LabelMatrix::column(std::size_t i) const {
  std::vector<int> out(n_);
  for (std::size_t s = 0; s < n_; ++s) out[s] = (*this)(s, i);
  return out;
}

LabelMatrix LabelMatrix::select_rows(std::span<const std::size_t> rows) const {
  std::vector<int> out;
  out.reserve(rows.size() * d_);
  for (std::size_t s : rows) {
    auto r = row(s);
    out.insert(out.end(), r.begin(), r.end());
  }
  return {rows.size(), d_, k_, std::move(out)};
}

LabelMatrix LabelMatrix::select_columns(std::span<const std::size_t> columns) const {
  std::vector<int> out;
  out.reserve(n_ * columns.size());
  for (std::size_t s = 0; s < n_; ++s)
    for (std::size_t i : columns) out.push_back((*this)(s, i));
  return {n_, columns.size(), k_, std::move(out)};
}

LabelVector::LabelVector(int num_classes, std::vector<int> labels) : k_(num_classes), labels_(std::move(labels)) {
  if (k_ < 2) throw InvalidArgument("LabelVector needs K >= 2");
  for (std::size_t p = 0; p < labels_.size(); ++p) check_label(labels_[p], k_, p);
}

LabelVector LabelVector::from_one_based(int num_classes, const std::vector<int>& labels) {
  std::vector<int> zero_based(labels.size());
  for (std::size_t p = 0; p < labels.size(); ++p) zero_based[p] = labels[p] - 1;
  return {num_classes, std::move(zero_based)};
}

LabelVector LabelVector::select(std::span<const std::size_t> rows) const {
  std::vector<int> out;
  out.reserve(rows.size());
  for (std::size_t s : rows) out.push_back(labels_[s]);
  return {k_, std::move(out)};
}

OneHotBatch::OneHotBatch(int num_classes, std::size_t d, Eigen::MatrixXd data)
    : k_(num_classes), d_(d), data_(std::move(data)), hard_(true) {
  if (k_ < 2 || d_ < 1) throw InvalidArgument("OneHotBatch needs K >= 2 and d >= 1");
  if (data_.rows() != static_cast<Eigen::Index>(k_) * static_cast<Eigen::Index>(d_))
    throw ShapeMismatch("OneHotBatch expects K*d rows");
  for (Eigen::Index s = 0; s < data_.cols(); ++s) {
    for (std::size_t i = 0; i < d_; ++i) {
      double sum = 0.0;
      for (int l = 0; l < k_; ++l) {
        const double v = data_(unit_index(k_, l, i), s);
        if (!(v >= 0.0 && v <= 1.0)) throw InvalidArgument("OneHotBatch entries must lie in [0, 1]");
        if (v != 0.0 && v != 1.0) hard_ = false;
        sum += v;
      }
      if (std::abs(sum - 1.0) > 1e-9)
        throw InvalidArgument("OneHotBatch column of sample " + std::to_string(s) + ", unit " +
                              std::to_string(i) + " does not sum to 1");
    }
  }
}

Eigen::Map<const Eigen::MatrixXd> OneHotBatch::sample(std::size_t s) const noexcept {
  return {data_.col(static_cast<Eigen::Index>(s)).data(), k_, static_cast<Eigen::Index>(d_)};
}

OneHotBatch OneHotBatch::select(std::span<const std::size_t> rows) const {
  Eigen::MatrixXd out(data_.rows(), static_cast<Eigen::Index>(rows.size()));
  for (std::size_t c = 0; c < rows.size(); ++c) out.col(static_cast<Eigen::Index>(c)) = data_.col(static_cast<Eigen::Index>(rows[c]));
  return {k_, d_, std::move(out)};
}

OneHotBatch encode_one_hot(const LabelMatrix& labels) {
  const int k = labels.num_classes();
  const std::size_t d = labels.classifiers();
  Eigen::MatrixXd data = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(k) * static_cast<Eigen::Index>(d),
                                               static_cast<Eigen::Index>(labels.samples()));
  for (std::size_t s = 0; s < labels.samples(); ++s)
    for (std::size_t i = 0; i < d; ++i) data(unit_index(k, labels(s, i), i), static_cast<Eigen::Index>(s)) = 1.0;
  return {k, d, std::move(data)};
}

LabelMatrix decode_argmax(const OneHotBatch& batch) {
  const int k = batch.num_classes();
  const std::size_t d = batch.units();
  std::vector<int> out(batch.samples() * d);
  for (std::size_t s = 0; s < batch.samples(); ++s) {
    const double* col = batch.matrix().col(static_cast<Eigen::Index>(s)).data();
    for (std::size_t i = 0; i < d; ++i)
      out[s * d + i] = argmax_first(std::span<const double>(col + unit_index(k, 0, i), static_cast<std::size_t>(k)));
  }
  return {batch.samples(), d, k, std::move(out)};
}

LabelVector majority_vote(const LabelMatrix& labels) {
  const int k = labels.num_classes();
  std::vector<int> out(labels.samples());
  std::vector<double> counts(static_cast<std::size_t>(k));
  for (std::size_t s = 0; s < labels.samples(); ++s) {
    std::fill(counts.begin(), counts.end(), 0.0);
    for (int label : labels.row(s)) counts[static_cast<std::size_t>(label)] += 1.0;
    out[s] = argmax_first(counts);
  }
  return {k, std::move(out)};
}

int argmax_first(std::span<const double> values) noexcept {
  int best = 0;
  for (std::size_t k = 1; k < values.size(); ++k)
    if (values[k] > values[static_cast<std::size_t>(best)]) best = static_cast<int>(k);
  return best;
}

int argmax_first(const Eigen::Ref<const Eigen::VectorXd>& values) noexcept {
  int best = 0;
  for (Eigen::Index k = 1; k < values.size(); ++k)
    if (values(k) > values(best)) best = static_cast<int>(k);
  return best;
}

void RunConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
    throw InvalidArgument("learning_rate must be a finite nonnegative number");
  if (batch_size < 1) throw InvalidArgument("batch_size must be positive");
  if (epochs < 1) throw InvalidArgument("epochs must be positive");
  if (sampler_steps < 1) throw InvalidArgument("sampler_steps must be positive");
  if (!(step_size_alpha > 0.0) || !std::isfinite(step_size_alpha))
    throw InvalidArgument("step_size_alpha must be positive");
  if (!(layer_noise_sigma >= 0.0)) throw InvalidArgument("layer_noise_sigma must be nonnegative");
  if (!(irbm_noise_sigma >= 0.0)) throw InvalidArgument("irbm_noise_sigma must be nonnegative");
}

}  // namespace deem
