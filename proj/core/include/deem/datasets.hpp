#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "deem/core_types.hpp"
#include "deem/ds_model.hpp"

namespace deem {

struct CondIndData {
  LabelMatrix labels;
  LabelVector truth;
  DsParams params;
};

/// K = 3. The first `informative` classifiers have diagonal confusion entries
/// drawn from U[(K-1)/K, 1] with the rest of each column split evenly; the
/// others guess uniformly.
CondIndData gen_cond_ind(std::size_t n, std::uint64_t seed, std::size_t d = 10, std::size_t informative = 4);

struct Tree3kData {
  LabelMatrix labels;         // the 12 leaves
  LabelVector truth;
  LabelMatrix intermediates;  // the 3 hidden parent nodes, for analysis
  /// Column-stochastic K x K transition per node: 3 intermediates then 12 leaves.
  std::vector<Eigen::MatrixXd> transitions;
};

/// Label tree [1, 3, 4]: Y -> 3 intermediate nodes -> 4 leaves each.
Tree3kData gen_tree3k(std::size_t n, std::uint64_t seed);

struct AmpData {
  LabelMatrix labels;
  LabelVector truth;
  std::vector<bool> expert_mask;  // truth in the oracle's specialty
  std::vector<double> accuracies; // per general classifier, on its strong classes
};

/// K = 5, d = 6: five classifiers ~91% accurate on classes 3-5 and uniform on
/// 1-2; the sixth an oracle on 1-2 and uniform on 3-5.
AmpData gen_amp_data(std::size_t n, std::uint64_t seed);

/// Makes `column` an oracle on every sample whose truth lies in `classes` (0-based).
LabelMatrix inject_expert(const LabelMatrix& labels, const LabelVector& truth, std::size_t column,
                          const std::vector<int>& classes);

// CSV I/O. Files hold 1-based labels; header clf_1..clf_d with optional trailing `label`.

struct PredictionTable {
  LabelMatrix labels;
  std::optional<LabelVector> truth;
};

/// `num_classes` <= 0 infers K as the largest label seen (ground truth included).
PredictionTable load_predictions_csv(const std::filesystem::path& path, int num_classes = 0);
void save_predictions_csv(const std::filesystem::path& path, const LabelMatrix& labels,
                          const std::optional<LabelVector>& truth = std::nullopt);

/// Soft predictions: d*K columns clf_i_class_k, each consecutive K-block a simplex vector.
OneHotBatch load_soft_predictions_csv(const std::filesystem::path& path, int num_classes);
void save_soft_predictions_csv(const std::filesystem::path& path, const OneHotBatch& batch);

/// Single-column `label` file (or a prediction file with a `label` column).
LabelVector load_labels_csv(const std::filesystem::path& path, int num_classes = 0);
void save_labels_csv(const std::filesystem::path& path, const LabelVector& labels);

/// Single-column 0/1 `expert` file.
std::vector<bool> load_mask_csv(const std::filesystem::path& path);
void save_mask_csv(const std::filesystem::path& path, const std::vector<bool>& mask);

}  // namespace deem
