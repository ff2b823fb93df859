#pragma once

#include <vector>

#include <Eigen/Dense>

#include "deem/core_types.hpp"

namespace deem {

/// Minimum-cost perfect assignment on a square cost matrix (Kuhn-Munkres with
/// potentials, O(n^3)). Returns `row_to_col` with row r assigned column row_to_col[r].
std::vector<int> solve_assignment(const Eigen::MatrixXd& cost);

/// Co-occurrence counts C(p, m) = #{s : pred[s] = p, reference[s] = m}.
Eigen::MatrixXd co_occurrence(const LabelVector& pred, const LabelVector& reference);

/// Bijection phi on classes maximising sum_p C(p, phi(p)); phi[p] is the
/// reference class that predicted class p maps to.
std::vector<int> hungarian_class_map(const LabelVector& pred, const LabelVector& reference);

/// True when `perm` is a permutation of {0..n-1}.
bool is_permutation(const std::vector<int>& perm, int n) noexcept;

}  // namespace deem
