#include "deem/assignment.hpp"

#include <limits>

#include "deem/errors.hpp"

namespace deem {

std::vector<int> solve_assignment(const Eigen::MatrixXd& cost) {
  if (cost.rows() != cost.cols()) throw ShapeMismatch("assignment needs a square cost matrix");
  const std::size_t n = static_cast<std::size_t>(cost.rows());
  const double inf = std::numeric_limits<double>::infinity();
  auto c = [&](std::size_t r, std::size_t col) { return cost(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(col)); };

  // 1-based potentials; column 0 is a virtual start node.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> owner(n + 1, 0), way(n + 1, 0);

  for (std::size_t row = 1; row <= n; ++row) {
    owner[0] = row;
    std::size_t col0 = 0;
    std::vector<double> min_slack(n + 1, inf);
    std::vector<bool> used(n + 1, false);
    do {
      used[col0] = true;
      const std::size_t row0 = owner[col0];
      double delta = inf;
      std::size_t col1 = 0;
      for (std::size_t col = 1; col <= n; ++col) {
        if (used[col]) continue;
        const double slack = c(row0 - 1, col - 1) - u[row0] - v[col];
        if (slack < min_slack[col]) {
          min_slack[col] = slack;
          way[col] = col0;
        }
        if (min_slack[col] < delta) {
          delta = min_slack[col];
          col1 = col;
        }
      }
      for (std::size_t col = 0; col <= n; ++col) {
        if (used[col]) {
          u[owner[col]] += delta;
          v[col] -= delta;
        } else {
          min_slack[col] -= delta;
        }
      }
      col0 = col1;
    } while (owner[col0] != 0);
    do {
      const std::size_t col1 = way[col0];
      owner[col0] = owner[col1];
      col0 = col1;
    } while (col0 != 0);
  }

  std::vector<int> row_to_col(n, -1);
  for (std::size_t col = 1; col <= n; ++col) row_to_col[owner[col] - 1] = static_cast<int>(col - 1);
  return row_to_col;
}

Eigen::MatrixXd co_occurrence(const LabelVector& pred, const LabelVector& reference) {
  if (pred.size() != reference.size()) throw ShapeMismatch("co_occurrence needs equal lengths");
  if (pred.num_classes() != reference.num_classes()) throw ShapeMismatch("co_occurrence needs equal K");
  const int k = pred.num_classes();
  Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(k, k);
  for (std::size_t s = 0; s < pred.size(); ++s) counts(pred[s], reference[s]) += 1.0;
  return counts;
}

std::vector<int> hungarian_class_map(const LabelVector& pred, const LabelVector& reference) {
  return solve_assignment(-co_occurrence(pred, reference));
}

bool is_permutation(const std::vector<int>& perm, int n) noexcept {
  if (perm.size() != static_cast<std::size_t>(n)) return false;
  std::vector<bool> seen(static_cast<std::size_t>(n), false);
  for (int p : perm) {
    if (p < 0 || p >= n || seen[static_cast<std::size_t>(p)]) return false;
    seen[static_cast<std::size_t>(p)] = true;
  }
  return true;
}

}  // namespace deem
