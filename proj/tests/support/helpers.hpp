#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "deem/assignment.hpp"
#include "deem/ds_model.hpp"

namespace deem::testing {

/// Relabels `fitted` so its classes line up with the truth, using the
/// prediction/truth co-occurrence assignment.
inline DsParams align_by_predictions(const DsParams& fitted, const LabelMatrix& labels, const LabelVector& truth) {
  const std::vector<int> phi = hungarian_class_map(ds_predict(fitted, labels), truth);
  std::vector<int> inverse(phi.size());
  for (std::size_t p = 0; p < phi.size(); ++p) inverse[static_cast<std::size_t>(phi[p])] = static_cast<int>(p);
  return fitted.permute_classes(inverse);
}

inline double max_abs_difference(const DsParams& a, const DsParams& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.psi_data().size(); ++i) worst = std::max(worst, std::abs(a.psi_data()[i] - b.psi_data()[i]));
  for (std::size_t t = 0; t < a.pi_data().size(); ++t) worst = std::max(worst, std::abs(a.pi_data()[t] - b.pi_data()[t]));
  return worst;
}

/// K = 3, d = 6 parameters with diagonals spread over [0.7, 0.9].
inline DsParams moderate_ds_params() {
  const int k = 3;
  const std::size_t d = 6;
  std::vector<double> psi(d * 9);
  for (std::size_t i = 0; i < d; ++i)
    for (int m = 0; m < k; ++m) {
      const double diag = 0.7 + 0.2 * static_cast<double>((i * 3 + static_cast<std::size_t>(m)) % 7) / 6.0;
      for (int l = 0; l < k; ++l)
        psi[(i * 3 + static_cast<std::size_t>(l)) * 3 + static_cast<std::size_t>(m)] =
            l == m ? diag : (1.0 - diag) * (l < m ? 0.6 : 0.4);
    }
  for (std::size_t i = 0; i < d; ++i)
    for (int m = 0; m < k; ++m) {
      double total = 0.0;
      for (int l = 0; l < k; ++l) total += psi[(i * 3 + static_cast<std::size_t>(l)) * 3 + static_cast<std::size_t>(m)];
      for (int l = 0; l < k; ++l) psi[(i * 3 + static_cast<std::size_t>(l)) * 3 + static_cast<std::size_t>(m)] /= total;
    }
  return {d, k, std::move(psi), {0.45, 0.35, 0.2}};
}

}  // namespace deem::testing
