#include "deem/sparsemax.hpp"

#include <algorithm>
#include <array>
#include <memory>
#include <vector>

#include "deem/errors.hpp"

namespace deem {

double sparsemax(std::span<const double> z, std::span<double> out, std::span<bool> support) {
  const std::size_t k = z.size();
  if (k == 0 || out.size() != k || support.size() != k) throw ShapeMismatch("sparsemax spans must share a nonzero length");

  // Layers use small K; avoid the heap for the common case.
  std::array<double, 16> small{};
  std::vector<double> large;
  std::span<double> sorted;
  if (k <= small.size()) {
    sorted = std::span<double>(small.data(), k);
  } else {
    large.resize(k);
    sorted = large;
  }
  std::copy(z.begin(), z.end(), sorted.begin());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());

  // Largest k with 1 + k z_(k) >= sum_{j<=k} z_(j); equality keeps the boundary index.
  double cumulative = 0.0;
  double support_sum = sorted[0];
  std::size_t support_size = 1;
  for (std::size_t j = 0; j < k; ++j) {
    cumulative += sorted[j];
    if (1.0 + static_cast<double>(j + 1) * sorted[j] >= cumulative) {
      support_size = j + 1;
      support_sum = cumulative;
    }
  }
  const double tau = (support_sum - 1.0) / static_cast<double>(support_size);
  const double boundary = sorted[support_size - 1];
  for (std::size_t j = 0; j < k; ++j) {
    out[j] = std::max(z[j] - tau, 0.0);
    support[j] = z[j] >= boundary;
  }
  return tau;
}

Eigen::VectorXd sparsemax(const Eigen::Ref<const Eigen::VectorXd>& z) {
  const auto k = static_cast<std::size_t>(z.size());
  const Eigen::VectorXd in = z;
  Eigen::VectorXd out(z.size());
  auto support = std::make_unique<bool[]>(k);
  sparsemax(std::span<const double>(in.data(), k), std::span<double>(out.data(), k), std::span<bool>(support.get(), k));
  return out;
}

Eigen::VectorXd sparsemax_jacobian_vec(const Eigen::Ref<const Eigen::VectorXd>& output,
                                       const Eigen::Ref<const Eigen::VectorXd>& upstream) {
  if (output.size() != upstream.size()) throw ShapeMismatch("sparsemax_jacobian_vec sizes differ");
  const auto support = (output.array() > 0.0);
  const double count = static_cast<double>(support.count());
  const double mean = count > 0 ? support.select(upstream.array(), 0.0).sum() / count : 0.0;
  return support.select(upstream.array() - mean, 0.0).matrix();
}

void sparsemax_jacobian_vec(std::span<const bool> support, std::span<const double> upstream, std::span<double> out) {
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t j = 0; j < support.size(); ++j) {
    if (support[j]) {
      total += upstream[j];
      ++count;
    }
  }
  const double mean = count > 0 ? total / static_cast<double>(count) : 0.0;
  for (std::size_t j = 0; j < support.size(); ++j) out[j] = support[j] ? upstream[j] - mean : 0.0;
}

}  // namespace deem
