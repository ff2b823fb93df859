#pragma once

#include <span>

#include <Eigen/Dense>

namespace deem {

/// Euclidean projection of z onto the probability simplex (sorted-threshold
/// algorithm). Writes the projection into `out` and the support into
/// `support`; an index sitting exactly on the threshold boundary is counted
/// in the support. Returns the threshold tau.
double sparsemax(std::span<const double> z, std::span<double> out, std::span<bool> support);

Eigen::VectorXd sparsemax(const Eigen::Ref<const Eigen::VectorXd>& z);

/// J^T u for the sparsemax Jacobian with support taken from the strictly
/// positive entries of `output`: u_i - mean_{S} u on S, 0 elsewhere.
Eigen::VectorXd sparsemax_jacobian_vec(const Eigen::Ref<const Eigen::VectorXd>& output,
                                       const Eigen::Ref<const Eigen::VectorXd>& upstream);

/// Same product with an explicit support mask; in-place friendly spans.
void sparsemax_jacobian_vec(std::span<const bool> support, std::span<const double> upstream, std::span<double> out);

}  // namespace deem
