#pragma once

#include <span>

#include <Eigen/Dense>

#include "senskit/estimators.hpp"

namespace senskit::nn {

/// Mean over the batch of ||y_b - A_b z_b||^2, with z holding one column
/// per window. If `dz` is non-null it receives dLoss/dz.
double batch_surrogate_loss(const Eigen::MatrixXd& z, std::span<const RegressionWindow* const> windows,
                            Eigen::MatrixXd* dz);

}  // namespace senskit::nn
