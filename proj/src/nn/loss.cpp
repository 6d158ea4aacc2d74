#include "senskit/nn/loss.hpp"

#include "senskit/errors.hpp"

namespace senskit::nn {

double batch_surrogate_loss(const Eigen::MatrixXd& z, std::span<const RegressionWindow* const> windows,
                            Eigen::MatrixXd* dz) {
    const auto batch = static_cast<Eigen::Index>(windows.size());
    if (z.cols() != batch) throw ConfigError("loss: batch size mismatch between outputs and windows");
    if (dz) dz->resize(z.rows(), batch);
    double total = 0.0;
    const double inv_b = 1.0 / static_cast<double>(batch);
    for (Eigen::Index b = 0; b < batch; ++b) {
        const RegressionWindow& w = *windows[static_cast<std::size_t>(b)];
        if (w.a.cols() != z.rows()) throw ConfigError("loss: coefficient length does not match window");
        const Eigen::VectorXd residual = w.y - w.a * z.col(b);
        total += residual.squaredNorm();
        if (dz) dz->col(b) = (-2.0 * inv_b) * (w.a.transpose() * residual);
    }
    return total * inv_b;
}

}  // namespace senskit::nn
