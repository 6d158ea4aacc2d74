#pragma once

#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace senskit::nn {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Dense row-major float64 array. Rank 1 tensors map as column vectors,
/// rank 2 as matrices.
struct Tensor {
    std::vector<int> shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> dims)
        : shape(std::move(dims)),
          data(static_cast<std::size_t>(std::accumulate(shape.begin(), shape.end(), 1, std::multiplies<>())), 0.0) {}

    std::size_t size() const { return data.size(); }
    int rows() const { return shape.empty() ? 0 : shape[0]; }
    int cols() const { return shape.size() < 2 ? 1 : shape[1]; }

    Eigen::Map<RowMatrix> matrix() { return {data.data(), rows(), cols()}; }
    Eigen::Map<const RowMatrix> matrix() const { return {data.data(), rows(), cols()}; }
    Eigen::Map<Eigen::VectorXd> vector() { return {data.data(), static_cast<Eigen::Index>(data.size())}; }
    Eigen::Map<const Eigen::VectorXd> vector() const { return {data.data(), static_cast<Eigen::Index>(data.size())}; }

    void set_zero() { std::fill(data.begin(), data.end(), 0.0); }

    bool operator==(const Tensor&) const = default;
};

using TensorList = std::vector<Tensor>;

/// Zero tensors with the same shapes.
inline TensorList zeros_like(const TensorList& list) {
    TensorList out;
    out.reserve(list.size());
    for (const auto& t : list) out.emplace_back(t.shape);
    return out;
}

inline double squared_norm(const TensorList& list) {
    double s = 0.0;
    for (const auto& t : list) s += t.vector().squaredNorm();
    return s;
}

}  // namespace senskit::nn
