#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "senskit/nn/tensor.hpp"

namespace senskit::nn {

/// Dense network with ReLU after every hidden layer and a linear output.
/// params = [w1, b1, w2, b2, ..., wL, bL], w_k is (out_k x in_k).
struct FnnModel {
    int input_dim = 0;
    int output_dim = 0;
    std::vector<int> hidden;
    TensorList params;

    /// Weights and biases uniform in +-1/sqrt(fan_in), keyed on seed.
    static FnnModel create(int input_dim, std::vector<int> hidden, int output_dim, std::uint64_t seed);
    /// Rebuilds the architecture from parameter shapes (checkpoint loading).
    static FnnModel from_parameters(TensorList params);

    int layer_count() const { return static_cast<int>(params.size() / 2); }
    std::vector<std::string> parameter_names() const;
};

/// Cached pre-activations and activations for the backward pass.
struct FnnTape {
    std::vector<Eigen::MatrixXd> inputs;  // input to each layer
    std::vector<Eigen::MatrixXd> pre;     // pre-activation of each layer
};

/// x is (input_dim x B); returns (output_dim x B).
Eigen::MatrixXd fnn_forward(const FnnModel& model, const Eigen::MatrixXd& x, FnnTape* tape = nullptr);
Eigen::VectorXd fnn_forward(const FnnModel& model, const Eigen::VectorXd& x);

/// Gradients of the loss for every parameter, given dLoss/dOutput.
TensorList fnn_backward(const FnnModel& model, const FnnTape& tape, const Eigen::MatrixXd& d_out);

}  // namespace senskit::nn
