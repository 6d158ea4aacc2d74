#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "senskit/nn/tensor.hpp"

namespace senskit::nn {

/// Single-layer LSTM with a linear head on the last hidden state.
/// Gate rows are stacked [input, forget, candidate, output], each H tall.
/// params = [w_x (4H x d), w_h (4H x H), b (4H), w_head (out x H), b_head (out)].
struct LstmModel {
    int input_dim = 0;
    int hidden_dim = 0;
    int output_dim = 0;
    TensorList params;

    static LstmModel create(int input_dim, int hidden_dim, int output_dim, std::uint64_t seed);
    static LstmModel from_parameters(TensorList params);

    std::vector<std::string> parameter_names() const { return {"w_x", "w_h", "b", "w_head", "b_head"}; }
};

struct LstmTape {
    std::vector<Eigen::MatrixXd> x;      // inputs, per step
    std::vector<Eigen::MatrixXd> gates;  // activated gates (4H x B), per step
    std::vector<Eigen::MatrixXd> c;      // cell state after each step; c[0] is the zero initial state
    std::vector<Eigen::MatrixXd> h;      // hidden state, same indexing as c
};

/// steps[t] is (input_dim x B); state starts at zero. Returns (output_dim x B).
Eigen::MatrixXd lstm_forward(const LstmModel& model, const std::vector<Eigen::MatrixXd>& steps,
                             LstmTape* tape = nullptr);
/// One sequence given as (input_dim x M), column t is step t.
Eigen::VectorXd lstm_forward(const LstmModel& model, const Eigen::MatrixXd& sequence);

/// Backpropagation through time over all steps, given dLoss/dOutput.
TensorList lstm_backward(const LstmModel& model, const LstmTape& tape, const Eigen::MatrixXd& d_out);

}  // namespace senskit::nn
