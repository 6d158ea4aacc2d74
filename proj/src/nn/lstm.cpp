#include "senskit/nn/lstm.hpp"

#include <cmath>

#include "senskit/errors.hpp"
#include "senskit/rng.hpp"

namespace senskit::nn {

namespace {

enum Param : std::size_t { kWx = 0, kWh = 1, kB = 2, kWHead = 3, kBHead = 4 };

void fill_uniform(Tensor& t, RngStream& rng, double bound) {
    for (double& v : t.data) v = rng.uniform(-bound, bound);
}

Eigen::ArrayXXd sigmoid(const Eigen::ArrayXXd& a) { return 1.0 / (1.0 + (-a).exp()); }

}  // namespace

LstmModel LstmModel::create(int input_dim, int hidden_dim, int output_dim, std::uint64_t seed) {
    if (input_dim < 1 || hidden_dim < 1 || output_dim < 1) throw ConfigError("lstm: dimensions must be positive");
    LstmModel model;
    model.input_dim = input_dim;
    model.hidden_dim = hidden_dim;
    model.output_dim = output_dim;
    model.params = {Tensor({4 * hidden_dim, input_dim}), Tensor({4 * hidden_dim, hidden_dim}),
                    Tensor({4 * hidden_dim}), Tensor({output_dim, hidden_dim}), Tensor({output_dim})};
    const double gate_bound = 1.0 / std::sqrt(static_cast<double>(hidden_dim));
    for (std::size_t k = 0; k < model.params.size(); ++k) {
        RngStream rng(seed, 20 + k);
        const double bound = k == kWx ? 1.0 / std::sqrt(static_cast<double>(input_dim)) : gate_bound;
        fill_uniform(model.params[k], rng, bound);
    }
    return model;
}

LstmModel LstmModel::from_parameters(TensorList params) {
    if (params.size() != 5) throw ConfigError("lstm: expected 5 parameter tensors");
    const auto& wx = params[kWx];
    const auto& wh = params[kWh];
    const auto& b = params[kB];
    const auto& whead = params[kWHead];
    const auto& bhead = params[kBHead];
    if (wx.shape.size() != 2 || wh.shape.size() != 2 || b.shape.size() != 1 || whead.shape.size() != 2 ||
        bhead.shape.size() != 1) {
        throw ConfigError("lstm: parameter ranks are wrong");
    }
    const int h = wh.shape[1];
    if (wx.shape[0] != 4 * h || wh.shape[0] != 4 * h || b.shape[0] != 4 * h || whead.shape[1] != h ||
        bhead.shape[0] != whead.shape[0]) {
        throw ConfigError("lstm: gate shapes are inconsistent");
    }
    LstmModel model;
    model.input_dim = wx.shape[1];
    model.hidden_dim = h;
    model.output_dim = whead.shape[0];
    model.params = std::move(params);
    return model;
}

Eigen::MatrixXd lstm_forward(const LstmModel& model, const std::vector<Eigen::MatrixXd>& steps, LstmTape* tape) {
    if (steps.empty()) throw ConfigError("lstm: empty sequence");
    const int hd = model.hidden_dim;
    const auto batch = steps.front().cols();
    const auto wx = model.params[kWx].matrix();
    const auto wh = model.params[kWh].matrix();
    const auto b = model.params[kB].vector();

    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(hd, batch);
    Eigen::MatrixXd c = Eigen::MatrixXd::Zero(hd, batch);
    if (tape) {
        tape->x.clear();
        tape->gates.clear();
        tape->c = {c};
        tape->h = {h};
    }
    for (const auto& x : steps) {
        if (x.rows() != model.input_dim || x.cols() != batch) {
            throw ConfigError("lstm: step input has shape " + std::to_string(x.rows()) + "x" +
                              std::to_string(x.cols()) + ", expected " + std::to_string(model.input_dim) + "x" +
                              std::to_string(batch));
        }
        Eigen::MatrixXd a = wx * x + wh * h;
        a.colwise() += b;
        Eigen::MatrixXd gates(4 * hd, batch);
        gates.topRows(2 * hd) = sigmoid(a.topRows(2 * hd).array()).matrix();
        gates.middleRows(2 * hd, hd) = a.middleRows(2 * hd, hd).array().tanh().matrix();
        gates.bottomRows(hd) = sigmoid(a.bottomRows(hd).array()).matrix();

        const auto in_gate = gates.topRows(hd).array();
        const auto forget = gates.middleRows(hd, hd).array();
        const auto cand = gates.middleRows(2 * hd, hd).array();
        const auto out_gate = gates.bottomRows(hd).array();
        c = (forget * c.array() + in_gate * cand).matrix();
        h = (out_gate * c.array().tanh()).matrix();
        if (tape) {
            tape->x.push_back(x);
            tape->gates.push_back(std::move(gates));
            tape->c.push_back(c);
            tape->h.push_back(h);
        }
    }
    Eigen::MatrixXd z = model.params[kWHead].matrix() * h;
    z.colwise() += model.params[kBHead].vector();
    return z;
}

Eigen::VectorXd lstm_forward(const LstmModel& model, const Eigen::MatrixXd& sequence) {
    std::vector<Eigen::MatrixXd> steps;
    steps.reserve(static_cast<std::size_t>(sequence.cols()));
    for (Eigen::Index t = 0; t < sequence.cols(); ++t) steps.emplace_back(sequence.col(t));
    return lstm_forward(model, steps, nullptr).col(0);
}

TensorList lstm_backward(const LstmModel& model, const LstmTape& tape, const Eigen::MatrixXd& d_out) {
    const int hd = model.hidden_dim;
    TensorList grads = zeros_like(model.params);
    const auto w_head = model.params[kWHead].matrix();
    const auto wh = model.params[kWh].matrix();
    const std::size_t steps = tape.x.size();

    grads[kWHead].matrix() = d_out * tape.h[steps].transpose();
    grads[kBHead].vector() = d_out.rowwise().sum();

    Eigen::MatrixXd dh = w_head.transpose() * d_out;
    Eigen::MatrixXd dc = Eigen::MatrixXd::Zero(hd, d_out.cols());
    auto gwx = grads[kWx].matrix();
    auto gwh = grads[kWh].matrix();
    auto gb = grads[kB].vector();
    Eigen::MatrixXd da(4 * hd, d_out.cols());

    for (std::size_t s = steps; s-- > 0;) {
        const Eigen::MatrixXd& gates = tape.gates[s];
        const auto in_gate = gates.topRows(hd).array();
        const auto forget = gates.middleRows(hd, hd).array();
        const auto cand = gates.middleRows(2 * hd, hd).array();
        const auto out_gate = gates.bottomRows(hd).array();
        const Eigen::ArrayXXd tanh_c = tape.c[s + 1].array().tanh();

        dc.array() += dh.array() * out_gate * (1.0 - tanh_c.square());
        da.topRows(hd) = (dc.array() * cand * in_gate * (1.0 - in_gate)).matrix();
        da.middleRows(hd, hd) = (dc.array() * tape.c[s].array() * forget * (1.0 - forget)).matrix();
        da.middleRows(2 * hd, hd) = (dc.array() * in_gate * (1.0 - cand.square())).matrix();
        da.bottomRows(hd) = (dh.array() * tanh_c * out_gate * (1.0 - out_gate)).matrix();

        gwx.noalias() += da * tape.x[s].transpose();
        gwh.noalias() += da * tape.h[s].transpose();
        gb += da.rowwise().sum();

        dh = wh.transpose() * da;
        dc = (dc.array() * forget).matrix();
    }
    return grads;
}

}  // namespace senskit::nn
