#include "senskit/nn/fnn.hpp"

#include <cmath>

#include "senskit/errors.hpp"
#include "senskit/rng.hpp"

namespace senskit::nn {

FnnModel FnnModel::create(int input_dim, std::vector<int> hidden, int output_dim, std::uint64_t seed) {
    if (input_dim < 1 || output_dim < 1) throw ConfigError("fnn: dimensions must be positive");
    FnnModel model;
    model.input_dim = input_dim;
    model.output_dim = output_dim;
    model.hidden = std::move(hidden);
    std::vector<int> sizes = {input_dim};
    sizes.insert(sizes.end(), model.hidden.begin(), model.hidden.end());
    sizes.push_back(output_dim);
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
        if (sizes[l + 1] < 1) throw ConfigError("fnn: hidden sizes must be positive");
        RngStream rng(seed, 10 + l);
        const double bound = 1.0 / std::sqrt(static_cast<double>(sizes[l]));
        Tensor w({sizes[l + 1], sizes[l]});
        Tensor b({sizes[l + 1]});
        for (double& v : w.data) v = rng.uniform(-bound, bound);
        for (double& v : b.data) v = rng.uniform(-bound, bound);
        model.params.push_back(std::move(w));
        model.params.push_back(std::move(b));
    }
    return model;
}

FnnModel FnnModel::from_parameters(TensorList params) {
    if (params.empty() || params.size() % 2 != 0) throw ConfigError("fnn: expected weight/bias pairs");
    FnnModel model;
    for (std::size_t l = 0; l < params.size(); l += 2) {
        const Tensor& w = params[l];
        const Tensor& b = params[l + 1];
        if (w.shape.size() != 2 || b.shape.size() != 1 || b.shape[0] != w.shape[0]) {
            throw ConfigError("fnn: inconsistent layer shapes");
        }
        if (l == 0) {
            model.input_dim = w.shape[1];
        } else if (w.shape[1] != params[l - 2].shape[0]) {
            throw ConfigError("fnn: layer chain broken");
        }
        if (l + 2 < params.size()) model.hidden.push_back(w.shape[0]);
        model.output_dim = w.shape[0];
    }
    model.params = std::move(params);
    return model;
}

std::vector<std::string> FnnModel::parameter_names() const {
    std::vector<std::string> names;
    for (int l = 1; l <= layer_count(); ++l) {
        names.push_back("w" + std::to_string(l));
        names.push_back("b" + std::to_string(l));
    }
    return names;
}

Eigen::MatrixXd fnn_forward(const FnnModel& model, const Eigen::MatrixXd& x, FnnTape* tape) {
    if (x.rows() != model.input_dim) {
        throw ConfigError("fnn: input has " + std::to_string(x.rows()) + " features, model expects " +
                          std::to_string(model.input_dim));
    }
    if (tape) {
        tape->inputs.clear();
        tape->pre.clear();
    }
    Eigen::MatrixXd act = x;
    const int layers = model.layer_count();
    for (int l = 0; l < layers; ++l) {
        const auto w = model.params[static_cast<std::size_t>(2 * l)].matrix();
        const auto b = model.params[static_cast<std::size_t>(2 * l + 1)].vector();
        Eigen::MatrixXd pre = w * act;
        pre.colwise() += b;
        if (tape) {
            tape->inputs.push_back(std::move(act));
            tape->pre.push_back(pre);
        }
        act = l + 1 < layers ? pre.cwiseMax(0.0) : std::move(pre);
    }
    return act;
}

Eigen::VectorXd fnn_forward(const FnnModel& model, const Eigen::VectorXd& x) {
    return fnn_forward(model, Eigen::MatrixXd(x), nullptr).col(0);
}

TensorList fnn_backward(const FnnModel& model, const FnnTape& tape, const Eigen::MatrixXd& d_out) {
    TensorList grads = zeros_like(model.params);
    Eigen::MatrixXd delta = d_out;
    for (int l = model.layer_count() - 1; l >= 0; --l) {
        const auto idx = static_cast<std::size_t>(l);
        grads[2 * idx].matrix() = delta * tape.inputs[idx].transpose();
        grads[2 * idx + 1].vector() = delta.rowwise().sum();
        if (l == 0) break;
        delta = model.params[2 * idx].matrix().transpose() * delta;
        // ReLU of the previous layer; its output is this layer's input.
        delta = delta.cwiseProduct((tape.pre[idx - 1].array() > 0.0).cast<double>().matrix());
    }
    return grads;
}

}  // namespace senskit::nn
