#include "senskit/nn/adam.hpp"

#include <cmath>

#include "senskit/errors.hpp"

namespace senskit::nn {

AdamState AdamState::for_parameters(const TensorList& params, double lr) {
    AdamState s;
    s.first_moment = zeros_like(params);
    s.second_moment = zeros_like(params);
    s.lr = lr;
    return s;
}

void adam_step(AdamState& state, TensorList& params, const TensorList& grads) {
    if (params.size() != grads.size() || params.size() != state.first_moment.size()) {
        throw ConfigError("adam: parameter, gradient and state lists differ in length");
    }
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double correction1 = 1.0 - std::pow(state.beta1, t);
    const double correction2 = 1.0 - std::pow(state.beta2, t);
    for (std::size_t k = 0; k < params.size(); ++k) {
        if (params[k].shape != grads[k].shape) throw ConfigError("adam: gradient shape mismatch");
        auto p = params[k].vector();
        auto g = grads[k].vector();
        auto m = state.first_moment[k].vector();
        auto v = state.second_moment[k].vector();
        m = state.beta1 * m + (1.0 - state.beta1) * g;
        v = state.beta2 * v + (1.0 - state.beta2) * g.cwiseProduct(g);
        p.array() -= state.lr * (m.array() / correction1) / ((v.array() / correction2).sqrt() + state.epsilon);
    }
}

}  // namespace senskit::nn
