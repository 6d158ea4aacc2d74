#pragma once

#include <cstdint>

#include "senskit/nn/tensor.hpp"

namespace senskit::nn {

struct AdamState {
    TensorList first_moment;
    TensorList second_moment;
    std::int64_t step = 0;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    static AdamState for_parameters(const TensorList& params, double lr = 1e-3);
};

/// Bias-corrected Adam update of `params` in place.
void adam_step(AdamState& state, TensorList& params, const TensorList& grads);

}  // namespace senskit::nn
