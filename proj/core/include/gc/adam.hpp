#pragma once

#include <vector>

#include "gc/tensor.hpp"

namespace gc {

// Adam with bias correction. One state covers a fixed set of parameter
// tensors; m/v are laid out in the order the parameters are first seen.
// Hyperparameter defaults are the common ones (the source method only says
// "Adam").
struct AdamState {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    long long step = 0;
    std::vector<double> m, v;
};

// Applies one update using each tensor's .grad, then clears the grads.
// Missing grads count as zero; learning_rate 0 leaves values untouched
// (the moments still advance). Throws NumericError on size mismatch or a
// negative learning rate.
void adam_step(const std::vector<Tensor*>& params, AdamState& state);

}  // namespace gc
