#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "prime/model.hpp"
#include "prime/tensor.hpp"

namespace prime {

struct PlateauConfig {
    double factor = 0.5;
    int patience = 5;
    double min_delta = 1e-4;  // absolute improvement required
};

// Adam with bias correction plus reduce-on-plateau scheduler state.  Moment
// tensors are allocated lazily per parameter name on first update, so one
// state object serves models whose trainable set varies between calls (it
// must not be reused across a widening, which changes shapes).
struct AdamState {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::int64_t step = 0;
    std::map<std::string, Tensor> m, v;

    PlateauConfig plateau;
    double best_loss = 0.0;
    bool has_best = false;
    int bad_epochs = 0;
    int reductions = 0;
};

AdamState make_adam(double lr, PlateauConfig plateau = {});

// One update over every parameter present in `grads`.  Parameters without a
// gradient entry are untouched.  Throws on non-finite gradients before any
// parameter is modified.
void adam_step(Model& model, const Gradients& grads, AdamState& state);

// Returns true when the learning rate was reduced on this call.
bool reduce_lr_on_plateau(AdamState& state, double validation_loss);

}  // namespace prime
