#include "prime/optim.hpp"

#include <cmath>

#include "prime/errors.hpp"

namespace prime {

AdamState make_adam(double lr, PlateauConfig plateau) {
    if (lr <= 0.0) throw ConfigError({"learning rate must be positive"});
    AdamState s;
    s.lr = lr;
    s.plateau = plateau;
    return s;
}

void adam_step(Model& model, const Gradients& grads, AdamState& state) {
    for (const auto& [name, g] : grads.by_name)
        if (!g.all_finite()) throw Error("adam_step: non-finite gradient for " + name);

    std::map<std::string, Tensor*> params;
    for (ParamRef& ref : param_refs(model)) params.emplace(ref.name, ref.tensor);

    ++state.step;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));

    for (const auto& [name, g] : grads.by_name) {
        auto pit = params.find(name);
        if (pit == params.end()) throw Error("adam_step: unknown parameter " + name);
        Tensor& p = *pit->second;
        if (!p.same_shape(g))
            throw ShapeError("adam_step: gradient " + g.shape_str() + " for parameter " + name +
                             " " + p.shape_str());

        Tensor& m = state.m.try_emplace(name, Tensor(g.shape(), 0.0)).first->second;
        Tensor& v = state.v.try_emplace(name, Tensor(g.shape(), 0.0)).first->second;
        if (!m.same_shape(g)) throw ShapeError("adam_step: stale moments for " + name);

        for (std::size_t i = 0; i < g.size(); ++i) {
            m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
            v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            p[i] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
        }
    }
}

bool reduce_lr_on_plateau(AdamState& state, double validation_loss) {
    if (!std::isfinite(validation_loss))
        throw Error("reduce_lr_on_plateau: non-finite validation loss");
    if (!state.has_best || validation_loss < state.best_loss - state.plateau.min_delta) {
        state.best_loss = validation_loss;
        state.has_best = true;
        state.bad_epochs = 0;
        return false;
    }
    if (++state.bad_epochs >= state.plateau.patience) {
        state.lr *= state.plateau.factor;
        state.bad_epochs = 0;
        ++state.reductions;
        return true;
    }
    return false;
}

}  // namespace prime
