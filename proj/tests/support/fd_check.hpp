#pragma once

// Central finite-difference gradient checking used across the test suites.
// The checker perturbs one scalar parameter at a time, so the loss functor
// must re-run the full forward pass on every call.

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

#include "prime/tensor.hpp"

namespace testsupport {

struct FdResult {
    double max_rel_err = 0.0;
    std::size_t checked = 0;
    std::string worst;  // "name[i]" of the worst entry
};

inline double rel_err(double analytic, double numeric) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
    return std::abs(analytic - numeric) / denom;
}

// Compares an analytic gradient tensor against central differences of `loss`
// w.r.t. the entries of `param`.  `loss` must be a pure function of the
// current parameter values.
inline FdResult fd_compare(prime::Tensor& param, const prime::Tensor& analytic,
                           const std::function<double()>& loss, const std::string& name,
                           double h = 1e-5, FdResult carry = {}) {
    for (std::size_t i = 0; i < param.size(); ++i) {
        const double orig = param[i];
        param[i] = orig + h;
        const double fp = loss();
        param[i] = orig - h;
        const double fm = loss();
        param[i] = orig;
        const double numeric = (fp - fm) / (2.0 * h);
        const double e = rel_err(analytic[i], numeric);
        if (e > carry.max_rel_err) {
            carry.max_rel_err = e;
            carry.worst = name + "[" + std::to_string(i) + "]";
        }
        ++carry.checked;
    }
    return carry;
}

}  // namespace testsupport
