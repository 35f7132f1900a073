#pragma once

#include <cmath>
#include <vector>

#include "foregan/ops.hpp"

namespace foregan {

// Compares analytic gradients of a scalar-valued tensor function against
// central finite differences. Returns the max over coordinates of
// |analytic - central| / max(1, |analytic|). The probes run without a tape,
// so f sees plain forward evaluations.
template <class F>
inline float grad_check(F&& f, const Tensor& x, float eps) {
    if (!(eps > 0.0f) || eps > 1e-2f)
        throw ContractError("grad_check: eps must be in (0, 1e-2]");

    Tensor probe = x.clone();
    probe.set_requires_grad(true);
    std::vector<float> analytic;
    {
        Tape tape;
        Tape::Scope scope(tape);
        Tensor loss = f(probe);
        if (loss.numel() != 1)
            throw ContractError("grad_check: f must return a scalar, got shape " +
                                shape_str(loss.shape()));
        backward(loss);
        analytic.assign(probe.grad().begin(), probe.grad().end());
    }

    Tensor work = x.clone();
    auto vals = work.mutable_data();
    float worst = 0.0f;
    for (std::size_t i = 0; i < vals.size(); ++i) {
        const float orig = vals[i];
        vals[i] = orig + eps;
        const double fp = f(work).item();
        vals[i] = orig - eps;
        const double fm = f(work).item();
        vals[i] = orig;
        const double central = (fp - fm) / (2.0 * static_cast<double>(eps));
        const double a = static_cast<double>(analytic[i]);
        const double err = std::fabs(a - central) / std::max(1.0, std::fabs(a));
        worst = std::max(worst, static_cast<float>(err));
    }
    return worst;
}

} // namespace foregan
