#pragma once

#include <cmath>
#include <string>

#include "cartloco/errors.hpp"
#include "cartloco/math.hpp"

namespace cartloco::nn {

struct AdamConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    Vec m;
    Vec v;
    long long step = 0;

    void reset(std::size_t n) {
        m.assign(n, 0.0);
        v.assign(n, 0.0);
        step = 0;
    }
};

// One bias-corrected Adam step, in place. Rejects non-finite gradients up front so a
// numerical blowup surfaces at its source instead of as silently poisoned moments.
inline void adam_step(Vec& params, const Vec& grad, AdamState& st, const AdamConfig& cfg) {
    if (params.size() != grad.size()) throw ContractError("adam_step: param/grad size mismatch");
    if (st.m.size() != params.size()) st.reset(params.size());
    for (std::size_t i = 0; i < grad.size(); ++i)
        if (!std::isfinite(grad[i]))
            throw NumericError("adam_step: non-finite gradient at index " + std::to_string(i));
    st.step += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(st.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(st.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        st.m[i] = cfg.beta1 * st.m[i] + (1.0 - cfg.beta1) * grad[i];
        st.v[i] = cfg.beta2 * st.v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
        const double mhat = st.m[i] / bc1;
        const double vhat = st.v[i] / bc2;
        params[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
}

}  // namespace cartloco::nn
