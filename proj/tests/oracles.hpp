#pragma once

// Independent oracles for the test suite. Everything here is written from the math
// directly, without reusing library internals, so agreement is evidence rather than
// tautology.

#include <cmath>
#include <functional>
#include <vector>

namespace oracle {

using Vec = std::vector<double>;

// Central finite differences of a scalar function over a flat vector.
inline Vec fd_grad(const std::function<double(const Vec&)>& f, Vec x, double eps) {
    Vec g(x.size(), 0.0);
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double save = x[i];
        x[i] = save + eps;
        const double fp = f(x);
        x[i] = save - eps;
        const double fm = f(x);
        x[i] = save;
        g[i] = (fp - fm) / (2.0 * eps);
    }
    return g;
}

inline bool close(double a, double b, double rtol, double atol) {
    return std::fabs(a - b) <= rtol * std::max(std::fabs(a), std::fabs(b)) + atol;
}

// Worst elementwise discrepancy, scaled the same way close() checks it.
inline double max_discrepancy(const Vec& a, const Vec& b, double atol) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double scale = std::max(std::fabs(a[i]), std::fabs(b[i])) + atol;
        worst = std::max(worst, std::fabs(a[i] - b[i]) / scale);
    }
    return worst;
}

// Straight-line arithmetic for a [2,3,1] net with elu hidden and identity output,
// reading the documented flat layout (per layer: row-major W, then b). Deliberately
// loop-free so it shares no structure with the library implementation.
inline double forward_231_elu(const Vec& p, double x0, double x1) {
    auto elu = [](double z) { return z > 0.0 ? z : std::exp(z) - 1.0; };
    const double z0 = p[0] * x0 + p[1] * x1 + p[6];
    const double z1 = p[2] * x0 + p[3] * x1 + p[7];
    const double z2 = p[4] * x0 + p[5] * x1 + p[8];
    const double h0 = elu(z0), h1 = elu(z1), h2 = elu(z2);
    return p[9] * h0 + p[10] * h1 + p[11] * h2 + p[12];
}

// One Adam step written from the published update rule.
struct RefAdam {
    Vec m, v;
    long long t = 0;

    Vec step(Vec params, const Vec& grad, double lr, double b1, double b2, double eps) {
        if (m.empty()) {
            m.assign(params.size(), 0.0);
            v.assign(params.size(), 0.0);
        }
        t += 1;
        for (std::size_t i = 0; i < params.size(); ++i) {
            m[i] = b1 * m[i] + (1 - b1) * grad[i];
            v[i] = b2 * v[i] + (1 - b2) * grad[i] * grad[i];
            const double mhat = m[i] / (1 - std::pow(b1, static_cast<double>(t)));
            const double vhat = v[i] / (1 - std::pow(b2, static_cast<double>(t)));
            params[i] -= lr * mhat / (std::sqrt(vhat) + eps);
        }
        return params;
    }
};

// Closed-form planar two-link inverse kinematics, elbow-back branch (second joint
// negative, matching the quadruped's knee). Angles measured from straight down; target
// given as (forward, drop) relative to the hip. Derived from the law of cosines, not
// from the library FK.
struct LegAngles {
    double thigh, calf;
};
inline LegAngles leg_ik(double forward, double drop, double l1, double l2) {
    const double r2 = forward * forward + drop * drop;
    double c2 = (r2 - l1 * l1 - l2 * l2) / (2.0 * l1 * l2);
    if (c2 > 1.0) c2 = 1.0;
    if (c2 < -1.0) c2 = -1.0;
    const double calf = -std::acos(c2);
    const double thigh =
        std::atan2(forward, drop) - std::atan2(l2 * std::sin(calf), l1 + l2 * std::cos(calf));
    return {thigh, calf};
}

// Brute-force GAE: A_t = sum_{l>=0} (gamma*lambda)^l * delta_{t+l}, with the sum cut
// at the first done flag (the done at index k masks delta_{k+1} onward and removes the
// bootstrap inside delta_k).
inline Vec brute_gae(const Vec& rewards, const Vec& values, const std::vector<int>& dones, double gamma,
                     double lam) {
    const std::size_t T = rewards.size();
    Vec adv(T, 0.0);
    for (std::size_t t = 0; t < T; ++t) {
        double acc = 0.0;
        double coef = 1.0;
        for (std::size_t l = t; l < T; ++l) {
            const double nonterm = dones[l] ? 0.0 : 1.0;
            const double delta = rewards[l] + gamma * nonterm * values[l + 1] - values[l];
            acc += coef * delta;
            if (dones[l]) break;
            coef *= gamma * lam;
        }
        adv[t] = acc;
    }
    return adv;
}

}  // namespace oracle
