#pragma once

#include <cmath>
#include <cstddef>

#include "cartloco/errors.hpp"
#include "cartloco/math.hpp"

namespace cartloco::nn {

// Streaming per-dimension mean/variance (Welford). Dimensions added later (stage-2
// observation extension) start at mean 0, variance 1 so the warm-started policy sees
// the new inputs unscaled until real data accumulates.
struct RunningNorm {
    double count = 0.0;
    Vec mean;
    Vec m2;

    explicit RunningNorm(std::size_t dim = 0) { reset(dim); }

    void reset(std::size_t dim) {
        count = 0.0;
        mean.assign(dim, 0.0);
        m2.assign(dim, 0.0);
    }

    std::size_t dim() const { return mean.size(); }

    void update(const Vec& x) {
        if (x.size() != mean.size()) throw ContractError("RunningNorm::update: dim mismatch");
        count += 1.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double d = x[i] - mean[i];
            mean[i] += d / count;
            m2[i] += d * (x[i] - mean[i]);
        }
    }

    double var(std::size_t i) const { return count > 1.0 ? m2[i] / (count - 1.0) : 1.0; }

    // (x - mean) / std, clamped to +-clip. Before any data arrives this is the identity.
    Vec normalize(const Vec& x, double clip = 5.0) const {
        if (x.size() != mean.size()) throw ContractError("RunningNorm::normalize: dim mismatch");
        Vec out(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double sd = std::sqrt(var(i)) + 1e-8;
            out[i] = clampd((x[i] - mean[i]) / sd, -clip, clip);
        }
        return out;
    }

    // Grows to new_dim, keeping existing statistics; added dims act as mean 0 / var 1.
    void extend(std::size_t new_dim) {
        if (new_dim < mean.size()) throw ContractError("RunningNorm::extend: cannot shrink");
        const std::size_t old = mean.size();
        mean.resize(new_dim, 0.0);
        m2.resize(new_dim, 0.0);
        for (std::size_t i = old; i < new_dim; ++i) m2[i] = count > 1.0 ? (count - 1.0) : 0.0;
    }
};

}  // namespace cartloco::nn
