#pragma once

#include <cmath>
#include <vector>

#include "cartloco/config.hpp"
#include "cartloco/math.hpp"
#include "cartloco/net.hpp"
#include "cartloco/rng.hpp"

// Diagonal-Gaussian policy head: a dense mean network plus a state-independent
// per-dimension log standard deviation.

namespace cartloco::rl {

constexpr double kLog2Pi = 1.8378770664093454836;

struct PolicyHead {
    nn::NetParams net;  // observation -> action mean
    Vec log_std;        // one entry per action dimension
};

inline nn::NetSpec mlp_spec(int input, const std::vector<int>& hidden, int output) {
    nn::NetSpec spec;
    spec.layer_sizes.reserve(hidden.size() + 2);
    spec.layer_sizes.push_back(input);
    for (int h : hidden) spec.layer_sizes.push_back(h);
    spec.layer_sizes.push_back(output);
    spec.validate();
    return spec;
}

inline PolicyHead make_policy(int obs_dim, const std::vector<int>& hidden, int action_dim,
                              double log_std_init, std::uint64_t seed) {
    PolicyHead head;
    head.net = nn::net_init(mlp_spec(obs_dim, hidden, action_dim), seed);
    head.log_std.assign(static_cast<size_t>(action_dim), log_std_init);
    return head;
}

inline nn::NetParams make_value_net(int obs_dim, const std::vector<int>& hidden, std::uint64_t seed) {
    return nn::net_init(mlp_spec(obs_dim, hidden, 1), seed);
}

inline void clamp_log_std(Vec& log_std, const PpoConfig& cfg) {
    for (double& v : log_std) v = clampd(v, cfg.log_std_min, cfg.log_std_max);
}

inline double gaussian_log_prob(const Vec& mean, const Vec& log_std, const Vec& action) {
    if (mean.size() != action.size() || mean.size() != log_std.size())
        throw ContractError("gaussian_log_prob: dimension mismatch");
    double lp = 0.0;
    for (size_t i = 0; i < mean.size(); ++i) {
        const double z = (action[i] - mean[i]) * std::exp(-log_std[i]);
        lp += -0.5 * z * z - log_std[i] - 0.5 * kLog2Pi;
    }
    return lp;
}

// Differential entropy of the diagonal Gaussian; depends only on the stds.
inline double gaussian_entropy(const Vec& log_std) {
    double h = 0.0;
    for (double ls : log_std) h += ls + 0.5 * (1.0 + kLog2Pi);
    return h;
}

struct ActionSample {
    Vec action;
    double log_prob = 0.0;
};

// One normal draw per action dimension, in index order (a determinism contract).
inline ActionSample sample_action(const PolicyHead& head, const Vec& obs, Rng& rng) {
    const Vec mean = nn::net_forward(head.net, obs);
    ActionSample out;
    out.action.resize(mean.size());
    for (size_t i = 0; i < mean.size(); ++i)
        out.action[i] = mean[i] + std::exp(head.log_std[i]) * rng.normal();
    out.log_prob = gaussian_log_prob(mean, head.log_std, out.action);
    return out;
}

inline Vec mean_action(const PolicyHead& head, const Vec& obs) { return nn::net_forward(head.net, obs); }

inline double value_of(const nn::NetParams& value_net, const Vec& obs) {
    return nn::net_forward(value_net, obs)[0];
}

}  // namespace cartloco::rl
