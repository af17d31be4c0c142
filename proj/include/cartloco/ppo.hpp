#pragma once
// On-policy training: clipped-surrogate policy gradient with generalized advantage
// estimation over a rectangular env-major rollout buffer, plus the two-stage training
// loops (velocity-tracking locomotion, then cart pushing with optional adversarial
// style reward). Everything is sequential and draws from tagged rng streams, so a
// (config, seed) pair maps to one checkpoint byte string.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "amp.hpp"
#include "checkpoint.hpp"
#include "config.hpp"
#include "env.hpp"
#include "errors.hpp"
#include "policy.hpp"
#include "rewards.hpp"
#include "rng.hpp"

namespace cartloco::rl {

// ---------------------------------------------------------------------------
// Stage-2 variants. kLocomotion is the stage-1 "variant" so checkpoints can carry one
// vocabulary. Only the adversarial pair ever touches the discriminator; that isolation
// is load-bearing for the ablation claims and is asserted by call counting in tests.

enum class Variant { kLocomotion, kNoAmp, kPartialAmp, kFullAmp, kHierarchical };

inline const char* variant_name(Variant v) {
    switch (v) {
        case Variant::kLocomotion: return "locomotion";
        case Variant::kNoAmp: return "no_amp";
        case Variant::kPartialAmp: return "partial_amp";
        case Variant::kFullAmp: return "full_amp";
        case Variant::kHierarchical: return "hierarchical";
    }
    throw ContractError("variant_name: bad enum value");
}

inline Variant variant_from_name(const std::string& s) {
    if (s == "locomotion") return Variant::kLocomotion;
    if (s == "no_amp") return Variant::kNoAmp;
    if (s == "partial_amp") return Variant::kPartialAmp;
    if (s == "full_amp") return Variant::kFullAmp;
    if (s == "hierarchical") return Variant::kHierarchical;
    throw ContractError("unknown variant: " + s);
}

inline bool variant_uses_disc(Variant v) {
    return v == Variant::kPartialAmp || v == Variant::kFullAmp;
}

inline amp::ProjectionMode variant_mode(Variant v) {
    if (v == Variant::kPartialAmp) return amp::ProjectionMode::kPartial;
    if (v == Variant::kFullAmp) return amp::ProjectionMode::kFull;
    throw ContractError("variant_mode: variant has no projection");
}

// Hierarchical trains only the arm head (3 arm targets + grip); legs replay the frozen
// stage-1 policy verbatim.
inline int trained_action_dim(Variant v) { return v == Variant::kHierarchical ? 4 : 12; }

// ---------------------------------------------------------------------------
// Rollout storage. Env-major and rectangular: slot = env * horizon + t. `obs` is the
// normalized vector the policy actually consumed; `raw_obs` keeps the pre-normalization
// observation so frozen-base behaviour stays reproducible from the batch alone.

struct RolloutBatch {
    int num_envs = 0;
    int horizon = 0;
    std::vector<Vec> obs;
    std::vector<Vec> raw_obs;
    std::vector<Vec> actions;               // trained head's action
    std::vector<sim::Action> exec_actions;  // what the environment received
    Vec log_probs;
    Vec values;
    Vec rewards;  // combined reward; timeout steps carry the folded-in bootstrap
    Vec task_rewards;
    Vec style_rewards;
    std::vector<unsigned char> dones;  // any termination (the episode cut)
    Vec values_last;                   // per env: V at the segment tail, index by env
    std::vector<amp::ProjectedTransition> transitions;  // adversarial variants only
    Vec advantages;  // filled by add_gae
    Vec returns;

    int size() const { return num_envs * horizon; }
};

// Per-collection aggregates for logging and the curriculum gate. Means are over steps;
// survival is over episodes that ended inside the window (none ended -> no failures seen).
struct CollectStats {
    long long steps = 0;
    int episodes_ended = 0;
    int failures = 0;
    double reward_mean = 0.0;
    double task_mean = 0.0;
    double style_mean = 0.0;
    double tracking_mean = 0.0;
    double regularization_mean = 0.0;
    double gait_mean = 0.0;
    double lin_vel_err = 0.0;  // mean |vx command - body vx|

    double survival() const {
        return episodes_ended == 0 ? 1.0
                                   : 1.0 - static_cast<double>(failures) / episodes_ended;
    }
};

// Discriminator hookup for collection. style_evals counts discriminator forwards; the
// non-adversarial variants must leave it at zero even when a context is supplied.
struct AmpContext {
    const amp::DiscriminatorHead* head = nullptr;
    const nn::RunningNorm* feat_norm = nullptr;
    amp::ProjectionMode mode = amp::ProjectionMode::kPartial;
    long long style_evals = 0;
};

// Frozen stage-1 policy for the hierarchical variant. It sees the first 44 raw
// observation entries normalized by its own (frozen) stats, never the live stage-2 ones.
struct FrozenBase {
    PolicyHead head;
    nn::RunningNorm obs_norm;
};

namespace detail {

inline void require_finite(double x, const char* what, int env, int t) {
    if (!std::isfinite(x))
        throw NumericError(std::string("collect_rollouts: non-finite ") + what + " at env " +
                           std::to_string(env) + " step " + std::to_string(t));
}

inline sim::Action compose_exec_action(const Vec& trained, Variant variant, const FrozenBase* base,
                                       const Vec& raw_obs) {
    if (variant != Variant::kHierarchical) return sim::Action::from_vec(trained);
    // Legs replay the frozen policy's mean action for the stage-1 slice of the raw
    // observation; the trained head supplies arm(3) + grip(1).
    Vec base_in(raw_obs.begin(), raw_obs.begin() + base->obs_norm.dim());
    const Vec legs = mean_action(base->head, base->obs_norm.normalize(base_in));
    sim::Action a;
    for (int j = 0; j < 8; ++j) a.v[static_cast<size_t>(j)] = legs[static_cast<size_t>(j)];
    for (int j = 0; j < 4; ++j) a.v[static_cast<size_t>(8 + j)] = trained[static_cast<size_t>(j)];
    return a;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Rollout collection. One segment of `horizon` steps per runner, env-major (that order
// is the normalizer-update contract). Episodes ending inside the segment reset in
// place. A timeout is a bookkeeping cut, not a real terminal: its value bootstrap is
// folded into the reward so the advantage recursion can treat every done uniformly.

inline RolloutBatch collect_rollouts(const PolicyHead& policy, const nn::NetParams& value_net,
                                     std::vector<sim::EnvRunner>& envs, nn::RunningNorm& obs_norm,
                                     std::vector<Rng>& action_rngs, const Config& cfg,
                                     Variant variant, AmpContext* amp_ctx, const FrozenBase* base,
                                     CollectStats* stats_out) {
    const int num_envs = static_cast<int>(envs.size());
    const int horizon = cfg.ppo.horizon;
    if (num_envs < 1) throw ContractError("collect_rollouts: need at least one environment");
    if (horizon < 1) throw ContractError("collect_rollouts: horizon must be positive");
    if (action_rngs.size() != envs.size())
        throw ContractError("collect_rollouts: one action rng per environment");
    const bool use_disc = variant_uses_disc(variant);
    if (use_disc && (amp_ctx == nullptr || amp_ctx->head == nullptr || amp_ctx->feat_norm == nullptr))
        throw ContractError("collect_rollouts: adversarial variant needs a discriminator context");
    if (variant == Variant::kHierarchical && base == nullptr)
        throw ContractError("collect_rollouts: hierarchical variant needs the frozen base");

    const int n = num_envs * horizon;
    RolloutBatch b;
    b.num_envs = num_envs;
    b.horizon = horizon;
    b.obs.resize(static_cast<size_t>(n));
    b.raw_obs.resize(static_cast<size_t>(n));
    b.actions.resize(static_cast<size_t>(n));
    b.exec_actions.resize(static_cast<size_t>(n));
    b.log_probs.assign(static_cast<size_t>(n), 0.0);
    b.values.assign(static_cast<size_t>(n), 0.0);
    b.rewards.assign(static_cast<size_t>(n), 0.0);
    b.task_rewards.assign(static_cast<size_t>(n), 0.0);
    b.style_rewards.assign(static_cast<size_t>(n), 0.0);
    b.dones.assign(static_cast<size_t>(n), 0);
    b.values_last.assign(static_cast<size_t>(num_envs), 0.0);
    if (use_disc) b.transitions.reserve(static_cast<size_t>(n));

    CollectStats st;
    for (int e = 0; e < num_envs; ++e) {
        sim::EnvRunner& env = envs[e];
        for (int t = 0; t < horizon; ++t) {
            const size_t slot = static_cast<size_t>(e * horizon + t);
            Vec raw = env.observe_now();
            obs_norm.update(raw);
            Vec nobs = obs_norm.normalize(raw);

            const ActionSample as = sample_action(policy, nobs, action_rngs[static_cast<size_t>(e)]);
            const sim::Action exec = detail::compose_exec_action(as.action, variant, base, raw);

            const sim::EnvRunner::StepOut out = env.step(exec);
            const sim::SimState& next = env.state();

            rewards::RewardBreakdown rb = rewards::compute_reward(
                next, out.cmds, exec, out.prev_action, out.diag, out.flags, cfg.env, cfg.rewards);
            if (use_disc) {
                amp::ProjectedTransition tr{amp::project(out.prev, amp_ctx->mode, cfg.env.geometry),
                                            amp::project(next, amp_ctx->mode, cfg.env.geometry)};
                const double style = amp::style_reward(*amp_ctx->head, tr, *amp_ctx->feat_norm);
                ++amp_ctx->style_evals;
                rewards::finalize_with_style(rb, style, cfg.rewards);
                b.transitions.push_back(std::move(tr));
            }

            double r = rb.total;
            const double v = value_of(value_net, nobs);
            if (out.flags.timeout && !out.flags.failure()) {
                // Normalized with current stats but not folded into them; only
                // policy-input observations feed the running estimate.
                r += cfg.ppo.gamma * value_of(value_net, obs_norm.normalize(env.observe_now()));
            }
            detail::require_finite(r, "reward", e, t);
            detail::require_finite(v, "value", e, t);
            detail::require_finite(as.log_prob, "log-prob", e, t);

            b.obs[slot] = std::move(nobs);
            b.raw_obs[slot] = std::move(raw);
            b.actions[slot] = as.action;
            b.exec_actions[slot] = exec;
            b.log_probs[slot] = as.log_prob;
            b.values[slot] = v;
            b.rewards[slot] = r;
            b.task_rewards[slot] = rb.task;
            b.style_rewards[slot] = rb.style;
            b.dones[slot] = out.flags.any() ? 1 : 0;

            ++st.steps;
            st.reward_mean += r;
            st.task_mean += rb.task;
            st.style_mean += rb.style;
            st.tracking_mean += rb.tracking;
            st.regularization_mean += rb.regularization;
            st.gait_mean += rb.gait_shaping;
            st.lin_vel_err += rewards::tracking_errors(next, out.cmds, cfg.env.geometry).lin_vel;
            if (out.flags.any()) {
                ++st.episodes_ended;
                if (out.flags.failure()) ++st.failures;
                env.reset();
            }
        }
        // Segment tail: bootstrap for the unfinished episode. The done flag zeroes it
        // out when the last step terminated, so computing it unconditionally is safe.
        b.values_last[static_cast<size_t>(e)] =
            value_of(value_net, obs_norm.normalize(env.observe_now()));
    }

    if (st.steps > 0) {
        const double inv = 1.0 / static_cast<double>(st.steps);
        st.reward_mean *= inv;
        st.task_mean *= inv;
        st.style_mean *= inv;
        st.tracking_mean *= inv;
        st.regularization_mean *= inv;
        st.gait_mean *= inv;
        st.lin_vel_err *= inv;
    }
    if (stats_out) *stats_out = st;
    return b;
}

// ---------------------------------------------------------------------------
// Generalized advantage estimation for one environment's segment. `values` carries
// horizon+1 entries (per-step values plus the tail bootstrap); a done cuts both the
// delta's bootstrap and the recursion.

struct GaeResult {
    Vec advantages;
    Vec returns;
};

inline GaeResult compute_gae(const Vec& rewards, const Vec& values,
                             const std::vector<unsigned char>& dones, double gamma, double lambda) {
    const size_t t_len = rewards.size();
    if (values.size() != t_len + 1)
        throw ContractError("compute_gae: values must hold one more entry than rewards");
    if (dones.size() != t_len) throw ContractError("compute_gae: dones/rewards length mismatch");
    GaeResult out;
    out.advantages.assign(t_len, 0.0);
    out.returns.assign(t_len, 0.0);
    double acc = 0.0;
    for (size_t i = t_len; i-- > 0;) {
        const double mask = dones[i] ? 0.0 : 1.0;
        const double delta = rewards[i] + gamma * mask * values[i + 1] - values[i];
        acc = delta + gamma * lambda * mask * acc;
        out.advantages[i] = acc;
        out.returns[i] = acc + values[i];
    }
    return out;
}

// Fills batch.advantages / batch.returns env by env.
inline void add_gae(RolloutBatch& b, double gamma, double lambda) {
    const int n = b.size();
    b.advantages.assign(static_cast<size_t>(n), 0.0);
    b.returns.assign(static_cast<size_t>(n), 0.0);
    for (int e = 0; e < b.num_envs; ++e) {
        const size_t lo = static_cast<size_t>(e * b.horizon);
        Vec r(b.rewards.begin() + static_cast<std::ptrdiff_t>(lo),
              b.rewards.begin() + static_cast<std::ptrdiff_t>(lo) + b.horizon);
        Vec v(b.values.begin() + static_cast<std::ptrdiff_t>(lo),
              b.values.begin() + static_cast<std::ptrdiff_t>(lo) + b.horizon);
        v.push_back(b.values_last[static_cast<size_t>(e)]);
        std::vector<unsigned char> d(b.dones.begin() + static_cast<std::ptrdiff_t>(lo),
                                     b.dones.begin() + static_cast<std::ptrdiff_t>(lo) + b.horizon);
        const GaeResult g = compute_gae(r, v, d, gamma, lambda);
        std::copy(g.advantages.begin(), g.advantages.end(),
                  b.advantages.begin() + static_cast<std::ptrdiff_t>(lo));
        std::copy(g.returns.begin(), g.returns.end(),
                  b.returns.begin() + static_cast<std::ptrdiff_t>(lo));
    }
}

// ---------------------------------------------------------------------------
// PPO update.

struct PpoMetrics {
    double surrogate = 0.0;
    double value_loss = 0.0;  // 0.5 * (V - return)^2, before the value_coef scaling
    double kl = 0.0;          // mean(logp_old - logp_new) estimate; may be negative
    double clip_fraction = 0.0;
    double entropy = 0.0;
};

namespace detail {

// Fisher-Yates with the shuffle stream; the draw order is part of the determinism
// contract.
inline std::vector<int> shuffled_indices(int n, Rng& rng) {
    std::vector<int> idx(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) idx[static_cast<size_t>(i)] = i;
    for (int i = n - 1; i > 0; --i) {
        const int j = static_cast<int>(rng.below(static_cast<std::uint64_t>(i) + 1));
        std::swap(idx[static_cast<size_t>(i)], idx[static_cast<size_t>(j)]);
    }
    return idx;
}

}  // namespace detail

// Epochs x shuffled minibatches of the clipped surrogate with entropy bonus, plus an
// independent Adam on the value net. Advantages are normalized (mean 0, population
// std 1) once per call, over the whole batch. Policy parameters and log-std share one
// flat Adam state, in that order.
inline PpoMetrics ppo_update(PolicyHead& policy, nn::NetParams& value_net, const RolloutBatch& b,
                             const PpoConfig& cfg, nn::AdamState& opt_policy,
                             nn::AdamState& opt_value, Rng& shuffle_rng) {
    const int n = b.size();
    if (n < 1) throw ContractError("ppo_update: empty batch");
    if (b.advantages.size() != static_cast<size_t>(n))
        throw ContractError("ppo_update: advantages missing (run add_gae first)");
    const int act_dim = policy.net.spec.output_size();
    const int n_policy = static_cast<int>(policy.net.values.size());

    Vec adv = b.advantages;
    double mean = 0.0;
    for (double a : adv) mean += a;
    mean /= n;
    double var = 0.0;
    for (double a : adv) var += sq(a - mean);
    const double inv_sd = 1.0 / (std::sqrt(var / n) + 1e-8);
    for (double& a : adv) a = (a - mean) * inv_sd;

    const nn::AdamConfig pol_opt{cfg.lr, 0.9, 0.999, 1e-8};
    const nn::AdamConfig val_opt{cfg.lr, 0.9, 0.999, 1e-8};

    PpoMetrics m;
    long long seen = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const std::vector<int> order = detail::shuffled_indices(n, shuffle_rng);
        for (int start = 0; start < n; start += cfg.minibatch) {
            const int stop = std::min(n, start + cfg.minibatch);
            const int mb = stop - start;
            Vec pol_grad(static_cast<size_t>(n_policy), 0.0);
            Vec logstd_grad(static_cast<size_t>(act_dim), 0.0);
            Vec val_grad(value_net.values.size(), 0.0);
            const double inv_m = 1.0 / mb;

            for (int k = start; k < stop; ++k) {
                const size_t i = static_cast<size_t>(order[static_cast<size_t>(k)]);
                const Vec& obs = b.obs[i];
                const Vec& act = b.actions[i];
                const double a_norm = adv[i];

                const Vec mu = nn::net_forward(policy.net, obs);
                const double logp_new = gaussian_log_prob(mu, policy.log_std, act);
                const double diff = logp_new - b.log_probs[i];
                const double ratio = std::exp(diff);
                if (!std::isfinite(ratio))
                    throw NumericError("ppo_update: non-finite ratio at sample " + std::to_string(i));

                const bool clipped_out = (ratio > 1.0 + cfg.clip && a_norm > 0.0) ||
                                         (ratio < 1.0 - cfg.clip && a_norm < 0.0);
                m.surrogate += std::min(ratio * a_norm,
                                        std::clamp(ratio, 1.0 - cfg.clip, 1.0 + cfg.clip) * a_norm);
                m.kl += -diff;
                m.clip_fraction += std::abs(ratio - 1.0) > cfg.clip ? 1.0 : 0.0;
                m.entropy += gaussian_entropy(policy.log_std);
                ++seen;

                if (!clipped_out) {
                    // d surrogate / d mu_j = A * ratio * (a_j - mu_j) / sigma_j^2,
                    // d / d log-sigma_j = A * ratio * (z_j^2 - 1).
                    const double coef = a_norm * ratio * inv_m;
                    Vec out_grad(static_cast<size_t>(act_dim));
                    for (int j = 0; j < act_dim; ++j) {
                        const size_t sj = static_cast<size_t>(j);
                        const double sd = std::exp(policy.log_std[sj]);
                        const double z = (act[sj] - mu[sj]) / sd;
                        out_grad[sj] = coef * z / sd;
                        logstd_grad[sj] += coef * (z * z - 1.0);
                    }
                    const nn::BackwardResult bk = nn::net_backward(policy.net, obs, out_grad);
                    for (int j = 0; j < n_policy; ++j)
                        pol_grad[static_cast<size_t>(j)] += bk.param_grad[static_cast<size_t>(j)];
                }
                // Entropy ascent: dH/dlog-sigma_j = 1, independent of the state.
                for (int j = 0; j < act_dim; ++j)
                    logstd_grad[static_cast<size_t>(j)] += cfg.entropy_coef * inv_m;

                const double v = value_of(value_net, obs);
                const double verr = v - b.returns[i];
                m.value_loss += 0.5 * sq(verr);
                const nn::BackwardResult vb =
                    nn::net_backward(value_net, obs, Vec{cfg.value_coef * verr * inv_m});
                for (size_t j = 0; j < val_grad.size(); ++j) val_grad[j] += vb.param_grad[j];
            }

            // Adam minimizes; the policy gradient above points uphill.
            Vec flat(static_cast<size_t>(n_policy + act_dim));
            Vec flat_grad(static_cast<size_t>(n_policy + act_dim));
            for (int j = 0; j < n_policy; ++j) {
                flat[static_cast<size_t>(j)] = policy.net.values[static_cast<size_t>(j)];
                flat_grad[static_cast<size_t>(j)] = -pol_grad[static_cast<size_t>(j)];
            }
            for (int j = 0; j < act_dim; ++j) {
                flat[static_cast<size_t>(n_policy + j)] = policy.log_std[static_cast<size_t>(j)];
                flat_grad[static_cast<size_t>(n_policy + j)] = -logstd_grad[static_cast<size_t>(j)];
            }
            nn::adam_step(flat, flat_grad, opt_policy, pol_opt);
            for (int j = 0; j < n_policy; ++j)
                policy.net.values[static_cast<size_t>(j)] = flat[static_cast<size_t>(j)];
            for (int j = 0; j < act_dim; ++j)
                policy.log_std[static_cast<size_t>(j)] = flat[static_cast<size_t>(n_policy + j)];
            clamp_log_std(policy.log_std, cfg);

            nn::adam_step(value_net.values, val_grad, opt_value, val_opt);
        }
    }

    const double inv_seen = 1.0 / static_cast<double>(seen);
    m.surrogate *= inv_seen;
    m.value_loss *= inv_seen;
    m.kl *= inv_seen;
    m.clip_fraction *= inv_seen;
    m.entropy *= inv_seen;
    if (!std::isfinite(m.surrogate) || !std::isfinite(m.value_loss))
        throw NumericError("ppo_update: non-finite loss");
    return m;
}

// ---------------------------------------------------------------------------
// Curriculum: one forward step, never back. Advances only on a full window whose mean
// survival and velocity error both clear their thresholds.

struct IterStats {
    double survival = 1.0;
    double lin_vel_err = 0.0;
};

inline int curriculum_advance(int phase, const std::vector<IterStats>& window,
                              const CurriculumConfig& cc) {
    if (phase >= 2) return phase;
    if (static_cast<int>(window.size()) < cc.window) return phase;
    double survival = 0.0, err = 0.0;
    for (const IterStats& w : window) {
        survival += w.survival;
        err += w.lin_vel_err;
    }
    survival /= static_cast<double>(window.size());
    err /= static_cast<double>(window.size());
    return (survival > cc.survival_threshold && err < cc.lin_vel_err_threshold) ? phase + 1 : phase;
}

// ---------------------------------------------------------------------------
// Training loops.

namespace detail {

// Append-only per-iteration CSV. Header goes out once at open; every row is flushed so
// a crash leaves a readable log.
class TrainLog {
  public:
    TrainLog(const std::string& path, const std::string& header) {
        if (path.empty()) return;
        f_.open(path, std::ios::binary | std::ios::trunc);
        if (!f_) throw IoError("cannot open training log for write: " + path);
        f_ << header << "\n";
        f_.flush();
    }
    void row(const std::string& line) {
        if (!f_.is_open()) return;
        f_ << line << "\n";
        f_.flush();
    }

  private:
    std::ofstream f_;
};

inline std::string fmt(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", x);
    return std::string(buf);
}

inline double mean_of(const Vec& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

inline std::vector<Rng> make_action_rngs(std::uint64_t seed, int num_envs) {
    std::vector<Rng> rngs;
    rngs.reserve(static_cast<size_t>(num_envs));
    for (int e = 0; e < num_envs; ++e)
        rngs.push_back(derive_rng(seed, stream::kAction, static_cast<std::uint64_t>(e)));
    return rngs;
}

}  // namespace detail

// Stage 1: velocity/heading/EE tracking on randomized ground, no cart. Returns the
// checkpoint; optionally appends one CSV row per iteration to log_path. On numerical
// divergence the partial state is dumped next to the log before the error propagates.
inline nn::Checkpoint train_stage1(const Config& cfg, std::uint64_t seed,
                                   const std::string& log_path = "") {
    const sim::Backend backend = sim::backend_from_name(cfg.experiment.train_backend);
    const int obs_dim = sim::obs_dim(sim::Stage::kLocomotion);

    PolicyHead policy = make_policy(obs_dim, cfg.nets.policy_hidden, 12, cfg.ppo.log_std_init, seed);
    nn::NetParams value = make_value_net(obs_dim, cfg.nets.value_hidden, seed + 1);
    nn::RunningNorm obs_norm(static_cast<size_t>(obs_dim));
    nn::AdamState opt_policy, opt_value;

    std::vector<sim::EnvRunner> envs;
    envs.reserve(static_cast<size_t>(cfg.ppo.num_envs));
    for (int e = 0; e < cfg.ppo.num_envs; ++e)
        envs.emplace_back(cfg, sim::Stage::kLocomotion, backend, seed, e);
    std::vector<Rng> action_rngs = detail::make_action_rngs(seed, cfg.ppo.num_envs);
    Rng shuffle_rng = derive_rng(seed, stream::kShuffle);

    nn::Checkpoint ckpt;
    ckpt.stage = 1;
    ckpt.variant = variant_name(Variant::kLocomotion);
    ckpt.seed = seed;
    ckpt.config_hash = config_hash(cfg);

    detail::TrainLog log(log_path,
                         "iter,steps,reward,tracking,regularization,gait,lin_vel_err,survival,"
                         "surrogate,value_loss,kl,clip_fraction,entropy,log_std_mean");

    long long steps_total = 0;
    for (int it = 1; it <= cfg.ppo.stage1_iterations; ++it) {
        try {
            CollectStats st;
            RolloutBatch batch = collect_rollouts(policy, value, envs, obs_norm, action_rngs, cfg,
                                                  Variant::kLocomotion, nullptr, nullptr, &st);
            add_gae(batch, cfg.ppo.gamma, cfg.ppo.gae_lambda);
            const PpoMetrics pm =
                ppo_update(policy, value, batch, cfg.ppo, opt_policy, opt_value, shuffle_rng);
            steps_total += st.steps;
            log.row(std::to_string(it) + "," + std::to_string(steps_total) + "," +
                    detail::fmt(st.reward_mean) + "," + detail::fmt(st.tracking_mean) + "," +
                    detail::fmt(st.regularization_mean) + "," + detail::fmt(st.gait_mean) + "," +
                    detail::fmt(st.lin_vel_err) + "," + detail::fmt(st.survival()) + "," +
                    detail::fmt(pm.surrogate) + "," + detail::fmt(pm.value_loss) + "," +
                    detail::fmt(pm.kl) + "," + detail::fmt(pm.clip_fraction) + "," +
                    detail::fmt(pm.entropy) + "," + detail::fmt(detail::mean_of(policy.log_std)));
            ckpt.iterations_done = it;
        } catch (const NumericError&) {
            ckpt.policy = policy.net;
            ckpt.log_std = policy.log_std;
            ckpt.value = value;
            ckpt.obs_norm = obs_norm;
            ckpt.opt_policy = opt_policy;
            ckpt.opt_value = opt_value;
            ckpt.rng_state = shuffle_rng.state();
            if (!log_path.empty()) nn::save_checkpoint(ckpt, log_path + ".dump.json");
            throw;
        }
    }

    ckpt.policy = policy.net;
    ckpt.log_std = policy.log_std;
    ckpt.value = value;
    ckpt.obs_norm = obs_norm;
    ckpt.opt_policy = opt_policy;
    ckpt.opt_value = opt_value;
    ckpt.rng_state = shuffle_rng.state();
    ckpt.curriculum_phase = 1;
    return ckpt;
}

// Stage 2: cart pushing, warm-started from stage 1 (input widened 44 -> 48 with zero
// weights on the new columns, so behaviour is bit-identical until the cart features
// move). The curriculum starts with straight pushes on short episodes by zeroing the
// phase-2 extension in a private config copy; runners observe the copy through a
// pointer, so restoring the value flips every environment at once.
inline nn::Checkpoint train_stage2(const Config& cfg, const nn::Checkpoint& stage1, Variant variant,
                                   const amp::RefDataset* ref, std::uint64_t seed,
                                   const std::string& log_path = "") {
    if (variant == Variant::kLocomotion)
        throw ContractError("train_stage2: pick a stage-2 variant");
    if (stage1.stage != 1) throw ContractError("train_stage2: warm-start checkpoint is not stage 1");
    const bool use_disc = variant_uses_disc(variant);
    if (use_disc && ref == nullptr)
        throw ContractError("train_stage2: adversarial variant needs a reference dataset");

    const sim::Backend backend = sim::backend_from_name(cfg.experiment.train_backend);
    const int obs_dim = sim::obs_dim(sim::Stage::kCartPush);
    const int act_dim = trained_action_dim(variant);

    PolicyHead policy;
    nn::NetParams value;
    nn::RunningNorm obs_norm(static_cast<size_t>(obs_dim));
    FrozenBase base;
    if (variant == Variant::kHierarchical) {
        policy = make_policy(obs_dim, cfg.nets.policy_hidden, act_dim, cfg.ppo.log_std_init, seed);
        base.head = PolicyHead{stage1.policy, stage1.log_std};
        base.obs_norm = stage1.obs_norm;
        if (cfg.ppo.warm_start) {
            value = nn::net_extend_input(stage1.value, obs_dim);
            obs_norm = stage1.obs_norm;
            obs_norm.extend(static_cast<size_t>(obs_dim));
        } else {
            value = make_value_net(obs_dim, cfg.nets.value_hidden, seed + 1);
        }
    } else if (cfg.ppo.warm_start) {
        policy.net = nn::net_extend_input(stage1.policy, obs_dim);
        policy.log_std = stage1.log_std;
        clamp_log_std(policy.log_std, cfg.ppo);
        value = nn::net_extend_input(stage1.value, obs_dim);
        obs_norm = stage1.obs_norm;
        obs_norm.extend(static_cast<size_t>(obs_dim));
    } else {
        policy = make_policy(obs_dim, cfg.nets.policy_hidden, act_dim, cfg.ppo.log_std_init, seed);
        value = make_value_net(obs_dim, cfg.nets.value_hidden, seed + 1);
    }
    nn::AdamState opt_policy, opt_value;

    AmpContext amp_ctx;
    amp::DiscriminatorHead disc;
    nn::RunningNorm disc_norm(1);
    std::optional<amp::ReplayBuffer> replay;
    nn::AdamState opt_disc;
    Rng amp_rng = derive_rng(seed, stream::kAmp);
    const nn::AdamConfig disc_opt{cfg.amp.disc_lr, 0.9, 0.999, 1e-8};
    if (use_disc) {
        const amp::ProjectionMode mode = variant_mode(variant);
        if (ref->proj_dim != amp::projection_dim(mode))
            throw ContractError("train_stage2: reference dataset projection dim " +
                                std::to_string(ref->proj_dim) + " does not match variant");
        disc = amp::make_discriminator(ref->proj_dim, cfg.nets.disc_hidden, cfg.amp.w_gp, seed + 2);
        disc_norm = amp::ref_feature_norm(*ref);
        replay.emplace(cfg.amp.replay_capacity);
        amp_ctx.head = &disc;
        amp_ctx.feat_norm = &disc_norm;
        amp_ctx.mode = mode;
    }

    Config work = cfg;  // stable storage: runners keep a pointer to this copy
    const double phase2_full = cfg.env.episode.phase2_seconds;
    work.env.episode.phase2_seconds = 0.0;  // curriculum phase 1: straight pushes only
    std::vector<sim::EnvRunner> envs;
    envs.reserve(static_cast<size_t>(cfg.ppo.num_envs));
    for (int e = 0; e < cfg.ppo.num_envs; ++e)
        envs.emplace_back(work, sim::Stage::kCartPush, backend, seed, e);
    std::vector<Rng> action_rngs = detail::make_action_rngs(seed, cfg.ppo.num_envs);
    Rng shuffle_rng = derive_rng(seed, stream::kShuffle);

    nn::Checkpoint ckpt;
    ckpt.stage = 2;
    ckpt.variant = variant_name(variant);
    ckpt.seed = seed;
    ckpt.config_hash = config_hash(cfg);

    std::string header =
        "iter,steps,reward,task,tracking,regularization,lin_vel_err,survival,phase,"
        "surrogate,value_loss,kl,clip_fraction,entropy,log_std_mean";
    if (use_disc) header += ",style,disc_loss,d_ref,d_pol";
    detail::TrainLog log(log_path, header);

    int phase = 1;
    std::vector<IterStats> window;
    long long steps_total = 0;
    for (int it = 1; it <= cfg.ppo.stage2_iterations; ++it) {
        try {
            CollectStats st;
            RolloutBatch batch =
                collect_rollouts(policy, value, envs, obs_norm, action_rngs, work, variant,
                                 use_disc ? &amp_ctx : nullptr,
                                 variant == Variant::kHierarchical ? &base : nullptr, &st);

            amp::AmpMetrics am;
            if (use_disc) {
                for (amp::ProjectedTransition& tr : batch.transitions) replay->push(std::move(tr));
                // One discriminator step per policy epoch, once the replay can fill a
                // batch (tiny smoke configs may need a couple of collections first).
                if (replay->size() >= static_cast<std::size_t>(cfg.amp.batch_size)) {
                    const int rounds = cfg.ppo.epochs * cfg.amp.updates_per_epoch;
                    for (int k = 0; k < rounds; ++k)
                        am = amp::amp_update(disc, *ref, *replay, disc_norm, cfg.amp.batch_size,
                                             opt_disc, disc_opt, amp_rng);
                }
            }

            add_gae(batch, cfg.ppo.gamma, cfg.ppo.gae_lambda);
            const PpoMetrics pm =
                ppo_update(policy, value, batch, cfg.ppo, opt_policy, opt_value, shuffle_rng);
            steps_total += st.steps;

            window.push_back({st.survival(), st.lin_vel_err});
            if (static_cast<int>(window.size()) > cfg.curriculum.window)
                window.erase(window.begin());
            const int next_phase = curriculum_advance(phase, window, cfg.curriculum);
            if (next_phase != phase) {
                phase = next_phase;
                work.env.episode.phase2_seconds = phase2_full;  // curved pushes from here on
                window.clear();
            }

            std::string row = std::to_string(it) + "," + std::to_string(steps_total) + "," +
                              detail::fmt(st.reward_mean) + "," + detail::fmt(st.task_mean) + "," +
                              detail::fmt(st.tracking_mean) + "," +
                              detail::fmt(st.regularization_mean) + "," +
                              detail::fmt(st.lin_vel_err) + "," + detail::fmt(st.survival()) + "," +
                              std::to_string(phase) + "," + detail::fmt(pm.surrogate) + "," +
                              detail::fmt(pm.value_loss) + "," + detail::fmt(pm.kl) + "," +
                              detail::fmt(pm.clip_fraction) + "," + detail::fmt(pm.entropy) + "," +
                              detail::fmt(detail::mean_of(policy.log_std));
            if (use_disc)
                row += "," + detail::fmt(st.style_mean) + "," + detail::fmt(am.loss) + "," +
                       detail::fmt(am.mean_d_ref) + "," + detail::fmt(am.mean_d_pol);
            log.row(row);
            ckpt.iterations_done = it;
        } catch (const NumericError&) {
            ckpt.policy = policy.net;
            ckpt.log_std = policy.log_std;
            ckpt.value = value;
            ckpt.obs_norm = obs_norm;
            if (!log_path.empty()) nn::save_checkpoint(ckpt, log_path + ".dump.json");
            throw;
        }
    }

    ckpt.policy = policy.net;
    ckpt.log_std = policy.log_std;
    ckpt.value = value;
    ckpt.obs_norm = obs_norm;
    ckpt.opt_policy = opt_policy;
    ckpt.opt_value = opt_value;
    ckpt.rng_state = shuffle_rng.state();
    ckpt.curriculum_phase = phase;
    if (use_disc) {
        ckpt.disc = disc.net;
        ckpt.opt_disc = opt_disc;
        ckpt.disc_norm = disc_norm;
    }
    if (variant == Variant::kHierarchical) {
        ckpt.base_policy = base.head.net;
        ckpt.base_log_std = base.head.log_std;
        ckpt.base_obs_norm = base.obs_norm;
    }
    return ckpt;
}

// ---------------------------------------------------------------------------
// Deterministic evaluation-time executor for a trained checkpoint: frozen observation
// stats, mean actions (no exploration), variant-aware composition. Works for stage-1
// bundles too (they are plain 12-output policies).

class Actor {
  public:
    explicit Actor(const nn::Checkpoint& c)
        : variant_(variant_from_name(c.variant)),
          policy_{c.policy, c.log_std},
          obs_norm_(c.obs_norm) {
        if (variant_ == Variant::kHierarchical) {
            if (!c.base_policy || !c.base_log_std || !c.base_obs_norm)
                throw ContractError("Actor: hierarchical checkpoint is missing its frozen base");
            base_ = PolicyHead{*c.base_policy, *c.base_log_std};
            base_norm_ = *c.base_obs_norm;
        }
        if (policy_.net.spec.output_size() != trained_action_dim(variant_))
            throw ContractError("Actor: policy output size does not match the variant");
    }

    int obs_dim() const { return policy_.net.spec.input_size(); }
    Variant variant() const { return variant_; }

    sim::Action act(const Vec& raw_obs) const {
        const Vec trained = mean_action(policy_, obs_norm_.normalize(raw_obs));
        if (variant_ != Variant::kHierarchical) return sim::Action::from_vec(trained);
        Vec base_in(raw_obs.begin(),
                    raw_obs.begin() + static_cast<std::ptrdiff_t>(base_norm_.dim()));
        const Vec legs = mean_action(base_, base_norm_.normalize(base_in));
        sim::Action a;
        for (int j = 0; j < 8; ++j) a.v[static_cast<size_t>(j)] = legs[static_cast<size_t>(j)];
        for (int j = 0; j < 4; ++j)
            a.v[static_cast<size_t>(8 + j)] = trained[static_cast<size_t>(j)];
        return a;
    }

  private:
    Variant variant_;
    PolicyHead policy_;
    nn::RunningNorm obs_norm_;
    PolicyHead base_;
    nn::RunningNorm base_norm_{0};
};

}  // namespace cartloco::rl
