#pragma once
// Evaluation: per-episode rollouts reduced to the survival/tracking-error table, the
// parameter-robustness sweep, and single-episode recordings (trajectory + per-term
// reward rows). Tracking-error definitions are shared with the reward module
// (rewards::tracking_errors), so the reported tables measure exactly what the policy
// was paid for. Episodes are independent with per-episode RNG streams; reductions are
// fixed-order, so results do not depend on scheduling.

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "cartloco/amp.hpp"
#include "cartloco/checkpoint.hpp"
#include "cartloco/config.hpp"
#include "cartloco/csvio.hpp"
#include "cartloco/env.hpp"
#include "cartloco/errors.hpp"
#include "cartloco/parallel.hpp"
#include "cartloco/ppo.hpp"
#include "cartloco/rewards.hpp"
#include "cartloco/rng.hpp"

namespace cartloco::harness {

// Mean with a 95% normal-approximation confidence half-width (1.96 sd / sqrt(n), sample
// sd). One observation has no variance estimate; zero observations have no mean. Missing
// statistics are reported missing, never fabricated.
struct MetricStat {
    double mean = 0.0;
    double ci = 0.0;
    bool has_value = false;
    bool has_ci = false;
};

inline MetricStat stat_of(const std::vector<double>& xs) {
    MetricStat s;
    if (xs.empty()) return s;
    s.has_value = true;
    double sum = 0.0;
    for (double x : xs) sum += x;
    s.mean = sum / static_cast<double>(xs.size());
    if (xs.size() < 2) return s;
    double sq_sum = 0.0;
    for (double x : xs) sq_sum += sq(x - s.mean);
    const double sd = std::sqrt(sq_sum / static_cast<double>(xs.size() - 1));
    s.ci = 1.96 * sd / std::sqrt(static_cast<double>(xs.size()));
    s.has_ci = true;
    return s;
}

// Raw per-episode evaluation outcomes; mergeable across seeds before reduction.
struct EvalEpisodes {
    std::vector<char> survived;
    // Per-episode means over surviving steps; absent when an episode had none.
    std::vector<double> lin_vel, ang_vel, heading, ee_pos, ee_ori;

    void merge(const EvalEpisodes& o) {
        survived.insert(survived.end(), o.survived.begin(), o.survived.end());
        lin_vel.insert(lin_vel.end(), o.lin_vel.begin(), o.lin_vel.end());
        ang_vel.insert(ang_vel.end(), o.ang_vel.begin(), o.ang_vel.end());
        heading.insert(heading.end(), o.heading.begin(), o.heading.end());
        ee_pos.insert(ee_pos.end(), o.ee_pos.begin(), o.ee_pos.end());
        ee_ori.insert(ee_ori.end(), o.ee_ori.begin(), o.ee_ori.end());
    }
};

// One metrics-table row: survival percentage and the five tracking errors, each with a
// 95% CI over episodes.
struct EvalResult {
    std::string variant;
    std::string backend;
    int episodes = 0;
    int survived = 0;
    MetricStat survival_pct, lin_vel, ang_vel, heading, ee_pos, ee_ori;
};

inline EvalResult reduce_eval(const EvalEpisodes& ep, const std::string& variant,
                              const std::string& backend) {
    EvalResult r;
    r.variant = variant;
    r.backend = backend;
    r.episodes = static_cast<int>(ep.survived.size());
    std::vector<double> surv;
    surv.reserve(ep.survived.size());
    for (char s : ep.survived) {
        surv.push_back(s ? 100.0 : 0.0);
        r.survived += s ? 1 : 0;
    }
    r.survival_pct = stat_of(surv);
    r.lin_vel = stat_of(ep.lin_vel);
    r.ang_vel = stat_of(ep.ang_vel);
    r.heading = stat_of(ep.heading);
    r.ee_pos = stat_of(ep.ee_pos);
    r.ee_ori = stat_of(ep.ee_ori);
    return r;
}

using ActFn = std::function<sim::Action(const Vec&)>;

namespace detail {

// Episode horizon scaled to the evaluation length: locomotion episodes run
// eval_seconds; cart-push episodes keep the phase-1/phase-2 proportion.
inline Config eval_config(const Config& cfg, sim::Stage stage) {
    Config work = cfg;
    const double T = cfg.experiment.eval_seconds;
    if (stage == sim::Stage::kLocomotion) {
        work.env.episode.stage1_seconds = T;
        // One sampled command per evaluation episode.
        work.env.commands.resample_steps = 1 << 30;
    } else {
        const double total = cfg.env.episode.phase1_seconds + cfg.env.episode.phase2_seconds;
        work.env.episode.phase1_seconds = T * cfg.env.episode.phase1_seconds / total;
        work.env.episode.phase2_seconds = T * cfg.env.episode.phase2_seconds / total;
    }
    return work;
}

struct EpisodeOutcome {
    bool survived = false;
    long long surviving_steps = 0;
    rewards::TrackingErrors sums;  // accumulated over surviving steps
};

// One evaluation episode: act on raw observations, step to termination. Steps are
// "surviving" while no failure has occurred; the failing step itself is excluded.
inline EpisodeOutcome run_episode(const ActFn& act, const Config& work, sim::Stage stage,
                                  sim::Backend backend, std::uint64_t master, int index,
                                  double pin_vx) {
    sim::EnvRunner env(work, stage, backend, master, index);
    if (pin_vx >= 0.0) {
        sim::CommandSet c = env.commands();
        c.vx = pin_vx;
        env.set_commands(c);
    }
    EpisodeOutcome out;
    for (;;) {
        const sim::EnvRunner::StepOut so = env.step(act(env.observe_now()));
        if (so.flags.failure()) break;
        const rewards::TrackingErrors te =
            rewards::tracking_errors(env.state(), so.cmds, work.env.geometry);
        out.sums.lin_vel += te.lin_vel;
        out.sums.lat_vel += te.lat_vel;
        out.sums.ang_vel += te.ang_vel;
        out.sums.heading += te.heading;
        out.sums.ee_pos += te.ee_pos;
        out.sums.ee_ori += te.ee_ori;
        ++out.surviving_steps;
        if (so.flags.timeout) {
            out.survived = true;
            break;
        }
        if (pin_vx >= 0.0) {
            sim::CommandSet c = env.commands();
            c.vx = pin_vx;
            env.set_commands(c);
        }
    }
    return out;
}

inline void push_outcome(EvalEpisodes& ep, const EpisodeOutcome& o) {
    ep.survived.push_back(o.survived ? 1 : 0);
    if (o.surviving_steps == 0) return;  // no surviving steps: errors stay missing
    const double inv = 1.0 / static_cast<double>(o.surviving_steps);
    ep.lin_vel.push_back(o.sums.lin_vel * inv);
    ep.ang_vel.push_back(o.sums.ang_vel * inv);
    ep.heading.push_back(o.sums.heading * inv);
    ep.ee_pos.push_back(o.sums.ee_pos * inv);
    ep.ee_ori.push_back(o.sums.ee_ori * inv);
}

}  // namespace detail

// Scripted-policy evaluation: episodes indexed 0..n-1 under one master seed, so the
// set replays bit-identically. Episodes run in parallel into preallocated slots;
// reduction is fixed-order. Locomotion evaluations pin the forward-speed command to
// experiment.eval_command_vx; cart-push episodes keep their sampled command sets.
inline EvalEpisodes evaluate_episodes(const ActFn& act, sim::Stage stage, const Config& cfg,
                                      sim::Backend backend, int episodes, std::uint64_t seed) {
    if (episodes < 1) throw ContractError("evaluate: need episodes >= 1");
    const Config work = detail::eval_config(cfg, stage);
    const double pin_vx =
        stage == sim::Stage::kLocomotion ? cfg.experiment.eval_command_vx : -1.0;
    std::vector<detail::EpisodeOutcome> outs(static_cast<size_t>(episodes));
    parallel_for(episodes, [&](int e) {
        outs[static_cast<size_t>(e)] =
            detail::run_episode(act, work, stage, backend, seed, e, pin_vx);
    });
    EvalEpisodes ep;
    for (const detail::EpisodeOutcome& o : outs) detail::push_outcome(ep, o);
    return ep;
}

// Checkpoint evaluation. Never mutates the checkpoint (actor copies what it needs).
inline EvalEpisodes evaluate_episodes(const nn::Checkpoint& ckpt, const Config& cfg,
                                      sim::Backend backend, int episodes, std::uint64_t seed) {
    const rl::Actor actor(ckpt);
    const sim::Stage stage =
        ckpt.stage == 1 ? sim::Stage::kLocomotion : sim::Stage::kCartPush;
    return evaluate_episodes([&actor](const Vec& o) { return actor.act(o); }, stage, cfg, backend,
                             episodes, seed);
}

inline EvalResult evaluate(const nn::Checkpoint& ckpt, const Config& cfg, sim::Backend backend,
                           int episodes, std::uint64_t seed) {
    return reduce_eval(evaluate_episodes(ckpt, cfg, backend, episodes, seed), ckpt.variant,
                       sim::backend_name(backend));
}

// ---------------------------------------------------------------------------
// Metrics table CSV. Missing statistics serialize as empty cells.

inline std::string metrics_csv_header() {
    return "variant,backend,episodes,survival_pct,survival_ci,lin_vel_err,lin_vel_ci,"
           "ang_vel_err,ang_vel_ci,heading_err,heading_ci,ee_pos_err,ee_pos_ci,"
           "ee_ori_err,ee_ori_ci\n";
}

inline std::string metrics_csv_row(const EvalResult& r) {
    auto cell = [](const MetricStat& s, bool ci) {
        if (ci) return s.has_ci ? csv::num(s.ci) : std::string();
        return s.has_value ? csv::num(s.mean) : std::string();
    };
    std::vector<std::string> cells{r.variant, r.backend, std::to_string(r.episodes)};
    for (const MetricStat* s : {&r.survival_pct, &r.lin_vel, &r.ang_vel, &r.heading, &r.ee_pos,
                                &r.ee_ori}) {
        cells.push_back(cell(*s, false));
        cells.push_back(cell(*s, true));
    }
    return csv::join(cells);
}

inline std::string metrics_csv(const std::vector<EvalResult>& rows) {
    std::string out = metrics_csv_header();
    for (const EvalResult& r : rows) out += metrics_csv_row(r);
    return out;
}

// ---------------------------------------------------------------------------
// Parameter-robustness sweep: fix one physical parameter per grid value, keep every
// other randomization live, run fixed-length cart-push trials, apply the documented
// success criterion per value.

enum class SweepAxis { kFriction, kRobotMass, kCartMass, kWheelDamping };

inline const char* sweep_axis_name(SweepAxis a) {
    switch (a) {
        case SweepAxis::kFriction: return "friction";
        case SweepAxis::kRobotMass: return "robot_mass";
        case SweepAxis::kCartMass: return "cart_mass";
        case SweepAxis::kWheelDamping: return "wheel_damping";
    }
    throw ContractError("sweep_axis_name: bad axis");
}

inline SweepAxis sweep_axis_from_name(const std::string& s) {
    if (s == "friction") return SweepAxis::kFriction;
    if (s == "robot_mass") return SweepAxis::kRobotMass;
    if (s == "cart_mass") return SweepAxis::kCartMass;
    if (s == "wheel_damping") return SweepAxis::kWheelDamping;
    throw ConfigError("unknown sweep axis: " + s);
}

struct RobustnessRegion {
    std::string axis;
    std::vector<double> values;
    std::vector<double> survival;     // fraction in [0, 1] per value
    std::vector<double> lin_vel_err;  // mean over trials with surviving steps; NaN if none
    std::vector<char> success;        // survival >= 0.30 and lin_vel_err <= 0.5
};

namespace detail {

inline void apply_axis(Config& work, SweepAxis axis, double v) {
    switch (axis) {
        case SweepAxis::kFriction:
            work.env.randomization.static_friction = {v, v};
            work.env.randomization.dynamic_friction = {v, v};
            return;
        case SweepAxis::kRobotMass:
            work.env.randomization.mass_scale = {v, v};
            return;
        case SweepAxis::kCartMass:
            work.env.randomization.cart_mass_scale = {v, v};
            return;
        case SweepAxis::kWheelDamping:
            work.env.cart.wheel_damping = v;
            return;
    }
    throw ContractError("apply_axis: bad axis");
}

inline void check_axis_range(SweepAxis axis, double v) {
    const bool ok = axis == SweepAxis::kFriction        ? (v >= 0.0 && v <= 2.0)
                    : axis == SweepAxis::kWheelDamping  ? (v >= 0.0 && v <= 0.02)
                                                        : (v >= 0.5 && v <= 1.5);
    if (!ok)
        throw ContractError(std::string("sweep grid value out of the studied range for axis ") +
                            sweep_axis_name(axis) + ": " + csv::num(v));
}

}  // namespace detail

inline RobustnessRegion robustness_sweep(const nn::Checkpoint& ckpt, const Config& cfg,
                                         SweepAxis axis, const std::vector<double>& grid,
                                         int trials, sim::Backend backend, std::uint64_t seed) {
    if (grid.empty()) throw ContractError("robustness_sweep: empty grid");
    if (trials < 1) throw ContractError("robustness_sweep: need trials >= 1");
    if (ckpt.stage != 2) throw ContractError("robustness_sweep: needs a stage-2 checkpoint");
    for (double v : grid) detail::check_axis_range(axis, v);

    const rl::Actor actor(ckpt);
    const ActFn act = [&actor](const Vec& o) { return actor.act(o); };
    RobustnessRegion region;
    region.axis = sweep_axis_name(axis);
    region.values = grid;
    for (size_t i = 0; i < grid.size(); ++i) {
        Config work = detail::eval_config(cfg, sim::Stage::kCartPush);
        detail::apply_axis(work, axis, grid[i]);
        std::vector<detail::EpisodeOutcome> outs(static_cast<size_t>(trials));
        parallel_for(trials, [&](int t) {
            // Distinct deterministic stream per (value, trial).
            outs[static_cast<size_t>(t)] =
                detail::run_episode(act, work, sim::Stage::kCartPush, backend, seed,
                                    static_cast<int>(i) * trials + t, -1.0);
        });
        int survived = 0;
        double err_sum = 0.0;
        long long err_n = 0;
        for (const detail::EpisodeOutcome& o : outs) {
            survived += o.survived ? 1 : 0;
            if (o.surviving_steps > 0) {
                err_sum += o.sums.lin_vel / static_cast<double>(o.surviving_steps);
                ++err_n;
            }
        }
        const double surv = static_cast<double>(survived) / static_cast<double>(trials);
        const double err = err_n > 0 ? err_sum / static_cast<double>(err_n)
                                     : std::numeric_limits<double>::quiet_NaN();
        region.survival.push_back(surv);
        region.lin_vel_err.push_back(err);
        region.success.push_back(surv >= 0.30 && err_n > 0 && err <= 0.5 ? 1 : 0);
    }
    return region;
}

inline std::string region_csv(const RobustnessRegion& r) {
    std::string out = "axis,value,survival,lin_vel_err,success\n";
    for (size_t i = 0; i < r.values.size(); ++i) {
        const bool has_err = std::isfinite(r.lin_vel_err[i]);
        out += csv::join({r.axis, csv::num(r.values[i]), csv::num(r.survival[i]),
                          has_err ? csv::num(r.lin_vel_err[i]) : std::string(),
                          r.success[i] ? "1" : "0"});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Single-episode recording: per-step states, commands, actions, and the per-term reward
// breakdown (style filled from the checkpoint's own discriminator when it carries one).
// Source rows for the trajectory dump and the per-term rollout log.

struct RolloutDump {
    std::vector<sim::SimState> states;  // post-step
    std::vector<sim::CommandSet> cmds;
    std::vector<sim::Action> actions;
    std::vector<rewards::RewardBreakdown> rewards;
};

inline RolloutDump record_rollout(const nn::Checkpoint& ckpt, const Config& cfg,
                                  sim::Backend backend, std::uint64_t seed, int max_steps) {
    if (max_steps < 1) throw ContractError("record_rollout: need max_steps >= 1");
    const rl::Actor actor(ckpt);
    const sim::Stage stage =
        ckpt.stage == 1 ? sim::Stage::kLocomotion : sim::Stage::kCartPush;
    const rl::Variant variant = rl::variant_from_name(ckpt.variant);
    const bool use_disc = rl::variant_uses_disc(variant);
    if (use_disc && (!ckpt.disc || !ckpt.disc_norm))
        throw ContractError("record_rollout: adversarial checkpoint is missing its discriminator");

    sim::EnvRunner env(cfg, stage, backend, seed, 0);
    RolloutDump dump;
    dump.states.reserve(static_cast<size_t>(max_steps));
    for (int k = 0; k < max_steps; ++k) {
        const sim::Action a = actor.act(env.observe_now());
        const sim::EnvRunner::StepOut out = env.step(a);
        const sim::SimState& next = env.state();
        rewards::RewardBreakdown rb = rewards::compute_reward(next, out.cmds, a, out.prev_action,
                                                              out.diag, out.flags, cfg.env,
                                                              cfg.rewards);
        if (use_disc) {
            const amp::ProjectionMode mode = rl::variant_mode(variant);
            const amp::ProjectedTransition tr{amp::project(out.prev, mode, cfg.env.geometry),
                                              amp::project(next, mode, cfg.env.geometry)};
            const amp::DiscriminatorHead head{*ckpt.disc, cfg.amp.w_gp};
            rewards::finalize_with_style(rb, amp::style_reward(head, tr, *ckpt.disc_norm),
                                         cfg.rewards);
        }
        dump.states.push_back(next);
        dump.cmds.push_back(out.cmds);
        dump.actions.push_back(a);
        dump.rewards.push_back(std::move(rb));
        if (out.flags.any()) env.reset();
    }
    return dump;
}

// Per-term reward log: time plus one column per named term, in breakdown order. Cells
// use exact round-trip formatting so the logged weight identity survives a parse.
inline std::string rollout_csv(const RolloutDump& dump) {
    if (dump.rewards.empty()) throw ContractError("rollout_csv: empty dump");
    std::string out = "time";
    for (const auto& kv : dump.rewards.front().terms) out += "," + kv.first;
    out += "\n";
    for (size_t i = 0; i < dump.rewards.size(); ++i) {
        out += csv::num17(dump.states[i].t);
        for (const auto& kv : dump.rewards[i].terms) out += "," + csv::num17(kv.second);
        out += "\n";
    }
    return out;
}

inline std::string trajectory_csv(const RolloutDump& dump) {
    std::string out = csv::trajectory_header();
    for (size_t i = 0; i < dump.states.size(); ++i)
        out += csv::trajectory_row(dump.states[i], dump.cmds[i], dump.actions[i]);
    return out;
}

}  // namespace cartloco::harness
