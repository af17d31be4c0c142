#pragma once
// High-level path following. A Stanley steering law plus a curvature-aware speed
// heuristic produce (vx, omega) targets at the closest path point; targets are clipped
// to the training command range and first-order smoothed before reaching the policy.
// Two closed-loop drivers: a kinematic unicycle (isolates the control law) and the
// full simulated robot behind a trained checkpoint.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "cartloco/checkpoint.hpp"
#include "cartloco/config.hpp"
#include "cartloco/env.hpp"
#include "cartloco/errors.hpp"
#include "cartloco/math.hpp"
#include "cartloco/path.hpp"
#include "cartloco/ppo.hpp"

namespace cartloco::pathctl {

// v = clamp(v_max / (1 + a1 |e_tr| + a2 |e_head| + a3 |kappa|), v_min, v_max): slow
// down when off the path, misaligned, or entering a bend. v_min keeps the arctan in
// the steering law well-defined.
inline double target_speed(double e_tr, double e_head, double curvature, const StanleyConfig& g) {
    const double decay = 1.0 + g.a1 * std::abs(e_tr) + g.a2 * std::abs(e_head) +
                         g.a3 * std::abs(curvature);
    return clampd(g.v_max / decay, g.v_min, g.v_max);
}

// omega_target = -k_theta e_head - arctan(k_e e_tr / v). Left of the path (e_tr > 0)
// or heading left of the tangent steers negative, back toward the path.
inline double stanley_yaw_rate(double e_tr, double e_head, double v, const StanleyConfig& g) {
    return -g.k_theta * e_head - std::atan(g.k_e * e_tr / v);
}

struct PathCommand {
    double vx = 0.0;
    double omega = 0.0;
};

struct StanleyStep {
    PathCommand cmd;
    path::TrackingError err;
    double curvature = 0.0;
};

// One controller tick. The raw yaw-rate target is clipped BEFORE smoothing, so the
// emitted command is a convex combination of in-range values: it never leaves
// [-omega_limit, omega_limit] x [v_min, v_max], and the per-step slew is bounded by
// alpha * range with alpha = 1 - exp(-dt/tau) (exact first-order step). Both channels
// share the configured time constant.
inline StanleyStep stanley_step(const path::PlanarPath& p, Vec2 position, double heading,
                                const StanleyConfig& g, PathCommand prev, double dt) {
    StanleyStep out;
    out.err = path::closest_point(p, position, heading);
    out.curvature = path::path_eval(p, out.err.s_star).curvature;
    const double v_t = target_speed(out.err.e_tr, out.err.e_head, out.curvature, g);
    const double w_t =
        clampd(stanley_yaw_rate(out.err.e_tr, out.err.e_head, v_t, g), -g.omega_limit, g.omega_limit);
    const double alpha = 1.0 - std::exp(-dt / g.tau_smooth);
    out.cmd.vx = prev.vx + alpha * (v_t - prev.vx);
    out.cmd.omega = prev.omega + alpha * (w_t - prev.omega);
    return out;
}

inline PathCommand stanley_command(const path::PlanarPath& p, Vec2 position, double heading,
                                   const StanleyConfig& g, PathCommand prev, double dt) {
    return stanley_step(p, position, heading, g, prev, dt).cmd;
}

// ---------------------------------------------------------------------------
// Closed-loop records.

struct TrackRow {
    double t = 0.0;
    double x = 0.0, y = 0.0, yaw = 0.0;  // tracked body pose (cart, or the unicycle)
    double vx_cmd = 0.0, omega_cmd = 0.0;
    double e_tr = 0.0, e_head = 0.0;
};

struct TrackRecord {
    std::vector<TrackRow> rows;
    double mean_abs_e_tr = 0.0;
    double max_abs_e_tr = 0.0;
    bool complete = true;  // false when the episode failed before the duration elapsed
    double seconds = 0.0;
};

namespace detail {

inline void finalize(TrackRecord& r) {
    double sum = 0.0, peak = 0.0;
    for (const TrackRow& row : r.rows) {
        sum += std::abs(row.e_tr);
        peak = std::max(peak, std::abs(row.e_tr));
    }
    r.mean_abs_e_tr = r.rows.empty() ? 0.0 : sum / static_cast<double>(r.rows.size());
    r.max_abs_e_tr = peak;
    r.seconds = r.rows.empty() ? 0.0 : r.rows.back().t;
}

}  // namespace detail

// The documented CSV layout for a tracking run.
inline std::string track_record_csv(const TrackRecord& r) {
    std::string out = "time,x,y,yaw,vx_cmd,omega_cmd,e_tr,e_head\n";
    char buf[256];
    for (const TrackRow& row : r.rows) {
        std::snprintf(buf, sizeof buf, "%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g\n", row.t, row.x,
                      row.y, row.yaw, row.vx_cmd, row.omega_cmd, row.e_tr, row.e_head);
        out += buf;
    }
    return out;
}

// Kinematic unicycle under the controller: x' = v cos(yaw), y' = v sin(yaw),
// yaw' = omega. Isolates the Stanley law from everything learned. Rows record the
// pre-step pose with the command computed from it.
inline TrackRecord track_unicycle(const path::PlanarPath& p, const StanleyConfig& g, Vec2 start,
                                  double heading, double duration, double dt = 1.0 / 60.0) {
    if (duration <= 0.0 || dt <= 0.0) throw ContractError("track_unicycle: need positive duration/dt");
    TrackRecord rec;
    double x = start.x, y = start.y, yaw = heading;
    PathCommand prev{g.v_min, 0.0};
    const int steps = static_cast<int>(std::llround(duration / dt));
    rec.rows.reserve(static_cast<size_t>(steps));
    for (int k = 0; k < steps; ++k) {
        const StanleyStep st = stanley_step(p, Vec2{x, y}, yaw, g, prev, dt);
        prev = st.cmd;
        rec.rows.push_back({k * dt, x, y, yaw, st.cmd.vx, st.cmd.omega, st.err.e_tr, st.err.e_head});
        x += st.cmd.vx * std::cos(yaw) * dt;
        y += st.cmd.vx * std::sin(yaw) * dt;
        yaw = wrap_angle(yaw + st.cmd.omega * dt);
    }
    detail::finalize(rec);
    return rec;
}

// Full closed loop: the controller tracks the CART pose and feeds (vx, omega) to the
// trained policy through the command set; the end-effector targets keep following the
// live handle via the runner's own refresh. The heading target is back-computed so the
// runner's proportional heading law reproduces the commanded yaw rate exactly
// (omega <= omega_clip by construction). Episode timeout is pushed past `duration`, so
// the run ends early only on a real failure, which flags the record incomplete.
inline TrackRecord track_path(const nn::Checkpoint& ckpt, const path::PlanarPath& p,
                              const Config& cfg, sim::Backend backend, std::uint64_t seed,
                              double duration) {
    if (ckpt.stage != 2) throw ContractError("track_path: needs a stage-2 checkpoint");
    if (duration <= 0.0) throw ContractError("track_path: need a positive duration");
    const rl::Actor actor(ckpt);
    const StanleyConfig& g = cfg.stanley;

    Config work = cfg;
    work.env.episode.phase1_seconds = duration + 60.0;  // no heading drift, no timeout
    sim::EnvRunner runner(work, sim::Stage::kCartPush, backend, seed, 0);
    const double dt = sim::control_dt(work.env, backend);
    const int steps = static_cast<int>(std::llround(duration / dt));

    PathCommand prev{g.v_min, 0.0};
    auto apply = [&](const PathCommand& cmd) {
        sim::CommandSet c = runner.commands();
        c.vx = cmd.vx;
        c.omega = cmd.omega;
        c.beta = wrap_angle(runner.state().yaw + cmd.omega / work.env.commands.k_h);
        c.beta_rate = 0.0;
        runner.set_commands(c);
    };
    {
        const sim::CartState& cart = runner.state().cart;
        const StanleyStep st = stanley_step(p, Vec2{cart.x, cart.y}, cart.yaw, g, prev, dt);
        prev = st.cmd;
        apply(st.cmd);
    }

    TrackRecord rec;
    rec.rows.reserve(static_cast<size_t>(steps));
    for (int k = 0; k < steps; ++k) {
        const Vec obs = runner.observe_now();
        const sim::EnvRunner::StepOut out = runner.step(actor.act(obs));
        const sim::SimState& s = runner.state();
        const StanleyStep st = stanley_step(p, Vec2{s.cart.x, s.cart.y}, s.cart.yaw, g, prev, dt);
        rec.rows.push_back(
            {s.t, s.cart.x, s.cart.y, s.cart.yaw, st.cmd.vx, st.cmd.omega, st.err.e_tr, st.err.e_head});
        if (out.flags.failure()) {
            rec.complete = false;  // partial metrics still reported
            break;
        }
        prev = st.cmd;
        apply(st.cmd);
    }
    detail::finalize(rec);
    return rec;
}

}  // namespace cartloco::pathctl
