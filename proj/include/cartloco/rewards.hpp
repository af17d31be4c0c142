#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "cartloco/config.hpp"
#include "cartloco/leg.hpp"
#include "cartloco/math.hpp"
#include "cartloco/sim_types.hpp"

// Reward terms and termination rules. Everything here is a pure function of the
// post-step state, the commands in effect for the step, the action pair, and the step
// diagnostics; evaluating twice gives bitwise-identical results.

namespace cartloco::rewards {

using sim::Action;
using sim::CommandSet;
using sim::SimState;
using sim::Stage;
using sim::StepDiagnostics;
using sim::TerminationFlags;

// Planar orientation distance: |wrap(a - b)|, in [0, pi].
inline double d_rot(double a, double b) { return std::fabs(wrap_angle(a - b)); }

struct RewardBreakdown {
    double tracking = 0.0;
    double regularization = 0.0;
    double gait_shaping = 0.0;
    double task = 0.0;
    double style = 0.0;
    double total = 0.0;
    // Fixed-order named terms for the rollout log; order is part of the CSV contract.
    std::vector<std::pair<std::string, double>> terms;
};

// Per-step tracking error magnitudes. Single source of truth: the exponential reward
// kernels below and the evaluation metrics both read these, so a definition change
// moves reward and reported tables together.
struct TrackingErrors {
    double lin_vel = 0.0;  // |vx command - body vx|, m/s
    double lat_vel = 0.0;  // |vy| (no lateral command; part of the linear kernel)
    double ang_vel = 0.0;  // |omega command - yaw rate|, rad/s
    double heading = 0.0;  // |wrap(heading target - yaw)|, rad
    double ee_pos = 0.0;   // base-frame EE position error, 1-norm, m
    double ee_ori = 0.0;   // base-frame EE orientation distance, rad
};

inline TrackingErrors tracking_errors(const SimState& s, const CommandSet& c,
                                      const GeometryConfig& g) {
    TrackingErrors e;
    e.lin_vel = std::fabs(c.vx - s.vx);
    e.lat_vel = std::fabs(s.vy);
    e.ang_vel = std::fabs(c.omega - s.omega);
    e.heading = std::fabs(wrap_angle(c.beta - s.yaw));
    const sim::ArmFk fk = sim::arm_fk(s.q_arm.data(), g);
    e.ee_pos = std::fabs(c.p_ee.x - fk.ee.x) + std::fabs(c.p_ee.y - fk.ee.y);
    e.ee_ori = d_rot(c.theta_ee, fk.ee_angle);
    return e;
}

// Five exponential tracking terms, each w * exp(-err) in (0, w]. EE errors are measured
// in the base frame (position 1-norm, orientation d_rot), matching the command frame.
inline double tracking_reward(const SimState& s, const CommandSet& c, const GeometryConfig& g,
                              const TrackingWeights& w) {
    const TrackingErrors e = tracking_errors(s, c, g);
    return w.lin_vel * std::exp(-(sq(e.lin_vel) + sq(e.lat_vel))) +
           w.ang_vel * std::exp(-sq(e.ang_vel)) + w.heading * std::exp(-sq(e.heading)) +
           w.ee_pos * std::exp(-e.ee_pos) + w.ee_ori * std::exp(-e.ee_ori);
}

// Six penalty terms, each weighted and non-positive.
inline double regularization_reward(const SimState& s, const Action& a, const Action& prev,
                                    const StepDiagnostics& d, const LimitsConfig& lim,
                                    const RegularizationWeights& w) {
    double rate = 0.0, tq = 0.0, acc = 0.0;
    for (size_t j = 0; j < sim::kActionDim; ++j) {
        rate += sq(a.v[j] - prev.v[j]);
        tq += sq(d.torque[j]);
        acc += sq(d.accel[j]);
    }
    double vel = sq(s.qd_grip);
    for (double qd : s.qd_leg) vel += sq(qd);
    for (double qd : s.qd_arm) vel += sq(qd);

    auto hinge2 = [](double q, const Range& r) {
        const double lo = std::min(q - r.lo, 0.0);
        const double hi = std::max(q - r.hi, 0.0);
        return lo * lo + hi * hi;
    };
    double limit = hinge2(s.q_grip, lim.grip);
    for (int leg = 0; leg < sim::kNumLegs; ++leg) {
        limit += hinge2(s.q_leg[static_cast<size_t>(2 * leg)], lim.thigh);
        limit += hinge2(s.q_leg[static_cast<size_t>(2 * leg + 1)], lim.calf);
    }
    for (double q : s.q_arm) limit += hinge2(q, lim.arm);

    return -(w.action_rate * rate + w.torque * tq + w.accel * acc + w.joint_vel * vel +
             w.power * d.power + w.joint_limit * limit);
}

namespace detail {

// Deviation of the 11 posture angles (legs + arm) from the default pose, L1. The gripper
// has its own closure bonus and is excluded.
inline double default_pose_dev(const SimState& s, const GeometryConfig& g) {
    double dev = 0.0;
    for (int leg = 0; leg < sim::kNumLegs; ++leg) {
        dev += std::fabs(s.q_leg[static_cast<size_t>(2 * leg)] - g.default_thigh);
        dev += std::fabs(s.q_leg[static_cast<size_t>(2 * leg + 1)] - g.default_calf);
    }
    for (int j = 0; j < sim::kArmJoints; ++j)
        dev += std::fabs(s.q_arm[static_cast<size_t>(j)] - g.default_arm[j]);
    return dev;
}

inline double foot_force_norm(const StepDiagnostics& d) {
    double s2 = 0.0;
    for (double f : d.foot_force) s2 += sq(f);
    return std::sqrt(s2);
}

// The default-pose penalty applies only while a forward-speed command is active.
inline bool moving_gate(const CommandSet& c) { return c.vx > 0.1; }

}  // namespace detail

// Height kernel, thigh/calf band penalties, foot-force penalty, gated default-pose
// penalty. Band centers/widths are chosen so the default pose sits exactly on both bands.
inline double gait_shaping_reward(const SimState& s, const CommandSet& c, const StepDiagnostics& d,
                                  const GeometryConfig& g, const GaitWeights& w) {
    double thigh_band = 0.0, calf_band = 0.0;
    for (int leg = 0; leg < sim::kNumLegs; ++leg) {
        thigh_band += sq(std::fabs(s.q_leg[static_cast<size_t>(2 * leg)] - 0.5) - 0.4);
        calf_band += sq(std::fabs(s.q_leg[static_cast<size_t>(2 * leg + 1)] + 1.86) - 0.3);
    }
    double r = w.height * std::exp(-sq(s.h - g.height_target));
    r -= w.thigh_band * thigh_band + w.calf_band * calf_band;
    r -= w.foot_force * detail::foot_force_norm(d);
    if (detail::moving_gate(c)) r -= w.default_pose * detail::default_pose_dev(s, g);
    return r;
}

// Cart-pushing reward: tracking + regularization + gripper-closure bonus, minus vertical
// motion, stance-foot speed, foot force, gated default pose, and the two indicator
// penalties (their weights already carry the sign).
inline double task_reward(const SimState& s, const CommandSet& c, const Action& a,
                          const Action& prev, const StepDiagnostics& d,
                          const TerminationFlags& flags, const EnvConfig& env,
                          const RewardConfig& rw) {
    double r = tracking_reward(s, c, env.geometry, rw.tracking);
    r += regularization_reward(s, a, prev, d, env.limits, rw.regularization);
    r += rw.task.grip_bonus * std::exp(-40.0 * s.q_grip);
    r -= rw.task.vertical * sq(s.dh);
    r -= rw.task.foot_vel * d.stance_foot_speed;
    r -= rw.task.foot_force * detail::foot_force_norm(d);
    if (detail::moving_gate(c)) r -= rw.task.default_pose * detail::default_pose_dev(s, env.geometry);
    if (flags.cart_violation) r += rw.task.cart_violation;
    if (flags.failure()) r += rw.task.termination;
    return r;
}

inline TerminationFlags check_termination(const SimState& s, const StepDiagnostics&,
                                          double episode_seconds, const EnvConfig& env) {
    TerminationFlags f;
    f.fell = s.h < env.contact.min_height || s.no_stance_time > env.contact.max_no_stance;
    if (s.stage == Stage::kCartPush) {
        f.cart_violation = s.cart_violation;
        f.detached_timeout = s.detached_time > env.cart.detach_timeout;
    }
    f.timeout = s.t >= episode_seconds - 1e-9;
    return f;
}

// Stage-appropriate composite with the per-term log columns. style stays zero here; the
// adversarial layer fills it in via finalize_with_style.
inline RewardBreakdown compute_reward(const SimState& next, const CommandSet& c, const Action& a,
                                      const Action& prev, const StepDiagnostics& d,
                                      const TerminationFlags& flags, const EnvConfig& env,
                                      const RewardConfig& rw) {
    RewardBreakdown b;
    b.tracking = tracking_reward(next, c, env.geometry, rw.tracking);
    b.regularization = regularization_reward(next, a, prev, d, env.limits, rw.regularization);
    if (next.stage == Stage::kLocomotion) {
        b.gait_shaping = gait_shaping_reward(next, c, d, env.geometry, rw.gait);
        b.total = b.tracking + b.regularization + b.gait_shaping;
        if (flags.failure()) b.total += rw.termination_penalty;
    } else {
        b.task = task_reward(next, c, a, prev, d, flags, env, rw);
        b.total = rw.task_weight * b.task;  // + style_weight * style once style is known
    }
    b.terms = {{"tracking", b.tracking},
               {"regularization", b.regularization},
               {"gait_shaping", b.gait_shaping},
               {"task", b.task},
               {"style", b.style},
               {"total", b.total}};
    return b;
}

// total = style_weight * style + task_weight * task, the documented stage-2 combination.
inline void finalize_with_style(RewardBreakdown& b, double style, const RewardConfig& rw) {
    b.style = style;
    b.total = rw.style_weight * style + rw.task_weight * b.task;
    for (auto& kv : b.terms) {
        if (kv.first == "style") kv.second = b.style;
        if (kv.first == "total") kv.second = b.total;
    }
}

}  // namespace cartloco::rewards
