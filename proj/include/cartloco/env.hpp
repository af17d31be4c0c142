#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <utility>

#include "cartloco/cart.hpp"
#include "cartloco/config.hpp"
#include "cartloco/leg.hpp"
#include "cartloco/math.hpp"
#include "cartloco/rewards.hpp"
#include "cartloco/rng.hpp"
#include "cartloco/sim_types.hpp"

// Planar quadruped + arm + cart simulator. One env_step advances `substeps` inner
// integrator sub-steps; states are values, so stepping never shares mutable data.
//
// Locomotion model: joints are unit-inertia PD servos; the base relaxes toward the twist
// commanded by the stance feet (u = -mean stance-foot sweep velocity, yaw from the
// left/right differential over the track width), scaled down when the required friction
// c_traction * |u| exceeds static grip (then dynamic grip applies). Base height is the
// quasi-static mean stance-leg extension with a short relaxation.

namespace cartloco::sim {

struct BackendConsts {
    double dt;
    int substeps;
    double gain_scale;
    double contact_tol;
};

inline BackendConsts backend_consts(const EnvConfig& e, Backend b) {
    if (b == Backend::kA) return {e.backends.dt_a, e.backends.substeps_a, 1.0, e.contact.tol};
    return {e.backends.dt_b, e.backends.substeps_b, e.backends.gain_scale_b,
            e.contact.tol * e.backends.contact_tol_scale_b};
}

inline double control_dt(const EnvConfig& e, Backend b) {
    const BackendConsts c = backend_consts(e, b);
    return c.dt * c.substeps;
}

inline double episode_seconds(const EnvConfig& e, Stage s) {
    return s == Stage::kLocomotion ? e.episode.stage1_seconds
                                   : e.episode.phase1_seconds + e.episode.phase2_seconds;
}

inline Action clip_action(const Action& a, const LimitsConfig& lim) {
    Action c = a;
    for (int leg = 0; leg < kNumLegs; ++leg) {
        c.v[static_cast<size_t>(2 * leg)] =
            clampd(c.v[static_cast<size_t>(2 * leg)], lim.thigh.lo, lim.thigh.hi);
        c.v[static_cast<size_t>(2 * leg + 1)] =
            clampd(c.v[static_cast<size_t>(2 * leg + 1)], lim.calf.lo, lim.calf.hi);
    }
    for (int j = 0; j < kArmJoints; ++j)
        c.v[static_cast<size_t>(kLegJoints + j)] =
            clampd(c.v[static_cast<size_t>(kLegJoints + j)], lim.arm.lo, lim.arm.hi);
    c.v[11] = clampd(c.v[11], lim.grip.lo, lim.grip.hi);
    return c;
}

struct EeState {
    Vec2 pos_world;
    double angle_world;
    Vec2 vel_world;  // rigid-body estimate from base motion; arm joint rates neglected
};

inline EeState ee_world(const SimState& s, const GeometryConfig& g) {
    const ArmFk fk = arm_fk(s.q_arm.data(), g);
    EeState e;
    const Vec2 r = rotate(fk.ee, s.yaw);
    e.pos_world = Vec2{s.x, s.y} + r;
    e.angle_world = wrap_angle(s.yaw + fk.ee_angle);
    const Vec2 vb = rotate({s.vx, s.vy}, s.yaw);
    e.vel_world = {vb.x - s.omega * r.y, vb.y + s.omega * r.x};
    return e;
}

// Attach/detach hysteresis: grab when the EE is near the handle with the gripper closed
// enough, release only when drawn past r_detach. Evaluated once per control step so the
// state cannot chatter within a step.
inline SimState attach_update(SimState s, const EnvConfig& cfg) {
    if (s.stage != Stage::kCartPush) return s;
    const double dist =
        (ee_world(s, cfg.geometry).pos_world - cart_handle_world(s.cart, cfg.cart)).norm();
    if (s.attached) {
        if (dist > cfg.cart.r_detach) s.attached = false;
    } else if (dist < cfg.cart.r_attach && s.q_grip < cfg.cart.grip_close_threshold) {
        s.attached = true;
    }
    return s;
}

// Fresh per-episode physics parameters. Draw order is part of the determinism contract.
inline EnvParams sample_env_params(Rng& rng, const EnvConfig& e) {
    const RandomizationConfig& rz = e.randomization;
    EnvParams p;
    p.static_friction = rng.uniform(rz.static_friction.lo, rz.static_friction.hi);
    p.dynamic_friction = rng.uniform(rz.dynamic_friction.lo, rz.dynamic_friction.hi);
    p.restitution = rng.uniform(rz.restitution.lo, rz.restitution.hi);
    p.robot_mass_scale = rng.uniform(rz.mass_scale.lo, rz.mass_scale.hi);
    p.cart_mass = e.cart.mass * rng.uniform(rz.cart_mass_scale.lo, rz.cart_mass_scale.hi);
    p.wheel_damping = e.cart.wheel_damping;
    p.p_gain_scale = rng.uniform(rz.gain_scale.lo, rz.gain_scale.hi);
    p.d_gain_scale = rng.uniform(rz.gain_scale.lo, rz.gain_scale.hi);
    p.external_force = {rng.uniform(-rz.push_force, rz.push_force),
                        rng.uniform(-rz.push_force, rz.push_force)};
    p.external_torque = rng.uniform(-rz.push_torque, rz.push_torque);
    return p;
}

inline SimState env_reset(const EnvConfig& cfg, Rng& rng, Stage stage) {
    const GeometryConfig& g = cfg.geometry;
    const RandomizationConfig& rz = cfg.randomization;
    SimState s;
    s.stage = stage;
    s.env = sample_env_params(rng, cfg);

    s.x = rng.uniform(-rz.init_pos, rz.init_pos);
    s.y = rng.uniform(-rz.init_pos, rz.init_pos);
    s.yaw = rng.uniform(-rz.init_yaw, rz.init_yaw);
    s.vx = rng.uniform(-rz.init_vel, rz.init_vel);
    s.vy = rng.uniform(-rz.init_vel, rz.init_vel);
    s.omega = 0.0;

    for (int leg = 0; leg < kNumLegs; ++leg) {
        s.q_leg[static_cast<size_t>(2 * leg)] =
            g.default_thigh + rng.uniform(-rz.init_joint_pos, rz.init_joint_pos);
        s.q_leg[static_cast<size_t>(2 * leg + 1)] =
            g.default_calf + rng.uniform(-rz.init_joint_pos, rz.init_joint_pos);
    }
    for (int j = 0; j < kArmJoints; ++j)
        s.q_arm[static_cast<size_t>(j)] =
            g.default_arm[j] + rng.uniform(-rz.init_joint_pos, rz.init_joint_pos);
    s.q_grip = clampd(g.default_grip + rng.uniform(-rz.init_joint_pos, rz.init_joint_pos),
                      cfg.limits.grip.lo, cfg.limits.grip.hi);
    for (auto& qd : s.qd_leg) qd = rng.uniform(-rz.init_joint_vel, rz.init_joint_vel);
    for (auto& qd : s.qd_arm) qd = rng.uniform(-rz.init_joint_vel, rz.init_joint_vel);
    s.qd_grip = 0.0;

    // All four feet are assumed planted at reset; the height starts at their mean extension.
    double drop_sum = 0.0;
    for (int leg = 0; leg < kNumLegs; ++leg)
        drop_sum += leg_fk(s.q_leg[static_cast<size_t>(2 * leg)],
                           s.q_leg[static_cast<size_t>(2 * leg + 1)], g.l1, g.l2)
                        .drop;
    s.h = drop_sum / kNumLegs;
    s.dh = 0.0;

    if (stage == Stage::kCartPush) {
        const Vec2 ahead = rotate({cfg.cart.spawn_distance, 0.0}, s.yaw);
        s.cart.x = s.x + ahead.x;
        s.cart.y = s.y + ahead.y;
        s.cart.yaw = s.yaw;  // handle then sits at the default-pose EE position
        s = attach_update(s, cfg);
    }
    return s;
}

inline SimState env_reset(const EnvConfig& cfg, std::uint64_t seed, Stage stage) {
    Rng rng = derive_rng(seed, stream::kEnv);
    return env_reset(cfg, rng, stage);
}

inline std::pair<SimState, StepDiagnostics> env_step(const SimState& state, const Action& action,
                                                     const EnvConfig& cfg, Backend backend) {
    if (state.terminated) throw ContractError("env_step: state is terminated; reset first");
    const BackendConsts bc = backend_consts(cfg, backend);
    const GeometryConfig& g = cfg.geometry;
    const double dt = bc.dt;
    const double inv_sub = 1.0 / bc.substeps;
    const bool euler_a = backend == Backend::kA;  // semi-implicit; B is explicit

    SimState s = attach_update(state, cfg);
    StepDiagnostics d;
    const Action tgt = clip_action(action, cfg.limits);

    const double kp_nom = cfg.gains.kp;
    const double kp = cfg.gains.kp * bc.gain_scale * s.env.p_gain_scale;
    const double kd = cfg.gains.kd * bc.gain_scale * s.env.d_gain_scale;
    const double m_base = cfg.base.mass * s.env.robot_mass_scale;
    const double i_base = cfg.base.yaw_inertia * s.env.robot_mass_scale;
    const double h_before = s.h;

    auto q_at = [](SimState& st, int j) -> double& {
        if (j < kLegJoints) return st.q_leg[static_cast<size_t>(j)];
        if (j < kLegJoints + kArmJoints) return st.q_arm[static_cast<size_t>(j - kLegJoints)];
        return st.q_grip;
    };
    auto qd_at = [](SimState& st, int j) -> double& {
        if (j < kLegJoints) return st.qd_leg[static_cast<size_t>(j)];
        if (j < kLegJoints + kArmJoints) return st.qd_arm[static_cast<size_t>(j - kLegJoints)];
        return st.qd_grip;
    };

    std::array<double, kActionDim> qd_start{};
    for (int j = 0; j < kActionDim; ++j) qd_start[static_cast<size_t>(j)] = qd_at(s, j);

    for (int sub = 0; sub < bc.substeps; ++sub) {
        const double vx0 = s.vx, vy0 = s.vy, om0 = s.omega;  // pose integration under B

        for (int j = 0; j < kActionDim; ++j) {
            double& q = q_at(s, j);
            double& qd = qd_at(s, j);
            const double tau = kp * (tgt.v[static_cast<size_t>(j)] - q) - kd * qd;
            if (euler_a) {
                qd += dt * tau;
                q += dt * qd;
            } else {
                q += dt * qd;
                qd += dt * tau;
            }
            d.torque[static_cast<size_t>(j)] += (tau / kp_nom) * inv_sub;
            d.power += std::fabs((tau / kp_nom) * qd) * inv_sub;
        }
        // The gripper coordinate is an opening fraction with hard stops.
        if (s.q_grip < cfg.limits.grip.lo) {
            s.q_grip = cfg.limits.grip.lo;
            if (s.qd_grip < 0) s.qd_grip = 0;
        } else if (s.q_grip > cfg.limits.grip.hi) {
            s.q_grip = cfg.limits.grip.hi;
            if (s.qd_grip > 0) s.qd_grip = 0;
        }

        // Stance test against the height from the previous sub-step, then relax the
        // height toward the mean stance extension.
        int n_st = 0, n_left = 0, n_right = 0;
        double sweep_sum = 0.0, sweep_left = 0.0, sweep_right = 0.0, drop_st = 0.0;
        double foot_speed = 0.0;
        for (int leg = 0; leg < kNumLegs; ++leg) {
            const double thigh = s.q_leg[static_cast<size_t>(2 * leg)];
            const double calf = s.q_leg[static_cast<size_t>(2 * leg + 1)];
            const LegFk fk = leg_fk(thigh, calf, g.l1, g.l2);
            if (fk.drop < s.h - bc.contact_tol) continue;
            const double vf = foot_forward_vel(thigh, calf, s.qd_leg[static_cast<size_t>(2 * leg)],
                                               s.qd_leg[static_cast<size_t>(2 * leg + 1)], g.l1, g.l2);
            ++n_st;
            sweep_sum += vf;
            drop_st += fk.drop;
            if (is_left_leg(leg)) {
                ++n_left;
                sweep_left += vf;
            } else {
                ++n_right;
                sweep_right += vf;
            }
            foot_speed += std::fabs(s.vx + vf);  // world forward speed of a planted foot
        }
        d.stance_foot_speed += foot_speed * inv_sub;

        double u_x = 0.0, u_yaw = 0.0;
        if (n_st > 0) {
            s.h += std::min(1.0, dt / cfg.contact.tau_h) * (drop_st / n_st - s.h);
            s.no_stance_time = 0.0;

            u_x = -sweep_sum / n_st;
            const double u_l = n_left > 0 ? -sweep_left / n_left : 0.0;
            const double u_r = n_right > 0 ? -sweep_right / n_right : 0.0;
            u_yaw = (u_l - u_r) / g.track_width;

            // Traction: fraction of the commanded twist the ground can transmit.
            const double mu_req = cfg.base.c_traction * std::fabs(u_x);
            if (mu_req > s.env.static_friction) {
                const double scale = std::min(1.0, s.env.dynamic_friction / mu_req);
                d.slip += (1.0 - scale) * std::fabs(u_x) * inv_sub;
                u_x *= scale;
                u_yaw *= scale;
            }
        } else {
            s.no_stance_time += dt;
        }

        const double relax = dt / cfg.base.tau_base;
        s.vx += relax * (u_x - s.vx);
        s.vy += relax * (0.0 - s.vy);
        s.omega += relax * (u_yaw - s.omega);

        // Constant per-episode disturbance wrench.
        const Vec2 f_body = rotate(s.env.external_force, -s.yaw);
        s.vx += dt * f_body.x / m_base;
        s.vy += dt * f_body.y / m_base;
        s.omega += dt * s.env.external_torque / i_base;

        if (s.stage == Stage::kCartPush) {
            Vec2 force{0.0, 0.0};
            if (s.attached) {
                const EeState ee = ee_world(s, g);
                const Vec2 ph = cart_handle_world(s.cart, cfg.cart);
                const Vec2 vh = cart_handle_vel_world(s.cart, cfg.cart);
                const double kd_c = cfg.cart.k_d * (1.0 - s.env.restitution);
                force = (ee.pos_world - ph) * cfg.cart.k_s + (ee.vel_world - vh) * kd_c;
                const double f_norm = force.norm();
                if (f_norm > cfg.cart.f_max) force = force * (cfg.cart.f_max / f_norm);
                if (force.norm() > cfg.cart.f_tip) s.cart_violation = true;
                d.coupling_force += force.norm() * inv_sub;

                const Vec2 react = rotate(force, -s.yaw);  // equal and opposite on the base
                s.vx -= dt * react.x / m_base;
                s.vy -= dt * react.y / m_base;
            }
            s.cart = cart_step(s.cart, force, s.env, cfg.cart, dt, backend);
        }

        const double pvx = euler_a ? s.vx : vx0;
        const double pvy = euler_a ? s.vy : vy0;
        const double pom = euler_a ? s.omega : om0;
        const Vec2 vw = rotate({pvx, pvy}, s.yaw);
        s.x += dt * vw.x;
        s.y += dt * vw.y;
        s.yaw = wrap_angle(s.yaw + dt * pom);
    }

    for (auto& q : s.q_leg) q = wrap_angle(q);
    for (auto& q : s.q_arm) q = wrap_angle(q);

    const double step_dt = dt * bc.substeps;
    s.dh = (s.h - h_before) / step_dt;
    for (int j = 0; j < kActionDim; ++j)
        d.accel[static_cast<size_t>(j)] = qd_at(s, j) - qd_start[static_cast<size_t>(j)];

    // Contact report on the returned state, so stance/force are consistent with it.
    for (int leg = 0; leg < kNumLegs; ++leg) {
        const LegFk fk = leg_fk(s.q_leg[static_cast<size_t>(2 * leg)],
                                s.q_leg[static_cast<size_t>(2 * leg + 1)], g.l1, g.l2);
        const bool st = fk.drop >= s.h - bc.contact_tol;
        d.stance[static_cast<size_t>(leg)] = st;
        d.foot_force[static_cast<size_t>(leg)] =
            st ? cfg.contact.k_foot * (fk.drop - (s.h - bc.contact_tol)) : 0.0;
    }

    if (s.stage == Stage::kCartPush) {
        if (s.attached)
            s.detached_time = 0.0;
        else
            s.detached_time += step_dt;
    }
    s.t += step_dt;

    d.flags = rewards::check_termination(s, d, episode_seconds(cfg, s.stage), cfg);
    s.terminated = d.flags.any();
    return {s, d};
}

inline int obs_dim(Stage stage) { return stage == Stage::kLocomotion ? 44 : 48; }

// Feature layout (fixed): q_leg(8), q_arm(3), q_grip(1), qd(12), omega(1), h(1),
// [vx_cmd, omega_cmd, heading_err, p_ee_cmd(2), theta_ee_cmd](6), prev_action(12);
// cartpush appends [handle in base frame(2), cart heading error(1), attached(1)].
// Noise draws happen in layout order and only when enabled, so a disabled call leaves
// the rng untouched. Cart features are reported clean (reliable cart tracking assumed).
inline Vec observe(const SimState& s, const CommandSet& c, const Action& prev, Rng& noise_rng,
                   const EnvConfig& cfg) {
    const NoiseConfig& nz = cfg.noise;
    auto n = [&](double range) { return nz.enabled ? noise_rng.uniform(-range, range) : 0.0; };
    Vec o;
    o.reserve(static_cast<size_t>(obs_dim(s.stage)));
    for (double q : s.q_leg) o.push_back(q + n(nz.joint_pos));
    for (double q : s.q_arm) o.push_back(q + n(nz.joint_pos));
    o.push_back(s.q_grip + n(nz.joint_pos));
    for (double qd : s.qd_leg) o.push_back(qd + n(nz.joint_vel));
    for (double qd : s.qd_arm) o.push_back(qd + n(nz.joint_vel));
    o.push_back(s.qd_grip + n(nz.joint_vel));
    o.push_back(s.omega + n(nz.ang_vel));
    o.push_back(s.h + n(nz.height));
    o.push_back(c.vx + n(nz.command));
    o.push_back(c.omega + n(nz.command));
    o.push_back(wrap_angle(c.beta - s.yaw) + n(nz.command));
    o.push_back(c.p_ee.x + n(nz.ee_cmd));
    o.push_back(c.p_ee.y + n(nz.ee_cmd));
    o.push_back(c.theta_ee + n(nz.ee_cmd));
    for (double a : prev.v) o.push_back(a);
    if (s.stage == Stage::kCartPush) {
        const Vec2 rel = rotate(cart_handle_world(s.cart, cfg.cart) - Vec2{s.x, s.y}, -s.yaw);
        o.push_back(rel.x);
        o.push_back(rel.y);
        o.push_back(wrap_angle(s.cart.yaw - s.yaw));
        o.push_back(s.attached ? 1.0 : 0.0);
    }
    return o;
}

// Draw a fresh command set. Locomotion: forward speed from {0} u [lo, hi], heading
// target around the current yaw, EE target in a disc of the arm workspace. Cartpush:
// speed from the narrower push range, heading locked to the cart (phase 1) with a
// drift rate that activates in phase 2; EE targets track the live handle via
// refresh_commands. The yaw-rate command is derived, never drawn.
inline CommandSet sample_commands(Rng& rng, Stage stage, const SimState& s, const EnvConfig& cfg) {
    const CommandConfig& cc = cfg.commands;
    CommandSet c;
    if (stage == Stage::kLocomotion) {
        const double zero_draw = rng.uniform01();
        c.vx = zero_draw < cc.vx_zero_prob ? 0.0 : rng.uniform(cc.vx.lo, cc.vx.hi);
        c.beta = wrap_angle(s.yaw + rng.uniform(-cc.heading_delta, cc.heading_delta));
        const double radius = rng.uniform(cc.ee_radius.lo, cc.ee_radius.hi);
        const double bearing = rng.uniform(cc.ee_bearing.lo, cc.ee_bearing.hi);
        c.p_ee = Vec2{cfg.geometry.arm_mount_x + radius * std::cos(bearing),
                      radius * std::sin(bearing)};
        c.theta_ee = rng.uniform(cc.ee_angle.lo, cc.ee_angle.hi);
    } else {
        c.vx = rng.uniform(cc.stage2_vx.lo, cc.stage2_vx.hi);
        c.beta = s.cart.yaw;
        c.beta_rate = rng.uniform(-cc.stage2_heading_rate, cc.stage2_heading_rate);
    }
    return c;
}

// Per-step command maintenance: the yaw-rate command is recomputed as clipped
// proportional heading correction; cartpush keeps the EE target on the live handle and
// lets the heading target drift once phase 2 begins.
inline void refresh_commands(CommandSet& c, const SimState& s, const EnvConfig& cfg, double dt) {
    const CommandConfig& cc = cfg.commands;
    if (s.stage == Stage::kCartPush) {
        if (s.t >= cfg.episode.phase1_seconds) c.beta = wrap_angle(c.beta + c.beta_rate * dt);
        c.p_ee = rotate(cart_handle_world(s.cart, cfg.cart) - Vec2{s.x, s.y}, -s.yaw);
        c.theta_ee = wrap_angle(s.cart.yaw - s.yaw);
    }
    c.omega = clampd(cc.k_h * wrap_angle(c.beta - s.yaw), -cc.omega_clip, cc.omega_clip);
}

// Stateful single-environment wrapper owning the command lifecycle, observation noise,
// and episode reseeding. All randomness is derived from (master_seed, env_index,
// episode ordinal), so trajectories replay bit-identically.
class EnvRunner {
  public:
    EnvRunner(const Config& cfg, Stage stage, Backend backend, std::uint64_t master_seed,
              int env_index)
        : cfg_(&cfg), stage_(stage), backend_(backend), master_(master_seed), index_(env_index) {
        reset();
    }

    void reset() {
        ++episode_;
        const std::uint64_t key = (static_cast<std::uint64_t>(index_) << 32) | episode_;
        Rng reset_rng = derive_rng(master_, stream::kEnv, key);
        state_ = env_reset(cfg_->env, reset_rng, stage_);
        cmd_rng_ = derive_rng(master_, stream::kCommand, key);
        noise_rng_ = derive_rng(master_, stream::kObsNoise, key);
        commands_ = sample_commands(cmd_rng_, stage_, state_, cfg_->env);
        refresh_commands(commands_, state_, cfg_->env, 0.0);
        prev_action_ = Action{};
        steps_since_resample_ = 0;
    }

    struct StepOut {
        SimState prev;
        CommandSet cmds;     // commands in effect for this step
        Action prev_action;  // action of the step before (reward rate term)
        StepDiagnostics diag;
        TerminationFlags flags;
    };

    StepOut step(const Action& a) {
        StepOut out;
        out.prev = state_;
        out.cmds = commands_;
        out.prev_action = prev_action_;
        auto [next, diag] = env_step(state_, a, cfg_->env, backend_);
        state_ = next;
        out.diag = diag;
        out.flags = diag.flags;
        prev_action_ = a;

        if (stage_ == Stage::kLocomotion &&
            ++steps_since_resample_ >= cfg_->env.commands.resample_steps) {
            commands_ = sample_commands(cmd_rng_, stage_, state_, cfg_->env);
            steps_since_resample_ = 0;
        }
        refresh_commands(commands_, state_, cfg_->env, control_dt(cfg_->env, backend_));
        return out;
    }

    Vec observe_now() { return observe(state_, commands_, prev_action_, noise_rng_, cfg_->env); }

    const SimState& state() const { return state_; }
    const CommandSet& commands() const { return commands_; }
    const Action& prev_action() const { return prev_action_; }
    Stage stage() const { return stage_; }
    Backend backend() const { return backend_; }

    // Path tracking and evaluation drive the command set directly.
    void set_commands(const CommandSet& c) { commands_ = c; }

  private:
    const Config* cfg_;
    Stage stage_;
    Backend backend_;
    std::uint64_t master_;
    int index_;
    std::uint64_t episode_ = 0;
    SimState state_;
    CommandSet commands_;
    Action prev_action_;
    Rng cmd_rng_{0};
    Rng noise_rng_{0};
    int steps_since_resample_ = 0;
};

}  // namespace cartloco::sim
