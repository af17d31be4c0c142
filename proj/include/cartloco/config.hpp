#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cartloco/errors.hpp"

namespace cartloco {

using json = nlohmann::json;

// All tunables live here. Defaults are the desk-scale configuration; config files are
// sparse overrides deep-merged onto these defaults (RFC 7386 merge semantics: objects
// merge, arrays and scalars replace).

struct Range {
    double lo = 0.0;
    double hi = 0.0;
    double width() const { return hi - lo; }
};

inline void to_json(json& j, const Range& r) { j = json::array({r.lo, r.hi}); }
inline void from_json(const json& j, Range& r) {
    if (!j.is_array() || j.size() != 2) throw ConfigError("range must be a [lo, hi] pair");
    r.lo = j.at(0).get<double>();
    r.hi = j.at(1).get<double>();
}

struct GeometryConfig {
    double l1 = 0.213;            // thigh link, m
    double l2 = 0.213;            // calf link, m
    double hip_spacing = 0.38;    // front-rear, m
    double track_width = 0.28;    // left-right, m
    double arm_l1 = 0.11;
    double arm_l2 = 0.11;
    double arm_l3 = 0.08;
    double arm_mount_x = 0.15;    // arm base in robot base frame, m forward
    double default_thigh = 0.9;
    double default_calf = -1.56;
    double default_arm[3] = {0.3, -0.6, 0.3};
    double default_grip = 0.2;  // mostly closed; below the attach threshold
    double height_target = 0.31;
};

struct LimitsConfig {
    Range thigh{-0.8, 2.4};
    Range calf{-2.6, -0.6};
    Range arm{-2.6, 2.6};
    Range grip{0.0, 1.0};
};

struct GainsConfig {
    double kp = 900.0;  // 1/s^2 on position error of the unit-inertia joint servo
    double kd = 60.0;   // 1/s
};

struct BaseConfig {
    double mass = 15.0;        // kg
    double yaw_inertia = 0.8;  // kg m^2
    double tau_base = 0.1;     // s, first-order relaxation toward commanded twist
    double c_traction = 0.4;   // mu_req = c_traction * |commanded speed|
};

struct ContactConfig {
    double tol = 0.03;          // m, stance when foot drop >= h - tol
    double k_foot = 50.0;       // proxy force per metre of penetration
    double tau_h = 0.05;        // s, relaxation of the quasi-static base height
    double min_height = 0.15;   // fall below this terminates
    double max_no_stance = 0.2; // s with zero stance feet before fall
};

struct CartConfig {
    double mass = 3.0;              // kg nominal
    double yaw_inertia_coef = 0.04; // I = coef * mass
    double handle_x = -0.35;        // handle in cart frame, m (behind axle midpoint)
    double wheel_damping = 0.005;   // 1/s nominal
    double k_s = 400.0;             // N/m coupling spring
    double k_d = 20.0;              // N s/m coupling damper
    double f_max = 60.0;            // N clip on coupling force
    double f_tip = 45.0;            // N; applied force above this flags a cart violation
    double r_attach = 0.05;         // m
    double r_detach = 0.12;         // m
    double grip_close_threshold = 0.5;
    double detach_timeout = 1.0;    // s continuously detached before termination
    double lat_visc = 8.0;          // backend A: lateral vel decay rate, 1/s
    double lat_coulomb = 1.2;       // backend B: lateral decel, m/s^2
    double spawn_distance = 0.79;   // m ahead of robot base at cartpush reset; the
                                    // handle then coincides with the default-pose EE
};

struct BackendsConfig {
    double dt_a = 1.0 / 240.0;
    int substeps_a = 4;
    double dt_b = 1.0 / 200.0;
    int substeps_b = 3;
    double contact_tol_scale_b = 1.5;
    double gain_scale_b = 0.9;
};

struct RandomizationConfig {
    Range static_friction{0.4, 1.2};
    Range dynamic_friction{0.2, 1.0};
    Range restitution{0.0, 0.2};
    double push_force = 10.0;   // +-N constant per-episode base force
    double push_torque = 2.0;   // +-N m
    Range mass_scale{0.9, 1.1};
    Range gain_scale{0.9, 1.1};
    Range cart_mass_scale{0.9, 1.1};
    double init_pos = 0.05;        // +-m, base x/y
    double init_yaw = 0.1;         // +-rad
    double init_vel = 0.05;        // +-m/s, base linear velocity
    double init_joint_pos = 0.1;   // +-rad around the default pose
    double init_joint_vel = 0.1;   // +-rad/s
};

struct NoiseConfig {
    bool enabled = true;
    double ang_vel = 0.20;
    double joint_pos = 0.02;
    double joint_vel = 1.50;
    double command = 0.10;
    double ee_cmd = 0.05;
    double height = 0.02;
};

struct CommandConfig {
    double vx_zero_prob = 0.2;
    Range vx{0.1, 1.0};
    double heading_delta = 2.0;  // beta target drawn as yaw + U(-delta, delta)
    double k_h = 0.5;            // omega = clip(k_h * wrap(beta - yaw))
    double omega_clip = 0.8;
    int resample_steps = 250;
    Range ee_radius{0.10, 0.28};  // from arm mount
    Range ee_bearing{-1.0, 1.0};  // rad around straight ahead
    Range ee_angle{-0.1, 0.1};    // planar EE orientation target, base-relative
    Range stage2_vx{0.2, 0.6};
    double stage2_heading_rate = 0.3;  // rad/s drift of the heading target in phase 2
};

struct EpisodeConfig {
    double stage1_seconds = 20.0;
    double phase1_seconds = 6.0;
    double phase2_seconds = 12.0;
};

struct EnvConfig {
    GeometryConfig geometry;
    LimitsConfig limits;
    GainsConfig gains;
    BaseConfig base;
    ContactConfig contact;
    CartConfig cart;
    BackendsConfig backends;
    RandomizationConfig randomization;
    NoiseConfig noise;
    CommandConfig commands;
    EpisodeConfig episode;
};

struct TrackingWeights {
    double lin_vel = 1.5;
    double ang_vel = 1.0;
    double heading = 1.0;
    double ee_pos = 1.0;
    double ee_ori = 1.0;
};

struct RegularizationWeights {
    double action_rate = 1e-2;
    double torque = 1e-3;
    double accel = 1e-3;   // on per-control-step joint velocity change
    double joint_vel = 2e-4;
    double power = 1e-3;
    double joint_limit = 1e-2;
};

struct GaitWeights {
    double height = 1.0;        // exp kernel on (h - height_target)^2
    double thigh_band = 0.5;
    double calf_band = 0.5;
    double foot_force = 0.02;
    double default_pose = 0.1;  // gated by commanded speed > 0.1
};

struct TaskWeights {
    double grip_bonus = 1.0;
    double vertical = 1.0;     // (dh/dt)^2
    double foot_vel = 0.05;    // stance-foot speed sum
    double foot_force = 0.02;
    double default_pose = 0.1;
    double cart_violation = -10.0;
    double termination = -10.0;
};

struct RewardConfig {
    TrackingWeights tracking;
    RegularizationWeights regularization;
    GaitWeights gait;
    TaskWeights task;
    double termination_penalty = -10.0;  // stage-1 early termination
    double style_weight = 1.75;
    double task_weight = 1.0;
};

struct NetConfig {
    std::vector<int> policy_hidden{128, 64};
    std::vector<int> value_hidden{128, 64};
    std::vector<int> disc_hidden{64, 64};
};

struct AmpConfig {
    double w_gp = 10.0;
    int replay_capacity = 100000;
    int ref_transitions = 200000;
    int batch_size = 256;
    double disc_lr = 1e-4;
    int updates_per_epoch = 1;
};

struct PpoConfig {
    int num_envs = 64;
    int horizon = 64;
    int epochs = 4;
    int minibatch = 512;
    double lr = 1e-4;
    double gamma = 0.99;
    double gae_lambda = 0.95;
    double clip = 0.2;
    double entropy_coef = 2e-3;
    double value_coef = 0.5;
    double log_std_init = -1.0;
    double log_std_min = -4.0;
    double log_std_max = 1.0;
    bool warm_start = true;
    int stage1_iterations = 250;
    int stage2_iterations = 120;
};

struct CurriculumConfig {
    double survival_threshold = 0.8;
    double lin_vel_err_threshold = 0.2;
    int window = 8;  // iterations in the rolling metric window
};

struct StanleyConfig {
    double k_theta = 1.0;
    double k_e = 0.5;
    double v_min = 0.1;
    double v_max = 0.8;
    double omega_limit = 0.8;
    double tau_smooth = 0.3;
    double a1 = 1.0;  // speed decay per |e_tr|
    double a2 = 1.0;  // per |e_head|
    double a3 = 2.0;  // per |curvature|
};

struct PathSpec {
    std::string kind = "line";  // beat | river | sinc | line | circle | waypoints
    double scale = 1.0;
    double length = 10.0;                 // line
    double radius = 3.0;                  // circle
    std::vector<double> waypoints_x;
    std::vector<double> waypoints_y;
};

inline void to_json(json& j, const PathSpec& p) {
    j = json{{"kind", p.kind},       {"scale", p.scale},
             {"length", p.length},   {"radius", p.radius},
             {"waypoints_x", p.waypoints_x}, {"waypoints_y", p.waypoints_y}};
}
inline void from_json(const json& j, PathSpec& p) {
    p.kind = j.value("kind", p.kind);
    p.scale = j.value("scale", p.scale);
    p.length = j.value("length", p.length);
    p.radius = j.value("radius", p.radius);
    p.waypoints_x = j.value("waypoints_x", p.waypoints_x);
    p.waypoints_y = j.value("waypoints_y", p.waypoints_y);
}

struct SweepAxisConfig {
    std::vector<double> friction{0.0, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0};
    std::vector<double> robot_mass{0.5, 0.75, 1.0, 1.25, 1.5};
    std::vector<double> cart_mass{0.5, 0.75, 1.0, 1.25, 1.5};
    std::vector<double> wheel_damping{0.0, 0.005, 0.01, 0.015, 0.02};
    int trials = 50;
};

struct ExperimentConfig {
    std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
    std::vector<std::string> variants{"partial_amp", "no_amp", "full_amp", "hierarchical"};
    std::string train_backend = "A";
    std::string eval_backend = "B";
    int eval_episodes = 100;
    double eval_seconds = 20.0;
    double eval_command_vx = 0.5;
    std::string out_dir = "runs";
    std::string stage1_checkpoint;  // optional pre-existing artifacts
    std::string ref_dataset;
    std::vector<PathSpec> paths;
    double path_duration = 60.0;
    int path_runs = 5;
    SweepAxisConfig sweep;

    ExperimentConfig() {
        PathSpec beat;
        beat.kind = "beat";
        beat.scale = 2.2;
        PathSpec river;
        river.kind = "river";
        river.scale = 2.5;
        PathSpec sinc;
        sinc.kind = "sinc";
        sinc.scale = 2.0;
        paths = {beat, river, sinc};
    }
};

struct Config {
    EnvConfig env;
    RewardConfig rewards;
    NetConfig nets;
    AmpConfig amp;
    PpoConfig ppo;
    CurriculumConfig curriculum;
    StanleyConfig stanley;
    ExperimentConfig experiment;
};

// json plumbing. Field names match the struct members one-to-one; this block is the
// schema documentation of record (README mirrors it).

inline void to_json(json& j, const GeometryConfig& c) {
    j = json{{"l1", c.l1},
             {"l2", c.l2},
             {"hip_spacing", c.hip_spacing},
             {"track_width", c.track_width},
             {"arm_l1", c.arm_l1},
             {"arm_l2", c.arm_l2},
             {"arm_l3", c.arm_l3},
             {"arm_mount_x", c.arm_mount_x},
             {"default_thigh", c.default_thigh},
             {"default_calf", c.default_calf},
             {"default_arm", json::array({c.default_arm[0], c.default_arm[1], c.default_arm[2]})},
             {"default_grip", c.default_grip},
             {"height_target", c.height_target}};
}
inline void from_json(const json& j, GeometryConfig& c) {
    c.l1 = j.value("l1", c.l1);
    c.l2 = j.value("l2", c.l2);
    c.hip_spacing = j.value("hip_spacing", c.hip_spacing);
    c.track_width = j.value("track_width", c.track_width);
    c.arm_l1 = j.value("arm_l1", c.arm_l1);
    c.arm_l2 = j.value("arm_l2", c.arm_l2);
    c.arm_l3 = j.value("arm_l3", c.arm_l3);
    c.arm_mount_x = j.value("arm_mount_x", c.arm_mount_x);
    c.default_thigh = j.value("default_thigh", c.default_thigh);
    c.default_calf = j.value("default_calf", c.default_calf);
    if (j.contains("default_arm")) {
        const auto& a = j.at("default_arm");
        if (!a.is_array() || a.size() != 3) throw ConfigError("geometry.default_arm must have 3 entries");
        for (int i = 0; i < 3; ++i) c.default_arm[i] = a.at(static_cast<size_t>(i)).get<double>();
    }
    c.default_grip = j.value("default_grip", c.default_grip);
    c.height_target = j.value("height_target", c.height_target);
}

inline void to_json(json& j, const LimitsConfig& c) {
    j = json{{"thigh", c.thigh}, {"calf", c.calf}, {"arm", c.arm}, {"grip", c.grip}};
}
inline void from_json(const json& j, LimitsConfig& c) {
    c.thigh = j.value("thigh", c.thigh);
    c.calf = j.value("calf", c.calf);
    c.arm = j.value("arm", c.arm);
    c.grip = j.value("grip", c.grip);
}

inline void to_json(json& j, const GainsConfig& c) { j = json{{"kp", c.kp}, {"kd", c.kd}}; }
inline void from_json(const json& j, GainsConfig& c) {
    c.kp = j.value("kp", c.kp);
    c.kd = j.value("kd", c.kd);
}

inline void to_json(json& j, const BaseConfig& c) {
    j = json{{"mass", c.mass},
             {"yaw_inertia", c.yaw_inertia},
             {"tau_base", c.tau_base},
             {"c_traction", c.c_traction}};
}
inline void from_json(const json& j, BaseConfig& c) {
    c.mass = j.value("mass", c.mass);
    c.yaw_inertia = j.value("yaw_inertia", c.yaw_inertia);
    c.tau_base = j.value("tau_base", c.tau_base);
    c.c_traction = j.value("c_traction", c.c_traction);
}

inline void to_json(json& j, const ContactConfig& c) {
    j = json{{"tol", c.tol},
             {"k_foot", c.k_foot},
             {"tau_h", c.tau_h},
             {"min_height", c.min_height},
             {"max_no_stance", c.max_no_stance}};
}
inline void from_json(const json& j, ContactConfig& c) {
    c.tol = j.value("tol", c.tol);
    c.k_foot = j.value("k_foot", c.k_foot);
    c.tau_h = j.value("tau_h", c.tau_h);
    c.min_height = j.value("min_height", c.min_height);
    c.max_no_stance = j.value("max_no_stance", c.max_no_stance);
}

inline void to_json(json& j, const CartConfig& c) {
    j = json{{"mass", c.mass},
             {"yaw_inertia_coef", c.yaw_inertia_coef},
             {"handle_x", c.handle_x},
             {"wheel_damping", c.wheel_damping},
             {"k_s", c.k_s},
             {"k_d", c.k_d},
             {"f_max", c.f_max},
             {"f_tip", c.f_tip},
             {"r_attach", c.r_attach},
             {"r_detach", c.r_detach},
             {"grip_close_threshold", c.grip_close_threshold},
             {"detach_timeout", c.detach_timeout},
             {"lat_visc", c.lat_visc},
             {"lat_coulomb", c.lat_coulomb},
             {"spawn_distance", c.spawn_distance}};
}
inline void from_json(const json& j, CartConfig& c) {
    c.mass = j.value("mass", c.mass);
    c.yaw_inertia_coef = j.value("yaw_inertia_coef", c.yaw_inertia_coef);
    c.handle_x = j.value("handle_x", c.handle_x);
    c.wheel_damping = j.value("wheel_damping", c.wheel_damping);
    c.k_s = j.value("k_s", c.k_s);
    c.k_d = j.value("k_d", c.k_d);
    c.f_max = j.value("f_max", c.f_max);
    c.f_tip = j.value("f_tip", c.f_tip);
    c.r_attach = j.value("r_attach", c.r_attach);
    c.r_detach = j.value("r_detach", c.r_detach);
    c.grip_close_threshold = j.value("grip_close_threshold", c.grip_close_threshold);
    c.detach_timeout = j.value("detach_timeout", c.detach_timeout);
    c.lat_visc = j.value("lat_visc", c.lat_visc);
    c.lat_coulomb = j.value("lat_coulomb", c.lat_coulomb);
    c.spawn_distance = j.value("spawn_distance", c.spawn_distance);
}

inline void to_json(json& j, const BackendsConfig& c) {
    j = json{{"dt_a", c.dt_a},
             {"substeps_a", c.substeps_a},
             {"dt_b", c.dt_b},
             {"substeps_b", c.substeps_b},
             {"contact_tol_scale_b", c.contact_tol_scale_b},
             {"gain_scale_b", c.gain_scale_b}};
}
inline void from_json(const json& j, BackendsConfig& c) {
    c.dt_a = j.value("dt_a", c.dt_a);
    c.substeps_a = j.value("substeps_a", c.substeps_a);
    c.dt_b = j.value("dt_b", c.dt_b);
    c.substeps_b = j.value("substeps_b", c.substeps_b);
    c.contact_tol_scale_b = j.value("contact_tol_scale_b", c.contact_tol_scale_b);
    c.gain_scale_b = j.value("gain_scale_b", c.gain_scale_b);
}

inline void to_json(json& j, const RandomizationConfig& c) {
    j = json{{"static_friction", c.static_friction},
             {"dynamic_friction", c.dynamic_friction},
             {"restitution", c.restitution},
             {"push_force", c.push_force},
             {"push_torque", c.push_torque},
             {"mass_scale", c.mass_scale},
             {"gain_scale", c.gain_scale},
             {"cart_mass_scale", c.cart_mass_scale},
             {"init_pos", c.init_pos},
             {"init_yaw", c.init_yaw},
             {"init_vel", c.init_vel},
             {"init_joint_pos", c.init_joint_pos},
             {"init_joint_vel", c.init_joint_vel}};
}
inline void from_json(const json& j, RandomizationConfig& c) {
    c.static_friction = j.value("static_friction", c.static_friction);
    c.dynamic_friction = j.value("dynamic_friction", c.dynamic_friction);
    c.restitution = j.value("restitution", c.restitution);
    c.push_force = j.value("push_force", c.push_force);
    c.push_torque = j.value("push_torque", c.push_torque);
    c.mass_scale = j.value("mass_scale", c.mass_scale);
    c.gain_scale = j.value("gain_scale", c.gain_scale);
    c.cart_mass_scale = j.value("cart_mass_scale", c.cart_mass_scale);
    c.init_pos = j.value("init_pos", c.init_pos);
    c.init_yaw = j.value("init_yaw", c.init_yaw);
    c.init_vel = j.value("init_vel", c.init_vel);
    c.init_joint_pos = j.value("init_joint_pos", c.init_joint_pos);
    c.init_joint_vel = j.value("init_joint_vel", c.init_joint_vel);
}

inline void to_json(json& j, const NoiseConfig& c) {
    j = json{{"enabled", c.enabled},   {"ang_vel", c.ang_vel}, {"joint_pos", c.joint_pos},
             {"joint_vel", c.joint_vel}, {"command", c.command}, {"ee_cmd", c.ee_cmd},
             {"height", c.height}};
}
inline void from_json(const json& j, NoiseConfig& c) {
    c.enabled = j.value("enabled", c.enabled);
    c.ang_vel = j.value("ang_vel", c.ang_vel);
    c.joint_pos = j.value("joint_pos", c.joint_pos);
    c.joint_vel = j.value("joint_vel", c.joint_vel);
    c.command = j.value("command", c.command);
    c.ee_cmd = j.value("ee_cmd", c.ee_cmd);
    c.height = j.value("height", c.height);
}

inline void to_json(json& j, const CommandConfig& c) {
    j = json{{"vx_zero_prob", c.vx_zero_prob},
             {"vx", c.vx},
             {"heading_delta", c.heading_delta},
             {"k_h", c.k_h},
             {"omega_clip", c.omega_clip},
             {"resample_steps", c.resample_steps},
             {"ee_radius", c.ee_radius},
             {"ee_bearing", c.ee_bearing},
             {"ee_angle", c.ee_angle},
             {"stage2_vx", c.stage2_vx},
             {"stage2_heading_rate", c.stage2_heading_rate}};
}
inline void from_json(const json& j, CommandConfig& c) {
    c.vx_zero_prob = j.value("vx_zero_prob", c.vx_zero_prob);
    c.vx = j.value("vx", c.vx);
    c.heading_delta = j.value("heading_delta", c.heading_delta);
    c.k_h = j.value("k_h", c.k_h);
    c.omega_clip = j.value("omega_clip", c.omega_clip);
    c.resample_steps = j.value("resample_steps", c.resample_steps);
    c.ee_radius = j.value("ee_radius", c.ee_radius);
    c.ee_bearing = j.value("ee_bearing", c.ee_bearing);
    c.ee_angle = j.value("ee_angle", c.ee_angle);
    c.stage2_vx = j.value("stage2_vx", c.stage2_vx);
    c.stage2_heading_rate = j.value("stage2_heading_rate", c.stage2_heading_rate);
}

inline void to_json(json& j, const EpisodeConfig& c) {
    j = json{{"stage1_seconds", c.stage1_seconds},
             {"phase1_seconds", c.phase1_seconds},
             {"phase2_seconds", c.phase2_seconds}};
}
inline void from_json(const json& j, EpisodeConfig& c) {
    c.stage1_seconds = j.value("stage1_seconds", c.stage1_seconds);
    c.phase1_seconds = j.value("phase1_seconds", c.phase1_seconds);
    c.phase2_seconds = j.value("phase2_seconds", c.phase2_seconds);
}

inline void to_json(json& j, const EnvConfig& c) {
    j = json{{"geometry", c.geometry},
             {"limits", c.limits},
             {"gains", c.gains},
             {"base", c.base},
             {"contact", c.contact},
             {"cart", c.cart},
             {"backends", c.backends},
             {"randomization", c.randomization},
             {"noise", c.noise},
             {"commands", c.commands},
             {"episode", c.episode}};
}
inline void from_json(const json& j, EnvConfig& c) {
    c.geometry = j.value("geometry", c.geometry);
    c.limits = j.value("limits", c.limits);
    c.gains = j.value("gains", c.gains);
    c.base = j.value("base", c.base);
    c.contact = j.value("contact", c.contact);
    c.cart = j.value("cart", c.cart);
    c.backends = j.value("backends", c.backends);
    c.randomization = j.value("randomization", c.randomization);
    c.noise = j.value("noise", c.noise);
    c.commands = j.value("commands", c.commands);
    c.episode = j.value("episode", c.episode);
}

inline void to_json(json& j, const TrackingWeights& c) {
    j = json{{"lin_vel", c.lin_vel}, {"ang_vel", c.ang_vel}, {"heading", c.heading},
             {"ee_pos", c.ee_pos},   {"ee_ori", c.ee_ori}};
}
inline void from_json(const json& j, TrackingWeights& c) {
    c.lin_vel = j.value("lin_vel", c.lin_vel);
    c.ang_vel = j.value("ang_vel", c.ang_vel);
    c.heading = j.value("heading", c.heading);
    c.ee_pos = j.value("ee_pos", c.ee_pos);
    c.ee_ori = j.value("ee_ori", c.ee_ori);
}

inline void to_json(json& j, const RegularizationWeights& c) {
    j = json{{"action_rate", c.action_rate}, {"torque", c.torque},
             {"accel", c.accel},             {"joint_vel", c.joint_vel},
             {"power", c.power},             {"joint_limit", c.joint_limit}};
}
inline void from_json(const json& j, RegularizationWeights& c) {
    c.action_rate = j.value("action_rate", c.action_rate);
    c.torque = j.value("torque", c.torque);
    c.accel = j.value("accel", c.accel);
    c.joint_vel = j.value("joint_vel", c.joint_vel);
    c.power = j.value("power", c.power);
    c.joint_limit = j.value("joint_limit", c.joint_limit);
}

inline void to_json(json& j, const GaitWeights& c) {
    j = json{{"height", c.height},         {"thigh_band", c.thigh_band},
             {"calf_band", c.calf_band},   {"foot_force", c.foot_force},
             {"default_pose", c.default_pose}};
}
inline void from_json(const json& j, GaitWeights& c) {
    c.height = j.value("height", c.height);
    c.thigh_band = j.value("thigh_band", c.thigh_band);
    c.calf_band = j.value("calf_band", c.calf_band);
    c.foot_force = j.value("foot_force", c.foot_force);
    c.default_pose = j.value("default_pose", c.default_pose);
}

inline void to_json(json& j, const TaskWeights& c) {
    j = json{{"grip_bonus", c.grip_bonus},     {"vertical", c.vertical},
             {"foot_vel", c.foot_vel},         {"foot_force", c.foot_force},
             {"default_pose", c.default_pose}, {"cart_violation", c.cart_violation},
             {"termination", c.termination}};
}
inline void from_json(const json& j, TaskWeights& c) {
    c.grip_bonus = j.value("grip_bonus", c.grip_bonus);
    c.vertical = j.value("vertical", c.vertical);
    c.foot_vel = j.value("foot_vel", c.foot_vel);
    c.foot_force = j.value("foot_force", c.foot_force);
    c.default_pose = j.value("default_pose", c.default_pose);
    c.cart_violation = j.value("cart_violation", c.cart_violation);
    c.termination = j.value("termination", c.termination);
}

inline void to_json(json& j, const RewardConfig& c) {
    j = json{{"tracking", c.tracking},
             {"regularization", c.regularization},
             {"gait", c.gait},
             {"task", c.task},
             {"termination_penalty", c.termination_penalty},
             {"style_weight", c.style_weight},
             {"task_weight", c.task_weight}};
}
inline void from_json(const json& j, RewardConfig& c) {
    c.tracking = j.value("tracking", c.tracking);
    c.regularization = j.value("regularization", c.regularization);
    c.gait = j.value("gait", c.gait);
    c.task = j.value("task", c.task);
    c.termination_penalty = j.value("termination_penalty", c.termination_penalty);
    c.style_weight = j.value("style_weight", c.style_weight);
    c.task_weight = j.value("task_weight", c.task_weight);
}

inline void to_json(json& j, const NetConfig& c) {
    j = json{{"policy_hidden", c.policy_hidden},
             {"value_hidden", c.value_hidden},
             {"disc_hidden", c.disc_hidden}};
}
inline void from_json(const json& j, NetConfig& c) {
    c.policy_hidden = j.value("policy_hidden", c.policy_hidden);
    c.value_hidden = j.value("value_hidden", c.value_hidden);
    c.disc_hidden = j.value("disc_hidden", c.disc_hidden);
}

inline void to_json(json& j, const AmpConfig& c) {
    j = json{{"w_gp", c.w_gp},
             {"replay_capacity", c.replay_capacity},
             {"ref_transitions", c.ref_transitions},
             {"batch_size", c.batch_size},
             {"disc_lr", c.disc_lr},
             {"updates_per_epoch", c.updates_per_epoch}};
}
inline void from_json(const json& j, AmpConfig& c) {
    c.w_gp = j.value("w_gp", c.w_gp);
    c.replay_capacity = j.value("replay_capacity", c.replay_capacity);
    c.ref_transitions = j.value("ref_transitions", c.ref_transitions);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.disc_lr = j.value("disc_lr", c.disc_lr);
    c.updates_per_epoch = j.value("updates_per_epoch", c.updates_per_epoch);
}

inline void to_json(json& j, const PpoConfig& c) {
    j = json{{"num_envs", c.num_envs},
             {"horizon", c.horizon},
             {"epochs", c.epochs},
             {"minibatch", c.minibatch},
             {"lr", c.lr},
             {"gamma", c.gamma},
             {"gae_lambda", c.gae_lambda},
             {"clip", c.clip},
             {"entropy_coef", c.entropy_coef},
             {"value_coef", c.value_coef},
             {"log_std_init", c.log_std_init},
             {"log_std_min", c.log_std_min},
             {"log_std_max", c.log_std_max},
             {"warm_start", c.warm_start},
             {"stage1_iterations", c.stage1_iterations},
             {"stage2_iterations", c.stage2_iterations}};
}
inline void from_json(const json& j, PpoConfig& c) {
    c.num_envs = j.value("num_envs", c.num_envs);
    c.horizon = j.value("horizon", c.horizon);
    c.epochs = j.value("epochs", c.epochs);
    c.minibatch = j.value("minibatch", c.minibatch);
    c.lr = j.value("lr", c.lr);
    c.gamma = j.value("gamma", c.gamma);
    c.gae_lambda = j.value("gae_lambda", c.gae_lambda);
    c.clip = j.value("clip", c.clip);
    c.entropy_coef = j.value("entropy_coef", c.entropy_coef);
    c.value_coef = j.value("value_coef", c.value_coef);
    c.log_std_init = j.value("log_std_init", c.log_std_init);
    c.log_std_min = j.value("log_std_min", c.log_std_min);
    c.log_std_max = j.value("log_std_max", c.log_std_max);
    c.warm_start = j.value("warm_start", c.warm_start);
    c.stage1_iterations = j.value("stage1_iterations", c.stage1_iterations);
    c.stage2_iterations = j.value("stage2_iterations", c.stage2_iterations);
}

inline void to_json(json& j, const CurriculumConfig& c) {
    j = json{{"survival_threshold", c.survival_threshold},
             {"lin_vel_err_threshold", c.lin_vel_err_threshold},
             {"window", c.window}};
}
inline void from_json(const json& j, CurriculumConfig& c) {
    c.survival_threshold = j.value("survival_threshold", c.survival_threshold);
    c.lin_vel_err_threshold = j.value("lin_vel_err_threshold", c.lin_vel_err_threshold);
    c.window = j.value("window", c.window);
}

inline void to_json(json& j, const StanleyConfig& c) {
    j = json{{"k_theta", c.k_theta},
             {"k_e", c.k_e},
             {"v_min", c.v_min},
             {"v_max", c.v_max},
             {"omega_limit", c.omega_limit},
             {"tau_smooth", c.tau_smooth},
             {"a1", c.a1},
             {"a2", c.a2},
             {"a3", c.a3}};
}
inline void from_json(const json& j, StanleyConfig& c) {
    c.k_theta = j.value("k_theta", c.k_theta);
    c.k_e = j.value("k_e", c.k_e);
    c.v_min = j.value("v_min", c.v_min);
    c.v_max = j.value("v_max", c.v_max);
    c.omega_limit = j.value("omega_limit", c.omega_limit);
    c.tau_smooth = j.value("tau_smooth", c.tau_smooth);
    c.a1 = j.value("a1", c.a1);
    c.a2 = j.value("a2", c.a2);
    c.a3 = j.value("a3", c.a3);
}

inline void to_json(json& j, const SweepAxisConfig& c) {
    j = json{{"friction", c.friction},
             {"robot_mass", c.robot_mass},
             {"cart_mass", c.cart_mass},
             {"wheel_damping", c.wheel_damping},
             {"trials", c.trials}};
}
inline void from_json(const json& j, SweepAxisConfig& c) {
    c.friction = j.value("friction", c.friction);
    c.robot_mass = j.value("robot_mass", c.robot_mass);
    c.cart_mass = j.value("cart_mass", c.cart_mass);
    c.wheel_damping = j.value("wheel_damping", c.wheel_damping);
    c.trials = j.value("trials", c.trials);
}

inline void to_json(json& j, const ExperimentConfig& c) {
    j = json{{"seeds", c.seeds},
             {"variants", c.variants},
             {"train_backend", c.train_backend},
             {"eval_backend", c.eval_backend},
             {"eval_episodes", c.eval_episodes},
             {"eval_seconds", c.eval_seconds},
             {"eval_command_vx", c.eval_command_vx},
             {"out_dir", c.out_dir},
             {"stage1_checkpoint", c.stage1_checkpoint},
             {"ref_dataset", c.ref_dataset},
             {"paths", c.paths},
             {"path_duration", c.path_duration},
             {"path_runs", c.path_runs},
             {"sweep", c.sweep}};
}
inline void from_json(const json& j, ExperimentConfig& c) {
    c.seeds = j.value("seeds", c.seeds);
    c.variants = j.value("variants", c.variants);
    c.train_backend = j.value("train_backend", c.train_backend);
    c.eval_backend = j.value("eval_backend", c.eval_backend);
    c.eval_episodes = j.value("eval_episodes", c.eval_episodes);
    c.eval_seconds = j.value("eval_seconds", c.eval_seconds);
    c.eval_command_vx = j.value("eval_command_vx", c.eval_command_vx);
    c.out_dir = j.value("out_dir", c.out_dir);
    c.stage1_checkpoint = j.value("stage1_checkpoint", c.stage1_checkpoint);
    c.ref_dataset = j.value("ref_dataset", c.ref_dataset);
    c.paths = j.value("paths", c.paths);
    c.path_duration = j.value("path_duration", c.path_duration);
    c.path_runs = j.value("path_runs", c.path_runs);
    c.sweep = j.value("sweep", c.sweep);
}

inline void to_json(json& j, const Config& c) {
    j = json{{"env", c.env},           {"rewards", c.rewards},   {"nets", c.nets},
             {"amp", c.amp},           {"ppo", c.ppo},           {"curriculum", c.curriculum},
             {"stanley", c.stanley},   {"experiment", c.experiment}};
}
inline void from_json(const json& j, Config& c) {
    c.env = j.value("env", c.env);
    c.rewards = j.value("rewards", c.rewards);
    c.nets = j.value("nets", c.nets);
    c.amp = j.value("amp", c.amp);
    c.ppo = j.value("ppo", c.ppo);
    c.curriculum = j.value("curriculum", c.curriculum);
    c.stanley = j.value("stanley", c.stanley);
    c.experiment = j.value("experiment", c.experiment);
}

// Collects every violation before throwing so a bad config surfaces all problems in
// one pass rather than one per run attempt.
inline std::vector<std::string> config_violations(const Config& c) {
    std::vector<std::string> v;
    auto bad = [&](const std::string& msg) { v.push_back(msg); };
    auto check_range = [&](const Range& r, const std::string& name) {
        if (!(r.lo <= r.hi)) bad(name + ": lo " + std::to_string(r.lo) + " > hi " + std::to_string(r.hi));
    };

    const EnvConfig& e = c.env;
    if (e.geometry.l1 <= 0 || e.geometry.l2 <= 0) bad("env.geometry: link lengths must be positive");
    if (e.geometry.track_width <= 0) bad("env.geometry.track_width must be positive");
    if (e.gains.kp <= 0 || e.gains.kd < 0) bad("env.gains: kp > 0 and kd >= 0 required");
    if (e.base.tau_base <= 0) bad("env.base.tau_base must be positive");
    if (e.base.yaw_inertia <= 0) bad("env.base.yaw_inertia must be positive");
    if (e.contact.tol <= 0) bad("env.contact.tol must be positive");
    if (e.contact.tau_h <= 0) bad("env.contact.tau_h must be positive");
    if (e.contact.min_height <= 0) bad("env.contact.min_height must be positive");
    if (e.cart.mass <= 0) bad("env.cart.mass must be positive");
    if (!(e.cart.r_detach > e.cart.r_attach)) bad("env.cart: r_detach must exceed r_attach");
    if (e.cart.f_max <= 0) bad("env.cart.f_max must be positive");
    if (e.backends.dt_a <= 0 || e.backends.dt_b <= 0) bad("env.backends: dt must be positive");
    if (e.backends.substeps_a < 1 || e.backends.substeps_b < 1) bad("env.backends: substeps must be >= 1");
    check_range(e.randomization.static_friction, "env.randomization.static_friction");
    check_range(e.randomization.dynamic_friction, "env.randomization.dynamic_friction");
    check_range(e.randomization.restitution, "env.randomization.restitution");
    check_range(e.randomization.mass_scale, "env.randomization.mass_scale");
    check_range(e.randomization.gain_scale, "env.randomization.gain_scale");
    check_range(e.randomization.cart_mass_scale, "env.randomization.cart_mass_scale");
    if (e.randomization.static_friction.lo < 0) bad("env.randomization.static_friction.lo must be >= 0");
    if (e.commands.vx_zero_prob < 0 || e.commands.vx_zero_prob > 1)
        bad("env.commands.vx_zero_prob must lie in [0,1]");
    check_range(e.commands.vx, "env.commands.vx");
    if (e.commands.vx.lo <= 0) bad("env.commands.vx.lo must be positive (zero speed is drawn separately)");
    if (e.commands.omega_clip <= 0) bad("env.commands.omega_clip must be positive");
    if (e.commands.resample_steps < 1) bad("env.commands.resample_steps must be >= 1");
    if (e.episode.stage1_seconds <= 0 || e.episode.phase1_seconds <= 0 || e.episode.phase2_seconds <= 0)
        bad("env.episode: lengths must be positive");
    if (e.episode.phase1_seconds >= e.episode.phase2_seconds)
        bad("env.episode: phase1_seconds must be shorter than phase2_seconds");

    if (c.rewards.style_weight < 0) bad("rewards.style_weight must be >= 0");

    auto check_hidden = [&](const std::vector<int>& h, const std::string& name) {
        for (int s : h)
            if (s < 1) bad(name + ": layer sizes must be >= 1");
    };
    check_hidden(c.nets.policy_hidden, "nets.policy_hidden");
    check_hidden(c.nets.value_hidden, "nets.value_hidden");
    check_hidden(c.nets.disc_hidden, "nets.disc_hidden");

    if (c.amp.w_gp < 0) bad("amp.w_gp must be non-negative");
    if (c.amp.replay_capacity < 1) bad("amp.replay_capacity must be >= 1");
    if (c.amp.ref_transitions < 1) bad("amp.ref_transitions must be >= 1");
    if (c.amp.batch_size < 1) bad("amp.batch_size must be >= 1");

    const PpoConfig& p = c.ppo;
    if (p.num_envs < 1) bad("ppo.num_envs must be >= 1");
    if (p.horizon < 1) bad("ppo.horizon must be >= 1");
    if (p.epochs < 1) bad("ppo.epochs must be >= 1");
    if (p.minibatch < 1) bad("ppo.minibatch must be >= 1");
    if (!(p.gamma > 0 && p.gamma < 1)) bad("ppo.gamma must lie in (0,1)");
    if (!(p.gae_lambda >= 0 && p.gae_lambda <= 1)) bad("ppo.gae_lambda must lie in [0,1]");
    if (p.clip <= 0) bad("ppo.clip must be positive");
    if (p.log_std_min > p.log_std_max) bad("ppo.log_std_min must not exceed log_std_max");
    if (p.stage1_iterations < 1 || p.stage2_iterations < 1) bad("ppo: iteration counts must be >= 1");

    if (c.curriculum.window < 1) bad("curriculum.window must be >= 1");
    if (c.curriculum.survival_threshold < 0 || c.curriculum.survival_threshold > 1)
        bad("curriculum.survival_threshold must lie in [0,1]");

    const StanleyConfig& s = c.stanley;
    if (s.k_theta <= 0 || s.k_e <= 0) bad("stanley: gains must be positive");
    if (!(s.v_min > 0 && s.v_min <= s.v_max)) bad("stanley: need 0 < v_min <= v_max");
    if (!(s.omega_limit > 0 && s.omega_limit <= 0.8))
        bad("stanley.omega_limit must lie in (0, 0.8] (policy training distribution)");
    if (s.tau_smooth <= 0) bad("stanley.tau_smooth must be positive");

    const ExperimentConfig& x = c.experiment;
    if (x.seeds.empty()) bad("experiment.seeds must be non-empty");
    for (std::size_t i = 0; i < x.seeds.size(); ++i)
        for (std::size_t k = i + 1; k < x.seeds.size(); ++k)
            if (x.seeds[i] == x.seeds[k]) {
                bad("experiment.seeds must be distinct (seed " + std::to_string(x.seeds[i]) + " repeats)");
                k = x.seeds.size();
                i = x.seeds.size() - 1;
            }
    for (const std::string& var : x.variants)
        if (var != "no_amp" && var != "partial_amp" && var != "full_amp" && var != "hierarchical")
            bad("experiment.variants: unknown variant '" + var + "'");
    if (x.train_backend != "A" && x.train_backend != "B") bad("experiment.train_backend must be A or B");
    if (x.eval_backend != "A" && x.eval_backend != "B") bad("experiment.eval_backend must be A or B");
    if (x.eval_episodes < 1) bad("experiment.eval_episodes must be >= 1");
    if (x.eval_seconds <= 0) bad("experiment.eval_seconds must be positive");
    if (x.paths.empty()) bad("experiment.paths must be non-empty");
    for (const PathSpec& ps : x.paths) {
        if (ps.kind != "beat" && ps.kind != "river" && ps.kind != "sinc" && ps.kind != "line" &&
            ps.kind != "circle" && ps.kind != "waypoints")
            bad("experiment.paths: unknown kind '" + ps.kind + "'");
        if (ps.kind == "waypoints" &&
            (ps.waypoints_x.size() != ps.waypoints_y.size() || ps.waypoints_x.size() < 2))
            bad("experiment.paths: waypoints need matching x/y lists of length >= 2");
        if (ps.scale <= 0) bad("experiment.paths: scale must be positive");
    }
    if (x.sweep.trials < 1) bad("experiment.sweep.trials must be >= 1");

    return v;
}

inline void validate_config(const Config& c) {
    const std::vector<std::string> v = config_violations(c);
    if (v.empty()) return;
    std::string msg = "config validation failed (" + std::to_string(v.size()) + " violations):";
    for (const std::string& s : v) msg += "\n  - " + s;
    throw ConfigError(msg);
}

inline Config config_from_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file: " + path);
    json user;
    try {
        f >> user;
    } catch (const json::exception& e) {
        throw ConfigError("malformed config " + path + ": " + e.what());
    }
    json full = json(Config{});
    full.merge_patch(user);
    Config c;
    try {
        c = full.get<Config>();
    } catch (const json::exception& e) {
        throw ConfigError("config " + path + " has wrong field types: " + e.what());
    }
    validate_config(c);
    return c;
}

inline void config_to_file(const Config& c, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for write: " + path);
    f << json(c).dump(1) << "\n";
    if (!f) throw IoError("write failed: " + path);
}

// FNV-1a over the canonical (sorted-key) serialization; identifies a configuration in
// checkpoints and run-directory names.
inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::string config_hash(const Config& c) {
    const std::uint64_t h = fnv1a(json(c).dump());
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

}  // namespace cartloco
