#pragma once

#include <array>
#include <cstdint>

#include "cartloco/config.hpp"
#include "cartloco/math.hpp"

namespace cartloco::sim {

enum class Stage { kLocomotion, kCartPush };
enum class Backend { kA, kB };

inline Backend backend_from_name(const std::string& s) {
    if (s == "A") return Backend::kA;
    if (s == "B") return Backend::kB;
    throw ConfigError("unknown backend: " + s);
}

inline const char* backend_name(Backend b) { return b == Backend::kA ? "A" : "B"; }

// Per-episode randomized physical parameters.
struct EnvParams {
    double static_friction = 0.8;
    double dynamic_friction = 0.6;
    double restitution = 0.1;
    double robot_mass_scale = 1.0;
    double cart_mass = 3.0;
    double wheel_damping = 0.005;
    double p_gain_scale = 1.0;
    double d_gain_scale = 1.0;
    Vec2 external_force;     // world frame, constant over the episode
    double external_torque = 0.0;
};

struct CartState {
    double x = 0.0, y = 0.0, yaw = 0.0;
    double v_long = 0.0, v_lat = 0.0;  // cart frame
    double yaw_rate = 0.0;
};

// Leg order: FL, FR, RL, RR; each leg contributes (thigh, calf) to the 8-vectors.
// Left legs are indices 0 and 2.
constexpr int kNumLegs = 4;
constexpr int kLegJoints = 8;
constexpr int kArmJoints = 3;
constexpr int kActionDim = 12;  // 8 leg + 3 arm + 1 gripper

struct SimState {
    double x = 0.0, y = 0.0, yaw = 0.0;   // base pose, world
    double vx = 0.0, vy = 0.0;            // base velocity, body frame
    double omega = 0.0;                   // yaw rate
    double h = 0.3;                       // base height (quasi-static)
    double dh = 0.0;                      // height rate over the last control step

    std::array<double, kLegJoints> q_leg{};
    std::array<double, kArmJoints> q_arm{};
    double q_grip = 0.0;
    std::array<double, kLegJoints> qd_leg{};
    std::array<double, kArmJoints> qd_arm{};
    double qd_grip = 0.0;

    CartState cart;
    bool attached = false;
    double detached_time = 0.0;   // s continuously detached (cartpush only)
    double no_stance_time = 0.0;  // s continuously without any stance foot

    double t = 0.0;
    bool terminated = false;
    bool cart_violation = false;  // latches when the coupling force exceeds the tip limit
    Stage stage = Stage::kLocomotion;
    EnvParams env;
};

// Target joint positions; clipped to limits before use.
struct Action {
    std::array<double, kActionDim> v{};  // [leg 8, arm 3, grip 1]

    static Action from_vec(const Vec& a) {
        Action act;
        if (a.size() != kActionDim) throw ContractError("Action::from_vec: need 12 entries");
        for (int i = 0; i < kActionDim; ++i) act.v[static_cast<size_t>(i)] = a[static_cast<size_t>(i)];
        return act;
    }
    Vec to_vec() const { return Vec(v.begin(), v.end()); }
};

struct CommandSet {
    double vx = 0.0;        // desired forward speed, m/s
    double omega = 0.0;     // desired yaw rate (recomputed from beta each step)
    double beta = 0.0;      // heading target, rad world
    double beta_rate = 0.0; // heading target drift, rad/s (curved-push phase)
    Vec2 p_ee;              // EE position target, base frame
    double theta_ee = 0.0;  // EE orientation target, base-relative
};

struct TerminationFlags {
    bool fell = false;
    bool cart_violation = false;
    bool detached_timeout = false;
    bool timeout = false;

    bool failure() const { return fell || cart_violation || detached_timeout; }
    bool any() const { return failure() || timeout; }
};

// Per-control-step measurements the reward terms consume. Torques are normalized by the
// nominal p-gain, so magnitudes are O(position error).
struct StepDiagnostics {
    std::array<double, kActionDim> torque{};       // normalized PD torque, mean over substeps
    std::array<double, kActionDim> accel{};        // joint velocity change over the control step
    double power = 0.0;                            // sum |torque_i * qd_i|, mean over substeps
    std::array<double, kNumLegs> foot_force{};     // contact proxy from the returned state
    std::array<bool, kNumLegs> stance{};           // stance predicate on the returned state
    double stance_foot_speed = 0.0;                // sum over stance feet of |world foot forward
                                                   // speed|, mean over substeps
    double slip = 0.0;                             // commanded speed lost to traction, mean
    double coupling_force = 0.0;                   // applied |F| on the cart, mean over substeps
    TerminationFlags flags;
};

}  // namespace cartloco::sim
