#pragma once

#include <cmath>

#include "cartloco/config.hpp"
#include "cartloco/math.hpp"
#include "cartloco/sim_types.hpp"

namespace cartloco::sim {

inline Vec2 cart_handle_world(const CartState& c, const CartConfig& cfg) {
    return Vec2{c.x, c.y} + rotate({cfg.handle_x, 0.0}, c.yaw);
}

// World-frame velocity of the handle point (rigid-body kinematics about the axle midpoint).
inline Vec2 cart_handle_vel_world(const CartState& c, const CartConfig& cfg) {
    const Vec2 v_world = rotate({c.v_long, c.v_lat}, c.yaw);
    const Vec2 r = rotate({cfg.handle_x, 0.0}, c.yaw);
    return {v_world.x - c.yaw_rate * r.y, v_world.y + c.yaw_rate * r.x};
}

// One integrator sub-step of the cart under a world-frame force applied at the handle.
// Longitudinal: damped by wheel_damping (implicit under backend A, explicit under B).
// Lateral: backend A decays viscously, backend B applies a Coulomb-style decrement.
// Yaw: driven by the force torque about the axle midpoint, damped like the longitudinal
// axis. Backend A advances the pose with the updated velocities (semi-implicit), B with
// the pre-update velocities (explicit). Frame-rotation coupling terms are neglected.
inline CartState cart_step(const CartState& cart, Vec2 force_world, const EnvParams& env,
                           const CartConfig& cfg, double dt, Backend backend) {
    if (dt <= 0.0) throw ContractError("cart_step: dt must be positive");
    CartState c = cart;
    const double m = env.cart_mass;
    const double inertia = cfg.yaw_inertia_coef * m;

    const Vec2 f_cart = rotate(force_world, -c.yaw);  // into the cart frame
    const Vec2 r = rotate({cfg.handle_x, 0.0}, c.yaw);
    const double torque = r.cross(force_world);

    const double v_long_old = c.v_long, v_lat_old = c.v_lat, yaw_rate_old = c.yaw_rate;

    if (backend == Backend::kA) {
        c.v_long = (c.v_long + dt * f_cart.x / m) / (1.0 + dt * env.wheel_damping);
        c.v_lat = (c.v_lat + dt * f_cart.y / m) / (1.0 + dt * cfg.lat_visc);
        c.yaw_rate = (c.yaw_rate + dt * torque / inertia) / (1.0 + dt * env.wheel_damping);
    } else {
        c.v_long = c.v_long + dt * (f_cart.x / m - env.wheel_damping * v_long_old);
        double v = c.v_lat + dt * f_cart.y / m;
        const double dec = dt * cfg.lat_coulomb;
        c.v_lat = std::fabs(v) <= dec ? 0.0 : v - (v > 0 ? dec : -dec);
        c.yaw_rate = c.yaw_rate + dt * (torque / inertia - env.wheel_damping * yaw_rate_old);
    }

    const double vl = backend == Backend::kA ? c.v_long : v_long_old;
    const double vt = backend == Backend::kA ? c.v_lat : v_lat_old;
    const double wr = backend == Backend::kA ? c.yaw_rate : yaw_rate_old;
    const Vec2 v_world = rotate({vl, vt}, c.yaw);
    c.x += dt * v_world.x;
    c.y += dt * v_world.y;
    c.yaw = wrap_angle(c.yaw + dt * wr);
    return c;
}

}  // namespace cartloco::sim
