#pragma once

#include <cmath>

#include "cartloco/config.hpp"
#include "cartloco/math.hpp"

namespace cartloco::sim {

// Two-link sagittal leg. Angles measured from straight down; thigh=calf=0 is the fully
// extended leg hanging vertically: forward offset 0, drop l1+l2.
struct LegFk {
    double forward = 0.0;  // foot x in base frame relative to the hip, m
    double drop = 0.0;     // vertical extension below the hip, m
};

inline LegFk leg_fk(double thigh, double calf, double l1, double l2) {
    LegFk fk;
    fk.forward = l1 * std::sin(thigh) + l2 * std::sin(thigh + calf);
    fk.drop = l1 * std::cos(thigh) + l2 * std::cos(thigh + calf);
    return fk;
}

// Rows of the FK Jacobian: d(forward)/d(thigh, calf) and d(drop)/d(thigh, calf).
struct LegJac {
    double dfwd_dthigh, dfwd_dcalf;
    double ddrop_dthigh, ddrop_dcalf;
};

inline LegJac leg_jacobian(double thigh, double calf, double l1, double l2) {
    const double c1 = std::cos(thigh), s1 = std::sin(thigh);
    const double c12 = std::cos(thigh + calf), s12 = std::sin(thigh + calf);
    LegJac j;
    j.dfwd_dthigh = l1 * c1 + l2 * c12;
    j.dfwd_dcalf = l2 * c12;
    j.ddrop_dthigh = -l1 * s1 - l2 * s12;
    j.ddrop_dcalf = -l2 * s12;
    return j;
}

// Foot forward velocity in the base frame.
inline double foot_forward_vel(double thigh, double calf, double qd_thigh, double qd_calf, double l1,
                               double l2) {
    const LegJac j = leg_jacobian(thigh, calf, l1, l2);
    return j.dfwd_dthigh * qd_thigh + j.dfwd_dcalf * qd_calf;
}

// Planar 3-revolute arm in the horizontal base plane, mounted at (mount_x, 0). Joint
// angles accumulate; the EE orientation relative to the base is their plain sum.
struct ArmFk {
    Vec2 ee;           // base frame
    double ee_angle;   // base-relative
};

inline ArmFk arm_fk(const double q[3], const GeometryConfig& g) {
    const double a1 = q[0];
    const double a2 = q[0] + q[1];
    const double a3 = q[0] + q[1] + q[2];
    ArmFk fk;
    fk.ee.x = g.arm_mount_x + g.arm_l1 * std::cos(a1) + g.arm_l2 * std::cos(a2) + g.arm_l3 * std::cos(a3);
    fk.ee.y = g.arm_l1 * std::sin(a1) + g.arm_l2 * std::sin(a2) + g.arm_l3 * std::sin(a3);
    fk.ee_angle = a3;
    return fk;
}

// Hip x-offset in the base frame per leg (FL, FR, RL, RR).
inline double hip_x(int leg, const GeometryConfig& g) {
    return (leg < 2 ? 0.5 : -0.5) * g.hip_spacing;
}

inline bool is_left_leg(int leg) { return leg == 0 || leg == 2; }

}  // namespace cartloco::sim
