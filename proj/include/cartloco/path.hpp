#pragma once
// Parametric planar reference paths. Each family is an analytic curve p(u) on
// u in [0,1] with closed-form first and second derivatives, resampled once into an
// arc-length table (2048 uniform parameter samples) that maps s <-> u by linear
// interpolation. Geometry queries evaluate the analytic curve at the looked-up
// parameter, so tangents and curvature carry no table noise.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "cartloco/config.hpp"
#include "cartloco/errors.hpp"
#include "cartloco/math.hpp"

namespace cartloco::path {

constexpr double kPi = 3.14159265358979323846;
constexpr int kTableSamples = 2048;

enum class PathKind { kLine, kCircle, kBeat, kRiver, kSinc, kWaypoints };

inline PathKind path_kind_from_name(const std::string& s) {
    if (s == "line") return PathKind::kLine;
    if (s == "circle") return PathKind::kCircle;
    if (s == "beat") return PathKind::kBeat;
    if (s == "river") return PathKind::kRiver;
    if (s == "sinc") return PathKind::kSinc;
    if (s == "waypoints") return PathKind::kWaypoints;
    throw ConfigError("unknown path kind: " + s);
}

// Value plus first and second parameter derivatives at one u.
struct CurvePoint {
    Vec2 p;
    Vec2 d1;
    Vec2 d2;
};

namespace detail {

// sin(z)/z with the removable singularity handled by series; derivatives likewise.
inline double sinc(double z) {
    if (std::abs(z) < 1e-4) return 1.0 - z * z / 6.0;
    return std::sin(z) / z;
}
inline double sinc_d1(double z) {
    if (std::abs(z) < 1e-4) return -z / 3.0 + z * z * z / 30.0;
    return (std::cos(z) - std::sin(z) / z) / z;
}
inline double sinc_d2(double z) {
    if (std::abs(z) < 1e-4) return -1.0 / 3.0 + z * z / 10.0;
    return (-std::sin(z) - 2.0 * std::cos(z) / z + 2.0 * std::sin(z) / (z * z)) / z;
}

}  // namespace detail

// Differentiable planar curve with a precomputed arc-length table. Formulas (all
// config-scaled, u in [0,1]):
//   line:      p = (length u, 0)
//   circle:    p = radius (sin 2pi u, 1 - cos 2pi u)            closed, CCW from origin
//   beat:      p = scale (sin 2pi u, 0.5 sin 4pi u)             two-lobed closed curve
//   river:     p = (length u, 0.5 scale sin 4pi u)              gentle meander
//   sinc:      p = (length (u-1/2), scale sinc(4pi (u-1/2)))    central peak, side lobes
//   waypoints: uniform Catmull-Rom through the listed points (endpoints doubled)
class PlanarPath {
  public:
    explicit PlanarPath(const PathSpec& spec) : spec_(spec), kind_(path_kind_from_name(spec.kind)) {
        if (spec_.scale <= 0.0) throw ConfigError("path scale must be positive");
        if (spec_.length <= 0.0) throw ConfigError("path length must be positive");
        if (spec_.radius <= 0.0) throw ConfigError("path radius must be positive");
        if (kind_ == PathKind::kWaypoints) {
            if (spec_.waypoints_x.size() != spec_.waypoints_y.size())
                throw ConfigError("waypoint coordinate lists differ in length");
            if (spec_.waypoints_x.size() < 2) throw ConfigError("waypoints path needs >= 2 points");
        }
        build_table();
    }

    CurvePoint eval_param(double u) const {
        u = std::clamp(u, 0.0, 1.0);
        switch (kind_) {
            case PathKind::kLine: {
                return {{spec_.length * u, 0.0}, {spec_.length, 0.0}, {0.0, 0.0}};
            }
            case PathKind::kCircle: {
                const double w = 2.0 * kPi;
                const double t = w * u;
                const double r = spec_.radius;
                return {{r * std::sin(t), r * (1.0 - std::cos(t))},
                        {r * w * std::cos(t), r * w * std::sin(t)},
                        {-r * w * w * std::sin(t), r * w * w * std::cos(t)}};
            }
            case PathKind::kBeat: {
                const double w = 2.0 * kPi;
                const double a = spec_.scale;
                return {{a * std::sin(w * u), 0.5 * a * std::sin(2.0 * w * u)},
                        {a * w * std::cos(w * u), a * w * std::cos(2.0 * w * u)},
                        {-a * w * w * std::sin(w * u), -2.0 * a * w * w * std::sin(2.0 * w * u)}};
            }
            case PathKind::kRiver: {
                const double w = 4.0 * kPi;
                const double a = 0.5 * spec_.scale;
                return {{spec_.length * u, a * std::sin(w * u)},
                        {spec_.length, a * w * std::cos(w * u)},
                        {0.0, -a * w * w * std::sin(w * u)}};
            }
            case PathKind::kSinc: {
                const double w = 4.0 * kPi;
                const double z = w * (u - 0.5);
                return {{spec_.length * (u - 0.5), spec_.scale * detail::sinc(z)},
                        {spec_.length, spec_.scale * w * detail::sinc_d1(z)},
                        {0.0, spec_.scale * w * w * detail::sinc_d2(z)}};
            }
            case PathKind::kWaypoints: return eval_catmull_rom(u);
        }
        throw ContractError("PlanarPath: bad kind");
    }

    double total_length() const { return table_s_.back(); }
    const Vec& table() const { return table_s_; }
    const PathSpec& spec() const { return spec_; }
    PathKind kind() const { return kind_; }

    // u for a given arc length (clamped to the domain), linear between table samples.
    double param_from_length(double s) const {
        s = std::clamp(s, 0.0, total_length());
        const auto it = std::lower_bound(table_s_.begin(), table_s_.end(), s);
        if (it == table_s_.begin()) return 0.0;
        const size_t hi = static_cast<size_t>(it - table_s_.begin());
        const size_t lo = hi - 1;
        const double span = table_s_[hi] - table_s_[lo];
        const double f = span > 0.0 ? (s - table_s_[lo]) / span : 0.0;
        return (static_cast<double>(lo) + f) / static_cast<double>(kTableSamples - 1);
    }

    // Arc length at a parameter, linear between table samples.
    double length_from_param(double u) const {
        u = std::clamp(u, 0.0, 1.0);
        const double x = u * static_cast<double>(kTableSamples - 1);
        const size_t lo = std::min(static_cast<size_t>(x), static_cast<size_t>(kTableSamples - 2));
        const double f = x - static_cast<double>(lo);
        return table_s_[lo] + f * (table_s_[lo + 1] - table_s_[lo]);
    }

    const std::vector<Vec2>& sample_points() const { return table_p_; }

  private:
    void build_table() {
        table_s_.resize(kTableSamples);
        table_p_.resize(kTableSamples);
        double s = 0.0;
        Vec2 prev{};
        for (int i = 0; i < kTableSamples; ++i) {
            const double u = static_cast<double>(i) / (kTableSamples - 1);
            const CurvePoint c = eval_param(u);
            if (c.d1.norm() <= 0.0) throw ContractError("path tangent vanishes at u=" + std::to_string(u));
            if (i > 0) {
                const double ds = (c.p - prev).norm();
                if (ds <= 0.0) throw ContractError("path arc-length table not strictly increasing");
                s += ds;
            }
            table_s_[static_cast<size_t>(i)] = s;
            table_p_[static_cast<size_t>(i)] = c.p;
            prev = c.p;
        }
    }

    // Uniform Catmull-Rom with doubled endpoints: C1, passes through every waypoint.
    CurvePoint eval_catmull_rom(double u) const {
        const size_t n = spec_.waypoints_x.size();
        const size_t segs = n - 1;
        double x = u * static_cast<double>(segs);
        size_t seg = std::min(static_cast<size_t>(x), segs - 1);
        const double t = x - static_cast<double>(seg);
        auto wp = [&](long i) {
            const long j = std::clamp<long>(i, 0, static_cast<long>(n) - 1);
            return Vec2{spec_.waypoints_x[static_cast<size_t>(j)],
                        spec_.waypoints_y[static_cast<size_t>(j)]};
        };
        const Vec2 p0 = wp(static_cast<long>(seg) - 1);
        const Vec2 p1 = wp(static_cast<long>(seg));
        const Vec2 p2 = wp(static_cast<long>(seg) + 1);
        const Vec2 p3 = wp(static_cast<long>(seg) + 2);
        // p(t) = 0.5 [2p1 + (p2-p0) t + (2p0-5p1+4p2-p3) t^2 + (-p0+3p1-3p2+p3) t^3]
        const Vec2 c1 = (p2 - p0) * 0.5;
        const Vec2 c2 = (p0 * 2.0 - p1 * 5.0 + p2 * 4.0 - p3) * 0.5;
        const Vec2 c3 = ((p1 - p2) * 3.0 + p3 - p0) * 0.5;
        const double du = static_cast<double>(segs);  // dt/du
        CurvePoint out;
        out.p = p1 + (c1 + (c2 + c3 * t) * t) * t;
        out.d1 = (c1 + (c2 * 2.0 + c3 * (3.0 * t)) * t) * du;
        out.d2 = (c2 * 2.0 + c3 * (6.0 * t)) * (du * du);
        return out;
    }

    PathSpec spec_;
    PathKind kind_;
    Vec table_s_;
    std::vector<Vec2> table_p_;
};

// Point, tangent direction, signed curvature at an arc length (clamped to the domain).
struct PathSample {
    Vec2 point;
    double tangent_angle = 0.0;
    double curvature = 0.0;
};

inline PathSample path_eval(const PlanarPath& path, double s) {
    const CurvePoint c = path.eval_param(path.param_from_length(s));
    PathSample out;
    out.point = c.p;
    out.tangent_angle = std::atan2(c.d1.y, c.d1.x);
    const double speed_sq = c.d1.x * c.d1.x + c.d1.y * c.d1.y;
    out.curvature = c.d1.cross(c.d2) / (speed_sq * std::sqrt(speed_sq));
    return out;
}

// Signed tracking errors against the closest path point. Cross-track is positive to
// the LEFT of the travel direction; heading error is vehicle heading minus tangent.
struct TrackingError {
    double e_tr = 0.0;
    double e_head = 0.0;
    double s_star = 0.0;
};

// Global scan over the sample table (ties keep the smaller arc length), then ternary
// refinement of the squared distance over the bracketing parameter interval.
inline TrackingError closest_point(const PlanarPath& path, Vec2 position, double heading) {
    const std::vector<Vec2>& pts = path.sample_points();
    size_t best = 0;
    double best_d = (pts[0] - position).norm();
    for (size_t i = 1; i < pts.size(); ++i) {
        const double d = (pts[i] - position).norm();
        if (d < best_d) {
            best_d = d;
            best = i;
        }
    }
    const double step = 1.0 / static_cast<double>(kTableSamples - 1);
    double lo = std::max(0.0, (static_cast<double>(best) - 1.0) * step);
    double hi = std::min(1.0, (static_cast<double>(best) + 1.0) * step);
    auto dist_sq = [&](double u) {
        const Vec2 d = path.eval_param(u).p - position;
        return d.x * d.x + d.y * d.y;
    };
    for (int it = 0; it < 100; ++it) {
        const double m1 = lo + (hi - lo) / 3.0;
        const double m2 = hi - (hi - lo) / 3.0;
        if (dist_sq(m1) <= dist_sq(m2))
            hi = m2;
        else
            lo = m1;
    }
    const double u_star = 0.5 * (lo + hi);
    const CurvePoint c = path.eval_param(u_star);
    const double tangent = std::atan2(c.d1.y, c.d1.x);
    const Vec2 offset = position - c.p;
    const double tn = c.d1.norm();
    TrackingError te;
    te.e_tr = (c.d1.x * offset.y - c.d1.y * offset.x) / tn;  // left of travel positive
    te.e_head = wrap_angle(heading - tangent);
    te.s_star = path.length_from_param(u_star);
    return te;
}

}  // namespace cartloco::path
