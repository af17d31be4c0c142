#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "cartloco/checkpoint.hpp"
#include "cartloco/config.hpp"
#include "cartloco/path.hpp"
#include "cartloco/policy.hpp"
#include "cartloco/ppo.hpp"
#include "cartloco/rng.hpp"
#include "cartloco/stanley.hpp"

using namespace cartloco;
using path::PlanarPath;

namespace {

PathSpec spec_of(const std::string& kind) {
    PathSpec s;
    s.kind = kind;
    return s;
}

PathSpec line_spec(double length) {
    PathSpec s = spec_of("line");
    s.length = length;
    return s;
}

// Curvature from central differences of the analytic curve in PARAMETER space; the
// piecewise-linear u(s) table would corrupt an arc-length-space stencil at this tolerance.
double fd_curvature(const PlanarPath& p, double u, double h = 1e-5) {
    const Vec2 pm = p.eval_param(u - h).p;
    const Vec2 p0 = p.eval_param(u).p;
    const Vec2 pp = p.eval_param(u + h).p;
    const Vec2 d1 = (pp - pm) * (0.5 / h);
    const Vec2 d2 = (pp - p0 * 2.0 + pm) * (1.0 / (h * h));
    const double sp = d1.norm();
    return d1.cross(d2) / (sp * sp * sp);
}

// Minimal in-memory stage-2 bundle wrapping an untrained policy; enough for the
// evaluation actor and closed-loop tracking.
nn::Checkpoint tiny_stage2_ckpt(std::uint64_t seed) {
    nn::Checkpoint c;
    c.stage = 2;
    c.variant = "no_amp";
    c.policy = rl::make_policy(48, {16}, 12, -1.0, seed).net;
    c.log_std.assign(12, -1.0);
    c.value = rl::make_value_net(48, {16}, seed + 1);
    c.obs_norm = nn::RunningNorm(48);
    return c;
}

bool rows_equal(const pathctl::TrackRecord& a, const pathctl::TrackRecord& b) {
    if (a.rows.size() != b.rows.size()) return false;
    for (size_t i = 0; i < a.rows.size(); ++i) {
        const pathctl::TrackRow &r = a.rows[i], &s = b.rows[i];
        if (r.t != s.t || r.x != s.x || r.y != s.y || r.yaw != s.yaw || r.vx_cmd != s.vx_cmd ||
            r.omega_cmd != s.omega_cmd || r.e_tr != s.e_tr || r.e_head != s.e_head)
            return false;
    }
    return true;
}

}  // namespace

TEST_CASE("straight line geometry is exact") {
    PlanarPath p(line_spec(10.0));
    REQUIRE(p.total_length() == Catch::Approx(10.0).margin(1e-9));
    for (double s : {0.0, 1.0, 2.5, 7.75, 10.0}) {
        const path::PathSample ps = path::path_eval(p, s);
        REQUIRE(ps.point.x == Catch::Approx(s).margin(1e-9));
        REQUIRE(ps.point.y == 0.0);
        REQUIRE(ps.tangent_angle == 0.0);
        REQUIRE(ps.curvature == 0.0);
    }
    // Out-of-domain arc lengths clamp to the ends.
    REQUIRE(path::path_eval(p, -5.0).point.x == path::path_eval(p, 0.0).point.x);
    REQUIRE(path::path_eval(p, 50.0).point.x == Catch::Approx(10.0).margin(1e-9));
}

TEST_CASE("circle has constant curvature 1/R and full circumference") {
    PathSpec s = spec_of("circle");
    s.radius = 3.0;
    PlanarPath p(s);
    REQUIRE(p.total_length() == Catch::Approx(2.0 * path::kPi * 3.0).margin(1e-3));
    for (int i = 0; i <= 40; ++i) {
        const double arc = p.total_length() * i / 40.0;
        REQUIRE(path::path_eval(p, arc).curvature == Catch::Approx(1.0 / 3.0).margin(1e-6));
    }
    // CCW from the origin, initially heading +x.
    REQUIRE(path::path_eval(p, 0.0).tangent_angle == Catch::Approx(0.0).margin(1e-12));
    const Vec2 q = path::path_eval(p, p.total_length() / 2.0).point;
    REQUIRE(q.x == Catch::Approx(0.0).margin(1e-3));
    REQUIRE(q.y == Catch::Approx(6.0).margin(1e-3));
}

TEST_CASE("curvature matches a finite-difference oracle") {
    std::vector<PathSpec> specs;
    {
        PathSpec a = spec_of("sinc");
        a.length = 10.0;
        a.scale = 1.0;
        specs.push_back(a);
        PathSpec b = spec_of("beat");
        b.scale = 2.0;
        specs.push_back(b);
        PathSpec c = spec_of("river");
        c.length = 10.0;
        c.scale = 1.0;
        specs.push_back(c);
    }
    for (const PathSpec& sp : specs) {
        PlanarPath p(sp);
        const double L = p.total_length();
        for (int i = 0; i < 60; ++i) {
            const double s = L * (0.05 + 0.9 * i / 59.0);
            const double u = p.param_from_length(s);
            const double kappa = path::path_eval(p, s).curvature;
            REQUIRE(kappa == Catch::Approx(fd_curvature(p, u)).margin(1e-4));
        }
    }
}

TEST_CASE("closest point on a straight line") {
    PlanarPath p(line_spec(10.0));
    path::TrackingError te = path::closest_point(p, {1.0, 0.5}, 0.0);
    REQUIRE(te.e_tr == Catch::Approx(0.5).margin(1e-9));
    REQUIRE(te.e_head == Catch::Approx(0.0).margin(1e-12));
    REQUIRE(te.s_star == Catch::Approx(1.0).margin(1e-6));

    te = path::closest_point(p, {1.0, -0.5}, 0.0);
    REQUIRE(te.e_tr == Catch::Approx(-0.5).margin(1e-9));

    te = path::closest_point(p, {4.0, 0.2}, 0.3);
    REQUIRE(te.e_head == Catch::Approx(0.3).margin(1e-12));

    // Beyond the end the match clamps to the terminal point.
    te = path::closest_point(p, {12.0, 1.0}, 0.0);
    REQUIRE(te.s_star == Catch::Approx(10.0).margin(1e-6));
    REQUIRE(te.e_tr == Catch::Approx(1.0).margin(1e-9));
}

TEST_CASE("on-curve points give zero cross-track error") {
    std::vector<PathSpec> specs;
    specs.push_back(line_spec(10.0));
    {
        PathSpec c = spec_of("circle");
        c.radius = 3.0;
        specs.push_back(c);
        PathSpec b = spec_of("beat");
        b.scale = 2.0;
        specs.push_back(b);
        PathSpec r = spec_of("river");
        r.length = 10.0;
        specs.push_back(r);
        PathSpec si = spec_of("sinc");
        si.length = 10.0;
        specs.push_back(si);
        PathSpec w = spec_of("waypoints");
        w.waypoints_x = {0.0, 1.0, 2.0, 3.0};
        w.waypoints_y = {0.0, 0.3, -0.2, 0.1};
        specs.push_back(w);
    }
    for (const PathSpec& sp : specs) {
        PlanarPath p(sp);
        const double L = p.total_length();
        const bool closed = sp.kind == "circle" || sp.kind == "beat";
        for (int i = 0; i < 40; ++i) {
            const double s = L * (0.01 + 0.98 * i / 39.0);
            // The two-lobed curve crosses itself at mid-arc; nearest-point identity is
            // ambiguous there.
            if (sp.kind == "beat" && std::abs(s - 0.5 * L) < 0.05 * L) continue;
            const path::PathSample ps = path::path_eval(p, s);
            const path::TrackingError te = path::closest_point(p, ps.point, ps.tangent_angle);
            REQUIRE(std::abs(te.e_tr) < 1e-9);
            REQUIRE(std::abs(te.e_head) < 1e-9);
            if (!closed) REQUIRE(te.s_star == Catch::Approx(s).margin(1e-6));
        }
    }
}

TEST_CASE("closest point agrees with dense sampling") {
    std::vector<PathSpec> specs;
    {
        PathSpec r = spec_of("river");
        r.length = 10.0;
        specs.push_back(r);
        PathSpec b = spec_of("beat");
        b.scale = 2.0;
        specs.push_back(b);
    }
    constexpr int kDense = 100000;
    for (const PathSpec& sp : specs) {
        PlanarPath p(sp);
        std::vector<Vec2> dense(kDense);
        for (int i = 0; i < kDense; ++i)
            dense[static_cast<size_t>(i)] = p.eval_param(static_cast<double>(i) / (kDense - 1)).p;
        double lo_x = 1e9, hi_x = -1e9, lo_y = 1e9, hi_y = -1e9;
        for (const Vec2& q : dense) {
            lo_x = std::min(lo_x, q.x);
            hi_x = std::max(hi_x, q.x);
            lo_y = std::min(lo_y, q.y);
            hi_y = std::max(hi_y, q.y);
        }
        Rng rng(20260819);
        for (int trial = 0; trial < 1000; ++trial) {
            const Vec2 q{rng.uniform(lo_x - 1.0, hi_x + 1.0), rng.uniform(lo_y - 1.0, hi_y + 1.0)};
            int best = 0;
            double best_d = 1e300;
            for (int i = 0; i < kDense; ++i) {
                const double d = (dense[static_cast<size_t>(i)] - q).norm2();
                if (d < best_d) {
                    best_d = d;
                    best = i;
                }
            }
            const path::CurvePoint c = p.eval_param(static_cast<double>(best) / (kDense - 1));
            const Vec2 off = q - c.p;
            const double e_dense = c.d1.cross(off) / c.d1.norm();
            const path::TrackingError te = path::closest_point(p, q, 0.0);
            REQUIRE(std::abs(std::abs(te.e_tr) - std::abs(e_dense)) < 1e-3);
        }
    }
}

TEST_CASE("target speed decays with error and curvature") {
    StanleyConfig g;  // v_max 0.8, v_min 0.1, a1 1, a2 1, a3 2
    REQUIRE(pathctl::target_speed(0.0, 0.0, 0.0, g) == 0.8);

    StanleyConfig unit = g;
    unit.v_max = 1.0;
    REQUIRE(pathctl::target_speed(1.0, 0.0, 0.0, unit) == Catch::Approx(0.5).margin(1e-12));

    // Strictly decreasing in each argument until the floor, then clamped.
    double prev = 1e9;
    for (double e = 0.0; e < 3.0; e += 0.25) {
        const double v = pathctl::target_speed(e, 0.0, 0.0, g);
        if (prev > g.v_min) REQUIRE(v < prev);
        prev = v;
    }
    prev = 1e9;
    for (double e = 0.0; e < 3.0; e += 0.25) {
        const double v = pathctl::target_speed(0.0, e, 0.0, g);
        if (prev > g.v_min) REQUIRE(v < prev);
        prev = v;
    }
    prev = 1e9;
    for (double k = 0.0; k < 3.0; k += 0.25) {
        const double v = pathctl::target_speed(0.0, 0.0, k, g);
        if (prev > g.v_min) REQUIRE(v < prev);
        prev = v;
    }
    REQUIRE(pathctl::target_speed(100.0, 0.0, 0.0, g) == g.v_min);
    REQUIRE(pathctl::target_speed(-1.0, 0.0, 0.0, g) ==
            pathctl::target_speed(1.0, 0.0, 0.0, g));  // magnitudes only
}

TEST_CASE("steering law point checks") {
    StanleyConfig g;  // k_theta 1, k_e 0.5
    REQUIRE(pathctl::stanley_yaw_rate(0.0, 0.0, 0.5, g) == 0.0);
    REQUIRE(pathctl::stanley_yaw_rate(0.0, 0.2, 0.5, g) == Catch::Approx(-0.2).margin(1e-12));
    // k_e * e_tr / v = 0.5 * 1 / 0.5 = 1 -> -pi/4.
    REQUIRE(pathctl::stanley_yaw_rate(1.0, 0.0, 0.5, g) ==
            Catch::Approx(-path::kPi / 4.0).margin(1e-12));

    // Left of the path steers negative (back toward it); right steers positive.
    REQUIRE(pathctl::stanley_yaw_rate(0.4, 0.0, 0.5, g) < 0.0);
    REQUIRE(pathctl::stanley_yaw_rate(-0.4, 0.0, 0.5, g) > 0.0);
    PlanarPath line(line_spec(10.0));
    pathctl::StanleyStep st =
        pathctl::stanley_step(line, {2.0, 0.5}, 0.0, g, {g.v_max, 0.0}, 1.0 / 60.0);
    REQUIRE(st.cmd.omega < 0.0);
    st = pathctl::stanley_step(line, {2.0, -0.5}, 0.0, g, {g.v_max, 0.0}, 1.0 / 60.0);
    REQUIRE(st.cmd.omega > 0.0);
}

TEST_CASE("commands stay in range and slew first order") {
    PathSpec sp = spec_of("beat");
    sp.scale = 2.0;
    PlanarPath p(sp);
    StanleyConfig g;
    const double dt = 1.0 / 60.0;
    const double alpha = 1.0 - std::exp(-dt / g.tau_smooth);
    Rng rng(7);
    pathctl::PathCommand prev{0.45, 0.0};
    for (int k = 0; k < 200; ++k) {
        const Vec2 pos{rng.uniform(-3.0, 3.0), rng.uniform(-3.0, 3.0)};
        const double heading = rng.uniform(-path::kPi, path::kPi);
        const pathctl::StanleyStep st = pathctl::stanley_step(p, pos, heading, g, prev, dt);

        // Differential replication of the documented pipeline, bit for bit.
        const path::TrackingError te = path::closest_point(p, pos, heading);
        const double kappa = path::path_eval(p, te.s_star).curvature;
        const double v_t = pathctl::target_speed(te.e_tr, te.e_head, kappa, g);
        const double w_t = clampd(pathctl::stanley_yaw_rate(te.e_tr, te.e_head, v_t, g),
                                  -g.omega_limit, g.omega_limit);
        REQUIRE(st.cmd.vx == prev.vx + alpha * (v_t - prev.vx));
        REQUIRE(st.cmd.omega == prev.omega + alpha * (w_t - prev.omega));

        // Targets are clipped before smoothing, so emitted commands never leave the
        // training ranges and per-step slew is alpha-bounded.
        REQUIRE(st.cmd.vx >= g.v_min);
        REQUIRE(st.cmd.vx <= g.v_max);
        REQUIRE(std::abs(st.cmd.omega) <= g.omega_limit);
        REQUIRE(std::abs(st.cmd.vx - prev.vx) <= alpha * std::abs(v_t - prev.vx) + 1e-15);
        REQUIRE(std::abs(st.cmd.omega - prev.omega) <= alpha * std::abs(w_t - prev.omega) + 1e-15);
        prev = st.cmd;
    }
}

TEST_CASE("unicycle oracle converges onto an offset line") {
    PlanarPath p(line_spec(30.0));
    StanleyConfig g;
    const pathctl::TrackRecord rec = pathctl::track_unicycle(p, g, {0.0, 0.5}, 0.0, 10.0);
    REQUIRE(rec.rows.size() == 600);
    REQUIRE(rec.complete);
    REQUIRE(rec.max_abs_e_tr >= 0.5 - 1e-9);  // starts at the offset
    REQUIRE(std::abs(rec.rows.back().e_tr) < 0.05);
    // Converged, not oscillating: the whole last second stays inside the band.
    for (size_t i = rec.rows.size() - 60; i < rec.rows.size(); ++i)
        REQUIRE(std::abs(rec.rows[i].e_tr) < 0.05);
    for (const pathctl::TrackRow& row : rec.rows) {
        REQUIRE(row.vx_cmd >= g.v_min);
        REQUIRE(row.vx_cmd <= g.v_max);
        REQUIRE(std::abs(row.omega_cmd) <= g.omega_limit);
    }
    REQUIRE(rec.mean_abs_e_tr < 0.2);
    REQUIRE(rec.seconds == Catch::Approx(599.0 / 60.0).margin(1e-9));
}

TEST_CASE("tracking record serializes to the documented CSV") {
    pathctl::TrackRecord r;
    r.rows.push_back({0.5, 1.0, 2.0, 0.25, 0.4, -0.1, 0.05, -0.02});
    const std::string csv = pathctl::track_record_csv(r);
    REQUIRE(csv ==
            "time,x,y,yaw,vx_cmd,omega_cmd,e_tr,e_head\n"
            "0.5,1,2,0.25,0.4,-0.1,0.05,-0.02\n");
}

TEST_CASE("waypoint splines interpolate and stay smooth") {
    PathSpec sp = spec_of("waypoints");
    sp.waypoints_x = {0.0, 1.0, 2.0, 3.0};
    sp.waypoints_y = {0.0, 0.5, 0.0, -0.5};
    PlanarPath p(sp);
    for (int i = 0; i < 4; ++i) {
        const Vec2 q = p.eval_param(i / 3.0).p;
        REQUIRE(q.x == Catch::Approx(sp.waypoints_x[static_cast<size_t>(i)]).margin(1e-12));
        REQUIRE(q.y == Catch::Approx(sp.waypoints_y[static_cast<size_t>(i)]).margin(1e-12));
    }
    // C1 at the interior joints: one-sided tangents agree.
    for (int j = 1; j < 3; ++j) {
        const double u = j / 3.0;
        const Vec2 before = p.eval_param(u - 1e-9).d1;
        const Vec2 after = p.eval_param(u + 1e-9).d1;
        REQUIRE(before.x == Catch::Approx(after.x).margin(1e-6));
        REQUIRE(before.y == Catch::Approx(after.y).margin(1e-6));
    }
    // Collinear waypoints reproduce the straight segment exactly.
    PathSpec flat = spec_of("waypoints");
    flat.waypoints_x = {0.0, 1.0, 2.0, 3.0};
    flat.waypoints_y = {0.0, 0.0, 0.0, 0.0};
    PlanarPath q(flat);
    for (double s : {0.3, 1.1, 2.9}) {
        const path::PathSample ps = path::path_eval(q, s);
        REQUIRE(std::abs(ps.point.y) < 1e-12);
        REQUIRE(std::abs(ps.curvature) < 1e-12);
    }
}

TEST_CASE("arc-length tables invert cleanly") {
    std::vector<PathSpec> specs;
    specs.push_back(line_spec(10.0));
    {
        PathSpec c = spec_of("circle");
        c.radius = 3.0;
        specs.push_back(c);
        PathSpec b = spec_of("beat");
        b.scale = 2.0;
        specs.push_back(b);
        PathSpec r = spec_of("river");
        r.length = 10.0;
        specs.push_back(r);
        PathSpec si = spec_of("sinc");
        si.length = 10.0;
        specs.push_back(si);
    }
    for (const PathSpec& sp : specs) {
        PlanarPath p(sp);
        const double L = p.total_length();
        REQUIRE(L > 0.0);
        REQUIRE(p.param_from_length(0.0) == 0.0);
        REQUIRE(p.param_from_length(L) == Catch::Approx(1.0).margin(1e-12));
        const Vec& table = p.table();
        REQUIRE(table.size() == static_cast<size_t>(path::kTableSamples));
        for (size_t i = 1; i < table.size(); ++i) REQUIRE(table[i] > table[i - 1]);
        for (int i = 0; i <= 100; ++i) {
            const double s = L * i / 100.0;
            REQUIRE(p.length_from_param(p.param_from_length(s)) == Catch::Approx(s).margin(1e-9 * (1.0 + L)));
        }
    }
}

TEST_CASE("path configuration errors") {
    REQUIRE_THROWS_AS(path::path_kind_from_name("zigzag"), ConfigError);
    REQUIRE_THROWS_AS(PlanarPath(spec_of("zigzag")), ConfigError);

    PathSpec w = spec_of("waypoints");
    w.waypoints_x = {0.0, 1.0, 2.0};
    w.waypoints_y = {0.0, 1.0};
    REQUIRE_THROWS_AS(PlanarPath(w), ConfigError);
    w.waypoints_x = {0.0};
    w.waypoints_y = {0.0};
    REQUIRE_THROWS_AS(PlanarPath(w), ConfigError);

    PathSpec bad = line_spec(10.0);
    bad.scale = -1.0;
    REQUIRE_THROWS_AS(PlanarPath(bad), ConfigError);
    bad = line_spec(0.0);
    REQUIRE_THROWS_AS(PlanarPath(bad), ConfigError);
    bad = spec_of("circle");
    bad.radius = 0.0;
    REQUIRE_THROWS_AS(PlanarPath(bad), ConfigError);
}

TEST_CASE("evaluation actor reproduces policy means") {
    Rng rng(33);

    SECTION("flat stage-2 head") {
        nn::Checkpoint c = tiny_stage2_ckpt(11);
        // Give the frozen stats some structure so normalization is not the identity.
        for (int k = 0; k < 8; ++k) {
            Vec x(48);
            for (double& v : x) v = rng.uniform(-2.0, 2.0);
            c.obs_norm.update(x);
        }
        const rl::Actor actor(c);
        REQUIRE(actor.obs_dim() == 48);
        REQUIRE(actor.variant() == rl::Variant::kNoAmp);
        Vec obs(48);
        for (double& v : obs) v = rng.uniform(-2.0, 2.0);
        const sim::Action a = actor.act(obs);
        const rl::PolicyHead head{c.policy, c.log_std};
        const Vec want = rl::mean_action(head, c.obs_norm.normalize(obs));
        for (int j = 0; j < 12; ++j) REQUIRE(a.v[static_cast<size_t>(j)] == want[static_cast<size_t>(j)]);
    }

    SECTION("hierarchical composition: frozen legs, trained arm") {
        nn::Checkpoint c;
        c.stage = 2;
        c.variant = "hierarchical";
        const rl::PolicyHead arm = rl::make_policy(48, {16}, 4, -1.0, 21);
        c.policy = arm.net;
        c.log_std = arm.log_std;
        c.value = rl::make_value_net(48, {16}, 22);
        c.obs_norm = nn::RunningNorm(48);
        const rl::PolicyHead base = rl::make_policy(44, {16}, 12, -1.0, 23);
        c.base_policy = base.net;
        c.base_log_std = base.log_std;
        c.base_obs_norm = nn::RunningNorm(44);

        const rl::Actor actor(c);
        Vec obs(48);
        for (double& v : obs) v = rng.uniform(-1.0, 1.0);
        const sim::Action a = actor.act(obs);

        const Vec base_in(obs.begin(), obs.begin() + 44);
        const Vec legs = rl::mean_action(base, c.base_obs_norm->normalize(base_in));
        const Vec trained = rl::mean_action(arm, c.obs_norm.normalize(obs));
        for (int j = 0; j < 8; ++j) REQUIRE(a.v[static_cast<size_t>(j)] == legs[static_cast<size_t>(j)]);
        for (int j = 0; j < 4; ++j)
            REQUIRE(a.v[static_cast<size_t>(8 + j)] == trained[static_cast<size_t>(j)]);
    }

    SECTION("hierarchical checkpoint without its base is rejected") {
        nn::Checkpoint c;
        c.stage = 2;
        c.variant = "hierarchical";
        const rl::PolicyHead arm = rl::make_policy(48, {16}, 4, -1.0, 21);
        c.policy = arm.net;
        c.log_std = arm.log_std;
        c.value = rl::make_value_net(48, {16}, 22);
        c.obs_norm = nn::RunningNorm(48);
        REQUIRE_THROWS_AS(rl::Actor(c), ContractError);
    }

    SECTION("output width must match the variant") {
        nn::Checkpoint c = tiny_stage2_ckpt(11);
        const rl::PolicyHead narrow = rl::make_policy(48, {16}, 4, -1.0, 9);
        c.policy = narrow.net;
        c.log_std = narrow.log_std;
        REQUIRE_THROWS_AS(rl::Actor(c), ContractError);
    }
}

TEST_CASE("closed-loop tracking is seed-deterministic") {
    PlanarPath p(line_spec(12.0));
    Config cfg;
    const nn::Checkpoint ckpt = tiny_stage2_ckpt(41);

    const pathctl::TrackRecord a =
        pathctl::track_path(ckpt, p, cfg, sim::Backend::kA, 5, 1.0);
    const pathctl::TrackRecord b =
        pathctl::track_path(ckpt, p, cfg, sim::Backend::kA, 5, 1.0);
    const pathctl::TrackRecord c =
        pathctl::track_path(ckpt, p, cfg, sim::Backend::kA, 6, 1.0);

    REQUIRE(!a.rows.empty());
    REQUIRE(rows_equal(a, b));
    REQUIRE(!rows_equal(a, c));
    for (const pathctl::TrackRow& row : a.rows) {
        REQUIRE(std::isfinite(row.e_tr));
        REQUIRE(std::abs(row.omega_cmd) <= cfg.stanley.omega_limit);
        REQUIRE(row.vx_cmd >= cfg.stanley.v_min);
        REQUIRE(row.vx_cmd <= cfg.stanley.v_max);
    }
    if (a.complete) REQUIRE(a.rows.size() == static_cast<size_t>(std::llround(1.0 / sim::control_dt(cfg.env, sim::Backend::kA))));

    SECTION("stage-1 bundles and bad durations are rejected") {
        nn::Checkpoint stage1 = ckpt;
        stage1.stage = 1;
        REQUIRE_THROWS_AS(pathctl::track_path(stage1, p, cfg, sim::Backend::kA, 5, 1.0),
                          ContractError);
        REQUIRE_THROWS_AS(pathctl::track_path(ckpt, p, cfg, sim::Backend::kA, 5, 0.0),
                          ContractError);
    }
}
