#pragma once
// Deterministic SVG emitters for the artifact plots: a path-tracking overlay (reference
// curve, executed trace, velocity-command arrows) and generic line plots for the sweep
// curves. Pure string builders — same inputs, same bytes; no timestamps, no ids derived
// from addresses. Coordinates are printed at fixed precision.

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "cartloco/errors.hpp"
#include "cartloco/math.hpp"

namespace cartloco::harness {

namespace svg {

inline std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", v);
    return buf;
}

// Affine map from a padded data box onto a pixel viewport, y flipped.
struct Mapper {
    double x0 = 0, y0 = 0, sx = 1, sy = 1, px = 0, py = 0, ph = 0;

    Mapper(double lo_x, double hi_x, double lo_y, double hi_y, double px_, double py_,
           double pw, double ph_, bool equal_aspect) {
        if (hi_x - lo_x < 1e-12) { lo_x -= 0.5; hi_x += 0.5; }
        if (hi_y - lo_y < 1e-12) { lo_y -= 0.5; hi_y += 0.5; }
        const double mx = 0.05 * (hi_x - lo_x), my = 0.05 * (hi_y - lo_y);
        lo_x -= mx; hi_x += mx; lo_y -= my; hi_y += my;
        x0 = lo_x; y0 = lo_y; px = px_; py = py_; ph = ph_;
        sx = pw / (hi_x - lo_x);
        sy = ph_ / (hi_y - lo_y);
        if (equal_aspect) {
            const double s = sx < sy ? sx : sy;
            // Recenter the slack axis so the shape stays in the middle.
            px += 0.5 * (pw - s * (hi_x - lo_x));
            py += 0.5 * (ph_ - s * (hi_y - lo_y));
            ph = s * (hi_y - lo_y);
            sx = sy = s;
        }
    }
    double X(double x) const { return px + sx * (x - x0); }
    double Y(double y) const { return py + ph - sy * (y - y0); }
};

inline std::string polyline(const Mapper& m, const std::vector<Vec2>& pts,
                            const std::string& stroke, double width,
                            const std::string& extra = "") {
    if (pts.size() < 2) return "";
    std::string out = "<polyline fill=\"none\" stroke=\"" + stroke + "\" stroke-width=\"" +
                      fmt(width) + "\"" + extra + " points=\"";
    for (size_t i = 0; i < pts.size(); ++i) {
        if (i) out += " ";
        out += fmt(m.X(pts[i].x)) + "," + fmt(m.Y(pts[i].y));
    }
    out += "\"/>\n";
    return out;
}

inline std::string line(double x1, double y1, double x2, double y2, const std::string& stroke,
                        double width, const std::string& extra = "") {
    return "<line x1=\"" + fmt(x1) + "\" y1=\"" + fmt(y1) + "\" x2=\"" + fmt(x2) + "\" y2=\"" +
           fmt(y2) + "\" stroke=\"" + stroke + "\" stroke-width=\"" + fmt(width) + "\"" + extra +
           "/>\n";
}

inline std::string circle(double cx, double cy, double r, const std::string& fill,
                          const std::string& extra = "") {
    return "<circle cx=\"" + fmt(cx) + "\" cy=\"" + fmt(cy) + "\" r=\"" + fmt(r) + "\" fill=\"" +
           fill + "\"" + extra + "/>\n";
}

inline std::string text(double x, double y, const std::string& s, int size,
                        const std::string& extra = "") {
    return "<text x=\"" + fmt(x) + "\" y=\"" + fmt(y) + "\" font-family=\"sans-serif\" font-size=\"" +
           std::to_string(size) + "\"" + extra + ">" + s + "</text>\n";
}

inline std::string header(int w, int h) {
    return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(w) +
           "\" height=\"" + std::to_string(h) + "\" viewBox=\"0 0 " + std::to_string(w) + " " +
           std::to_string(h) + "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
}

inline const char* palette(size_t i) {
    static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                    "#ff7f0e", "#8c564b"};
    return kColors[i % 6];
}

}  // namespace svg

// One row of an executed-track trace, already parsed from its CSV.
struct TrackTraceRow {
    double x = 0, y = 0, yaw = 0, vx_cmd = 0;
};

// Overlay: reference curve (grey), executed trace (black), and blue velocity-command
// arrows drawn from the pose along the heading, length proportional to the commanded
// speed. Equal-aspect so geometry is not distorted.
inline std::string track_overlay_svg(const std::string& title,
                                     const std::vector<Vec2>& reference,
                                     const std::vector<TrackTraceRow>& trace,
                                     int arrow_stride = 60) {
    if (reference.size() < 2) throw ContractError("track_overlay_svg: reference too short");
    if (arrow_stride < 1) throw ContractError("track_overlay_svg: arrow_stride must be >= 1");
    const int W = 720, H = 540;
    double lo_x = reference[0].x, hi_x = lo_x, lo_y = reference[0].y, hi_y = lo_y;
    auto grow = [&](double x, double y) {
        lo_x = x < lo_x ? x : lo_x; hi_x = x > hi_x ? x : hi_x;
        lo_y = y < lo_y ? y : lo_y; hi_y = y > hi_y ? y : hi_y;
    };
    for (const Vec2& p : reference) grow(p.x, p.y);
    for (const TrackTraceRow& r : trace) grow(r.x, r.y);
    const svg::Mapper m(lo_x, hi_x, lo_y, hi_y, 20, 40, W - 40, H - 60, true);

    std::string out = svg::header(W, H);
    out += svg::text(20, 24, title, 16, " font-weight=\"bold\"");
    out += svg::polyline(m, reference, "#bbbbbb", 3.0);
    std::vector<Vec2> tr;
    tr.reserve(trace.size());
    for (const TrackTraceRow& r : trace) tr.push_back({r.x, r.y});
    out += svg::polyline(m, tr, "#222222", 1.5);
    // Velocity-command arrows: shaft plus two head strokes, all in data space.
    const double head = 0.06;
    for (size_t i = 0; i < trace.size(); i += static_cast<size_t>(arrow_stride)) {
        const TrackTraceRow& r = trace[i];
        const double len = 0.6 * r.vx_cmd;
        const Vec2 tip{r.x + len * std::cos(r.yaw), r.y + len * std::sin(r.yaw)};
        out += svg::line(m.X(r.x), m.Y(r.y), m.X(tip.x), m.Y(tip.y), "#1f77b4", 1.2);
        for (double side : {0.5, -0.5}) {  // head strokes swept back from the tip
            const double a = r.yaw + side;
            out += svg::line(m.X(tip.x), m.Y(tip.y), m.X(tip.x - head * std::cos(a)),
                             m.Y(tip.y - head * std::sin(a)), "#1f77b4", 1.2);
        }
    }
    out += "</svg>\n";
    return out;
}

struct PlotSeries {
    std::string label;
    std::vector<Vec2> pts;
    std::vector<char> marker;  // optional per-point emphasis markers (empty = none)
};

// Generic line plot with min/max tick labels and an optional dashed horizontal rule.
// Used for the sweep curves (survival vs parameter; rule at the success threshold).
inline std::string line_plot_svg(const std::string& title, const std::string& x_label,
                                 const std::string& y_label,
                                 const std::vector<PlotSeries>& series, bool rule = false,
                                 double rule_y = 0.0) {
    if (series.empty()) throw ContractError("line_plot_svg: no series");
    const int W = 720, H = 480;
    bool first = true;
    double lo_x = 0, hi_x = 0, lo_y = 0, hi_y = 0;
    for (const PlotSeries& s : series)
        for (const Vec2& p : s.pts) {
            if (first) { lo_x = hi_x = p.x; lo_y = hi_y = p.y; first = false; continue; }
            lo_x = p.x < lo_x ? p.x : lo_x; hi_x = p.x > hi_x ? p.x : hi_x;
            lo_y = p.y < lo_y ? p.y : lo_y; hi_y = p.y > hi_y ? p.y : hi_y;
        }
    if (first) throw ContractError("line_plot_svg: no points");
    if (rule) {
        lo_y = rule_y < lo_y ? rule_y : lo_y;
        hi_y = rule_y > hi_y ? rule_y : hi_y;
    }
    const double PL = 70, PT = 44, PR = 24, PB = 52;
    const svg::Mapper m(lo_x, hi_x, lo_y, hi_y, PL, PT, W - PL - PR, H - PT - PB, false);

    std::string out = svg::header(W, H);
    out += svg::text(20, 26, title, 16, " font-weight=\"bold\"");
    // Axes plus extreme tick labels.
    out += svg::line(PL, H - PB, W - PR, H - PB, "#444444", 1.0);
    out += svg::line(PL, PT, PL, H - PB, "#444444", 1.0);
    char buf[32];
    out += svg::text(m.X(lo_x), H - PB + 18, (std::snprintf(buf, sizeof buf, "%.4g", lo_x), buf), 12,
                     " text-anchor=\"middle\"");
    out += svg::text(m.X(hi_x), H - PB + 18, (std::snprintf(buf, sizeof buf, "%.4g", hi_x), buf), 12,
                     " text-anchor=\"middle\"");
    out += svg::text(PL - 8, m.Y(lo_y) + 4, (std::snprintf(buf, sizeof buf, "%.4g", lo_y), buf), 12,
                     " text-anchor=\"end\"");
    out += svg::text(PL - 8, m.Y(hi_y) + 4, (std::snprintf(buf, sizeof buf, "%.4g", hi_y), buf), 12,
                     " text-anchor=\"end\"");
    out += svg::text(0.5 * W, H - 14, x_label, 13, " text-anchor=\"middle\"");
    out += svg::text(16, 0.5 * H, y_label, 13,
                     " text-anchor=\"middle\" transform=\"rotate(-90 16 " + svg::fmt(0.5 * H) +
                         ")\"");
    if (rule)
        out += svg::line(PL, m.Y(rule_y), W - PR, m.Y(rule_y), "#999999", 1.0,
                         " stroke-dasharray=\"6 4\"");
    for (size_t i = 0; i < series.size(); ++i) {
        const std::string color = svg::palette(i);
        out += svg::polyline(m, series[i].pts, color, 2.0);
        for (size_t k = 0; k < series[i].pts.size(); ++k) {
            const bool emph = k < series[i].marker.size() && series[i].marker[k];
            out += svg::circle(m.X(series[i].pts[k].x), m.Y(series[i].pts[k].y), emph ? 4.0 : 2.0,
                               emph ? color : "#ffffff", " stroke=\"" + color + "\"");
        }
        // Legend swatches stacked in the top-right corner.
        const double ly = PT + 16 + 18 * static_cast<double>(i);
        out += svg::line(W - PR - 150, ly - 4, W - PR - 122, ly - 4, color, 3.0);
        out += svg::text(W - PR - 114, ly, series[i].label, 12);
    }
    out += "</svg>\n";
    return out;
}

}  // namespace cartloco::harness
