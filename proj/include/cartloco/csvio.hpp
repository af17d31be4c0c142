#pragma once
// Text artifact plumbing: %.9g number formatting (shortest stable round-trip for the
// magnitudes logged here), tiny CSV split/join, whole-file IO with explicit errors.
// None of the emitted cells ever contain commas or quotes, so no quoting dialect.

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "cartloco/errors.hpp"
#include "cartloco/sim_types.hpp"

namespace cartloco::csv {

inline std::string num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

// Exact round-trip formatting for logs that feed numeric audits (a parsed-back value is
// the original double bit for bit).
inline std::string num17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string join(const std::vector<std::string>& cells) {
    std::string out;
    for (size_t i = 0; i < cells.size(); ++i) {
        if (i) out += ',';
        out += cells[i];
    }
    out += '\n';
    return out;
}

inline std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur += ch;
        }
    }
    out.push_back(cur);
    return out;
}

// Rows of cells; blank trailing line ignored.
inline std::vector<std::vector<std::string>> parse(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::string line;
    std::istringstream in(text);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        rows.push_back(split_line(line));
    }
    return rows;
}

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open for write: " + path);
    f << content;
    if (!f) throw IoError("write failed: " + path);
}

inline std::string read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open: " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

inline bool file_exists(const std::string& path) {
    std::ifstream f(path);
    return f.good();
}

// ---------------------------------------------------------------------------
// Per-step trajectory dump for offline inspection. Column order is fixed and part of
// the format contract.

inline std::string trajectory_header() {
    std::string h = "time,x,y,yaw,vx,vy,omega,h";
    for (int j = 0; j < sim::kLegJoints; ++j) h += ",q_leg_" + std::to_string(j);
    for (int j = 0; j < sim::kArmJoints; ++j) h += ",q_arm_" + std::to_string(j);
    h += ",q_grip,cart_x,cart_y,cart_yaw,attached,vx_cmd,omega_cmd,beta_cmd";
    for (int j = 0; j < sim::kActionDim; ++j) h += ",a_" + std::to_string(j);
    h += "\n";
    return h;
}

inline std::string trajectory_row(const sim::SimState& s, const sim::CommandSet& c,
                                  const sim::Action& a) {
    std::vector<std::string> cells;
    cells.reserve(8 + sim::kLegJoints + sim::kArmJoints + 8 + sim::kActionDim);
    for (double v : {s.t, s.x, s.y, s.yaw, s.vx, s.vy, s.omega, s.h}) cells.push_back(num(v));
    for (double q : s.q_leg) cells.push_back(num(q));
    for (double q : s.q_arm) cells.push_back(num(q));
    cells.push_back(num(s.q_grip));
    cells.push_back(num(s.cart.x));
    cells.push_back(num(s.cart.y));
    cells.push_back(num(s.cart.yaw));
    cells.push_back(s.attached ? "1" : "0");
    cells.push_back(num(c.vx));
    cells.push_back(num(c.omega));
    cells.push_back(num(c.beta));
    for (double v : a.v) cells.push_back(num(v));
    return join(cells);
}

}  // namespace cartloco::csv
