#pragma once

#include <fstream>
#include <optional>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "cartloco/adam.hpp"
#include "cartloco/errors.hpp"
#include "cartloco/net.hpp"
#include "cartloco/normalizer.hpp"

namespace cartloco::nn {

using json = nlohmann::json;

// Serialized as text JSON. nlohmann emits shortest-round-trip decimal for finite
// doubles, so parse(dump(x)) == x bit for bit; non-finite values are rejected at save
// time because they would not survive the trip.

inline json to_json(const NetSpec& s) {
    return json{{"layer_sizes", s.layer_sizes},
                {"hidden_activation", activation_name(s.hidden_activation)},
                {"output_activation", activation_name(s.output_activation)}};
}

inline NetSpec netspec_from_json(const json& j) {
    NetSpec s;
    s.layer_sizes = j.at("layer_sizes").get<std::vector<int>>();
    s.hidden_activation = activation_from_name(j.at("hidden_activation").get<std::string>());
    s.output_activation = activation_from_name(j.at("output_activation").get<std::string>());
    s.validate();
    return s;
}

inline void require_finite(const Vec& v, const std::string& what) {
    for (std::size_t i = 0; i < v.size(); ++i)
        if (!std::isfinite(v[i]))
            throw NumericError("non-finite value in " + what + " at index " + std::to_string(i));
}

inline json to_json(const NetParams& p) {
    require_finite(p.values, "net values");
    return json{{"spec", to_json(p.spec)}, {"values", p.values}};
}

inline NetParams netparams_from_json(const json& j) {
    NetParams p;
    p.spec = netspec_from_json(j.at("spec"));
    p.values = j.at("values").get<Vec>();
    if (p.values.size() != p.spec.param_count())
        throw IoError("net values length " + std::to_string(p.values.size()) + " != spec param count " +
                      std::to_string(p.spec.param_count()));
    return p;
}

inline json to_json(const AdamState& st) {
    require_finite(st.m, "adam m");
    require_finite(st.v, "adam v");
    return json{{"m", st.m}, {"v", st.v}, {"step", st.step}};
}

inline AdamState adamstate_from_json(const json& j) {
    AdamState st;
    st.m = j.at("m").get<Vec>();
    st.v = j.at("v").get<Vec>();
    st.step = j.at("step").get<long long>();
    if (st.m.size() != st.v.size()) throw IoError("adam state m/v length mismatch");
    return st;
}

inline json to_json(const RunningNorm& n) {
    require_finite(n.mean, "norm mean");
    require_finite(n.m2, "norm m2");
    return json{{"count", n.count}, {"mean", n.mean}, {"m2", n.m2}};
}

inline RunningNorm runningnorm_from_json(const json& j) {
    RunningNorm n;
    n.count = j.at("count").get<double>();
    n.mean = j.at("mean").get<Vec>();
    n.m2 = j.at("m2").get<Vec>();
    if (n.mean.size() != n.m2.size()) throw IoError("norm mean/m2 length mismatch");
    return n;
}

// Full training bundle. `variant` is "locomotion" for stage 1; stage-2 variants are
// no_amp / partial_amp / full_amp / hierarchical. Optional members appear only when
// the stage/variant uses them (disc for the adversarial variants, base_policy for
// hierarchical). rng_state captures the master stream so training can resume.
struct Checkpoint {
    int version = 1;
    int stage = 1;
    std::string variant = "locomotion";
    std::uint64_t seed = 0;
    std::string config_hash;
    std::uint64_t rng_state = 0;
    long long iterations_done = 0;
    int curriculum_phase = 1;

    NetParams policy;
    Vec log_std;
    NetParams value;
    RunningNorm obs_norm;

    AdamState opt_policy;   // covers policy values ++ log_std, in that flat order
    AdamState opt_value;

    std::optional<NetParams> disc;
    std::optional<AdamState> opt_disc;
    std::optional<RunningNorm> disc_norm;

    std::optional<NetParams> base_policy;  // frozen stage-1 policy for hierarchical
    std::optional<Vec> base_log_std;
    std::optional<RunningNorm> base_obs_norm;  // stats the frozen base was trained under
};

inline json to_json(const Checkpoint& c) {
    require_finite(c.log_std, "log_std");
    json j{{"format", "cartloco-checkpoint"},
           {"version", c.version},
           {"stage", c.stage},
           {"variant", c.variant},
           {"seed", c.seed},
           {"config_hash", c.config_hash},
           {"rng_state", c.rng_state},
           {"iterations_done", c.iterations_done},
           {"curriculum_phase", c.curriculum_phase},
           {"policy", to_json(c.policy)},
           {"log_std", c.log_std},
           {"value", to_json(c.value)},
           {"obs_norm", to_json(c.obs_norm)},
           {"opt_policy", to_json(c.opt_policy)},
           {"opt_value", to_json(c.opt_value)}};
    if (c.disc) j["disc"] = to_json(*c.disc);
    if (c.opt_disc) j["opt_disc"] = to_json(*c.opt_disc);
    if (c.disc_norm) j["disc_norm"] = to_json(*c.disc_norm);
    if (c.base_policy) j["base_policy"] = to_json(*c.base_policy);
    if (c.base_log_std) {
        require_finite(*c.base_log_std, "base_log_std");
        j["base_log_std"] = *c.base_log_std;
    }
    if (c.base_obs_norm) j["base_obs_norm"] = to_json(*c.base_obs_norm);
    return j;
}

inline Checkpoint checkpoint_from_json(const json& j) {
    if (j.value("format", "") != "cartloco-checkpoint") throw IoError("not a cartloco checkpoint file");
    Checkpoint c;
    c.version = j.at("version").get<int>();
    if (c.version != 1) throw IoError("unsupported checkpoint version " + std::to_string(c.version));
    c.stage = j.at("stage").get<int>();
    c.variant = j.at("variant").get<std::string>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.config_hash = j.at("config_hash").get<std::string>();
    c.rng_state = j.at("rng_state").get<std::uint64_t>();
    c.iterations_done = j.at("iterations_done").get<long long>();
    c.curriculum_phase = j.at("curriculum_phase").get<int>();
    c.policy = netparams_from_json(j.at("policy"));
    c.log_std = j.at("log_std").get<Vec>();
    c.value = netparams_from_json(j.at("value"));
    c.obs_norm = runningnorm_from_json(j.at("obs_norm"));
    c.opt_policy = adamstate_from_json(j.at("opt_policy"));
    c.opt_value = adamstate_from_json(j.at("opt_value"));
    if (j.contains("disc")) c.disc = netparams_from_json(j.at("disc"));
    if (j.contains("opt_disc")) c.opt_disc = adamstate_from_json(j.at("opt_disc"));
    if (j.contains("disc_norm")) c.disc_norm = runningnorm_from_json(j.at("disc_norm"));
    if (j.contains("base_policy")) c.base_policy = netparams_from_json(j.at("base_policy"));
    if (j.contains("base_log_std")) c.base_log_std = j.at("base_log_std").get<Vec>();
    if (j.contains("base_obs_norm")) c.base_obs_norm = runningnorm_from_json(j.at("base_obs_norm"));
    if (static_cast<int>(c.log_std.size()) != c.policy.spec.output_size())
        throw IoError("log_std length does not match policy output size");
    return c;
}

inline std::string checkpoint_to_string(const Checkpoint& c) { return to_json(c).dump(1) + "\n"; }

inline void save_checkpoint(const Checkpoint& c, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for write: " + path);
    f << checkpoint_to_string(c);
    if (!f) throw IoError("write failed: " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open checkpoint: " + path);
    json j;
    try {
        f >> j;
    } catch (const json::exception& e) {
        throw IoError("malformed checkpoint " + path + ": " + e.what());
    }
    try {
        return checkpoint_from_json(j);
    } catch (const json::exception& e) {
        throw IoError("checkpoint " + path + " missing fields: " + e.what());
    }
}

}  // namespace cartloco::nn
