#pragma once
// End-to-end experiment pipeline: stage-1 training -> reference datasets -> stage-2
// variants x seeds -> metric tables, robustness sweeps, reward/trajectory recordings,
// path-tracking runs, and SVG plots. Every artifact lives under a run directory named
// by the config hash, so a rerun with the same config resumes: stages whose artifact
// files already exist are loaded, not recomputed. A mid-run failure leaves the partial
// artifacts in place plus a FAILED.txt marker holding the error text.

#include <cstdint>
#include <filesystem>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "cartloco/amp.hpp"
#include "cartloco/checkpoint.hpp"
#include "cartloco/config.hpp"
#include "cartloco/csvio.hpp"
#include "cartloco/errors.hpp"
#include "cartloco/metrics.hpp"
#include "cartloco/path.hpp"
#include "cartloco/ppo.hpp"
#include "cartloco/stanley.hpp"
#include "cartloco/svg.hpp"

namespace cartloco::harness {

// File layout of one run directory. Tests and the plot emitter share these names.
struct RunPaths {
    std::string root;

    std::string config() const { return root + "/config.json"; }
    std::string failed() const { return root + "/FAILED.txt"; }
    std::string stage1_ckpt() const { return root + "/stage1.ckpt.json"; }
    std::string stage1_log() const { return root + "/stage1_train.csv"; }
    std::string ref(amp::ProjectionMode m) const {
        return root + (m == amp::ProjectionMode::kPartial ? "/ref_partial.bin" : "/ref_full.bin");
    }
    std::string stage2_ckpt(const std::string& variant, std::uint64_t seed) const {
        return root + "/stage2_" + variant + "_s" + std::to_string(seed) + ".ckpt.json";
    }
    std::string stage2_log(const std::string& variant, std::uint64_t seed) const {
        return root + "/stage2_" + variant + "_s" + std::to_string(seed) + "_train.csv";
    }
    std::string metrics() const { return root + "/metrics.csv"; }
    std::string metrics_by_seed() const { return root + "/metrics_by_seed.csv"; }
    std::string rollout(const std::string& variant) const {
        return root + "/rollout_" + variant + ".csv";
    }
    std::string trajectory(const std::string& variant) const {
        return root + "/trajectory_" + variant + ".csv";
    }
    std::string sweep_csv(const std::string& variant, const std::string& axis) const {
        return root + "/sweep_" + variant + "_" + axis + ".csv";
    }
    std::string sweep_svg(const std::string& axis) const {
        return root + "/sweep_" + axis + ".svg";
    }
    std::string track_csv(size_t path_index, const std::string& kind, int run) const {
        return root + "/track_" + std::to_string(path_index) + "_" + kind + "_r" +
               std::to_string(run) + ".csv";
    }
    std::string track_svg(size_t path_index, const std::string& kind) const {
        return root + "/track_" + std::to_string(path_index) + "_" + kind + ".svg";
    }
    std::string paths_summary() const { return root + "/paths_summary.csv"; }
};

inline RunPaths run_paths(const Config& cfg) {
    return RunPaths{cfg.experiment.out_dir + "/run-" + config_hash(cfg)};
}

// Config checks plus the filesystem checks a pure validator cannot do: externally
// referenced artifacts must exist before the pipeline starts.
inline std::vector<std::string> pipeline_violations(const Config& cfg) {
    std::vector<std::string> v = config_violations(cfg);
    namespace fs = std::filesystem;
    if (!cfg.experiment.stage1_checkpoint.empty() && !fs::exists(cfg.experiment.stage1_checkpoint))
        v.push_back("experiment.stage1_checkpoint: file not found: " +
                    cfg.experiment.stage1_checkpoint);
    if (!cfg.experiment.ref_dataset.empty() && !fs::exists(cfg.experiment.ref_dataset))
        v.push_back("experiment.ref_dataset: file not found: " + cfg.experiment.ref_dataset);
    return v;
}

inline void validate_pipeline(const Config& cfg) {
    const std::vector<std::string> v = pipeline_violations(cfg);
    if (v.empty()) return;
    std::string msg = "pipeline validation failed (" + std::to_string(v.size()) + " violations):";
    for (const std::string& s : v) msg += "\n  - " + s;
    throw ConfigError(msg);
}

// The configured grid for one sweep axis.
inline const std::vector<double>& axis_grid(const Config& cfg, SweepAxis a) {
    switch (a) {
        case SweepAxis::kFriction: return cfg.experiment.sweep.friction;
        case SweepAxis::kRobotMass: return cfg.experiment.sweep.robot_mass;
        case SweepAxis::kCartMass: return cfg.experiment.sweep.cart_mass;
        case SweepAxis::kWheelDamping: return cfg.experiment.sweep.wheel_damping;
    }
    throw ContractError("axis_grid: bad axis");
}

constexpr SweepAxis kAllAxes[] = {SweepAxis::kFriction, SweepAxis::kRobotMass,
                                  SweepAxis::kCartMass, SweepAxis::kWheelDamping};

namespace detail {

inline void note(std::ostream* log, const std::string& line) {
    if (log) *log << line << "\n" << std::flush;
}

// The variant whose seed-0 policy drives the path-tracking runs.
inline std::string tracking_variant(const Config& cfg) {
    for (const std::string& v : cfg.experiment.variants)
        if (v == "partial_amp") return v;
    return cfg.experiment.variants.front();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Plot emission. CSVs under run_dir are the source of truth; the reference curve
// geometry is rebuilt from the run's own config.json. Every absent input is listed in
// one error so a broken directory is diagnosed in a single pass.

inline void emit_plots(const std::string& run_dir, std::ostream* log = nullptr) {
    namespace fs = std::filesystem;
    const RunPaths rp{run_dir};
    if (!fs::exists(rp.config()))
        throw IoError("emit_plots: missing required inputs: " + rp.config());
    const Config cfg = config_from_file(rp.config());

    std::vector<std::string> missing;
    auto need = [&](const std::string& p) {
        if (!fs::exists(p)) missing.push_back(p);
        return p;
    };
    need(rp.metrics());
    for (SweepAxis axis : kAllAxes)
        for (const std::string& variant : cfg.experiment.variants)
            need(rp.sweep_csv(variant, sweep_axis_name(axis)));
    for (size_t i = 0; i < cfg.experiment.paths.size(); ++i)
        need(rp.track_csv(i, cfg.experiment.paths[i].kind, 0));
    if (!missing.empty()) {
        std::string msg = "emit_plots: missing required inputs:";
        for (const std::string& m : missing) msg += "\n  - " + m;
        throw IoError(msg);
    }

    // Survival-vs-parameter curves, one series per variant, success points emphasized,
    // dashed rule at the 30% survival threshold.
    for (SweepAxis axis : kAllAxes) {
        const std::string axis_name = sweep_axis_name(axis);
        std::vector<PlotSeries> series;
        for (const std::string& variant : cfg.experiment.variants) {
            const auto rows = csv::parse(csv::read_file(rp.sweep_csv(variant, axis_name)));
            PlotSeries s;
            s.label = variant;
            for (size_t r = 1; r < rows.size(); ++r) {  // rows[0] is the header
                if (rows[r].size() < 5)
                    throw IoError("emit_plots: malformed sweep row in " +
                                  rp.sweep_csv(variant, axis_name));
                s.pts.push_back({std::stod(rows[r][1]), std::stod(rows[r][2])});
                s.marker.push_back(rows[r][4] == "1" ? 1 : 0);
            }
            series.push_back(std::move(s));
        }
        csv::write_file(rp.sweep_svg(axis_name),
                        line_plot_svg("survival vs " + axis_name, axis_name, "survival fraction",
                                      series, true, 0.30));
        detail::note(log, "plots: wrote " + rp.sweep_svg(axis_name));
    }

    // Path overlays from the first tracking run of each path.
    for (size_t i = 0; i < cfg.experiment.paths.size(); ++i) {
        const PathSpec& spec = cfg.experiment.paths[i];
        const path::PlanarPath p(spec);
        std::vector<Vec2> reference;
        const int kRefSamples = 256;
        for (int k = 0; k < kRefSamples; ++k)
            reference.push_back(
                path::path_eval(p, p.total_length() * static_cast<double>(k) / (kRefSamples - 1))
                    .point);
        const auto rows = csv::parse(csv::read_file(rp.track_csv(i, spec.kind, 0)));
        std::vector<TrackTraceRow> trace;
        for (size_t r = 1; r < rows.size(); ++r) {
            if (rows[r].size() < 8)
                throw IoError("emit_plots: malformed track row in " +
                              rp.track_csv(i, spec.kind, 0));
            trace.push_back({std::stod(rows[r][1]), std::stod(rows[r][2]), std::stod(rows[r][3]),
                             std::stod(rows[r][4])});
        }
        csv::write_file(rp.track_svg(i, spec.kind),
                        track_overlay_svg(spec.kind, reference, trace));
        detail::note(log, "plots: wrote " + rp.track_svg(i, spec.kind));
    }
}

// ---------------------------------------------------------------------------
// The pipeline proper.

namespace detail {

inline nn::Checkpoint pipeline_stage1(const Config& cfg, const RunPaths& rp, std::ostream* log) {
    namespace fs = std::filesystem;
    nn::Checkpoint s1;
    if (!cfg.experiment.stage1_checkpoint.empty()) {
        note(log, "stage1: loading " + cfg.experiment.stage1_checkpoint);
        s1 = nn::load_checkpoint(cfg.experiment.stage1_checkpoint);
    } else if (fs::exists(rp.stage1_ckpt())) {
        note(log, "stage1: reusing " + rp.stage1_ckpt());
        s1 = nn::load_checkpoint(rp.stage1_ckpt());
    } else {
        note(log, "stage1: training (seed " + std::to_string(cfg.experiment.seeds[0]) + ")");
        s1 = rl::train_stage1(cfg, cfg.experiment.seeds[0], rp.stage1_log());
        nn::save_checkpoint(s1, rp.stage1_ckpt());
    }
    if (s1.stage != 1) throw ContractError("pipeline: stage-1 checkpoint has stage != 1");
    if (!fs::exists(rp.stage1_ckpt())) nn::save_checkpoint(s1, rp.stage1_ckpt());
    return s1;
}

inline amp::RefDataset pipeline_ref(const Config& cfg, const RunPaths& rp,
                                    const nn::Checkpoint& s1, amp::ProjectionMode mode,
                                    std::ostream* log) {
    namespace fs = std::filesystem;
    // An externally supplied dataset is used for the mode whose projection width it has.
    if (!cfg.experiment.ref_dataset.empty()) {
        amp::RefDataset ds = amp::load_ref_dataset(cfg.experiment.ref_dataset);
        if (ds.proj_dim == amp::projection_dim(mode)) {
            note(log, "ref: loading " + cfg.experiment.ref_dataset);
            return ds;
        }
    }
    if (fs::exists(rp.ref(mode))) {
        note(log, "ref: reusing " + rp.ref(mode));
        return amp::load_ref_dataset(rp.ref(mode));
    }
    note(log, std::string("ref: collecting ") +
                  (mode == amp::ProjectionMode::kPartial ? "partial" : "full") + " dataset");
    const amp::RefDataset ds =
        amp::collect_reference(s1, cfg, mode, cfg.amp.ref_transitions, cfg.experiment.seeds[0],
                               sim::backend_from_name(cfg.experiment.train_backend));
    amp::save_ref_dataset(ds, rp.ref(mode));
    return ds;
}

inline std::string by_seed_header() {
    return "variant,backend,seed,episodes,survival_pct,survival_ci,lin_vel_err,lin_vel_ci,"
           "ang_vel_err,ang_vel_ci,heading_err,heading_ci,ee_pos_err,ee_pos_ci,"
           "ee_ori_err,ee_ori_ci\n";
}

inline std::string by_seed_row(const EvalResult& r, std::uint64_t seed) {
    // metrics_csv_row is "variant,backend,episodes,..."; splice the seed in after the
    // backend column so both tables stay column-compatible on the stat columns.
    const std::string row = metrics_csv_row(r);
    const size_t a = row.find(',');
    const size_t b = row.find(',', a + 1);
    return row.substr(0, b + 1) + std::to_string(seed) + row.substr(b);
}

}  // namespace detail

// Runs every stage, reusing existing artifacts. Returns the run directory. Throws
// ConfigError on validation failure before touching the filesystem; any later error is
// recorded in FAILED.txt inside the run directory and rethrown.
inline std::string run_pipeline(const Config& cfg, std::ostream* log = nullptr) {
    validate_pipeline(cfg);
    namespace fs = std::filesystem;
    const RunPaths rp = run_paths(cfg);
    fs::create_directories(rp.root);
    try {
        config_to_file(cfg, rp.config());
        const ExperimentConfig& x = cfg.experiment;
        const sim::Backend eval_backend = sim::backend_from_name(x.eval_backend);
        const sim::Backend train_backend = sim::backend_from_name(x.train_backend);

        const nn::Checkpoint s1 = detail::pipeline_stage1(cfg, rp, log);

        // Reference datasets, one per projection the variant list needs.
        std::map<amp::ProjectionMode, amp::RefDataset> refs;
        for (const std::string& vname : x.variants) {
            const rl::Variant v = rl::variant_from_name(vname);
            if (!rl::variant_uses_disc(v)) continue;
            const amp::ProjectionMode mode = rl::variant_mode(v);
            if (!refs.count(mode)) refs.emplace(mode, detail::pipeline_ref(cfg, rp, s1, mode, log));
        }

        // Stage-2 training cells, independent across (variant, seed).
        struct Cell {
            std::string variant;
            std::uint64_t seed = 0;
        };
        std::vector<Cell> todo;
        for (const std::string& vname : x.variants)
            for (std::uint64_t seed : x.seeds)
                if (!fs::exists(rp.stage2_ckpt(vname, seed))) todo.push_back({vname, seed});
        for (const Cell& c : todo)
            detail::note(log, "stage2 " + c.variant + " seed " + std::to_string(c.seed) +
                                  ": training");
        parallel_for(static_cast<int>(todo.size()), [&](int i) {
            const Cell& c = todo[static_cast<size_t>(i)];
            const rl::Variant v = rl::variant_from_name(c.variant);
            const amp::RefDataset* ref =
                rl::variant_uses_disc(v) ? &refs.at(rl::variant_mode(v)) : nullptr;
            const nn::Checkpoint ck =
                rl::train_stage2(cfg, s1, v, ref, c.seed, rp.stage2_log(c.variant, c.seed));
            nn::save_checkpoint(ck, rp.stage2_ckpt(c.variant, c.seed));
        });

        // Metric tables: pooled episodes per (variant, backend) plus the per-seed view.
        if (!fs::exists(rp.metrics()) || !fs::exists(rp.metrics_by_seed())) {
            detail::note(log, "metrics: evaluating");
            std::vector<sim::Backend> backends{eval_backend};
            if (train_backend != eval_backend) backends.push_back(train_backend);
            std::string pooled_csv = metrics_csv_header();
            std::string by_seed_csv = detail::by_seed_header();
            for (const std::string& vname : x.variants) {
                for (sim::Backend b : backends) {
                    EvalEpisodes pooled;
                    for (std::uint64_t seed : x.seeds) {
                        const nn::Checkpoint ck = nn::load_checkpoint(rp.stage2_ckpt(vname, seed));
                        // The training seed doubles as that cell's evaluation stream.
                        const EvalEpisodes ep =
                            evaluate_episodes(ck, cfg, b, x.eval_episodes, seed);
                        by_seed_csv += detail::by_seed_row(
                            reduce_eval(ep, vname, sim::backend_name(b)), seed);
                        pooled.merge(ep);
                    }
                    pooled_csv += metrics_csv_row(reduce_eval(pooled, vname, sim::backend_name(b)));
                }
            }
            csv::write_file(rp.metrics(), pooled_csv);
            csv::write_file(rp.metrics_by_seed(), by_seed_csv);
        }

        // Per-variant recordings: reward terms (weight audit) and the raw trajectory.
        for (const std::string& vname : x.variants) {
            if (fs::exists(rp.rollout(vname)) && fs::exists(rp.trajectory(vname))) continue;
            detail::note(log, "rollout " + vname);
            const nn::Checkpoint ck = nn::load_checkpoint(rp.stage2_ckpt(vname, x.seeds[0]));
            const double dt = sim::control_dt(cfg.env, eval_backend);
            const int steps = static_cast<int>(x.eval_seconds / dt + 0.5);
            const RolloutDump dump =
                record_rollout(ck, cfg, eval_backend, x.seeds[0], steps < 1 ? 1 : steps);
            csv::write_file(rp.rollout(vname), rollout_csv(dump));
            csv::write_file(rp.trajectory(vname), trajectory_csv(dump));
        }

        // Robustness sweeps: variant x axis, seed-0 policy.
        for (const std::string& vname : x.variants) {
            const nn::Checkpoint ck = nn::load_checkpoint(rp.stage2_ckpt(vname, x.seeds[0]));
            for (SweepAxis axis : kAllAxes) {
                const std::string out = rp.sweep_csv(vname, sweep_axis_name(axis));
                if (fs::exists(out)) continue;
                detail::note(log, "sweep " + vname + " " + sweep_axis_name(axis));
                const RobustnessRegion region =
                    robustness_sweep(ck, cfg, axis, axis_grid(cfg, axis), x.sweep.trials,
                                     eval_backend, x.seeds[0]);
                csv::write_file(out, region_csv(region));
            }
        }

        // Path-tracking runs with the designated variant's seed-0 policy. The stage is
        // one resume unit: it is skipped only when its summary already exists.
        if (!fs::exists(rp.paths_summary())) {
            const std::string vname = detail::tracking_variant(cfg);
            const nn::Checkpoint ck = nn::load_checkpoint(rp.stage2_ckpt(vname, x.seeds[0]));
            std::string summary = "path,kind,runs,completed,completion_rate,mean_abs_e_tr\n";
            for (size_t i = 0; i < x.paths.size(); ++i) {
                const PathSpec& spec = x.paths[i];
                const path::PlanarPath p(spec);
                int completed = 0;
                double err_sum = 0.0;
                for (int r = 0; r < x.path_runs; ++r) {
                    detail::note(log, "track " + spec.kind + " run " + std::to_string(r));
                    const pathctl::TrackRecord rec =
                        pathctl::track_path(ck, p, cfg, eval_backend,
                                            x.seeds[0] + static_cast<std::uint64_t>(r),
                                            x.path_duration);
                    csv::write_file(rp.track_csv(i, spec.kind, r),
                                    pathctl::track_record_csv(rec));
                    completed += rec.complete ? 1 : 0;
                    err_sum += rec.mean_abs_e_tr;
                }
                summary += csv::join(
                    {std::to_string(i), spec.kind, std::to_string(x.path_runs),
                     std::to_string(completed),
                     csv::num(static_cast<double>(completed) / static_cast<double>(x.path_runs)),
                     csv::num(err_sum / static_cast<double>(x.path_runs))});
            }
            csv::write_file(rp.paths_summary(), summary);
        }

        emit_plots(rp.root, log);
        fs::remove(rp.failed());
    } catch (const std::exception& e) {
        csv::write_file(rp.failed(), std::string(e.what()) + "\n");
        throw;
    }
    return rp.root;
}

}  // namespace cartloco::harness
