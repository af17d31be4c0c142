// Command-line front end. Every verb takes --config (JSON, sparse overrides merged onto
// built-in defaults) and an optional --out overriding experiment.out_dir; artifacts land
// in <out_dir>/run-<config-hash>/ under the same names the full pipeline uses, so the
// single-step verbs compose into a manual pipeline. Exit codes: 0 success, 2 validation
// failure (bad flags, bad config, missing dependency), 3 runtime failure.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "cartloco/amp.hpp"
#include "cartloco/checkpoint.hpp"
#include "cartloco/config.hpp"
#include "cartloco/csvio.hpp"
#include "cartloco/errors.hpp"
#include "cartloco/harness.hpp"
#include "cartloco/metrics.hpp"
#include "cartloco/path.hpp"
#include "cartloco/ppo.hpp"
#include "cartloco/stanley.hpp"

namespace fs = std::filesystem;
using namespace cartloco;

namespace {

struct Opts {
    std::string config_path;
    std::string out_dir;  // empty: keep the config's experiment.out_dir
    std::string ckpt;
    std::string stage1;
    std::string ref;
    std::string mode = "partial";
    std::string variant = "partial_amp";
    std::string axis = "friction";
    std::string backend;  // empty: config's eval backend
    std::uint64_t seed = 0;
    bool seed_set = false;
    int episodes = 0;
    int transitions = 0;
    int path_index = 0;
    int run = 0;
    double duration = 0.0;
};

Config load_config(const Opts& o) {
    Config cfg = config_from_file(o.config_path);
    if (!o.out_dir.empty()) cfg.experiment.out_dir = o.out_dir;
    return cfg;
}

std::uint64_t pick_seed(const Opts& o, const Config& cfg) {
    return o.seed_set ? o.seed : cfg.experiment.seeds[0];
}

sim::Backend pick_backend(const Opts& o, const Config& cfg) {
    return sim::backend_from_name(o.backend.empty() ? cfg.experiment.eval_backend : o.backend);
}

// A dependency checked at verb start so the failure is a validation error, not a crash
// halfway through a run.
void require_file(const std::string& what, const std::string& path) {
    if (path.empty() || !fs::exists(path))
        throw ConfigError("missing dependency: " + what + " not found: " +
                          (path.empty() ? "(no path given)" : path));
}

void cmd_validate(const Opts& o) {
    const Config cfg = load_config(o);  // throws with the full violation list
    const std::vector<std::string> v = harness::pipeline_violations(cfg);
    if (!v.empty()) {
        std::string msg = "pipeline validation failed (" + std::to_string(v.size()) + " violations):";
        for (const std::string& s : v) msg += "\n  - " + s;
        throw ConfigError(msg);
    }
    std::cout << "config valid\nrun directory: " << harness::run_paths(cfg).root << "\n";
}

void cmd_train_stage1(const Opts& o) {
    const Config cfg = load_config(o);
    const harness::RunPaths rp = harness::run_paths(cfg);
    fs::create_directories(rp.root);
    const std::uint64_t seed = pick_seed(o, cfg);
    std::cout << "training stage 1, seed " << seed << "\n";
    const nn::Checkpoint ck = rl::train_stage1(cfg, seed, rp.stage1_log());
    nn::save_checkpoint(ck, rp.stage1_ckpt());
    std::cout << "wrote " << rp.stage1_ckpt() << "\n";
}

void cmd_collect_ref(const Opts& o) {
    const Config cfg = load_config(o);
    const harness::RunPaths rp = harness::run_paths(cfg);
    const amp::ProjectionMode mode = o.mode == "partial" ? amp::ProjectionMode::kPartial
                                     : o.mode == "full"  ? amp::ProjectionMode::kFull
                                                         : throw ConfigError("collect-ref: mode must be partial or full");
    const std::string stage1 = o.stage1.empty() ? rp.stage1_ckpt() : o.stage1;
    require_file("stage-1 checkpoint", stage1);
    const nn::Checkpoint ck = nn::load_checkpoint(stage1);
    const int n = o.transitions > 0 ? o.transitions : cfg.amp.ref_transitions;
    fs::create_directories(rp.root);
    const amp::RefDataset ds =
        amp::collect_reference(ck, cfg, mode, n, pick_seed(o, cfg),
                               sim::backend_from_name(cfg.experiment.train_backend));
    amp::save_ref_dataset(ds, rp.ref(mode));
    std::cout << "wrote " << rp.ref(mode) << " (" << ds.transitions.size() << " transitions)\n";
}

void cmd_train_stage2(const Opts& o) {
    const Config cfg = load_config(o);
    const harness::RunPaths rp = harness::run_paths(cfg);
    const rl::Variant variant = rl::variant_from_name(o.variant);
    const std::string stage1 = o.stage1.empty() ? rp.stage1_ckpt() : o.stage1;
    require_file("stage-1 checkpoint", stage1);
    const nn::Checkpoint s1 = nn::load_checkpoint(stage1);

    amp::RefDataset ds;
    const amp::RefDataset* ref = nullptr;
    if (rl::variant_uses_disc(variant)) {
        const std::string ref_path =
            o.ref.empty() ? rp.ref(rl::variant_mode(variant)) : o.ref;
        require_file("reference dataset for " + o.variant, ref_path);
        ds = amp::load_ref_dataset(ref_path);
        ref = &ds;
    }
    const std::uint64_t seed = pick_seed(o, cfg);
    fs::create_directories(rp.root);
    std::cout << "training stage 2, variant " << o.variant << ", seed " << seed << "\n";
    const nn::Checkpoint ck =
        rl::train_stage2(cfg, s1, variant, ref, seed, rp.stage2_log(o.variant, seed));
    nn::save_checkpoint(ck, rp.stage2_ckpt(o.variant, seed));
    std::cout << "wrote " << rp.stage2_ckpt(o.variant, seed) << "\n";
}

void cmd_evaluate(const Opts& o) {
    const Config cfg = load_config(o);
    require_file("checkpoint", o.ckpt);
    const nn::Checkpoint ck = nn::load_checkpoint(o.ckpt);
    const sim::Backend backend = pick_backend(o, cfg);
    const int episodes = o.episodes > 0 ? o.episodes : cfg.experiment.eval_episodes;
    const std::uint64_t seed = pick_seed(o, cfg);
    const harness::EvalResult r = harness::evaluate(ck, cfg, backend, episodes, seed);
    const std::string table = harness::metrics_csv({r});
    std::cout << table;
    const harness::RunPaths rp = harness::run_paths(cfg);
    fs::create_directories(rp.root);
    const std::string out = rp.root + "/evaluate_" + r.variant + "_" + r.backend + "_s" +
                            std::to_string(seed) + ".csv";
    csv::write_file(out, table);
    std::cout << "wrote " << out << "\n";
}

void cmd_sweep(const Opts& o) {
    const Config cfg = load_config(o);
    require_file("checkpoint", o.ckpt);
    const nn::Checkpoint ck = nn::load_checkpoint(o.ckpt);
    const harness::SweepAxis axis = harness::sweep_axis_from_name(o.axis);
    const std::vector<double>& grid = harness::axis_grid(cfg, axis);
    const harness::RobustnessRegion region =
        harness::robustness_sweep(ck, cfg, axis, grid, cfg.experiment.sweep.trials,
                                  pick_backend(o, cfg), pick_seed(o, cfg));
    const harness::RunPaths rp = harness::run_paths(cfg);
    fs::create_directories(rp.root);
    const std::string out = rp.sweep_csv(ck.variant, o.axis);
    csv::write_file(out, harness::region_csv(region));
    std::cout << harness::region_csv(region) << "wrote " << out << "\n";
}

void cmd_track_path(const Opts& o) {
    const Config cfg = load_config(o);
    require_file("checkpoint", o.ckpt);
    const nn::Checkpoint ck = nn::load_checkpoint(o.ckpt);
    if (o.path_index < 0 || o.path_index >= static_cast<int>(cfg.experiment.paths.size()))
        throw ConfigError("track-path: path index " + std::to_string(o.path_index) +
                          " outside experiment.paths (size " +
                          std::to_string(cfg.experiment.paths.size()) + ")");
    const PathSpec& spec = cfg.experiment.paths[static_cast<size_t>(o.path_index)];
    const path::PlanarPath p(spec);
    const double duration = o.duration > 0.0 ? o.duration : cfg.experiment.path_duration;
    const pathctl::TrackRecord rec =
        pathctl::track_path(ck, p, cfg, pick_backend(o, cfg), pick_seed(o, cfg), duration);
    const harness::RunPaths rp = harness::run_paths(cfg);
    fs::create_directories(rp.root);
    const std::string out =
        rp.track_csv(static_cast<size_t>(o.path_index), spec.kind, o.run);
    csv::write_file(out, pathctl::track_record_csv(rec));
    std::cout << "kind " << spec.kind << ", complete " << (rec.complete ? "yes" : "no")
              << ", mean |e_tr| " << rec.mean_abs_e_tr << ", max |e_tr| " << rec.max_abs_e_tr
              << "\nwrote " << out << "\n";
}

void cmd_plots(const Opts& o) {
    const Config cfg = load_config(o);
    harness::emit_plots(harness::run_paths(cfg).root, &std::cout);
}

void cmd_full_run(const Opts& o) {
    const Config cfg = load_config(o);
    const std::string dir = harness::run_pipeline(cfg, &std::cout);
    std::cout << "run complete: " << dir << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"cart loco-manipulation: two-stage training, evaluation, and path tracking"};
    app.require_subcommand(1);
    Opts o;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", o.config_path, "config JSON (sparse overrides)")->required();
        sub->add_option("--out", o.out_dir, "output directory (overrides experiment.out_dir)");
        return sub;
    };
    auto add_seed = [&](CLI::App* sub) {
        sub->add_option("--seed", o.seed, "master seed (default: first config seed)")
            ->each([&](const std::string&) { o.seed_set = true; });
    };

    CLI::App* validate = add_common(app.add_subcommand("validate", "check a config and exit"));
    (void)validate;

    CLI::App* ts1 = add_common(app.add_subcommand("train-stage1", "train the locomotion policy"));
    add_seed(ts1);

    CLI::App* cref = add_common(
        app.add_subcommand("collect-ref", "roll the stage-1 policy into a reference dataset"));
    cref->add_option("--mode", o.mode, "projection: partial | full");
    cref->add_option("--stage1", o.stage1, "stage-1 checkpoint (default: run dir artifact)");
    cref->add_option("--transitions", o.transitions, "dataset size (default: amp.ref_transitions)");
    add_seed(cref);

    CLI::App* ts2 =
        add_common(app.add_subcommand("train-stage2", "train a cart-pushing variant"));
    ts2->add_option("--variant", o.variant, "no_amp | partial_amp | full_amp | hierarchical");
    ts2->add_option("--stage1", o.stage1, "stage-1 checkpoint (default: run dir artifact)");
    ts2->add_option("--ref", o.ref, "reference dataset (default: run dir artifact)");
    add_seed(ts2);

    CLI::App* ev = add_common(app.add_subcommand("evaluate", "survival and tracking errors"));
    ev->add_option("--ckpt", o.ckpt, "checkpoint to evaluate")->required();
    ev->add_option("--backend", o.backend, "A | B (default: experiment.eval_backend)");
    ev->add_option("--episodes", o.episodes, "episode count (default: experiment.eval_episodes)");
    add_seed(ev);

    CLI::App* sw = add_common(app.add_subcommand("sweep", "robustness sweep over one parameter"));
    sw->add_option("--ckpt", o.ckpt, "stage-2 checkpoint")->required();
    sw->add_option("--axis", o.axis, "friction | robot_mass | cart_mass | wheel_damping");
    sw->add_option("--backend", o.backend, "A | B (default: experiment.eval_backend)");
    add_seed(sw);

    CLI::App* tp = add_common(app.add_subcommand("track-path", "drive a path with the controller"));
    tp->add_option("--ckpt", o.ckpt, "stage-2 checkpoint")->required();
    tp->add_option("--path-index", o.path_index, "index into experiment.paths");
    tp->add_option("--run", o.run, "run suffix for the output file name");
    tp->add_option("--duration", o.duration, "seconds (default: experiment.path_duration)");
    tp->add_option("--backend", o.backend, "A | B (default: experiment.eval_backend)");
    add_seed(tp);

    add_common(app.add_subcommand("plots", "render SVGs from a run directory's CSVs"));
    add_common(app.add_subcommand("full-run", "execute the whole pipeline"));

    try {
        app.parse(argc, argv);
        if (app.got_subcommand("validate")) cmd_validate(o);
        else if (app.got_subcommand("train-stage1")) cmd_train_stage1(o);
        else if (app.got_subcommand("collect-ref")) cmd_collect_ref(o);
        else if (app.got_subcommand("train-stage2")) cmd_train_stage2(o);
        else if (app.got_subcommand("evaluate")) cmd_evaluate(o);
        else if (app.got_subcommand("sweep")) cmd_sweep(o);
        else if (app.got_subcommand("track-path")) cmd_track_path(o);
        else if (app.got_subcommand("plots")) cmd_plots(o);
        else if (app.got_subcommand("full-run")) cmd_full_run(o);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);  // prints help or the parse error
        return code == 0 ? 0 : 2;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
