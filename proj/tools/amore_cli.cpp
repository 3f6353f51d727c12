#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <numeric>

#include "CLI11.hpp"
#include "amore/error.hpp"
#include "amore/experiment.hpp"
#include "amore/massmap.hpp"

using namespace amore;
namespace fs = std::filesystem;

namespace {

// Usage problems that are not config errors proper (missing inputs, ...).
class UsageError : public Error {
  public:
    using Error::Error;
};

struct Overrides {
    std::string config;
    io::Json patch = io::Json::object();
};

template <class T>
CLI::Option* bind(CLI::App* app, Overrides& o, const std::string& flag, const std::string& key,
                  const std::string& help) {
    return app->add_option_function<T>(flag, [&o, key](const T& v) { o.patch[key] = v; }, help);
}

CLI::Option* bind_flag(CLI::App* app, Overrides& o, const std::string& flag, const std::string& key, bool value,
                       const std::string& help) {
    return app->add_flag_callback(flag, [&o, key, value] { o.patch[key] = value; }, help);
}

exp::ExperimentConfig resolve(const Overrides& o) {
    io::Json j = io::Json::object();
    if (!o.config.empty()) {
        if (!fs::exists(o.config)) throw UsageError("config file not found: " + o.config);
        j = io::read_json(o.config);
        if (!j.is_object()) throw ConfigError(o.config + ": expected a JSON object");
    }
    for (const auto& [k, v] : o.patch.items()) {
        if ((k == "branch" || k == "trunk") && j.contains(k) && j.at(k).is_object()) {
            for (const auto& [kk, vv] : v.items()) j[k][kk] = vv;
        } else {
            j[k] = v;
        }
    }
    return exp::ExperimentConfig::from_json(j);
}

void require_dir(const fs::path& p, const std::string& what) {
    if (!fs::exists(p / "manifest.json")) throw UsageError(what + " not found: " + p.string());
}

std::string pct(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f%%", 100.0 * v);
    return buf;
}

void print_report(const std::string& title, const eval::ErrorReport& r) {
    std::printf("%s (mean %s)\n", title.c_str(), pct(r.global_mean).c_str());
    std::printf("  %-10s %12s %12s %12s %12s %12s\n", "state", "mean", "std", "median", "q90", "max");
    for (std::size_t a = 0; a < r.names.size(); ++a) {
        const auto& s = r.states[a];
        std::printf("  %-10s %12s %12s %12s %12s %12s\n", r.names[a].c_str(), pct(s.mean).c_str(),
                    pct(s.std).c_str(), pct(s.median).c_str(), pct(s.q90).c_str(), pct(s.max).c_str());
    }
}

void add_data_options(CLI::App* c, Overrides& o) {
    bind<std::string>(c, o, "--mechanism", "mechanism", "rober | toy-combustion");
    bind<std::string>(c, o, "--grid", "grid", "initial-condition grid, e.g. 11x11");
    bind<std::size_t>(c, o, "--steps", "steps", "intervals per stored trajectory");
    bind<double>(c, o, "--dt", "dt", "output spacing");
    bind<std::uint64_t>(c, o, "--data-seed", "data_seed", "train/test split seed");
    bind<double>(c, o, "--train-fraction", "train_fraction", "fraction of trajectories used for training");
    bind_flag(c, o, "--no-origin-shift", "origin_shift", false, "keep the t = 0 row");
}

void add_train_options(CLI::App* c, Overrides& o) {
    bind<std::string>(c, o, "--paradigm", "paradigm", "one-step | two-step");
    bind<std::string>(c, o, "--loss", "loss", "na | ad-a | ad-b");
    bind<std::size_t>(c, o, "--p", "p", "basis functions per state");
    bind<std::size_t>(c, o, "--segment-length", "segment_length", "points per segment");
    bind<int>(c, o, "--epochs", "epochs", "training epochs (per phase for two-step)");
    bind<std::size_t>(c, o, "--minibatches", "minibatches", "minibatches per epoch");
    bind<double>(c, o, "--lr", "lr", "initial learning rate");
    bind<double>(c, o, "--lr-half-life", "lr_half_life", "epochs per learning-rate halving");
    bind<int>(c, o, "--eval-every", "eval_every", "epochs between logged evaluations");
    bind<double>(c, o, "--bound", "bound", "output bound, 0 disables (one-step)");
    bind_flag(c, o, "--com", "com", true, "add the mass-conservation penalty");
    bind_flag(c, o, "--pou", "pou", true, "partition-of-unity trunk (one-step)");
    bind_flag(c, o, "--no-pou", "pou", false, "plain trunk");
    bind_flag(c, o, "--mass-map", "mass_map", true, "train in mass-conserving coordinates");
    bind<std::uint64_t>(c, o, "--seed", "seed", "master seed; run r uses seed + r");
    bind<std::size_t>(c, o, "--runs", "runs", "independent runs");
    c->add_option_function<std::string>(
        "--branch", [&o](const std::string& f) { o.patch["branch"] = {{"family", f}}; }, "resnet | kan");
    c->add_option_function<std::string>(
        "--trunk", [&o](const std::string& f) { o.patch["trunk"] = {{"family", f}}; }, "resnet | kan");
}

int cmd_gen(const Overrides& o, const fs::path& out) {
    const auto cfg = resolve(o);
    const auto mech = kin::make_mechanism(cfg.mechanism, cfg.mechanism_params);
    auto ds = generate_dataset(*mech, cfg.generation());
    save_dataset(ds, out);
    io::write_json(out / "config.json", cfg.to_json());
    std::printf("dataset %s: %zu trajectories (%zu train, %zu test), %zu rows, states", out.c_str(),
                ds.num_trajectories(), ds.train.size(), ds.test.size(), ds.num_rows());
    for (const auto& n : ds.schema.names) std::printf(" %s", n.c_str());
    std::printf("\n");
    return 0;
}

int cmd_train(const Overrides& o, const fs::path& data, const fs::path& out) {
    const auto cfg = resolve(o);  // rejected combinations fail here, before any compute
    require_dir(data, "dataset");
    const auto ds = load_dataset(data);
    fs::create_directories(out);
    io::write_json(out / "config.json", cfg.to_json());

    io::Json summary = io::Json::array();
    std::vector<double> tests;
    for (std::size_t r = 0; r < cfg.runs; ++r) {
        const auto seed = cfg.run_seed(r);
        const fs::path dir = out / ("run-" + std::to_string(r));
        std::printf("run %zu (seed %llu): %s, %s loss, %d epochs\n", r, static_cast<unsigned long long>(seed),
                    exp::to_string(cfg.paradigm).c_str(), exp::to_string(cfg.loss).c_str(), cfg.epochs);
        std::fflush(stdout);
        auto res = exp::train_run(cfg, ds, seed, dir);
        io::Json row = {{"run", r}, {"seed", seed}, {"train_rel_l2", res.final_train_rel_l2}};
        std::printf("  train rel-L2 %s\n", pct(res.final_train_rel_l2).c_str());
        if (res.test) {
            tests.push_back(res.test->segmented.global_mean);
            row["test_rel_l2"] = res.test->segmented.global_mean;
            io::Json per = io::Json::object();
            for (std::size_t a = 0; a < res.test->segmented.names.size(); ++a)
                per[res.test->segmented.names[a]] = res.test->segmented.states[a].mean;
            row["test_state_mean"] = per;
            print_report("  test", res.test->segmented);
        }
        summary.push_back(row);
    }
    if (!tests.empty()) {
        const double n = double(tests.size());
        const double mean = std::accumulate(tests.begin(), tests.end(), 0.0) / n;
        double var = 0.0;
        for (double t : tests) var += (t - mean) * (t - mean) / n;
        std::printf("test rel-L2 over %zu run(s): %s +- %s\n", tests.size(), pct(mean).c_str(),
                    pct(std::sqrt(var)).c_str());
    }
    io::write_json(out / "summary.json", summary);
    return 0;
}

fs::path checkpoint_dir(const fs::path& p) {
    if (fs::exists(p / "checkpoint" / "manifest.json")) return p / "checkpoint";
    require_dir(p, "checkpoint");
    return p;
}

int cmd_eval(const fs::path& ckpt, const fs::path& data, const std::string& split, int recursive, fs::path out) {
    const auto dir = checkpoint_dir(ckpt);
    require_dir(data, "dataset");
    const auto s = exp::load_surrogate(dir);
    const auto ds = load_dataset(data);
    std::vector<std::size_t> idx;
    if (split == "train") {
        idx = ds.train;
    } else if (split == "test") {
        idx = ds.test;
    } else {
        idx.resize(ds.num_trajectories());
        std::iota(idx.begin(), idx.end(), 0);
    }
    if (idx.empty()) throw UsageError("the " + split + " split of " + data.string() + " is empty");
    if (out.empty()) out = dir.parent_path() / ("eval-" + split);
    fs::create_directories(out);

    const auto rep = exp::evaluate_split(s, ds, idx, s.model.num_times());
    eval::write_errors_csv(out / "segmented_errors.csv", rep.segmented);
    eval::write_summary_csv(out / "segmented_summary.csv", rep.segmented);
    eval::write_errors_csv(out / "reconstructed_errors.csv", rep.reconstructed);
    eval::write_summary_csv(out / "reconstructed_summary.csv", rep.reconstructed);
    print_report(split + " segmented", rep.segmented);
    print_report(split + " reconstructed", rep.reconstructed);

    if (recursive > 0) {
        const auto curves = exp::evaluate_rollout(s, ds, idx, recursive);
        eval::write_accumulation_csv(out / "accumulation.csv", curves);
        eval::write_errors_csv(out / "rollout_errors.csv", curves.steps.back());
        eval::write_summary_csv(out / "rollout_summary.csv", curves.steps.back());
        print_report(split + " rollout over " + std::to_string(recursive) + " segments", curves.steps.back());
    }
    std::printf("reports written to %s\n", out.c_str());
    return 0;
}

int cmd_massmap_check(std::size_t samples, std::vector<std::size_t> sizes, std::uint64_t seed) {
    Rng rng(seed);
    bool ok = true;
    for (std::size_t n : sizes) {
        if (n < 2) throw ConfigError("massmap-check: n must be at least 2");
        double worst = 0.0, worst_sum = 0.0;
        std::vector<double> y(n);
        for (std::size_t k = 0; k < samples; ++k) {
            double s = 0.0;
            for (double& v : y) s += (v = -std::log(1.0 - rng.uniform()));
            for (double& v : y) v /= s;
            const auto back = massmap::inverse_map(massmap::forward_map(y));
            double sum = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                worst = std::max(worst, std::abs(back[i] - y[i]));
                sum += back[i];
            }
            worst_sum = std::max(worst_sum, std::abs(sum - 1.0));
        }
        const bool pass = worst < 1e-10 && worst_sum < 1e-12;
        ok = ok && pass;
        std::printf("n=%-3zu max round-trip error %.3e, max |sum-1| %.3e  %s\n", n, worst, worst_sum,
                    pass ? "ok" : "FAIL");
    }
    return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Operator-learning surrogates for stiff chemical kinetics"};
    app.require_subcommand(1);

    Overrides gen_o, train_o;
    fs::path gen_out, train_data, train_out, eval_ckpt, eval_data, eval_out;
    std::string split = "test";
    int recursive = 0;

    auto* gen = app.add_subcommand("gen", "integrate a grid of initial conditions into a dataset");
    gen->add_option("--config", gen_o.config, "JSON config; flags override it");
    add_data_options(gen, gen_o);
    bind<std::uint64_t>(gen, gen_o, "--seed", "data_seed", "alias of --data-seed");
    gen->add_option("--out", gen_out, "dataset directory")->required();

    auto* train = app.add_subcommand("train", "train one or more surrogates on a dataset");
    train->add_option("--config", train_o.config, "JSON config; flags override it");
    add_train_options(train, train_o);
    train->add_option("--dataset", train_data, "dataset directory")->required();
    train->add_option("--out", train_out, "output directory")->required();

    auto add_eval = [&](CLI::App* c) {
        c->add_option("--checkpoint", eval_ckpt, "run or checkpoint directory")->required();
        c->add_option("--dataset", eval_data, "dataset directory")->required();
        c->add_option("--split", split, "test | train | all")->check(CLI::IsMember({"test", "train", "all"}));
        c->add_option("--out", eval_out, "report directory (default: next to the checkpoint)");
    };
    auto* ev = app.add_subcommand("eval", "segmented and reconstructed error reports");
    add_eval(ev);
    ev->add_option("--recursive", recursive, "also roll out over N segments")->check(CLI::PositiveNumber);
    auto* rec = app.add_subcommand("recurse", "eval with a rollout over N segments");
    add_eval(rec);
    rec->add_option("--segments", recursive, "segments to roll out")->required()->check(CLI::PositiveNumber);

    std::size_t samples = 100000;
    std::vector<std::size_t> sizes{2, 3, 5, 11};
    std::uint64_t mm_seed = 11;
    auto* mm = app.add_subcommand("massmap-check", "round-trip self-test of the mass-conserving map");
    mm->add_option("--samples", samples, "Dirichlet samples per size");
    mm->add_option("--n", sizes, "species counts")->delimiter(',');
    mm->add_option("--seed", mm_seed, "sampling seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        if (gen->parsed()) return cmd_gen(gen_o, gen_out);
        if (train->parsed()) return cmd_train(train_o, train_data, train_out);
        if (ev->parsed()) return cmd_eval(eval_ckpt, eval_data, split, recursive, eval_out);
        if (rec->parsed()) return cmd_eval(eval_ckpt, eval_data, split, recursive, eval_out);
        if (mm->parsed()) return cmd_massmap_check(samples, sizes, mm_seed);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const UsageError& e) {
        std::fprintf(stderr, "usage error: %s\n", e.what());
        return 2;
    } catch (const TrainingDivergedError& e) {
        std::fprintf(stderr, "training diverged at epoch %d: %s\n", e.epoch(), e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 2;
}
