// Command-line front end: train / eval / ablate / bench / plot.
// Exit codes: 0 success, 2 configuration problem, 3 runtime failure.

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "psp/bench.hpp"
#include "psp/config.hpp"
#include "psp/metrics.hpp"
#include "psp/plot.hpp"
#include "psp/trainer.hpp"

namespace fs = std::filesystem;
using psp::ExperimentConfig;

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 2;
constexpr int kRuntimeError = 3;

// PSP_THREADS caps every worker pool the harness spawns (currently the
// ablate process pool; the trainer itself is single-threaded).
int thread_cap() {
    const char* v = std::getenv("PSP_THREADS");
    if (!v) return 0;  // unset: no cap
    int n = std::atoi(v);
    return n > 0 ? n : 1;
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
    out << content;
}

// One training job, entirely under cfg.out_dir: metrics.jsonl, resolved
// config, periodic checkpoints, and image dumps. With `resume`, picks up
// from the checkpoint and drops metrics lines the checkpoint predates.
int run_training(ExperimentConfig cfg, bool resume, bool verbose) {
    fs::path out(cfg.out_dir);
    fs::create_directories(out / "dumps");
    write_file(out / "config.resolved", psp::serialize_config(cfg));

    psp::Trainer trainer(cfg.env, cfg.train, cfg.adv, cfg.seed);
    fs::path params_path = out / "checkpoint.params";
    fs::path runtime_path = out / "checkpoint.runtime";
    fs::path metrics_path = out / "metrics.jsonl";

    if (resume) {
        std::ifstream pis(params_path, std::ios::binary);
        std::ifstream ris(runtime_path, std::ios::binary);
        if (!pis || !ris)
            throw std::runtime_error("no checkpoint under '" + out.string() + "' to resume from");
        trainer.restore(pis, ris);
        // Keep only metrics the checkpoint already covers; the rerun
        // regenerates everything after it.
        if (fs::exists(metrics_path)) {
            std::ifstream min(metrics_path);
            std::string line, kept;
            while (std::getline(min, line)) {
                if (line.empty()) continue;
                long step = nlohmann::json::parse(line).value("step", 0L);
                if (step <= trainer.env_steps()) kept += line + "\n";
            }
            min.close();
            write_file(metrics_path, kept);
        }
    }

    std::ofstream mout(metrics_path, resume ? std::ios::app : std::ios::trunc);
    if (!mout) throw std::runtime_error("cannot write '" + metrics_path.string() + "'");
    trainer.set_metrics_sink([&](const std::string& line) {
        mout << line << "\n";
        mout.flush();
        if (verbose && line.find("\"eval\"") != std::string::npos) {
            auto rec = nlohmann::json::parse(line);
            std::cout << "step " << rec.value("step", 0L) << "  return "
                      << rec["eval"]["return_mean"].get<double>() << " +/- "
                      << rec["eval"]["return_std"].get<double>() << "\n";
        }
    });
    trainer.set_dump_dir((out / "dumps").string());
    trainer.set_checkpoint_hook([&](long) {
        std::ofstream pos(params_path.string() + ".tmp", std::ios::binary);
        std::ofstream ros(runtime_path.string() + ".tmp", std::ios::binary);
        trainer.save(pos, ros);
        pos.close();
        ros.close();
        fs::rename(params_path.string() + ".tmp", params_path);
        fs::rename(runtime_path.string() + ".tmp", runtime_path);
    });

    trainer.run(cfg.total_env_steps, cfg.eval_every);
    if (verbose) std::cout << "done: " << trainer.env_steps() << " env steps, metrics in "
                           << metrics_path.string() << "\n";
    return kOk;
}

struct AblateRow {
    const char* name;       // directory-friendly id
    const char* weighting;  // table cell
    bool segmentation, adversarial;
};

// The seven ablation rows, in the order the summary table reports them:
// full method first, plain baseline last.
const std::vector<AblateRow>& ablate_grid() {
    static const std::vector<AblateRow> rows = {
        {"policy_seg_adv", "policy", true, true},
        {"policy_seg", "policy", true, false},
        {"policy_adv", "policy", false, true},
        {"none_adv", "none", false, true},
        {"policy", "policy", false, false},
        {"value", "value", false, false},
        {"none", "none", false, false},
    };
    return rows;
}

ExperimentConfig apply_row(ExperimentConfig cfg, const AblateRow& row, std::uint64_t seed,
                           const fs::path& base_out) {
    cfg.train.weighting = psp::weighting_source_from_string(row.weighting);
    cfg.train.segmentation_agg = row.segmentation;
    cfg.adv.enabled = row.adversarial;
    cfg.seed = seed;
    cfg.out_dir = (base_out / row.name / ("seed" + std::to_string(seed))).string();
    return cfg;
}

int run_ablate(const ExperimentConfig& base, const std::vector<std::uint64_t>& seeds,
               int parallel) {
    if (int cap = thread_cap(); cap > 0) parallel = std::min(parallel, cap);
    parallel = std::max(parallel, 1);
    fs::path base_out(base.out_dir);
    fs::create_directories(base_out);

    struct Job {
        ExperimentConfig cfg;
        std::string label;
    };
    std::vector<Job> jobs;
    for (const AblateRow& row : ablate_grid())
        for (std::uint64_t s : seeds)
            jobs.push_back({apply_row(base, row, s, base_out),
                            std::string(row.name) + "/seed" + std::to_string(s)});

    // Process-level pool: each job runs in a forked child with its own
    // run directory, at most `parallel` in flight.
    std::vector<std::pair<pid_t, std::string>> active;
    bool failed = false;
    auto reap_one = [&] {
        int status = 0;
        pid_t pid = waitpid(-1, &status, 0);
        for (auto it = active.begin(); it != active.end(); ++it) {
            if (it->first != pid) continue;
            bool ok = WIFEXITED(status) && WEXITSTATUS(status) == 0;
            std::cout << (ok ? "finished " : "FAILED ") << it->second << "\n";
            if (!ok) failed = true;
            active.erase(it);
            return;
        }
    };
    for (const Job& job : jobs) {
        while (static_cast<int>(active.size()) >= parallel) reap_one();
        std::cout << "starting " << job.label << "\n";
        pid_t pid = fork();
        if (pid < 0) throw std::runtime_error("fork failed");
        if (pid == 0) {
            int code;
            try {
                code = run_training(job.cfg, false, false);
            } catch (const std::exception& e) {
                std::cerr << job.label << ": " << e.what() << "\n";
                code = kRuntimeError;
            }
            _exit(code);
        }
        active.emplace_back(pid, job.label);
    }
    while (!active.empty()) reap_one();
    if (failed) {
        std::cerr << "error: one or more ablation runs failed\n";
        return kRuntimeError;
    }

    // Summary straight from each run's metrics.jsonl, one row per grid
    // entry, cells = mean +/- std of the final evaluation return.
    std::ostringstream table;
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%-10s %-13s %-12s %s\n", "weighting", "segmentation",
                  "adversarial", "final return (mean +/- std over seeds)");
    table << buf;
    for (const AblateRow& row : ablate_grid()) {
        std::vector<double> finals;
        for (std::uint64_t s : seeds) {
            fs::path mp = base_out / row.name / ("seed" + std::to_string(s)) / "metrics.jsonl";
            finals.push_back(psp::final_eval(mp.string()).return_mean);
        }
        psp::MeanStd ms = psp::mean_std(finals);
        std::snprintf(buf, sizeof(buf), "%-10s %-13s %-12s %.3f +/- %.3f\n", row.weighting,
                      row.segmentation ? "yes" : "no", row.adversarial ? "yes" : "no", ms.mean,
                      ms.std);
        table << buf;
    }
    std::cout << "\n" << table.str();
    write_file(base_out / "summary.txt", table.str());
    return kOk;
}

int run_plot(const std::vector<std::string>& run_dirs, std::string out_path) {
    std::vector<psp::Series> series;
    for (const std::string& dir : run_dirs) {
        auto evals = psp::read_eval_series((fs::path(dir) / "metrics.jsonl").string());
        psp::Series s;
        s.label = fs::path(dir).filename().string();
        if (s.label.empty()) s.label = dir;
        for (const psp::EvalPoint& p : evals) {
            s.x.push_back(static_cast<double>(p.step));
            s.y.push_back(p.return_mean);
        }
        series.push_back(std::move(s));
    }
    psp::AlignedCurves aligned = psp::align_series(series);
    for (const std::string& w : aligned.warnings) std::cerr << "warning: " << w << "\n";
    psp::PlotStyle style;
    style.title = "evaluation return";
    style.x_label = "env steps";
    style.y_label = "return";
    if (out_path.empty()) out_path = (fs::path(run_dirs[0]) / "plot.svg").string();
    write_file(out_path, psp::curve_svg(aligned, style));
    std::cout << "wrote " << out_path << "\n";
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"policy-shaped world-model training harness"};
    app.require_subcommand(1);

    std::string config_path, out_override, plot_out, bench_out = "runs/bench";
    std::string run_dir, seeds_csv = "1,2,3", grid_name = "table3";
    std::vector<std::string> plot_dirs;
    std::optional<std::uint64_t> seed_override;
    std::optional<int> eval_episodes;
    bool resume = false, dry_run = false;
    int parallel = 1;
    long bench_steps = 96;
    int bench_reps = 6;

    CLI::App* c_train = app.add_subcommand("train", "run one training job from a config file");
    c_train->add_option("config", config_path, "config file path")->required();
    c_train->add_option("--seed", seed_override, "override the run seed");
    c_train->add_option("--out", out_override, "override the output directory");
    c_train->add_flag("--resume", resume, "continue from the checkpoint in the run directory");
    c_train->add_flag("--dry-run", dry_run, "validate and print the resolved config, then exit");

    CLI::App* c_eval = app.add_subcommand("eval", "evaluate the checkpoint of a finished run");
    c_eval->add_option("run_dir", run_dir, "run directory with config.resolved + checkpoint")
        ->required();
    c_eval->add_option("--episodes", eval_episodes, "evaluation episode count override");

    CLI::App* c_ablate = app.add_subcommand("ablate", "run the feature-ablation grid");
    c_ablate->add_option("config", config_path, "base config file path")->required();
    c_ablate->add_option("--grid", grid_name, "grid name (table3 = the 7-row default)");
    c_ablate->add_option("--seeds", seeds_csv, "comma-separated seed list");
    c_ablate->add_option("--parallel", parallel, "max concurrent runs (process-level)");

    CLI::App* c_bench = app.add_subcommand("bench", "time the feature components and rows");
    c_bench->add_option("--steps", bench_steps, "timed env steps per feature row");
    c_bench->add_option("--reps", bench_reps, "repetitions per component kernel");
    c_bench->add_option("--out", bench_out, "report output directory");

    CLI::App* c_plot = app.add_subcommand("plot", "render evaluation curves as SVG");
    c_plot->add_option("run_dirs", plot_dirs, "run directories (metrics.jsonl inside)")
        ->required();
    c_plot->add_option("--out", plot_out, "SVG output path (default: first run dir)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kOk : kConfigError;
    }

    try {
        if (c_train->parsed()) {
            ExperimentConfig cfg = psp::load_config_file(config_path);
            if (seed_override) cfg.seed = *seed_override;
            if (!out_override.empty()) cfg.out_dir = out_override;
            if (dry_run) {
                std::cout << psp::serialize_config(cfg);
                return kOk;
            }
            return run_training(cfg, resume, true);
        }
        if (c_eval->parsed()) {
            fs::path dir(run_dir);
            ExperimentConfig cfg = psp::load_config_file((dir / "config.resolved").string());
            if (eval_episodes) cfg.train.eval_episodes = *eval_episodes;
            psp::Trainer trainer(cfg.env, cfg.train, cfg.adv, cfg.seed);
            std::ifstream pis(dir / "checkpoint.params", std::ios::binary);
            std::ifstream ris(dir / "checkpoint.runtime", std::ios::binary);
            if (!pis || !ris)
                throw std::runtime_error("no checkpoint under '" + dir.string() + "'");
            trainer.restore(pis, ris);
            psp::EvalStats s = trainer.evaluate(cfg.train.recon_eval_episodes > 0);
            std::cout << "step " << trainer.env_steps() << "  return " << s.return_mean
                      << " +/- " << s.return_std;
            if (s.has_recon)
                std::cout << "  fg_mse " << s.fg_mse << "  bg_mse " << s.bg_mse;
            std::cout << "\n";
            return kOk;
        }
        if (c_ablate->parsed()) {
            if (grid_name != "table3")
                throw psp::ConfigError("unknown grid '" + grid_name + "' (supported: table3)");
            ExperimentConfig cfg = psp::load_config_file(config_path);
            std::vector<std::uint64_t> seeds;
            std::stringstream ss(seeds_csv);
            std::string tok;
            while (std::getline(ss, tok, ','))
                if (!tok.empty()) seeds.push_back(std::stoull(tok));
            if (seeds.empty()) throw psp::ConfigError("--seeds produced an empty list");
            return run_ablate(cfg, seeds, parallel);
        }
        if (c_bench->parsed()) {
            psp::BenchReport rep = psp::run_bench(bench_steps, bench_reps);
            std::string text = psp::format_bench_report(rep);
            std::cout << text;
            fs::create_directories(bench_out);
            write_file(fs::path(bench_out) / "bench.txt", text);
            nlohmann::ordered_json j;
            for (const auto& c : rep.components)
                j["components"].push_back({{"name", c.name}, {"unit", c.unit}, {"ms", c.ms}});
            for (const auto& r : rep.rows)
                j["rows"].push_back({{"weighting", r.weighting},
                                     {"segmentation", r.segmentation},
                                     {"adversarial", r.adversarial},
                                     {"ms_per_step", r.ms_per_step},
                                     {"steps_per_sec", r.steps_per_sec}});
            write_file(fs::path(bench_out) / "bench.json", j.dump(2) + "\n");
            return kOk;
        }
        if (c_plot->parsed()) return run_plot(plot_dirs, plot_out);
    } catch (const psp::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfigError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kRuntimeError;
    }
    return kOk;
}
