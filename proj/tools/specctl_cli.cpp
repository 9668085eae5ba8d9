// specctl: train verifiers, run episode batches and sweeps, rebuild tables
// from trace files.
//
// Exit codes: 0 success, 2 configuration error, 3 runtime error.

#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "specctl/errors.hpp"
#include "specctl/harness.hpp"
#include "specctl/kernels.hpp"

namespace fs = std::filesystem;
using namespace specctl;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

struct Overrides {
    std::optional<int> horizon;
    std::optional<std::string> disturbance;
    std::optional<int> chunk_size;
    std::optional<std::string> mode;
    std::optional<double> tau;
    std::optional<int> max_replans;
    std::optional<int> episodes;
    std::optional<std::uint64_t> base_seed;
    std::optional<std::string> verifier_source;
    std::optional<std::string> params_path;
    std::optional<int> train_episodes;
    std::optional<int> train_epochs;
    std::optional<double> learning_rate;
    std::optional<std::vector<std::string>> sweep_modes;
    std::optional<std::vector<int>> sweep_k;
    std::optional<std::vector<double>> sweep_tau;
    std::optional<std::vector<std::string>> sweep_disturbance;
};

void add_overrides(CLI::App& app, Overrides& o) {
    app.add_option("--horizon", o.horizon, "env.horizon: steps per episode");
    app.add_option("--disturbance", o.disturbance, "env.disturbance: level name (off, moderate, ...)");
    app.add_option("-K,--chunk-size", o.chunk_size, "planner.K: actions per chunk");
    app.add_option("--mode", o.mode, "controller.mode: sv, open-loop, verifier-only, sv-no-context, sv-no-observation");
    app.add_option("--tau", o.tau, "controller.tau: replanning threshold in (0,1)");
    app.add_option("--max-replans", o.max_replans, "controller.max_replans: per-episode guard");
    app.add_option("-n,--episodes", o.episodes, "batch.episodes");
    app.add_option("--seed", o.base_seed, "batch.base_seed: episode i uses base_seed + i");
    app.add_option("--verifier", o.verifier_source, "verifier.source: train, oracle or file");
    app.add_option("--params", o.params_path, "verifier.params_path (implies --verifier file)");
    app.add_option("--train-episodes", o.train_episodes, "verifier.train.episodes");
    app.add_option("--epochs", o.train_epochs, "verifier.train.epochs");
    app.add_option("--lr", o.learning_rate, "verifier.train.learning_rate");
}

void add_sweep_overrides(CLI::App& app, Overrides& o) {
    app.add_option("--sweep-modes", o.sweep_modes, "sweep.modes")->delimiter(',');
    app.add_option("--sweep-K", o.sweep_k, "sweep.K")->delimiter(',');
    app.add_option("--sweep-tau", o.sweep_tau, "sweep.tau")->delimiter(',');
    app.add_option("--sweep-disturbance", o.sweep_disturbance, "sweep.disturbance")->delimiter(',');
}

// Overrides go through the JSON form so they are validated like file input.
ExperimentConfig resolve_config(const std::string& config_path, const Overrides& o) {
    ExperimentConfig base = config_path.empty() ? ExperimentConfig{} : load_config(config_path);
    nlohmann::json j = nlohmann::json::parse(config_to_json(base).dump());
    auto set = [&](const char* a, const char* b, const auto& v) {
        if (v) j[a][b] = *v;
    };
    set("env", "horizon", o.horizon);
    set("env", "disturbance", o.disturbance);
    set("planner", "K", o.chunk_size);
    set("controller", "mode", o.mode);
    set("controller", "tau", o.tau);
    set("controller", "max_replans", o.max_replans);
    set("batch", "episodes", o.episodes);
    set("batch", "base_seed", o.base_seed);
    set("verifier", "source", o.verifier_source);
    if (o.params_path) {
        j["verifier"]["params_path"] = fs::absolute(*o.params_path).string();
        if (!o.verifier_source) j["verifier"]["source"] = "file";
    }
    if (o.train_episodes) j["verifier"]["train"]["episodes"] = *o.train_episodes;
    if (o.train_epochs) j["verifier"]["train"]["epochs"] = *o.train_epochs;
    if (o.learning_rate) j["verifier"]["train"]["learning_rate"] = *o.learning_rate;
    set("sweep", "modes", o.sweep_modes);
    set("sweep", "K", o.sweep_k);
    set("sweep", "tau", o.sweep_tau);
    set("sweep", "disturbance", o.sweep_disturbance);
    return config_from_json(j);
}

fs::path output_root(const std::string& flag) {
    if (!flag.empty()) return flag;
    if (const char* env = std::getenv("SPECCTL_OUTPUT_DIR"); env && *env) return env;
    return "specctl_out";
}

void log_line(const std::string& s) { std::cerr << "[specctl] " << s << '\n'; }

void print_table(const MetricsTable& table) { write_metrics_csv(std::cout, table); }

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Speculative-verification controller experiments on a toy pick-and-place world.\n"
                 "Output root: --out, else $SPECCTL_OUTPUT_DIR, else ./specctl_out.\n"
                 "Kernel variant: $SPECCTL_KERNELS=scalar|avx2|neon|auto."};
    app.require_subcommand(1);

    std::string config_path, out_flag;
    bool quiet = false;
    Overrides o;
    app.add_option("-c,--config", config_path, "JSON config file (defaults apply when omitted)");
    app.add_option("-o,--out", out_flag, "output directory root");
    app.add_flag("-q,--quiet", quiet, "no progress messages on stderr");

    auto* train = app.add_subcommand("train", "collect samples, train a verifier and save its parameters");
    std::string ablation = "none", save_path;
    add_overrides(*train, o);
    train->add_option("--ablation", ablation, "input ablation used during training: none, no-context, no-observation");
    train->add_option("--save", save_path, "parameter file (default <out>/verifier_K<K>_<ablation>.txt)");

    auto* run = app.add_subcommand("run", "run one configuration; writes traces and summary.csv");
    add_overrides(*run, o);

    auto* sweep = app.add_subcommand("sweep", "run the mode x K x tau x disturbance grid");
    add_overrides(*sweep, o);
    add_sweep_overrides(*sweep, o);

    auto* report = app.add_subcommand("report", "recompute the summary table from a trace directory");
    std::string trace_dir, csv_path;
    report->add_option("traces", trace_dir, "directory of .jsonl trace files")->required();
    report->add_option("--csv", csv_path, "write the table here instead of stdout");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitConfig;
    }

    try {
        if (report->parsed()) {
            const auto table = report_from_traces(trace_dir);
            if (csv_path.empty()) {
                print_table(table);
            } else {
                std::ofstream out(csv_path, std::ios::binary);
                if (!out) throw ConfigError("cannot write " + csv_path);
                write_metrics_csv(out, table);
            }
            return 0;
        }

        const ExperimentConfig cfg = resolve_config(config_path, o);
        const fs::path root = output_root(out_flag);
        fs::create_directories(root);
        Experiment exp(cfg);
        if (!quiet) {
            exp.set_log(log_line);
            log_line(std::string("kernels: ") + kernels::active().name);
        }

        if (train->parsed()) {
            const InputAblation ab = parse_ablation(ablation);
            const auto v = exp.trained_verifier(cfg.chunk_size, ab);
            const fs::path path = save_path.empty()
                                      ? root / ("verifier_K" + std::to_string(cfg.chunk_size) + "_" +
                                                std::string(to_string(ab)) + ".txt")
                                      : fs::path(save_path);
            save_verifier(*v, path);
            std::cout << path.string() << '\n';
        } else if (run->parsed()) {
            const auto result = exp.run_cells({exp.default_cell()});
            write_sweep_outputs(result, root);
            save_config(cfg, root / "config.json");
            print_table(result.table);
        } else if (sweep->parsed()) {
            const auto result = exp.run_sweep();
            write_sweep_outputs(result, root);
            save_config(cfg, root / "config.json");
            print_table(result.table);
        }
        return 0;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const ContractViolation& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "runtime error: " << e.what() << '\n';
        return kExitRuntime;
    }
}
