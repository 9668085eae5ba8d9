#pragma once
// Experiment driver: configuration, seeded batches, sweeps, and metric tables.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "specctl/controller.hpp"
#include "specctl/trace_io.hpp"

namespace specctl {

inline constexpr int kConfigVersion = 1;

struct TrainSettings {
    int episodes = 300;
    int epochs = 300;
    double learning_rate = 0.01;
    std::size_t batch_size = 32;
    std::uint64_t seed = 7;
    std::string disturbance = "moderate";  // level used while collecting samples
    bool include_replanned_boundaries = true;
    std::uint64_t collection_seed = 500000;

    bool operator==(const TrainSettings&) const = default;
};

struct VerifierSettings {
    std::string source = "train";  // train | oracle | file
    std::string params_path;       // for source == file
    std::size_t visual_width = 64;
    std::size_t fused_width = 64;
    std::string head = "affine";
    std::uint64_t encoder_seed = 11;
    TrainSettings train;

    bool operator==(const VerifierSettings&) const = default;
};

struct SweepAxes {
    std::vector<std::string> modes{"open-loop", "sv"};
    std::vector<int> chunk_sizes{1, 4, 16};
    std::vector<double> taus{0.1, 0.2, 0.4};
    std::vector<std::string> disturbances{"off", "moderate"};

    bool operator==(const SweepAxes&) const = default;
};

struct ExperimentConfig {
    int version = kConfigVersion;

    int horizon = 32;
    double success_radius = 0.1;
    WorldConfig world;
    std::string disturbance = "moderate";
    std::map<std::string, DisturbanceConfig> disturbance_levels;

    std::string planner_kind = "nominal-rollout";
    int chunk_size = 16;
    std::size_t context_width = kDefaultContextWidth;

    VerifierSettings verifier;

    ControllerMode mode = ControllerMode::SpeculativeVerification;
    ThresholdConfig threshold;
    LatencyModel latency;

    int episodes = 200;
    std::uint64_t base_seed = 1000;

    SweepAxes sweep;
    int speedup_reference_k = 4;

    ExperimentConfig();  // fills the "off" and "moderate" disturbance levels

    EpisodeConfig episode_config(const std::string& disturbance_level) const;
    bool operator==(const ExperimentConfig&) const = default;
};

// Built-in levels: "off" (no disturbances) and "moderate".
std::map<std::string, DisturbanceConfig> default_disturbance_levels();

// Throws ConfigError naming the offending field path.
ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::ordered_json config_to_json(const ExperimentConfig& cfg);
ExperimentConfig load_config(const std::filesystem::path& path);
void save_config(const ExperimentConfig& cfg, const std::filesystem::path& path);

struct CellSpec {
    ControllerMode mode = ControllerMode::SpeculativeVerification;
    int chunk_size = 16;
    double tau = 0.2;
    std::string disturbance = "moderate";

    std::string label() const;
    bool operator==(const CellSpec&) const = default;
};

struct MetricsRow {
    std::string label;
    CellSpec cell;
    int episodes = 0;
    int successes = 0;
    double success_rate = 0.0;
    double mean_heavy_calls = 0.0;
    double mean_verifier_calls = 0.0;
    double mean_inference_time = 0.0;
    double speedup = 0.0;
    // Replan events pooled over all episodes; an episode without replans
    // contributes its executed chunk lengths instead.
    double mean_steps_before_replan = 0.0;
    // Replan events only; NaN when the cell had none.
    double mean_steps_replan_events = 0.0;
    int replan_events = 0;
    double mean_executed_steps = 0.0;
    int guard_hits = 0;
};

using MetricsTable = std::vector<MetricsRow>;

// Throws ConfigError on empty input or mismatched episode counts.
MetricsRow aggregate(const CellSpec& cell, const std::vector<EpisodeTrace>& traces,
                     const std::vector<EpisodeTrace>& reference);

void write_metrics_csv(std::ostream& out, const MetricsTable& table);
std::string metrics_csv(const MetricsTable& table);

// Holds the configuration and caches trained verifiers, keyed by training
// chunk size and input ablation.
class Experiment {
public:
    explicit Experiment(ExperimentConfig cfg);

    const ExperimentConfig& config() const { return cfg_; }

    CellSpec default_cell() const;
    ReferenceSource reference_for(const CellSpec& cell);
    std::shared_ptr<const Verifier> trained_verifier(int chunk_size, InputAblation ablation);

    // Episodes use seeds base_seed + i.
    std::vector<EpisodeTrace> run_batch(const CellSpec& cell);
    std::vector<EpisodeTrace> run_reference(const std::string& disturbance);

    struct SweepResult {
        MetricsTable table;
        std::vector<TraceFile> cells;       // one per table row, same order
        std::vector<TraceFile> references;  // one per disturbance level
    };
    SweepResult run_cells(const std::vector<CellSpec>& cells);
    SweepResult run_sweep();

    // Called with progress messages; defaults to silence.
    void set_log(std::function<void(const std::string&)> log) { log_ = std::move(log); }

private:
    ExperimentConfig cfg_;
    std::map<std::pair<int, InputAblation>, std::shared_ptr<const Verifier>> verifiers_;
    std::map<std::string, std::vector<EpisodeTrace>> reference_cache_;
    std::function<void(const std::string&)> log_;
};

// Convenience wrappers over Experiment.
std::vector<EpisodeTrace> run_batch(const ExperimentConfig& cfg, std::optional<ControllerMode> mode = {});
MetricsTable run_sweep(const ExperimentConfig& cfg);

// Writes traces/<label>.jsonl for every cell and reference plus summary.csv.
void write_sweep_outputs(const Experiment::SweepResult& result, const std::filesystem::path& dir);

// Recomputes the metrics table from a directory of trace files.
MetricsTable report_from_traces(const std::filesystem::path& trace_dir);

}  // namespace specctl
