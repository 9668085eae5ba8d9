#pragma once
// Plan -> execute -> verify -> accept/replan executor with inference-cost
// accounting, plus the open-loop and verifier-only baselines.

#include <cstdint>
#include <memory>
#include <optional>
#include <string_view>
#include <utility>
#include <vector>

#include "specctl/core.hpp"
#include "specctl/env.hpp"
#include "specctl/planner.hpp"
#include "specctl/verifier.hpp"

namespace specctl {

struct LatencyModel {
    double t_heavy = 1.373;  // seconds per planner call
    double t_verify = 0.081; // seconds per verifier call
    double t_ctrl = 0.05;    // control interval, reporting only

    // Throws ContractViolation on negative entries or t_verify > t_heavy.
    void validate() const;
    bool operator==(const LatencyModel&) const = default;
};

enum class DecisionKind : std::uint8_t { Accept, Replan };

struct Decision {
    DecisionKind kind;
    DeviationScore score;
    StepIndex step;
};

// Accept iff normalize_discrepancy(l1_distance(reference, planned)) <= tau.
// Throws ContractViolation on dimension mismatch or tau outside (0, 1).
Decision decide(const Action& planned, const Action& reference, const ActionSpace& space, double tau,
                StepIndex step = 0);

enum class ControllerMode : std::uint8_t {
    SpeculativeVerification,  // "sv"
    OpenLoop,                 // "open-loop": execute whole chunks, no verifier
    VerifierOnly,             // "verifier-only": plan once, then execute the verifier's action
    SvWithoutContext,         // "sv-no-context"
    SvWithoutObservation,     // "sv-no-observation"
};
std::string_view to_string(ControllerMode m);
ControllerMode parse_mode(std::string_view s);
bool mode_uses_verifier(ControllerMode m);
InputAblation mode_ablation(ControllerMode m);

struct ThresholdConfig {
    double tau = 0.2;
    int max_replans = 32;

    void validate() const;
    bool operator==(const ThresholdConfig&) const = default;
};

// Where reference actions come from: nothing (open-loop), the expert at the
// true state (oracle), or a trained verifier.
class ReferenceSource {
public:
    static ReferenceSource none() { return ReferenceSource(Kind::None, nullptr); }
    static ReferenceSource oracle() { return ReferenceSource(Kind::Oracle, nullptr); }
    static ReferenceSource trained(std::shared_ptr<const Verifier> v);

    bool available() const { return kind_ != Kind::None; }
    bool is_oracle() const { return kind_ == Kind::Oracle; }
    const Verifier* verifier() const { return verifier_.get(); }

    Action reference(const Environment& env, const PlanningContext& context, InputAblation ablation) const;

private:
    enum class Kind : std::uint8_t { None, Oracle, Trained };
    ReferenceSource(Kind k, std::shared_ptr<const Verifier> v) : kind_(k), verifier_(std::move(v)) {}
    Kind kind_;
    std::shared_ptr<const Verifier> verifier_;
};

// One executed control step.
struct StepRecord {
    StepIndex step = 0;           // time index before execution
    int chunk = 0;                // chunk the action came from
    int index_in_chunk = 0;       // position within that chunk
    std::vector<double> action;   // executed action
    int heavy_calls = 0;          // planner calls charged right before this step (0 or 1)
    int verifier_calls = 0;       // verifier calls charged right before this step (0 or 1)
    std::optional<DecisionKind> decision{};  // Accept for verified chunk actions, else none
    std::optional<double> score{};         // deviation score of that decision
    std::optional<double> replan_score{};  // set on the first step after a replan
    std::uint64_t state_hash = 0;          // state after execution

    bool operator==(const StepRecord&) const = default;
};

struct EpisodeTrace {
    ControllerMode mode = ControllerMode::SpeculativeVerification;
    int chunk_size = 1;
    double tau = 0.2;
    std::uint64_t seed = 0;
    LatencyModel latency;

    std::uint64_t initial_state_hash = 0;
    std::vector<StepRecord> steps;
    std::vector<Decision> decisions;

    int heavy_calls = 0;
    int verifier_calls = 0;
    int executed_steps = 0;
    int replans = 0;
    // Verifier calls not followed by an executed step (guard hit).
    int trailing_verifier_calls = 0;
    bool guard_hit = false;
    bool success = false;
    double simulated_inference_time = 0.0;

    std::vector<int> steps_before_replan;  // executed steps of each chunk that ended in a replan
    std::vector<int> chunk_steps;          // executed steps of every chunk
};

// Throws ConfigError when the mode needs a reference source that is absent,
// or an input-ablation mode is paired with the oracle.
EpisodeTrace run_episode(const EpisodeConfig& env_cfg, const PlannerInterface& planner,
                         const ReferenceSource& reference, ControllerMode mode, const ThresholdConfig& threshold,
                         const LatencyModel& latency, std::uint64_t seed);

struct CostBounds {
    double min_per_step;
    double max_per_step;
};

// (T_heavy / K + T_verify, T_heavy + T_verify). Throws ContractViolation for K < 1.
CostBounds cost_bounds(const LatencyModel& latency, int chunk_size);

// simulated_inference_time / executed_steps. Throws ContractViolation when no
// step was executed.
double observed_per_step_cost(const EpisodeTrace& trace);

}  // namespace specctl
