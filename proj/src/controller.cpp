#include "specctl/controller.hpp"

#include <string>

#include "specctl/errors.hpp"

namespace specctl {

void LatencyModel::validate() const {
    if (!(t_heavy >= 0.0 && t_verify >= 0.0 && t_ctrl >= 0.0))
        throw ContractViolation("latency: all latencies must be >= 0");
    if (t_verify > t_heavy) throw ContractViolation("latency: t_verify must not exceed t_heavy");
}

void ThresholdConfig::validate() const {
    if (!(tau > 0.0 && tau < 1.0)) throw ContractViolation("tau must be in (0,1), got " + std::to_string(tau));
    if (max_replans < 1) throw ContractViolation("max_replans must be >= 1");
}

Decision decide(const Action& planned, const Action& reference, const ActionSpace& space, double tau,
                StepIndex step) {
    if (!(tau > 0.0 && tau < 1.0)) throw ContractViolation("decide: tau must be in (0,1)");
    if (planned.dim() != space.dim() || reference.dim() != space.dim())
        throw ContractViolation("decide: action dimension does not match the space");
    const DeviationScore score = normalize_discrepancy(l1_distance(reference, planned), space);
    return {score.value() <= tau ? DecisionKind::Accept : DecisionKind::Replan, score, step};
}

std::string_view to_string(ControllerMode m) {
    switch (m) {
        case ControllerMode::SpeculativeVerification: return "sv";
        case ControllerMode::OpenLoop: return "open-loop";
        case ControllerMode::VerifierOnly: return "verifier-only";
        case ControllerMode::SvWithoutContext: return "sv-no-context";
        case ControllerMode::SvWithoutObservation: return "sv-no-observation";
    }
    return "sv";
}

ControllerMode parse_mode(std::string_view s) {
    for (auto m : {ControllerMode::SpeculativeVerification, ControllerMode::OpenLoop, ControllerMode::VerifierOnly,
                   ControllerMode::SvWithoutContext, ControllerMode::SvWithoutObservation})
        if (to_string(m) == s) return m;
    throw ConfigError("unknown controller mode '" + std::string(s) + "'");
}

bool mode_uses_verifier(ControllerMode m) { return m != ControllerMode::OpenLoop; }

InputAblation mode_ablation(ControllerMode m) {
    if (m == ControllerMode::SvWithoutContext) return InputAblation::NoContext;
    if (m == ControllerMode::SvWithoutObservation) return InputAblation::NoObservation;
    return InputAblation::None;
}

ReferenceSource ReferenceSource::trained(std::shared_ptr<const Verifier> v) {
    if (!v) throw ConfigError("ReferenceSource::trained: null verifier");
    return ReferenceSource(Kind::Trained, std::move(v));
}

Action ReferenceSource::reference(const Environment& env, const PlanningContext& context,
                                  InputAblation ablation) const {
    switch (kind_) {
        case Kind::Oracle: return expert_action(env.state(), env.config());
        case Kind::Trained: return verifier_->reference(env.observe(), context, env.action_space(), ablation);
        case Kind::None: break;
    }
    throw ConfigError("no reference source configured");
}

namespace {

class EpisodeRunner {
public:
    EpisodeRunner(const EpisodeConfig& cfg, std::uint64_t seed, EpisodeTrace& trace)
        : env_(cfg, seed), trace_(trace) {
        trace_.initial_state_hash = state_hash(env_.state());
    }

    Environment& env() { return env_; }

    bool finished() const { return env_.success() || env_.state().step >= env_.config().horizon; }

    void execute(StepRecord rec) {
        rec.step = env_.state().step;
        env_.step(rec.action);
        rec.state_hash = state_hash(env_.state());
        trace_.heavy_calls += rec.heavy_calls;
        trace_.verifier_calls += rec.verifier_calls;
        ++trace_.executed_steps;
        trace_.steps.push_back(std::move(rec));
    }

private:
    Environment env_;
    EpisodeTrace& trace_;
};

std::vector<double> to_vector(const Action& a) { return {a.values().begin(), a.values().end()}; }

}  // namespace

EpisodeTrace run_episode(const EpisodeConfig& env_cfg, const PlannerInterface& planner,
                         const ReferenceSource& reference, ControllerMode mode, const ThresholdConfig& threshold,
                         const LatencyModel& latency, std::uint64_t seed) {
    threshold.validate();
    latency.validate();
    if (mode_uses_verifier(mode) && !reference.available())
        throw ConfigError(std::string("mode '") + std::string(to_string(mode)) + "' needs a verifier");
    if (mode_ablation(mode) != InputAblation::None && reference.is_oracle())
        throw ConfigError(std::string("mode '") + std::string(to_string(mode)) + "' needs a trained verifier");

    EpisodeTrace trace;
    trace.mode = mode;
    trace.chunk_size = planner.chunk_size();
    trace.tau = threshold.tau;
    trace.seed = seed;
    trace.latency = latency;

    EpisodeRunner run(env_cfg, seed, trace);
    Environment& env = run.env();
    const TaskDescriptor task{.goal_index = ordered_sites(env.state()).goal_index};
    const InputAblation ablation = mode_ablation(mode);

    int chunk_index = 0;
    std::optional<double> pending_replan_score;
    bool stop = false;

    while (!stop && !run.finished()) {
        const PlannerOutput plan = planner.plan(env.observe(), task, env.proprio());
        const auto& actions = plan.chunk.actions;

        StepRecord first{.chunk = chunk_index, .index_in_chunk = 0, .action = to_vector(actions[0]), .heavy_calls = 1};
        if (pending_replan_score) {
            first.verifier_calls = 1;
            first.replan_score = pending_replan_score;
            pending_replan_score.reset();
        }
        run.execute(std::move(first));
        int executed_in_chunk = 1;

        if (mode == ControllerMode::VerifierOnly) {
            // No further planner calls: the verifier's own action drives the
            // rest of the episode, conditioned on the initial context.
            while (!run.finished()) {
                Action ref = reference.reference(env, plan.context, ablation);
                run.execute({.chunk = chunk_index, .index_in_chunk = executed_in_chunk, .action = to_vector(ref),
                             .verifier_calls = 1});
                ++executed_in_chunk;
            }
            trace.chunk_steps.push_back(executed_in_chunk);
            break;
        }

        for (std::size_t t = 1; t < actions.size() && !run.finished(); ++t) {
            if (mode == ControllerMode::OpenLoop) {
                run.execute({.chunk = chunk_index, .index_in_chunk = static_cast<int>(t), .action = to_vector(actions[t])});
                ++executed_in_chunk;
                continue;
            }
            const Action ref = reference.reference(env, plan.context, ablation);
            const Decision d = decide(actions[t], ref, env.action_space(), threshold.tau, env.state().step);
            trace.decisions.push_back(d);
            if (d.kind == DecisionKind::Replan) {
                if (trace.replans >= threshold.max_replans) {
                    trace.guard_hit = true;
                    trace.trailing_verifier_calls = 1;
                    ++trace.verifier_calls;
                    stop = true;
                } else {
                    ++trace.replans;
                    trace.steps_before_replan.push_back(executed_in_chunk);
                    pending_replan_score = d.score.value();
                }
                break;
            }
            run.execute({.chunk = chunk_index,
                         .index_in_chunk = static_cast<int>(t),
                         .action = to_vector(actions[t]),
                         .verifier_calls = 1,
                         .decision = DecisionKind::Accept,
                         .score = d.score.value()});
            ++executed_in_chunk;
        }
        trace.chunk_steps.push_back(executed_in_chunk);
        ++chunk_index;
    }

    trace.success = env.success();
    trace.simulated_inference_time =
        trace.heavy_calls * latency.t_heavy + trace.verifier_calls * latency.t_verify;
    return trace;
}

CostBounds cost_bounds(const LatencyModel& latency, int chunk_size) {
    if (chunk_size < 1) throw ContractViolation("cost_bounds: K must be >= 1");
    return {latency.t_heavy / chunk_size + latency.t_verify, latency.t_heavy + latency.t_verify};
}

double observed_per_step_cost(const EpisodeTrace& trace) {
    if (trace.executed_steps < 1) throw ContractViolation("observed_per_step_cost: no executed steps");
    return trace.simulated_inference_time / trace.executed_steps;
}

}  // namespace specctl
