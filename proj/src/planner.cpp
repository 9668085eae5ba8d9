#include "specctl/planner.hpp"

#include <algorithm>
#include <cmath>

#include "specctl/errors.hpp"

namespace specctl {
namespace {

std::vector<double> summarize(const EnvState& start, const EnvState& end, const EpisodeConfig& cfg,
                              std::size_t chunk_len, int k, int goal_index) {
    const bool done = is_success(start, cfg);
    const bool carry = !done && start.gripper == Gripper::Holding;
    const bool approach = !done && !carry;
    return {
        start.goal_pos.x,
        start.goal_pos.y,
        start.object_pos.x,
        start.object_pos.y,
        start.agent_pos.x,
        start.agent_pos.y,
        approach ? 1.0 : 0.0,
        carry ? 1.0 : 0.0,
        done ? 1.0 : 0.0,
        end.agent_pos.x,
        end.agent_pos.y,
        end.object_pos.x,
        end.object_pos.y,
        end.gripper == Gripper::Holding ? 1.0 : 0.0,
        static_cast<double>(chunk_len) / static_cast<double>(k),
        static_cast<double>(goal_index),
    };
}

}  // namespace

NominalRolloutPlanner::NominalRolloutPlanner(int chunk_size, std::size_t context_width, EpisodeConfig nominal)
    : k_(chunk_size), width_(context_width), nominal_(std::move(nominal)),
      space_(make_action_space(nominal_.world)) {
    if (k_ < 1) throw ConfigError("planner: K must be >= 1");
    if (width_ == 0) throw ConfigError("planner: context width must be >= 1");
    nominal_.disturbance = DisturbanceConfig{};
    nominal_.initial_state.reset();
    nominal_.validate();
}

PlannerOutput NominalRolloutPlanner::plan(const Observation& obs, const TaskDescriptor& task,
                                          const ProprioState& proprio) const {
    const EnvState start = reconstruct_state(obs, task.goal_index, nominal_.world);
    const auto expected = render_proprio(start);
    if (proprio.values.size() != expected.values.size() ||
        !std::equal(proprio.values.begin(), proprio.values.end(), expected.values.begin(),
                    [](double a, double b) { return std::fabs(a - b) <= 1e-9; }))
        throw ContractViolation("planner: proprio state disagrees with observation");

    const int remaining = nominal_.horizon - obs.step;
    if (remaining < 1) throw ContractViolation("planner: no steps left before the horizon");
    const int n = std::min(k_, remaining);

    // Disturbances are off, so the streams are never consulted for outcomes.
    DisturbanceStreams streams(0);
    PlannerOutput out;
    out.chunk.planned_at = obs.step;
    out.chunk.actions.reserve(static_cast<std::size_t>(n));
    EnvState s = start;
    for (int i = 0; i < n; ++i) {
        Action a = expert_action(s, nominal_);
        s = env_step(s, a.values(), nominal_, streams).state;
        out.chunk.actions.push_back(std::move(a));
    }

    auto ctx = summarize(start, s, nominal_, out.chunk.size(), k_, task.goal_index);
    ctx.resize(width_, 0.0);
    out.context = {std::move(ctx), obs.step};
    return out;
}

std::unique_ptr<PlannerInterface> make_planner(std::string_view kind, int chunk_size,
                                               std::size_t context_width, const EpisodeConfig& nominal) {
    if (kind != "nominal-rollout") throw ConfigError("unknown planner kind '" + std::string(kind) + "'");
    return std::make_unique<NominalRolloutPlanner>(chunk_size, context_width, nominal);
}

}  // namespace specctl
