#pragma once
// Heavy macro-planner abstraction and its nominal-rollout realization.
//
// The nominal-rollout planner rebuilds the world state from the observation
// and task descriptor, rolls the expert policy forward under disturbance-free
// dynamics, and returns the visited actions as the chunk. Its planning context
// is a fixed summary of the planning-time scene and the predicted end state:
//
//   0-1   goal position
//   2-3   object position at planning time
//   4-5   agent position at planning time
//   6-8   phase one-hot (approach, carry, done)
//   9-10  predicted agent position at chunk end
//   11-12 predicted object position at chunk end
//   13    predicted gripper at chunk end
//   14    chunk length / K
//   15    goal index
//
// Widths below 16 truncate this layout; wider contexts are zero-padded.

#include <memory>
#include <string>
#include <string_view>

#include "specctl/core.hpp"
#include "specctl/env.hpp"

namespace specctl {

struct TaskDescriptor {
    std::string instruction = "place the object on the target site";
    int goal_index = 0;  // which site, in observation order
};

struct PlannerOutput {
    ActionChunk chunk;
    PlanningContext context;
};

class PlannerInterface {
public:
    virtual ~PlannerInterface() = default;

    // Chunk length is min(K, horizon - obs.step). Throws ContractViolation
    // when the inputs do not describe a valid state or no steps remain.
    virtual PlannerOutput plan(const Observation& obs, const TaskDescriptor& task,
                               const ProprioState& proprio) const = 0;

    virtual int chunk_size() const = 0;
    virtual std::size_t context_width() const = 0;
    virtual std::string_view kind() const = 0;
};

inline constexpr std::size_t kDefaultContextWidth = 16;

class NominalRolloutPlanner final : public PlannerInterface {
public:
    // `nominal` supplies the world geometry, success radius and horizon; its
    // disturbances are ignored.
    NominalRolloutPlanner(int chunk_size, std::size_t context_width, EpisodeConfig nominal);

    PlannerOutput plan(const Observation& obs, const TaskDescriptor& task,
                       const ProprioState& proprio) const override;

    int chunk_size() const override { return k_; }
    std::size_t context_width() const override { return width_; }
    std::string_view kind() const override { return "nominal-rollout"; }

private:
    int k_;
    std::size_t width_;
    EpisodeConfig nominal_;
    ActionSpace space_;
};

// Throws ConfigError for an unknown kind, K < 1 or a zero context width.
std::unique_ptr<PlannerInterface> make_planner(std::string_view kind, int chunk_size,
                                               std::size_t context_width, const EpisodeConfig& nominal);

}  // namespace specctl
