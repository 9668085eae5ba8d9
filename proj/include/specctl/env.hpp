#pragma once
// Toy pick-and-place world on a bounded 2-D plane.
//
// An agent moves by at most `move_bound` per axis per step, can grasp the
// object when within `grasp_radius` of it, and must release it at the goal
// site. A second (decoy) placement site is visible in every observation; which
// of the two is the goal is carried only by the task descriptor.
//
// Action layout: [dx, dy, grasp]. grasp > 0.5 toggles the gripper after the
// move: it releases a held object, or closes on the object when within reach.
//
// Observation layout (kObservationWidth entries):
//   0-1  agent position
//   2-3  object position
//   4-5  first placement site   } sites in lexicographic (x, y) order
//   6-7  second placement site  }
//   8-9  object minus agent
//   10   gripper (0 open, 1 holding)
// Proprio layout: [agent x, agent y, gripper].

#include <array>
#include <cstdint>
#include <optional>
#include <random>

#include "specctl/core.hpp"

namespace specctl {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    bool operator==(const Vec2&) const = default;
};

double distance(Vec2 a, Vec2 b);

enum class Gripper : std::uint8_t { Open = 0, Holding = 1 };

struct WorldConfig {
    double half_extent = 2.0;   // positions live in [-h, h]^2
    double move_bound = 0.25;   // per-axis displacement limit
    double grasp_radius = 0.1;
    double spawn_margin = 0.25; // initial scenes keep this far from the walls

    bool operator==(const WorldConfig&) const = default;
};

struct EnvState {
    Vec2 agent_pos;
    Vec2 object_pos;
    Vec2 goal_pos;
    Vec2 decoy_pos;
    Gripper gripper = Gripper::Open;
    StepIndex step = 0;

    bool operator==(const EnvState&) const = default;
};

struct DisturbanceConfig {
    double actuation_noise_sigma = 0.0;
    double object_drift_prob = 0.0;
    double object_drift_magnitude = 0.0;
    double grasp_failure_prob = 0.0;
    std::uint64_t seed = 0;

    // Throws ContractViolation on negative magnitudes or probabilities outside [0, 1].
    void validate() const;
    bool is_off() const;
    bool operator==(const DisturbanceConfig&) const = default;
};

struct EpisodeConfig {
    int horizon = 32;
    double success_radius = 0.1;
    DisturbanceConfig disturbance;
    WorldConfig world;
    // Overrides the seeded scene sampler when set.
    std::optional<EnvState> initial_state;

    void validate() const;
    bool operator==(const EpisodeConfig&) const = default;
};

inline constexpr std::size_t kObservationWidth = 11;
inline constexpr std::size_t kProprioWidth = 3;
inline constexpr std::size_t kActionDim = 3;
inline constexpr std::size_t kNumSites = 2;

// [-b, b]^2 x [0, 1]
ActionSpace make_action_space(const WorldConfig& world);

// Sites in observation order, and the position of the goal among them.
struct SiteOrder {
    std::array<Vec2, kNumSites> sites;
    int goal_index = 0;
};
SiteOrder ordered_sites(const EnvState& state);

// One independent generator per disturbance source, all split from a single
// seed, so enabling one source never shifts the draws of another.
class DisturbanceStreams {
public:
    explicit DisturbanceStreams(std::uint64_t seed);

    std::mt19937_64 actuation;
    std::mt19937_64 drift;
    std::mt19937_64 grasp;
};

// Stream used to sample initial scenes from an episode seed.
std::mt19937_64 scene_stream(std::uint64_t seed);

std::uint64_t split_seed(std::uint64_t seed, std::uint64_t salt);

struct StepResult {
    EnvState state;
    Observation observation;
    ProprioState proprio;
};

// Transition model. The action is clamped into the world's action space first.
StepResult env_step(const EnvState& state, std::span<const double> action,
                    const EpisodeConfig& cfg, DisturbanceStreams& streams);

// Greedy phase policy: approach with the grasp armed, carry, release on the
// step that reaches the goal, then stay put.
Action expert_action(const EnvState& state, const EpisodeConfig& cfg);

bool is_success(const EnvState& state, const EpisodeConfig& cfg);

Observation render_observation(const EnvState& state);
ProprioState render_proprio(const EnvState& state);

// Inverse of render_observation given which site is the goal. Throws
// ContractViolation if the features do not describe a valid state.
EnvState reconstruct_state(const Observation& obs, int goal_index, const WorldConfig& world);

EnvState sample_initial_state(const WorldConfig& world, std::mt19937_64& rng);

// Checks world bounds and gripper/object coupling.
bool state_is_valid(const EnvState& state, const WorldConfig& world);

// FNV-1a over the state's bit pattern.
std::uint64_t state_hash(const EnvState& state);

// Single-owner episode state machine around env_step.
class Environment {
public:
    Environment(EpisodeConfig cfg, std::uint64_t seed);

    const EnvState& state() const { return state_; }
    const EpisodeConfig& config() const { return cfg_; }
    const ActionSpace& action_space() const { return space_; }
    Observation observe() const { return render_observation(state_); }
    ProprioState proprio() const { return render_proprio(state_); }
    bool success() const { return is_success(state_, cfg_); }

    const StepResult& step(std::span<const double> action);

private:
    EpisodeConfig cfg_;
    ActionSpace space_;
    DisturbanceStreams streams_;
    EnvState state_;
    StepResult last_;
};

}  // namespace specctl
