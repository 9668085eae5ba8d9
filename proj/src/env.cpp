#include "specctl/env.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>
#include <string>

#include "specctl/errors.hpp"

namespace specctl {
namespace {

constexpr double kConsistencyTol = 1e-9;

Vec2 clamp_world(Vec2 p, const WorldConfig& world) {
    const double h = world.half_extent;
    return {std::clamp(p.x, -h, h), std::clamp(p.y, -h, h)};
}

bool in_world(Vec2 p, const WorldConfig& world) {
    const double h = world.half_extent;
    return std::isfinite(p.x) && std::isfinite(p.y) && std::fabs(p.x) <= h && std::fabs(p.y) <= h;
}

bool lex_less(Vec2 a, Vec2 b) { return a.x < b.x || (a.x == b.x && a.y < b.y); }

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

enum StreamSalt : std::uint64_t { kScene = 1, kActuation = 2, kDrift = 3, kGrasp = 4 };

}  // namespace

double distance(Vec2 a, Vec2 b) { return std::hypot(a.x - b.x, a.y - b.y); }

std::uint64_t split_seed(std::uint64_t seed, std::uint64_t salt) {
    return splitmix64(splitmix64(seed) ^ splitmix64(salt * 0x2545f4914f6cdd1dULL));
}

void DisturbanceConfig::validate() const {
    auto prob = [](double p, const char* name) {
        if (!(p >= 0.0 && p <= 1.0))
            throw ContractViolation(std::string("disturbance.") + name + " must be in [0,1]");
    };
    auto nonneg = [](double v, const char* name) {
        if (!(v >= 0.0 && std::isfinite(v)))
            throw ContractViolation(std::string("disturbance.") + name + " must be >= 0");
    };
    nonneg(actuation_noise_sigma, "actuation_noise_sigma");
    prob(object_drift_prob, "object_drift_prob");
    nonneg(object_drift_magnitude, "object_drift_magnitude");
    prob(grasp_failure_prob, "grasp_failure_prob");
}

bool DisturbanceConfig::is_off() const {
    return actuation_noise_sigma == 0.0 && (object_drift_prob == 0.0 || object_drift_magnitude == 0.0) &&
           grasp_failure_prob == 0.0;
}

void EpisodeConfig::validate() const {
    if (horizon < 1) throw ContractViolation("episode.horizon must be >= 1");
    if (!(success_radius > 0.0)) throw ContractViolation("episode.success_radius must be > 0");
    if (!(world.half_extent > 0.0 && world.move_bound > 0.0 && world.grasp_radius > 0.0 &&
          world.spawn_margin >= 0.0 && world.spawn_margin < world.half_extent))
        throw ContractViolation("episode.world has a non-positive extent, bound or radius");
    disturbance.validate();
    if (initial_state && !state_is_valid(*initial_state, world))
        throw ContractViolation("episode.initial_state violates world bounds or gripper coupling");
}

ActionSpace make_action_space(const WorldConfig& world) {
    const double b = world.move_bound;
    return ActionSpace({-b, -b, 0.0}, {b, b, 1.0});
}

SiteOrder ordered_sites(const EnvState& state) {
    if (lex_less(state.decoy_pos, state.goal_pos)) return {{state.decoy_pos, state.goal_pos}, 1};
    return {{state.goal_pos, state.decoy_pos}, 0};
}

DisturbanceStreams::DisturbanceStreams(std::uint64_t seed)
    : actuation(split_seed(seed, kActuation)),
      drift(split_seed(seed, kDrift)),
      grasp(split_seed(seed, kGrasp)) {}

std::mt19937_64 scene_stream(std::uint64_t seed) { return std::mt19937_64(split_seed(seed, kScene)); }

StepResult env_step(const EnvState& state, std::span<const double> action, const EpisodeConfig& cfg,
                    DisturbanceStreams& streams) {
    const auto& world = cfg.world;
    const auto& dist = cfg.disturbance;
    const auto a = make_action_space(world).clamp(action);

    // Every source draws on every step so stream positions only depend on the
    // step count, never on what happened.
    std::normal_distribution<double> gauss(0.0, 1.0);
    const double nx = gauss(streams.actuation);
    const double ny = gauss(streams.actuation);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double grasp_draw = unit(streams.grasp);
    const double drift_draw = unit(streams.drift);
    const double drift_angle = unit(streams.drift) * 2.0 * std::numbers::pi;

    EnvState next = state;
    next.step = state.step + 1;

    Vec2 move{a[0], a[1]};
    if (move.x != 0.0 || move.y != 0.0) {
        move.x += dist.actuation_noise_sigma * nx;
        move.y += dist.actuation_noise_sigma * ny;
    }
    next.agent_pos = clamp_world({state.agent_pos.x + move.x, state.agent_pos.y + move.y}, world);
    if (next.gripper == Gripper::Holding) next.object_pos = next.agent_pos;

    if (a[2] > 0.5) {
        if (next.gripper == Gripper::Holding) {
            next.gripper = Gripper::Open;
        } else if (distance(next.agent_pos, next.object_pos) <= world.grasp_radius &&
                   grasp_draw >= dist.grasp_failure_prob) {
            next.gripper = Gripper::Holding;
            next.object_pos = next.agent_pos;
        }
    }

    if (next.gripper == Gripper::Open && drift_draw < dist.object_drift_prob) {
        const double m = dist.object_drift_magnitude;
        next.object_pos = clamp_world({next.object_pos.x + m * std::cos(drift_angle),
                                       next.object_pos.y + m * std::sin(drift_angle)},
                                      world);
    }

    return {next, render_observation(next), render_proprio(next)};
}

Action expert_action(const EnvState& state, const EpisodeConfig& cfg) {
    const auto space = make_action_space(cfg.world);
    const double b = cfg.world.move_bound;
    if (is_success(state, cfg)) return Action(space, std::array{0.0, 0.0, 0.0});

    const Vec2 target = state.gripper == Gripper::Holding ? state.goal_pos : state.object_pos;
    const double dx = target.x - state.agent_pos.x;
    const double dy = target.y - state.agent_pos.y;
    // The grasp stays armed during the approach; closing out of reach is a
    // no-op. Release only on the step that lands on the goal.
    const bool lands = std::fabs(dx) <= b && std::fabs(dy) <= b;
    const bool toggle = state.gripper == Gripper::Open || lands;
    return Action(space, std::array{std::clamp(dx, -b, b), std::clamp(dy, -b, b), toggle ? 1.0 : 0.0});
}

bool is_success(const EnvState& state, const EpisodeConfig& cfg) {
    return state.gripper == Gripper::Open && distance(state.object_pos, state.goal_pos) <= cfg.success_radius;
}

Observation render_observation(const EnvState& state) {
    const auto order = ordered_sites(state);
    Observation obs;
    obs.step = state.step;
    obs.features = {
        state.agent_pos.x,
        state.agent_pos.y,
        state.object_pos.x,
        state.object_pos.y,
        order.sites[0].x,
        order.sites[0].y,
        order.sites[1].x,
        order.sites[1].y,
        state.object_pos.x - state.agent_pos.x,
        state.object_pos.y - state.agent_pos.y,
        state.gripper == Gripper::Holding ? 1.0 : 0.0,
    };
    return obs;
}

ProprioState render_proprio(const EnvState& state) {
    return {{state.agent_pos.x, state.agent_pos.y, state.gripper == Gripper::Holding ? 1.0 : 0.0}};
}

EnvState reconstruct_state(const Observation& obs, int goal_index, const WorldConfig& world) {
    const auto& f = obs.features;
    if (f.size() != kObservationWidth)
        throw ContractViolation("observation has " + std::to_string(f.size()) + " features, expected " +
                                std::to_string(kObservationWidth));
    if (goal_index < 0 || goal_index >= static_cast<int>(kNumSites))
        throw ContractViolation("goal index out of range");
    for (double v : f)
        if (!std::isfinite(v)) throw ContractViolation("observation contains a non-finite entry");
    if (f[10] != 0.0 && f[10] != 1.0) throw ContractViolation("observation gripper flag must be 0 or 1");
    if (std::fabs(f[2] - f[0] - f[8]) > kConsistencyTol || std::fabs(f[3] - f[1] - f[9]) > kConsistencyTol)
        throw ContractViolation("observation relative offset disagrees with positions");
    const Vec2 s0{f[4], f[5]};
    const Vec2 s1{f[6], f[7]};
    if (lex_less(s1, s0)) throw ContractViolation("observation sites are not in canonical order");

    EnvState s;
    s.agent_pos = {f[0], f[1]};
    s.object_pos = {f[2], f[3]};
    s.goal_pos = goal_index == 0 ? s0 : s1;
    s.decoy_pos = goal_index == 0 ? s1 : s0;
    s.gripper = f[10] == 1.0 ? Gripper::Holding : Gripper::Open;
    s.step = obs.step;
    if (s.gripper == Gripper::Holding && distance(s.agent_pos, s.object_pos) > kConsistencyTol)
        throw ContractViolation("observation says holding but object is away from the agent");
    if (s.gripper == Gripper::Holding) s.object_pos = s.agent_pos;
    if (!state_is_valid(s, world)) throw ContractViolation("observation positions outside world bounds");
    return s;
}

EnvState sample_initial_state(const WorldConfig& world, std::mt19937_64& rng) {
    const double r = world.half_extent - world.spawn_margin;
    std::uniform_real_distribution<double> coord(-r, r);
    auto draw = [&] { return Vec2{coord(rng), coord(rng)}; };
    // Keep object and sites apart so no scene starts solved or ambiguous.
    const double min_obj_site = 0.5;
    const double min_site_site = 0.75;
    for (;;) {
        EnvState s;
        s.agent_pos = draw();
        s.object_pos = draw();
        s.goal_pos = draw();
        s.decoy_pos = draw();
        if (distance(s.object_pos, s.goal_pos) < min_obj_site) continue;
        if (distance(s.object_pos, s.decoy_pos) < min_obj_site) continue;
        if (distance(s.goal_pos, s.decoy_pos) < min_site_site) continue;
        return s;
    }
}

bool state_is_valid(const EnvState& state, const WorldConfig& world) {
    if (!in_world(state.agent_pos, world) || !in_world(state.object_pos, world) ||
        !in_world(state.goal_pos, world) || !in_world(state.decoy_pos, world))
        return false;
    return state.gripper == Gripper::Open || state.object_pos == state.agent_pos;
}

std::uint64_t state_hash(const EnvState& state) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](std::uint64_t v) {
        for (int i = 0; i < 8; ++i) {
            h ^= (v >> (8 * i)) & 0xffU;
            h *= 0x100000001b3ULL;
        }
    };
    for (const Vec2& p : {state.agent_pos, state.object_pos, state.goal_pos, state.decoy_pos}) {
        mix(std::bit_cast<std::uint64_t>(p.x));
        mix(std::bit_cast<std::uint64_t>(p.y));
    }
    mix(static_cast<std::uint64_t>(state.gripper));
    mix(static_cast<std::uint64_t>(static_cast<std::int64_t>(state.step)));
    return h;
}

Environment::Environment(EpisodeConfig cfg, std::uint64_t seed)
    : cfg_(std::move(cfg)),
      space_(make_action_space(cfg_.world)),
      streams_(split_seed(seed, cfg_.disturbance.seed)) {
    cfg_.validate();
    if (cfg_.initial_state) {
        state_ = *cfg_.initial_state;
    } else {
        auto rng = scene_stream(seed);
        state_ = sample_initial_state(cfg_.world, rng);
    }
    last_ = {state_, render_observation(state_), render_proprio(state_)};
}

const StepResult& Environment::step(std::span<const double> action) {
    last_ = env_step(state_, action, cfg_, streams_);
    state_ = last_.state;
    return last_;
}

}  // namespace specctl
