#include <cmath>
#include <memory>
#include <random>
#include <vector>

#include "doctest.h"
#include "specctl/controller.hpp"
#include "specctl/errors.hpp"

using namespace specctl;

namespace {

const LatencyModel kLatency{1.373, 0.081, 0.05};

EpisodeConfig line_config() {
    EpisodeConfig cfg;
    cfg.horizon = 8;
    EnvState s;
    s.goal_pos = {1.0, 0.0};
    s.decoy_pos = {-1.0, -1.0};
    s.gripper = Gripper::Holding;
    cfg.initial_state = s;
    return cfg;
}

// Verifier whose reference is the constant clamp of `bias`.
std::shared_ptr<const Verifier> constant_verifier(std::vector<double> bias) {
    Verifier v{FrozenEncoder(kObservationWidth, 4, 1), VerifierParams(4, kDefaultContextWidth, 4, 3),
               InputAblation::None};
    v.params.head.b = std::move(bias);
    return std::make_shared<const Verifier>(std::move(v));
}

EpisodeConfig moderate() {
    EpisodeConfig cfg;
    cfg.disturbance = {0.02, 0.05, 0.35, 0.25, 0};
    return cfg;
}

}  // namespace

TEST_CASE("decide") {
    const auto space = make_action_space(WorldConfig{});
    const Action a(space, std::vector{0.1, -0.2, 0.0});
    auto d = decide(a, a, space, 0.01);
    CHECK(d.kind == DecisionKind::Accept);
    CHECK(d.score.value() == 0.0);

    // Score exactly at tau accepts: raw 0.4 over total range 2.
    const Action b(space, std::vector{0.1, -0.2, 0.4});
    d = decide(a, b, space, 0.2, 7);
    CHECK(d.score.value() == 0.2);
    CHECK(d.kind == DecisionKind::Accept);
    CHECK(d.step == 7);
    CHECK(decide(a, b, space, std::nextafter(0.2, 0.0)).kind == DecisionKind::Replan);

    // Three dimensions of range 0.5 each (total 1.5): raw 1.0 -> score 2/3.
    const ActionSpace half({-0.25, -0.25, 0.5}, {0.25, 0.25, 1.0});
    const Action planned(half, std::vector{0.25, 0.0, 0.5});
    const Action reference(half, std::vector{-0.25, 0.0, 1.0});
    d = decide(planned, reference, half, 0.6);
    CHECK(d.score.value() == doctest::Approx(1.0 / 1.5));
    CHECK(d.kind == DecisionKind::Replan);
    const Action far(half, std::vector{-0.25, 0.25, 1.0});
    CHECK(decide(Action(half, std::vector{0.25, -0.25, 0.5}), far, half, 0.99).score.value() == 1.0);

    CHECK_THROWS_AS(decide(a, a, space, 0.0), ContractViolation);
    CHECK_THROWS_AS(decide(a, a, space, 1.0), ContractViolation);
    CHECK_THROWS_AS(decide(a, Action(half, std::vector{0.0, 0.0, 0.5}), ActionSpace({0.0}, {1.0}), 0.5),
                    ContractViolation);
}

TEST_CASE("decide is monotone in tau") {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-1.0, 1.0), t(1e-6, 1.0 - 1e-6);
    const auto space = make_action_space(WorldConfig{});
    for (int i = 0; i < 2000; ++i) {
        const Action p(space, std::vector{u(rng), u(rng), u(rng)});
        const Action r(space, std::vector{u(rng), u(rng), u(rng)});
        double t1 = t(rng), t2 = t(rng);
        if (t2 < t1) std::swap(t1, t2);
        if (decide(p, r, space, t1).kind == DecisionKind::Accept) CHECK(decide(p, r, space, t2).kind == DecisionKind::Accept);
    }
}

TEST_CASE("modes and configuration") {
    for (auto m : {ControllerMode::SpeculativeVerification, ControllerMode::OpenLoop, ControllerMode::VerifierOnly,
                   ControllerMode::SvWithoutContext, ControllerMode::SvWithoutObservation})
        CHECK(parse_mode(to_string(m)) == m);
    CHECK_THROWS_AS(parse_mode("closed-loop"), ConfigError);
    CHECK(mode_ablation(ControllerMode::SvWithoutContext) == InputAblation::NoContext);
    CHECK_FALSE(mode_uses_verifier(ControllerMode::OpenLoop));

    CHECK_THROWS_AS((LatencyModel{0.1, 0.2, 0.0}.validate()), ContractViolation);
    CHECK_THROWS_AS((LatencyModel{-1.0, 0.0, 0.0}.validate()), ContractViolation);
    CHECK_THROWS_AS((ThresholdConfig{1.5, 3}.validate()), ContractViolation);
    CHECK_THROWS_AS((ThresholdConfig{0.2, 0}.validate()), ContractViolation);

    const auto cfg = line_config();
    auto planner = make_planner("nominal-rollout", 4, kDefaultContextWidth, cfg);
    CHECK_THROWS_AS(run_episode(cfg, *planner, ReferenceSource::none(), ControllerMode::SpeculativeVerification, {},
                                kLatency, 0),
                    ConfigError);
    CHECK_THROWS_AS(run_episode(cfg, *planner, ReferenceSource::oracle(), ControllerMode::SvWithoutContext, {},
                                kLatency, 0),
                    ConfigError);
    CHECK_THROWS_AS(ReferenceSource::trained(nullptr), ConfigError);
}

TEST_CASE("1-D oracle episode") {
    const auto cfg = line_config();
    auto planner = make_planner("nominal-rollout", 4, kDefaultContextWidth, cfg);
    const auto tr = run_episode(cfg, *planner, ReferenceSource::oracle(), ControllerMode::SpeculativeVerification,
                                {0.2, 32}, kLatency, 0);
    CHECK(tr.success);
    CHECK(tr.executed_steps == 4);
    CHECK(tr.heavy_calls == 1);
    CHECK(tr.verifier_calls == 3);
    CHECK(tr.replans == 0);
    REQUIRE(tr.decisions.size() == 3);
    for (const auto& d : tr.decisions) CHECK(d.score.value() == 0.0);
    CHECK(tr.simulated_inference_time == 1.373 + 3 * 0.081);
}

TEST_CASE("a verifier that always disagrees forces replans until the guard") {
    const auto cfg = line_config();
    auto planner = make_planner("nominal-rollout", 4, kDefaultContextWidth, cfg);
    // Reference (-0.25, -0.25, 0) vs planned (0.25, 0, *): score >= 0.375.
    const auto ref = ReferenceSource::trained(constant_verifier({-1.0, -1.0, 0.0}));

    auto tr = run_episode(cfg, *planner, ref, ControllerMode::SpeculativeVerification, {0.1, 32}, kLatency, 0);
    // Every chunk executes only its unverified first action.
    CHECK(tr.success);
    CHECK(tr.executed_steps == 4);
    CHECK(tr.heavy_calls == 4);
    CHECK(tr.replans == 3);
    CHECK(tr.verifier_calls == 3);
    CHECK(tr.steps_before_replan == std::vector<int>{1, 1, 1});
    CHECK_FALSE(tr.guard_hit);

    tr = run_episode(cfg, *planner, ref, ControllerMode::SpeculativeVerification, {0.1, 2}, kLatency, 0);
    CHECK(tr.guard_hit);
    CHECK_FALSE(tr.success);
    CHECK(tr.executed_steps == 3);
    CHECK(tr.heavy_calls == 3);
    CHECK(tr.replans == 2);
    CHECK(tr.verifier_calls == 3);
    CHECK(tr.trailing_verifier_calls == 1);
    CHECK(tr.decisions.size() == 3);
    CHECK(tr.decisions.back().kind == DecisionKind::Replan);
}

TEST_CASE("open-loop with K equal to the horizon plans once") {
    EpisodeConfig cfg;
    auto planner = make_planner("nominal-rollout", cfg.horizon, kDefaultContextWidth, cfg);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto tr = run_episode(cfg, *planner, ReferenceSource::none(), ControllerMode::OpenLoop, {},
                                    kLatency, seed);
        CHECK(tr.heavy_calls == 1);
        CHECK(tr.verifier_calls == 0);
        CHECK(tr.simulated_inference_time == kLatency.t_heavy);
        CHECK(tr.success);
        CHECK(observed_per_step_cost(tr) == kLatency.t_heavy / tr.executed_steps);
    }
}

TEST_CASE("verifier-only plans once") {
    const auto cfg = moderate();
    auto planner = make_planner("nominal-rollout", 4, kDefaultContextWidth, cfg);
    const auto tr = run_episode(cfg, *planner, ReferenceSource::oracle(), ControllerMode::VerifierOnly, {},
                                kLatency, 3);
    CHECK(tr.heavy_calls == 1);
    CHECK(tr.verifier_calls == tr.executed_steps - 1);
    CHECK(tr.replans == 0);
    for (std::size_t i = 1; i < tr.steps.size(); ++i) CHECK(tr.steps[i].verifier_calls == 1);
}

TEST_CASE("cost bounds") {
    auto b = cost_bounds(kLatency, 64);
    CHECK(std::fabs(b.min_per_step - (1.373 / 64 + 0.081)) <= 1e-12);
    CHECK(std::fabs(b.min_per_step - 0.102453125) <= 1e-12);
    CHECK(std::fabs(b.max_per_step - 1.454) <= 1e-12);
    b = cost_bounds(kLatency, 1);
    CHECK(b.min_per_step == b.max_per_step);
    CHECK(b.max_per_step == 1.373 + 0.081);
    b = cost_bounds({2.0, 0.0, 0.0}, 8);
    CHECK(b.min_per_step == 0.25);
    CHECK(b.max_per_step == 2.0);
    CHECK_THROWS_AS(cost_bounds(kLatency, 0), ContractViolation);
    CHECK_THROWS_AS(observed_per_step_cost(EpisodeTrace{}), ContractViolation);
}

TEST_CASE("per-step cost of a trace with one early replan") {
    // Reference (0.25, 0, 1): disagrees only with the non-final actions.
    const auto cfg = line_config();
    auto planner = make_planner("nominal-rollout", 4, kDefaultContextWidth, cfg);
    const auto ref = ReferenceSource::trained(constant_verifier({1.0, 0.0, 1.0}));
    const auto tr = run_episode(cfg, *planner, ref, ControllerMode::SpeculativeVerification, {0.4, 32},
                                kLatency, 0);
    // Chunk 0: a0, replan at t=1 (score 0.5). Chunk 1 (3 actions): a0, t=1
    // replan again, ... until the final release action agrees.
    int heavy = 0, verify = 0;
    for (const auto& s : tr.steps) {
        heavy += s.heavy_calls;
        verify += s.verifier_calls;
    }
    verify += tr.trailing_verifier_calls;
    CHECK(tr.replans >= 1);
    CHECK(observed_per_step_cost(tr) ==
          doctest::Approx((heavy * 1.373 + verify * 0.081) / tr.executed_steps).epsilon(1e-15));
}

TEST_CASE("trace invariants over disturbed oracle episodes") {
    const auto cfg = moderate();
    for (int k : {1, 4, 16}) {
        auto planner = make_planner("nominal-rollout", k, kDefaultContextWidth, cfg);
        for (std::uint64_t seed = 0; seed < 40; ++seed) {
            const auto tr = run_episode(cfg, *planner, ReferenceSource::oracle(),
                                        ControllerMode::SpeculativeVerification, {0.2, 32}, kLatency, seed);
            CAPTURE(k);
            CAPTURE(seed);
            CHECK(tr.simulated_inference_time == tr.heavy_calls * 1.373 + tr.verifier_calls * 0.081);
            CHECK(tr.replans <= tr.heavy_calls - 1);
            // First action of each chunk carries no decision; chunks verify at most K-1 actions.
            std::vector<int> per_chunk;
            for (const auto& s : tr.steps) {
                if (s.index_in_chunk == 0) {
                    CHECK_FALSE(s.decision.has_value());
                    CHECK(s.heavy_calls == 1);
                    per_chunk.push_back(0);
                } else {
                    CHECK(s.heavy_calls == 0);
                    CHECK(s.decision == DecisionKind::Accept);
                    CHECK(*s.score <= tr.tau);
                }
                per_chunk.back() += s.index_in_chunk == 0 ? 0 : s.verifier_calls;
            }
            for (int v : per_chunk) CHECK(v <= k - 1);
            for (const auto& d : tr.decisions)
                CHECK((d.kind == DecisionKind::Accept) == (d.score.value() <= tr.tau));
            if (!tr.guard_hit) {
                // Each chunk of L executed steps costs at least T_heavy + (L-1) T_verify.
                const double c = observed_per_step_cost(tr);
                CHECK(c >= (1.373 + (k - 1) * 0.081) / k - 1e-12);
                CHECK(c <= 1.373 + 0.081 + 1e-12);
            }
            const auto again = run_episode(cfg, *planner, ReferenceSource::oracle(),
                                           ControllerMode::SpeculativeVerification, {0.2, 32}, kLatency, seed);
            CHECK(again.steps == tr.steps);
        }
    }
}

TEST_CASE("oracle verifier never replans without disturbances") {
    EpisodeConfig cfg;
    for (int k : {2, 4, 16}) {
        auto planner = make_planner("nominal-rollout", k, kDefaultContextWidth, cfg);
        for (std::uint64_t seed = 0; seed < 50; ++seed) {
            const auto tr = run_episode(cfg, *planner, ReferenceSource::oracle(),
                                        ControllerMode::SpeculativeVerification, {0.01, 32}, kLatency, seed);
            CHECK(tr.replans == 0);
            CHECK(tr.success);
        }
    }
}
