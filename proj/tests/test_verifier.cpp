#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "specctl/errors.hpp"
#include "specctl/verifier.hpp"
#include "support.hpp"

using namespace specctl;

namespace {

// Approach needs 8 steps, so a horizon-8 episode never finishes early.
EpisodeConfig long_approach(int horizon) {
    EpisodeConfig cfg;
    cfg.horizon = horizon;
    EnvState s;
    s.agent_pos = {-1.5, 0.0};
    s.object_pos = {0.5, 0.0};
    s.goal_pos = {1.0, 1.0};
    s.decoy_pos = {-1.0, -1.0};
    cfg.initial_state = s;
    return cfg;
}

std::vector<VerifierSample> small_dataset(int episodes, std::uint64_t seed) {
    EpisodeConfig cfg;
    auto planner = make_planner("nominal-rollout", 8, kDefaultContextWidth, cfg);
    return build_training_set(cfg, *planner, episodes, seed);
}

}  // namespace

TEST_CASE("frozen encoder") {
    FrozenEncoder enc(kObservationWidth, 16, 11);
    CHECK(enc.observation_width() == kObservationWidth);
    CHECK(enc.visual_width() == 16);
    Observation obs{std::vector<double>(kObservationWidth, 0.3), 0};
    const auto a = encode_observation(obs, enc);
    const auto b = encode_observation(obs, enc);
    CHECK(a.vector == b.vector);

    Observation zero{std::vector<double>(kObservationWidth, 0.0), 0};
    const auto z = encode_observation(zero, enc);
    for (std::size_t i = 0; i < 16; ++i) CHECK(z.vector[i] == std::tanh(enc.layer().b[i]));

    CHECK(FrozenEncoder(kObservationWidth, 16, 11) == enc);
    CHECK_FALSE(FrozenEncoder(kObservationWidth, 16, 12) == enc);
}

TEST_CASE("fuse") {
    // Identity fusion with zero bias passes the concatenation through tanh.
    VerifierParams p(2, 3, 5, 3);
    for (std::size_t i = 0; i < 5; ++i) p.fusion.w[i * 5 + i] = 1.0;
    const VisualFeature v{{0.5, -1.0}};
    const PlanningContext c{{2.0, 0.0, -0.25}, 0};
    const auto f = fuse(v, c, p);
    const std::vector<double> concat{0.5, -1.0, 2.0, 0.0, -0.25};
    for (std::size_t i = 0; i < 5; ++i) CHECK(f.vector[i] == std::tanh(concat[i]));

    const auto p2 = init_verifier_params(2, 3, 4, 3, 5);
    VerifierParams zb = p2;
    std::fill(zb.fusion.b.begin(), zb.fusion.b.end(), 0.0);
    const auto zf = fuse(VisualFeature{{0.0, 0.0}}, PlanningContext{{0.0, 0.0, 0.0}, 0}, zb);
    for (double x : zf.vector) CHECK(x == 0.0);

    CHECK(fuse(v, c, p2).vector == fuse(v, c, p2).vector);
    CHECK_THROWS_AS(fuse(VisualFeature{{1.0}}, c, p), ContractViolation);
    CHECK_THROWS_AS(fuse(v, PlanningContext{{1.0}, 0}, p), ContractViolation);
}

TEST_CASE("predict_reference") {
    const auto space = make_action_space(WorldConfig{});
    VerifierParams p(2, 2, 4, 3);
    const auto a = predict_reference(FusedFeature{{0.1, 0.2, 0.3, 0.4}}, p, space);
    CHECK(a[0] == 0.0);
    CHECK(a[1] == 0.0);
    CHECK(a[2] == 0.0);
    p.head.b = {1.0, -1.0, 0.5};
    const auto c = predict_reference(FusedFeature{{0.1, 0.2, 0.3, 0.4}}, p, space);
    CHECK(c[0] == 0.25);
    CHECK(c[1] == -0.25);
    CHECK(c[2] == 0.5);
    CHECK_THROWS_AS(predict_reference(FusedFeature{{0.1}}, p, space), ContractViolation);
}

TEST_CASE("training set indexing") {
    const auto cfg = long_approach(8);
    auto planner = make_planner("nominal-rollout", 4, kDefaultContextWidth, cfg);
    const auto samples = build_training_set(cfg, *planner, 1, 0);
    REQUIRE(samples.size() == 6);

    // Without disturbances the target is the expert action along the rollout.
    Environment env(cfg, 0);
    std::vector<Action> expert;
    std::vector<Observation> observed;
    for (int t = 0; t < 8; ++t) {
        expert.push_back(expert_action(env.state(), cfg));
        observed.push_back(env.observe());
        env.step(expert.back().values());
    }
    const int steps[] = {1, 2, 3, 5, 6, 7};
    for (int i = 0; i < 6; ++i) {
        CHECK(samples[i].target == expert[steps[i]]);
        CHECK(samples[i].observation == observed[steps[i]]);
        CHECK(samples[i].context.planned_at == (i < 3 ? 0 : 4));
    }

    const auto again = build_training_set(cfg, *planner, 1, 0);
    for (std::size_t i = 0; i < samples.size(); ++i) CHECK(again[i].observation == samples[i].observation);

    CollectionOptions first_only{false};
    CHECK(build_training_set(cfg, *planner, 1, 0, first_only).size() == 3);
    CHECK_THROWS_AS(build_training_set(cfg, *planner, 0, 0), ConfigError);
}

TEST_CASE("disturbance-free targets equal the chunk actions") {
    EpisodeConfig cfg;
    auto planner = make_planner("nominal-rollout", 8, kDefaultContextWidth, cfg);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Environment env(cfg, seed);
        const TaskDescriptor task{.goal_index = ordered_sites(env.state()).goal_index};
        const auto plan = planner->plan(env.observe(), task, env.proprio());
        const auto samples = build_training_set(cfg, *planner, 1, seed);
        for (std::size_t t = 1; t < plan.chunk.size() && t - 1 < samples.size(); ++t)
            CHECK(samples[t - 1].target == plan.chunk.actions[t]);
    }
}

TEST_CASE("training basics") {
    const auto samples = small_dataset(10, 100);
    REQUIRE(!samples.empty());
    FrozenEncoder enc(kObservationWidth, 16, 3);
    const FrozenEncoder before = enc;

    TrainConfig tc;
    tc.epochs = 5;
    tc.fused_width = 16;
    const auto r1 = train_verifier(samples, enc, tc);
    const auto r2 = train_verifier(samples, enc, tc);
    CHECK(r1.epoch_losses.size() == 5);
    CHECK(r1.epoch_losses == r2.epoch_losses);
    CHECK(r1.params == r2.params);
    CHECK(enc == before);

    tc.learning_rate = 0.0;
    const auto frozen = train_verifier(samples, enc, tc);
    for (double l : frozen.epoch_losses) CHECK(l == frozen.initial_loss);

    CHECK_THROWS_AS(train_verifier({}, enc, tc), ConfigError);
    tc.batch_size = 0;
    CHECK_THROWS_AS(train_verifier(samples, enc, tc), ConfigError);
}

TEST_CASE("analytic gradient matches finite differences at non-tie points") {
    std::mt19937_64 rng(2024);
    for (int i = 0; i < 10; ++i) {
        const auto pt = testing::random_non_tie_point(rng, 6, 4, 8, 5, 1e-3);
        const auto g = l1_objective_gradient(pt.params, pt.batch);
        CHECK(testing::relative_error(g, testing::numeric_gradient(pt, 1e-6)) < 1e-4);
    }
}

TEST_CASE("tie residuals contribute a zero subgradient") {
    VerifierParams p(1, 1, 2, 3);
    TrainingBatch b;
    b.inputs = {{0.5, -0.5}};
    b.targets = {{0.0, 0.0, 0.0}};  // zero weights -> all outputs exactly 0
    const auto g = l1_objective_gradient(p, b);
    for (double x : g) CHECK(x == 0.0);
    CHECK(l1_objective(p, b) == 0.0);
}

TEST_CASE("ablation zeroes exactly one input") {
    const auto space = make_action_space(WorldConfig{});
    Verifier v{FrozenEncoder(kObservationWidth, 8, 1), init_verifier_params(8, 16, 8, 3, 2), InputAblation::None};
    Environment env(EpisodeConfig{}, 4);
    const PlanningContext ctx{std::vector<double>(16, 0.7), 0};
    const PlanningContext zero_ctx{std::vector<double>(16, 0.0), 0};
    CHECK(v.reference(env.observe(), ctx, space, InputAblation::NoContext) ==
          v.reference(env.observe(), zero_ctx, space, InputAblation::None));

    VisualFeature zero_vis{std::vector<double>(8, 0.0)};
    const auto expected = predict_reference(fuse(zero_vis, ctx, v.params), v.params, space);
    CHECK(v.reference(env.observe(), ctx, space, InputAblation::NoObservation) == expected);

    CHECK(parse_ablation("no-context") == InputAblation::NoContext);
    CHECK(to_string(InputAblation::NoObservation) == "no-observation");
    CHECK_THROWS_AS(parse_ablation("both"), ConfigError);
}

TEST_CASE("verifier save and load round trip") {
    const auto samples = small_dataset(3, 9);
    FrozenEncoder enc(kObservationWidth, 8, 3);
    TrainConfig tc;
    tc.epochs = 2;
    tc.fused_width = 8;
    tc.ablation = InputAblation::NoContext;
    Verifier v{enc, train_verifier(samples, enc, tc).params, InputAblation::NoContext};
    std::stringstream ss;
    save_verifier(v, ss);
    const Verifier back = load_verifier(ss);
    CHECK(back == v);

    std::stringstream bad("specctl-verifier 2\n");
    CHECK_THROWS_AS(load_verifier(bad), ConfigError);
    std::stringstream empty;
    CHECK_THROWS_AS(load_verifier(empty), ConfigError);
    std::stringstream truncated(ss.str().substr(0, ss.str().size() / 2));
    CHECK_THROWS_AS(load_verifier(truncated), ConfigError);
}
