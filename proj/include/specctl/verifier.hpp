#pragma once
// Lightweight verifier: a frozen observation encoder, a fusion layer over
// [visual feature | planning context], and an affine head that predicts the
// reference action. Only the fusion layer and head are trained, with a mean
// L1 objective and plain mini-batch gradient descent.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

#include "specctl/core.hpp"
#include "specctl/env.hpp"
#include "specctl/planner.hpp"

namespace specctl {

// Row-major affine map: y = w x + b, w is out x in.
struct Dense {
    std::size_t in = 0;
    std::size_t out = 0;
    std::vector<double> w;
    std::vector<double> b;

    Dense() = default;
    Dense(std::size_t in_width, std::size_t out_width);

    void apply(std::span<const double> x, std::span<double> y) const;
    bool operator==(const Dense&) const = default;
};

struct VisualFeature {
    std::vector<double> vector;
};

struct FusedFeature {
    std::vector<double> vector;
};

// tanh(W obs + b) with weights drawn once from a seed and never trained.
class FrozenEncoder {
public:
    FrozenEncoder() = default;
    FrozenEncoder(std::size_t observation_width, std::size_t visual_width, std::uint64_t seed);
    explicit FrozenEncoder(Dense layer) : layer_(std::move(layer)) {}

    const Dense& layer() const { return layer_; }
    std::size_t observation_width() const { return layer_.in; }
    std::size_t visual_width() const { return layer_.out; }

    bool operator==(const FrozenEncoder&) const = default;

private:
    Dense layer_;
};

VisualFeature encode_observation(const Observation& obs, const FrozenEncoder& encoder);

enum class InputAblation : std::uint8_t { None, NoContext, NoObservation };
std::string_view to_string(InputAblation a);
InputAblation parse_ablation(std::string_view s);

struct VerifierParams {
    std::size_t visual_width = 0;
    std::size_t context_width = 0;
    Dense fusion;  // (visual + context) -> fused
    Dense head;    // fused -> action

    VerifierParams() = default;
    VerifierParams(std::size_t visual_width, std::size_t context_width, std::size_t fused_width,
                   std::size_t action_dim);

    std::size_t fused_width() const { return fusion.out; }
    std::size_t action_dim() const { return head.out; }

    // Flat view over every trainable scalar: fusion.w, fusion.b, head.w, head.b.
    std::size_t parameter_count() const;
    double& parameter(std::size_t i);
    double parameter(std::size_t i) const;

    bool operator==(const VerifierParams&) const = default;
};

// Seeded initialization; head weights start small so early predictions sit
// near the origin of the action space.
VerifierParams init_verifier_params(std::size_t visual_width, std::size_t context_width,
                                    std::size_t fused_width, std::size_t action_dim, std::uint64_t seed);

// tanh(W [visual | context] + b). Throws ContractViolation on width mismatch.
FusedFeature fuse(const VisualFeature& visual, const PlanningContext& context, const VerifierParams& params);

// Head output clamped into the action space.
Action predict_reference(const FusedFeature& fused, const VerifierParams& params, const ActionSpace& space);

// Encoder + trained layers, as saved to and loaded from disk.
struct Verifier {
    FrozenEncoder encoder;
    VerifierParams params;
    InputAblation trained_ablation = InputAblation::None;

    // The full encode -> fuse -> predict path. `ablation` zeroes the context
    // (NoContext) or the visual feature (NoObservation) before fusion.
    Action reference(const Observation& obs, const PlanningContext& context, const ActionSpace& space,
                     InputAblation ablation) const;

    bool operator==(const Verifier&) const = default;
};

struct VerifierSample {
    Observation observation;
    PlanningContext context;
    Action target;
};

struct CollectionOptions {
    // When false only the first chunk of every episode contributes samples.
    bool include_replanned_boundaries = true;
};

// Rolls `episodes` open-loop episodes (seeds seed, seed+1, ...). At every
// planning boundary the chunk's context is recorded; for each following step
// t = 1..K-1 of that chunk the sample is (observation at t, context, expert
// action at the true state).
std::vector<VerifierSample> build_training_set(const EpisodeConfig& env, const PlannerInterface& planner,
                                               int episodes, std::uint64_t seed,
                                               CollectionOptions options = {});

struct TrainConfig {
    int epochs = 300;
    double learning_rate = 0.01;
    std::size_t batch_size = 32;
    std::uint64_t seed = 7;
    std::size_t fused_width = 64;
    InputAblation ablation = InputAblation::None;
};

struct TrainReport {
    double initial_loss = 0.0;        // mean L1 before the first update
    std::vector<double> epoch_losses; // mean L1 over all samples after each epoch
    VerifierParams params;
};

// Throws ConfigError on an empty sample list or inconsistent widths.
TrainReport train_verifier(std::span<const VerifierSample> samples, const FrozenEncoder& encoder,
                           const TrainConfig& config);

// Objective pieces, exposed for gradient checking. Each input row is the
// already-ablated [visual | context] vector.
struct TrainingBatch {
    std::vector<std::vector<double>> inputs;
    std::vector<std::vector<double>> targets;
};
TrainingBatch make_training_batch(std::span<const VerifierSample> samples, const FrozenEncoder& encoder,
                                  InputAblation ablation);

// Mean over rows of sum_d |head(fusion(x))_d - target_d|, on the unclamped head output.
double l1_objective(const VerifierParams& params, const TrainingBatch& batch);
// Gradient in parameter() order; a zero residual contributes a zero subgradient.
std::vector<double> l1_objective_gradient(const VerifierParams& params, const TrainingBatch& batch);

// Text format, version 1:
//   specctl-verifier 1
//   observation_width <n> visual_width <n> context_width <n> fused_width <n> action_dim <n>
//   head affine
//   ablation none|no-context|no-observation
//   then one line per tensor: "<name> <count> v0 v1 ..." for
//   encoder.w encoder.b fusion.w fusion.b head.w head.b
// Doubles are written in shortest round-trip form.
void save_verifier(const Verifier& v, std::ostream& out);
Verifier load_verifier(std::istream& in);
void save_verifier(const Verifier& v, const std::filesystem::path& path);
Verifier load_verifier(const std::filesystem::path& path);

}  // namespace specctl
