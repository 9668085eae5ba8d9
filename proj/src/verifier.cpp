#include "specctl/verifier.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <string>

#include "specctl/errors.hpp"
#include "specctl/kernels.hpp"

namespace specctl {
namespace {

void fill_uniform(std::vector<double>& v, double scale, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (double& x : v) x = scale * u(rng);
}

// Forward pass on one row; `fused` receives tanh activations, `out` the
// unclamped head output.
void forward(const VerifierParams& p, std::span<const double> x, std::span<double> fused,
             std::span<double> out) {
    p.fusion.apply(x, fused);
    for (double& z : fused) z = std::tanh(z);
    p.head.apply(fused, out);
}

std::vector<double> concat_inputs(std::span<const double> visual, std::span<const double> context,
                                  InputAblation ablation) {
    std::vector<double> x(visual.size() + context.size(), 0.0);
    if (ablation != InputAblation::NoObservation) std::copy(visual.begin(), visual.end(), x.begin());
    if (ablation != InputAblation::NoContext)
        std::copy(context.begin(), context.end(), x.begin() + static_cast<std::ptrdiff_t>(visual.size()));
    return x;
}

double sign_or_zero(double r) { return r > 0.0 ? 1.0 : (r < 0.0 ? -1.0 : 0.0); }

// Accumulates the subgradient of one row's L1 loss, scaled by `weight`, into
// `grad` laid out in parameter() order.
double accumulate_row(const VerifierParams& p, std::span<const double> x, std::span<const double> target,
                      double weight, std::span<double> grad, std::vector<double>& fused,
                      std::vector<double>& out, std::vector<double>& dfused) {
    forward(p, x, fused, out);
    const std::size_t in = p.fusion.in;
    const std::size_t hidden = p.fusion.out;
    const std::size_t act = p.head.out;

    double* g_fw = grad.data();
    double* g_fb = g_fw + hidden * in;
    double* g_hw = g_fb + hidden;
    double* g_hb = g_hw + act * hidden;

    double loss = 0.0;
    std::fill(dfused.begin(), dfused.end(), 0.0);
    for (std::size_t d = 0; d < act; ++d) {
        const double r = out[d] - target[d];
        loss += std::fabs(r);
        const double s = weight * sign_or_zero(r);
        if (s == 0.0) continue;
        kernels::axpy(s, fused, {g_hw + d * hidden, hidden});
        g_hb[d] += s;
        kernels::axpy(s, {p.head.w.data() + d * hidden, hidden}, dfused);
    }
    for (std::size_t h = 0; h < hidden; ++h) {
        const double dpre = dfused[h] * (1.0 - fused[h] * fused[h]);
        if (dpre == 0.0) continue;
        kernels::axpy(dpre, x, {g_fw + h * in, in});
        g_fb[h] += dpre;
    }
    return loss;
}

std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

void write_tensor(std::ostream& out, std::string_view name, const std::vector<double>& v) {
    out << name << ' ' << v.size();
    for (double x : v) out << ' ' << format_double(x);
    out << '\n';
}

std::vector<double> read_tensor(std::istream& in, std::string_view name, std::size_t expected) {
    std::string tag;
    std::size_t n = 0;
    if (!(in >> tag >> n) || tag != name)
        throw ConfigError("verifier file: expected tensor '" + std::string(name) + "'");
    if (n != expected)
        throw ConfigError("verifier file: tensor '" + std::string(name) + "' has " + std::to_string(n) +
                          " values, expected " + std::to_string(expected));
    std::vector<double> v(n);
    for (double& x : v) {
        std::string tok;
        if (!(in >> tok)) throw ConfigError("verifier file: truncated tensor '" + std::string(name) + "'");
        auto res = std::from_chars(tok.data(), tok.data() + tok.size(), x);
        if (res.ec != std::errc{} || res.ptr != tok.data() + tok.size() || !std::isfinite(x))
            throw ConfigError("verifier file: bad value '" + tok + "' in '" + std::string(name) + "'");
    }
    return v;
}

std::size_t read_field(std::istream& in, std::string_view name) {
    std::string tag;
    long long v = 0;
    if (!(in >> tag >> v) || tag != name || v <= 0)
        throw ConfigError("verifier file: expected positive field '" + std::string(name) + "'");
    return static_cast<std::size_t>(v);
}

}  // namespace

Dense::Dense(std::size_t in_width, std::size_t out_width)
    : in(in_width), out(out_width), w(in_width * out_width, 0.0), b(out_width, 0.0) {}

void Dense::apply(std::span<const double> x, std::span<double> y) const {
    if (x.size() != in || y.size() != out) throw ContractViolation("Dense::apply: width mismatch");
    kernels::active().gemv(w.data(), x.data(), b.data(), y.data(), out, in);
}

FrozenEncoder::FrozenEncoder(std::size_t observation_width, std::size_t visual_width, std::uint64_t seed)
    : layer_(observation_width, visual_width) {
    std::mt19937_64 rng(split_seed(seed, 0xe7c0de));
    fill_uniform(layer_.w, 1.5 / std::sqrt(static_cast<double>(observation_width)), rng);
    fill_uniform(layer_.b, 0.5, rng);
}

VisualFeature encode_observation(const Observation& obs, const FrozenEncoder& encoder) {
    VisualFeature f{std::vector<double>(encoder.visual_width())};
    encoder.layer().apply(obs.features, f.vector);
    for (double& v : f.vector) v = std::tanh(v);
    return f;
}

std::string_view to_string(InputAblation a) {
    switch (a) {
        case InputAblation::None: return "none";
        case InputAblation::NoContext: return "no-context";
        case InputAblation::NoObservation: return "no-observation";
    }
    return "none";
}

InputAblation parse_ablation(std::string_view s) {
    if (s == "none") return InputAblation::None;
    if (s == "no-context") return InputAblation::NoContext;
    if (s == "no-observation") return InputAblation::NoObservation;
    throw ConfigError("unknown ablation '" + std::string(s) + "'");
}

VerifierParams::VerifierParams(std::size_t visual, std::size_t context, std::size_t fused, std::size_t action_dim)
    : visual_width(visual), context_width(context), fusion(visual + context, fused), head(fused, action_dim) {}

std::size_t VerifierParams::parameter_count() const {
    return fusion.w.size() + fusion.b.size() + head.w.size() + head.b.size();
}

double& VerifierParams::parameter(std::size_t i) {
    if (i < fusion.w.size()) return fusion.w[i];
    i -= fusion.w.size();
    if (i < fusion.b.size()) return fusion.b[i];
    i -= fusion.b.size();
    if (i < head.w.size()) return head.w[i];
    i -= head.w.size();
    if (i < head.b.size()) return head.b[i];
    throw ContractViolation("VerifierParams::parameter: index out of range");
}

double VerifierParams::parameter(std::size_t i) const { return const_cast<VerifierParams&>(*this).parameter(i); }

VerifierParams init_verifier_params(std::size_t visual_width, std::size_t context_width, std::size_t fused_width,
                                    std::size_t action_dim, std::uint64_t seed) {
    VerifierParams p(visual_width, context_width, fused_width, action_dim);
    std::mt19937_64 rng(split_seed(seed, 0xf05e));
    fill_uniform(p.fusion.w, std::sqrt(3.0 / static_cast<double>(p.fusion.in)), rng);
    fill_uniform(p.head.w, 0.1 * std::sqrt(3.0 / static_cast<double>(fused_width)), rng);
    return p;
}

FusedFeature fuse(const VisualFeature& visual, const PlanningContext& context, const VerifierParams& params) {
    if (visual.vector.size() != params.visual_width || context.vector.size() != params.context_width)
        throw ContractViolation("fuse: expected widths " + std::to_string(params.visual_width) + "+" +
                                std::to_string(params.context_width) + ", got " +
                                std::to_string(visual.vector.size()) + "+" + std::to_string(context.vector.size()));
    const auto x = concat_inputs(visual.vector, context.vector, InputAblation::None);
    FusedFeature z{std::vector<double>(params.fused_width())};
    params.fusion.apply(x, z.vector);
    for (double& v : z.vector) v = std::tanh(v);
    return z;
}

Action predict_reference(const FusedFeature& fused, const VerifierParams& params, const ActionSpace& space) {
    if (fused.vector.size() != params.fused_width() || space.dim() != params.action_dim())
        throw ContractViolation("predict_reference: width mismatch");
    std::vector<double> y(params.action_dim());
    params.head.apply(fused.vector, y);
    return Action(space, y);
}

Action Verifier::reference(const Observation& obs, const PlanningContext& context, const ActionSpace& space,
                           InputAblation ablation) const {
    VisualFeature visual = encode_observation(obs, encoder);
    PlanningContext ctx = context;
    if (ablation == InputAblation::NoObservation) std::fill(visual.vector.begin(), visual.vector.end(), 0.0);
    if (ablation == InputAblation::NoContext) std::fill(ctx.vector.begin(), ctx.vector.end(), 0.0);
    return predict_reference(fuse(visual, ctx, params), params, space);
}

std::vector<VerifierSample> build_training_set(const EpisodeConfig& env_cfg, const PlannerInterface& planner,
                                               int episodes, std::uint64_t seed, CollectionOptions options) {
    if (episodes < 1) throw ConfigError("build_training_set: episodes must be >= 1");
    std::vector<VerifierSample> samples;
    for (int e = 0; e < episodes; ++e) {
        Environment env(env_cfg, seed + static_cast<std::uint64_t>(e));
        const TaskDescriptor task{.goal_index = ordered_sites(env.state()).goal_index};
        bool first_chunk = true;
        while (!env.success() && env.state().step < env_cfg.horizon) {
            const auto plan = planner.plan(env.observe(), task, env.proprio());
            const bool record = first_chunk || options.include_replanned_boundaries;
            for (std::size_t t = 0; t < plan.chunk.size(); ++t) {
                if (t >= 1 && record)
                    samples.push_back({env.observe(), plan.context, expert_action(env.state(), env.config())});
                env.step(plan.chunk.actions[t].values());
                if (env.success()) break;
            }
            first_chunk = false;
        }
    }
    return samples;
}

TrainingBatch make_training_batch(std::span<const VerifierSample> samples, const FrozenEncoder& encoder,
                                  InputAblation ablation) {
    TrainingBatch batch;
    batch.inputs.reserve(samples.size());
    batch.targets.reserve(samples.size());
    for (const auto& s : samples) {
        const auto visual = encode_observation(s.observation, encoder);
        batch.inputs.push_back(concat_inputs(visual.vector, s.context.vector, ablation));
        batch.targets.emplace_back(s.target.values().begin(), s.target.values().end());
    }
    return batch;
}

double l1_objective(const VerifierParams& params, const TrainingBatch& batch) {
    if (batch.inputs.empty()) return 0.0;
    std::vector<double> fused(params.fused_width()), out(params.action_dim());
    double total = 0.0;
    for (std::size_t i = 0; i < batch.inputs.size(); ++i) {
        forward(params, batch.inputs[i], fused, out);
        total += kernels::abs_diff_sum(out, batch.targets[i]);
    }
    return total / static_cast<double>(batch.inputs.size());
}

std::vector<double> l1_objective_gradient(const VerifierParams& params, const TrainingBatch& batch) {
    std::vector<double> grad(params.parameter_count(), 0.0);
    if (batch.inputs.empty()) return grad;
    std::vector<double> fused(params.fused_width()), out(params.action_dim()), dfused(params.fused_width());
    const double w = 1.0 / static_cast<double>(batch.inputs.size());
    for (std::size_t i = 0; i < batch.inputs.size(); ++i)
        accumulate_row(params, batch.inputs[i], batch.targets[i], w, grad, fused, out, dfused);
    return grad;
}

TrainReport train_verifier(std::span<const VerifierSample> samples, const FrozenEncoder& encoder,
                           const TrainConfig& config) {
    if (samples.empty()) throw ConfigError("train_verifier: empty sample list");
    if (config.epochs < 0 || config.batch_size == 0 || config.fused_width == 0 || !(config.learning_rate >= 0.0))
        throw ConfigError("train_verifier: invalid hyperparameters");
    const std::size_t context_width = samples.front().context.vector.size();
    const std::size_t action_dim = samples.front().target.dim();
    for (const auto& s : samples) {
        if (s.context.vector.size() != context_width || s.target.dim() != action_dim ||
            s.observation.features.size() != encoder.observation_width())
            throw ConfigError("train_verifier: samples have inconsistent widths");
    }

    const TrainingBatch data = make_training_batch(samples, encoder, config.ablation);
    TrainReport report;
    report.params = init_verifier_params(encoder.visual_width(), context_width, config.fused_width, action_dim,
                                         config.seed);
    VerifierParams& p = report.params;
    report.initial_loss = l1_objective(p, data);

    std::mt19937_64 rng(split_seed(config.seed, 0x5b0ff1e));
    std::vector<std::size_t> order(data.inputs.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<double> grad(p.parameter_count());
    std::vector<double> fused(p.fused_width()), out(action_dim), dfused(p.fused_width());

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t end = std::min(order.size(), start + config.batch_size);
            std::fill(grad.begin(), grad.end(), 0.0);
            const double w = 1.0 / static_cast<double>(end - start);
            for (std::size_t k = start; k < end; ++k)
                accumulate_row(p, data.inputs[order[k]], data.targets[order[k]], w, grad, fused, out, dfused);
            if (config.learning_rate == 0.0) continue;
            std::size_t offset = 0;
            for (auto* tensor : {&p.fusion.w, &p.fusion.b, &p.head.w, &p.head.b}) {
                kernels::axpy(-config.learning_rate, {grad.data() + offset, tensor->size()}, *tensor);
                offset += tensor->size();
            }
        }
        report.epoch_losses.push_back(l1_objective(p, data));
    }
    return report;
}

void save_verifier(const Verifier& v, std::ostream& out) {
    const auto& p = v.params;
    out << "specctl-verifier 1\n";
    out << "observation_width " << v.encoder.observation_width() << " visual_width " << p.visual_width
        << " context_width " << p.context_width << " fused_width " << p.fused_width() << " action_dim "
        << p.action_dim() << '\n';
    out << "head affine\n";
    out << "ablation " << to_string(v.trained_ablation) << '\n';
    write_tensor(out, "encoder.w", v.encoder.layer().w);
    write_tensor(out, "encoder.b", v.encoder.layer().b);
    write_tensor(out, "fusion.w", p.fusion.w);
    write_tensor(out, "fusion.b", p.fusion.b);
    write_tensor(out, "head.w", p.head.w);
    write_tensor(out, "head.b", p.head.b);
}

Verifier load_verifier(std::istream& in) {
    std::string magic;
    int version = 0;
    if (!(in >> magic >> version) || magic != "specctl-verifier")
        throw ConfigError("verifier file: missing 'specctl-verifier' header");
    if (version != 1) throw ConfigError("verifier file: unsupported version " + std::to_string(version));
    const std::size_t obs_w = read_field(in, "observation_width");
    const std::size_t vis_w = read_field(in, "visual_width");
    const std::size_t ctx_w = read_field(in, "context_width");
    const std::size_t fused_w = read_field(in, "fused_width");
    const std::size_t act = read_field(in, "action_dim");
    std::string tag, value;
    if (!(in >> tag >> value) || tag != "head" || value != "affine")
        throw ConfigError("verifier file: expected 'head affine'");
    if (!(in >> tag >> value) || tag != "ablation") throw ConfigError("verifier file: expected 'ablation'");

    Verifier v;
    v.trained_ablation = parse_ablation(value);
    Dense enc(obs_w, vis_w);
    enc.w = read_tensor(in, "encoder.w", obs_w * vis_w);
    enc.b = read_tensor(in, "encoder.b", vis_w);
    v.encoder = FrozenEncoder(std::move(enc));
    v.params = VerifierParams(vis_w, ctx_w, fused_w, act);
    v.params.fusion.w = read_tensor(in, "fusion.w", (vis_w + ctx_w) * fused_w);
    v.params.fusion.b = read_tensor(in, "fusion.b", fused_w);
    v.params.head.w = read_tensor(in, "head.w", fused_w * act);
    v.params.head.b = read_tensor(in, "head.b", act);
    return v;
}

void save_verifier(const Verifier& v, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write verifier file " + path.string());
    save_verifier(v, out);
}

Verifier load_verifier(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open verifier file " + path.string());
    return load_verifier(in);
}

}  // namespace specctl
