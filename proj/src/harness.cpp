#include "specctl/harness.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "specctl/errors.hpp"

namespace specctl {
namespace {

using nlohmann::json;
using ojson = nlohmann::ordered_json;

std::string fmt(double v) {
    if (std::isnan(v)) return "nan";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

// Reads optional fields out of one JSON object, tracking the dotted path for
// error messages and rejecting keys nobody asked for.
class Fields {
public:
    Fields(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
        if (!obj_.is_object()) throw ConfigError(where("") + "expected an object");
    }

    template <class T>
    void opt(const char* key, T& out) {
        seen_.insert(key);
        if (!obj_.contains(key)) return;
        try {
            out = obj_.at(key).get<T>();
        } catch (const json::exception&) {
            throw ConfigError(where(key) + "has the wrong type");
        }
    }

    Fields child(const char* key) {
        seen_.insert(key);
        static const json empty = json::object();
        return Fields(obj_.contains(key) ? obj_.at(key) : empty, join(key));
    }

    bool has(const char* key) const { return obj_.contains(key); }
    const json& raw(const char* key) {
        seen_.insert(key);
        return obj_.at(key);
    }
    std::string join(const char* key) const { return path_.empty() ? key : path_ + "." + key; }
    std::string where(const char* key) const {
        const std::string p = *key ? join(key) : path_;
        return (p.empty() ? std::string("config") : p) + ": ";
    }

    void finish() const {
        for (auto it = obj_.begin(); it != obj_.end(); ++it)
            if (!seen_.contains(it.key())) throw ConfigError(where(it.key().c_str()) + "unknown field");
    }

private:
    const json& obj_;
    std::string path_;
    std::set<std::string> seen_;
};

void require(bool ok, const Fields& f, const char* key, const std::string& msg) {
    if (!ok) throw ConfigError(f.where(key) + msg);
}

DisturbanceConfig parse_disturbance(Fields f, DisturbanceConfig d) {
    f.opt("actuation_noise_sigma", d.actuation_noise_sigma);
    f.opt("object_drift_prob", d.object_drift_prob);
    f.opt("object_drift_magnitude", d.object_drift_magnitude);
    f.opt("grasp_failure_prob", d.grasp_failure_prob);
    f.opt("seed", d.seed);
    f.finish();
    try {
        d.validate();
    } catch (const ContractViolation& e) {
        throw ConfigError(f.where("") + e.what());
    }
    return d;
}

ojson disturbance_json(const DisturbanceConfig& d) {
    ojson j;
    j["actuation_noise_sigma"] = d.actuation_noise_sigma;
    j["object_drift_prob"] = d.object_drift_prob;
    j["object_drift_magnitude"] = d.object_drift_magnitude;
    j["grasp_failure_prob"] = d.grasp_failure_prob;
    j["seed"] = d.seed;
    return j;
}

int training_chunk_size(const ExperimentConfig& cfg, int cell_k) {
    if (cell_k >= 2) return cell_k;
    return std::max(2, cfg.chunk_size);
}

template <class F>
double mean_of(const std::vector<EpisodeTrace>& traces, F f) {
    double total = 0.0;
    for (const auto& t : traces) total += f(t);
    return total / static_cast<double>(traces.size());
}

std::string reference_file_name(const std::string& disturbance) { return "ref__" + disturbance + ".jsonl"; }

std::string cell_file_name(std::size_t index, const std::string& label) {
    char prefix[32];
    std::snprintf(prefix, sizeof prefix, "cell_%03zu__", index);
    return prefix + label + ".jsonl";
}

}  // namespace

std::map<std::string, DisturbanceConfig> default_disturbance_levels() {
    DisturbanceConfig moderate;
    moderate.actuation_noise_sigma = 0.02;
    moderate.object_drift_prob = 0.05;
    moderate.object_drift_magnitude = 0.35;
    moderate.grasp_failure_prob = 0.25;
    return {{"off", DisturbanceConfig{}}, {"moderate", moderate}};
}

ExperimentConfig::ExperimentConfig() : disturbance_levels(default_disturbance_levels()) {}

EpisodeConfig ExperimentConfig::episode_config(const std::string& level) const {
    auto it = disturbance_levels.find(level);
    if (it == disturbance_levels.end()) throw ConfigError("unknown disturbance level '" + level + "'");
    EpisodeConfig e;
    e.horizon = horizon;
    e.success_radius = success_radius;
    e.world = world;
    e.disturbance = it->second;
    return e;
}

ExperimentConfig config_from_json(const json& root) {
    ExperimentConfig cfg;
    Fields top(root, "");
    require(top.has("version"), top, "version", "required field missing");
    top.opt("version", cfg.version);
    require(cfg.version == kConfigVersion, top, "version", "unsupported version " + std::to_string(cfg.version));

    {
        Fields env = top.child("env");
        env.opt("horizon", cfg.horizon);
        require(cfg.horizon >= 1, env, "horizon", "must be >= 1");
        env.opt("success_radius", cfg.success_radius);
        require(cfg.success_radius > 0.0, env, "success_radius", "must be > 0");
        Fields world = env.child("world");
        world.opt("half_extent", cfg.world.half_extent);
        world.opt("move_bound", cfg.world.move_bound);
        world.opt("grasp_radius", cfg.world.grasp_radius);
        world.opt("spawn_margin", cfg.world.spawn_margin);
        world.finish();
        require(cfg.world.half_extent > 0.0 && cfg.world.move_bound > 0.0 && cfg.world.grasp_radius > 0.0 &&
                    cfg.world.spawn_margin >= 0.0 && cfg.world.spawn_margin < cfg.world.half_extent,
                env, "world", "extents, bound and radius must be positive, margin inside the world");
        if (env.has("disturbance_levels")) {
            const json& levels = env.raw("disturbance_levels");
            require(levels.is_object(), env, "disturbance_levels", "expected an object");
            for (auto it = levels.begin(); it != levels.end(); ++it) {
                DisturbanceConfig base;
                if (auto found = cfg.disturbance_levels.find(it.key()); found != cfg.disturbance_levels.end())
                    base = found->second;
                cfg.disturbance_levels[it.key()] =
                    parse_disturbance(Fields(it.value(), env.join("disturbance_levels") + "." + it.key()), base);
            }
        }
        env.opt("disturbance", cfg.disturbance);
        require(cfg.disturbance_levels.contains(cfg.disturbance), env, "disturbance",
                "unknown level '" + cfg.disturbance + "'");
        env.finish();
    }
    {
        Fields pl = top.child("planner");
        pl.opt("kind", cfg.planner_kind);
        require(cfg.planner_kind == "nominal-rollout", pl, "kind", "unknown planner kind '" + cfg.planner_kind + "'");
        pl.opt("K", cfg.chunk_size);
        require(cfg.chunk_size >= 1, pl, "K", "must be >= 1");
        pl.opt("context_width", cfg.context_width);
        require(cfg.context_width >= 1, pl, "context_width", "must be >= 1");
        pl.finish();
    }
    {
        Fields v = top.child("verifier");
        auto& vs = cfg.verifier;
        v.opt("source", vs.source);
        require(vs.source == "train" || vs.source == "oracle" || vs.source == "file", v, "source",
                "must be train, oracle or file");
        v.opt("params_path", vs.params_path);
        if (vs.source == "file") {
            require(!vs.params_path.empty(), v, "params_path", "required when source is 'file'");
            require(std::filesystem::exists(vs.params_path), v, "params_path",
                    "file not found: " + vs.params_path);
        }
        v.opt("visual_width", vs.visual_width);
        require(vs.visual_width >= 1, v, "visual_width", "must be >= 1");
        v.opt("fused_width", vs.fused_width);
        require(vs.fused_width >= 1, v, "fused_width", "must be >= 1");
        v.opt("head", vs.head);
        require(vs.head == "affine", v, "head", "only 'affine' is supported");
        v.opt("encoder_seed", vs.encoder_seed);
        Fields t = v.child("train");
        t.opt("episodes", vs.train.episodes);
        require(vs.train.episodes >= 1, t, "episodes", "must be >= 1");
        t.opt("epochs", vs.train.epochs);
        require(vs.train.epochs >= 0, t, "epochs", "must be >= 0");
        t.opt("learning_rate", vs.train.learning_rate);
        require(vs.train.learning_rate >= 0.0, t, "learning_rate", "must be >= 0");
        t.opt("batch_size", vs.train.batch_size);
        require(vs.train.batch_size >= 1, t, "batch_size", "must be >= 1");
        t.opt("seed", vs.train.seed);
        t.opt("disturbance", vs.train.disturbance);
        require(cfg.disturbance_levels.contains(vs.train.disturbance), t, "disturbance",
                "unknown level '" + vs.train.disturbance + "'");
        t.opt("include_replanned_boundaries", vs.train.include_replanned_boundaries);
        t.opt("collection_seed", vs.train.collection_seed);
        t.finish();
        v.finish();
    }
    {
        Fields c = top.child("controller");
        std::string mode(to_string(cfg.mode));
        c.opt("mode", mode);
        try {
            cfg.mode = parse_mode(mode);
        } catch (const ConfigError& e) {
            throw ConfigError(c.where("mode") + e.what());
        }
        c.opt("tau", cfg.threshold.tau);
        require(cfg.threshold.tau > 0.0 && cfg.threshold.tau < 1.0, c, "tau",
                "must be in the open interval (0,1), got " + fmt(cfg.threshold.tau));
        c.opt("max_replans", cfg.threshold.max_replans);
        require(cfg.threshold.max_replans >= 1, c, "max_replans", "must be >= 1");
        Fields lat = c.child("latency");
        lat.opt("t_heavy", cfg.latency.t_heavy);
        lat.opt("t_verify", cfg.latency.t_verify);
        lat.opt("t_ctrl", cfg.latency.t_ctrl);
        lat.finish();
        try {
            cfg.latency.validate();
        } catch (const ContractViolation& e) {
            throw ConfigError(c.where("latency") + e.what());
        }
        c.finish();
    }
    {
        Fields b = top.child("batch");
        b.opt("episodes", cfg.episodes);
        require(cfg.episodes >= 1, b, "episodes", "must be >= 1");
        b.opt("base_seed", cfg.base_seed);
        b.finish();
    }
    {
        Fields s = top.child("sweep");
        s.opt("modes", cfg.sweep.modes);
        s.opt("K", cfg.sweep.chunk_sizes);
        s.opt("tau", cfg.sweep.taus);
        s.opt("disturbance", cfg.sweep.disturbances);
        for (const auto& m : cfg.sweep.modes) {
            try {
                parse_mode(m);
            } catch (const ConfigError& e) {
                throw ConfigError(s.where("modes") + e.what());
            }
        }
        for (int k : cfg.sweep.chunk_sizes) require(k >= 1, s, "K", "entries must be >= 1");
        for (double t : cfg.sweep.taus) require(t > 0.0 && t < 1.0, s, "tau", "entries must be in (0,1)");
        for (const auto& d : cfg.sweep.disturbances)
            require(cfg.disturbance_levels.contains(d), s, "disturbance", "unknown level '" + d + "'");
        s.finish();
    }
    top.opt("speedup_reference_k", cfg.speedup_reference_k);
    require(cfg.speedup_reference_k >= 1, top, "speedup_reference_k", "must be >= 1");
    top.finish();
    return cfg;
}

ojson config_to_json(const ExperimentConfig& cfg) {
    ojson j;
    j["version"] = cfg.version;
    ojson env;
    env["horizon"] = cfg.horizon;
    env["success_radius"] = cfg.success_radius;
    env["world"] = {{"half_extent", cfg.world.half_extent},
                    {"move_bound", cfg.world.move_bound},
                    {"grasp_radius", cfg.world.grasp_radius},
                    {"spawn_margin", cfg.world.spawn_margin}};
    env["disturbance"] = cfg.disturbance;
    ojson levels = ojson::object();
    for (const auto& [name, d] : cfg.disturbance_levels) levels[name] = disturbance_json(d);
    env["disturbance_levels"] = levels;
    j["env"] = env;
    j["planner"] = {{"kind", cfg.planner_kind}, {"K", cfg.chunk_size}, {"context_width", cfg.context_width}};
    const auto& vs = cfg.verifier;
    ojson train;
    train["episodes"] = vs.train.episodes;
    train["epochs"] = vs.train.epochs;
    train["learning_rate"] = vs.train.learning_rate;
    train["batch_size"] = vs.train.batch_size;
    train["seed"] = vs.train.seed;
    train["disturbance"] = vs.train.disturbance;
    train["include_replanned_boundaries"] = vs.train.include_replanned_boundaries;
    train["collection_seed"] = vs.train.collection_seed;
    ojson ver;
    ver["source"] = vs.source;
    ver["params_path"] = vs.params_path;
    ver["visual_width"] = vs.visual_width;
    ver["fused_width"] = vs.fused_width;
    ver["head"] = vs.head;
    ver["encoder_seed"] = vs.encoder_seed;
    ver["train"] = train;
    j["verifier"] = ver;
    ojson ctl;
    ctl["mode"] = to_string(cfg.mode);
    ctl["tau"] = cfg.threshold.tau;
    ctl["max_replans"] = cfg.threshold.max_replans;
    ctl["latency"] = {{"t_heavy", cfg.latency.t_heavy},
                      {"t_verify", cfg.latency.t_verify},
                      {"t_ctrl", cfg.latency.t_ctrl}};
    j["controller"] = ctl;
    j["batch"] = {{"episodes", cfg.episodes}, {"base_seed", cfg.base_seed}};
    j["sweep"] = {{"modes", cfg.sweep.modes},
                  {"K", cfg.sweep.chunk_sizes},
                  {"tau", cfg.sweep.taus},
                  {"disturbance", cfg.sweep.disturbances}};
    j["speedup_reference_k"] = cfg.speedup_reference_k;
    return j;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path.string() + ": cannot open config file");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": parse error: " + e.what());
    }
    // Relative parameter paths are taken relative to the config file.
    if (j.is_object() && j.contains("verifier") && j["verifier"].is_object() &&
        j["verifier"].contains("params_path") && j["verifier"]["params_path"].is_string()) {
        std::filesystem::path p = j["verifier"]["params_path"].get<std::string>();
        if (!p.empty() && p.is_relative()) j["verifier"]["params_path"] = (path.parent_path() / p).lexically_normal().string();
    }
    try {
        return config_from_json(j);
    } catch (const ConfigError& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

void save_config(const ExperimentConfig& cfg, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write config file " + path.string());
    out << config_to_json(cfg).dump(2) << '\n';
}

std::string CellSpec::label() const {
    return std::string(to_string(mode)) + "_K" + std::to_string(chunk_size) + "_tau" + fmt(tau) + "_" + disturbance;
}

MetricsRow aggregate(const CellSpec& cell, const std::vector<EpisodeTrace>& traces,
                     const std::vector<EpisodeTrace>& reference) {
    if (traces.empty() || reference.empty()) throw ConfigError("aggregate: empty trace set");
    if (traces.size() != reference.size())
        throw ConfigError("aggregate: reference set has " + std::to_string(reference.size()) +
                          " episodes, evaluated set has " + std::to_string(traces.size()));
    MetricsRow row;
    row.cell = cell;
    row.label = cell.label();
    row.episodes = static_cast<int>(traces.size());
    for (const auto& t : traces) {
        row.successes += t.success ? 1 : 0;
        row.guard_hits += t.guard_hit ? 1 : 0;
    }
    row.success_rate = static_cast<double>(row.successes) / row.episodes;
    row.mean_heavy_calls = mean_of(traces, [](const auto& t) { return t.heavy_calls; });
    row.mean_verifier_calls = mean_of(traces, [](const auto& t) { return t.verifier_calls; });
    row.mean_inference_time = mean_of(traces, [](const auto& t) { return t.simulated_inference_time; });
    row.mean_executed_steps = mean_of(traces, [](const auto& t) { return t.executed_steps; });
    const double ref_time = mean_of(reference, [](const auto& t) { return t.simulated_inference_time; });
    if (!(row.mean_inference_time > 0.0) || !(ref_time > 0.0))
        throw ConfigError("aggregate: speed-up undefined for zero inference time");
    row.speedup = ref_time / row.mean_inference_time;

    double pooled = 0.0, events = 0.0;
    std::size_t pooled_n = 0;
    for (const auto& t : traces) {
        const auto& src = t.steps_before_replan.empty() ? t.chunk_steps : t.steps_before_replan;
        for (int s : src) pooled += s;
        pooled_n += src.size();
        for (int s : t.steps_before_replan) events += s;
        row.replan_events += static_cast<int>(t.steps_before_replan.size());
    }
    row.mean_steps_before_replan = pooled_n ? pooled / static_cast<double>(pooled_n) : 0.0;
    row.mean_steps_replan_events =
        row.replan_events ? events / row.replan_events : std::numeric_limits<double>::quiet_NaN();
    return row;
}

void write_metrics_csv(std::ostream& out, const MetricsTable& table) {
    out << "label,mode,K,tau,disturbance,episodes,successes,success_rate,mean_heavy_calls,"
           "mean_verifier_calls,mean_inference_time_s,speedup,mean_steps_before_replan,"
           "mean_steps_replan_events,replan_events,mean_executed_steps,guard_hits\n";
    for (const auto& r : table) {
        out << r.label << ',' << to_string(r.cell.mode) << ',' << r.cell.chunk_size << ',' << fmt(r.cell.tau) << ','
            << r.cell.disturbance << ',' << r.episodes << ',' << r.successes << ',' << fmt(r.success_rate) << ','
            << fmt(r.mean_heavy_calls) << ',' << fmt(r.mean_verifier_calls) << ',' << fmt(r.mean_inference_time)
            << ',' << fmt(r.speedup) << ',' << fmt(r.mean_steps_before_replan) << ','
            << fmt(r.mean_steps_replan_events) << ',' << r.replan_events << ',' << fmt(r.mean_executed_steps) << ','
            << r.guard_hits << '\n';
    }
}

std::string metrics_csv(const MetricsTable& table) {
    std::ostringstream os;
    write_metrics_csv(os, table);
    return os.str();
}

Experiment::Experiment(ExperimentConfig cfg) : cfg_(std::move(cfg)) {}

CellSpec Experiment::default_cell() const {
    return {cfg_.mode, cfg_.chunk_size, cfg_.threshold.tau, cfg_.disturbance};
}

std::shared_ptr<const Verifier> Experiment::trained_verifier(int chunk_size, InputAblation ablation) {
    const auto key = std::make_pair(chunk_size, ablation);
    if (auto it = verifiers_.find(key); it != verifiers_.end()) return it->second;

    const auto& vs = cfg_.verifier;
    const EpisodeConfig env = cfg_.episode_config(vs.train.disturbance);
    const auto planner = make_planner(cfg_.planner_kind, chunk_size, cfg_.context_width, env);
    const auto samples = build_training_set(env, *planner, vs.train.episodes, vs.train.collection_seed,
                                            {vs.train.include_replanned_boundaries});
    FrozenEncoder encoder(kObservationWidth, vs.visual_width, vs.encoder_seed);
    TrainConfig tc;
    tc.epochs = vs.train.epochs;
    tc.learning_rate = vs.train.learning_rate;
    tc.batch_size = vs.train.batch_size;
    tc.seed = vs.train.seed;
    tc.fused_width = vs.fused_width;
    tc.ablation = ablation;
    auto report = train_verifier(samples, encoder, tc);
    if (log_)
        log_("trained verifier K=" + std::to_string(chunk_size) + " ablation=" + std::string(to_string(ablation)) +
             " samples=" + std::to_string(samples.size()) + " loss " + fmt(report.initial_loss) + " -> " +
             fmt(report.epoch_losses.empty() ? report.initial_loss : report.epoch_losses.back()));
    auto v = std::make_shared<const Verifier>(Verifier{std::move(encoder), std::move(report.params), ablation});
    verifiers_.emplace(key, v);
    return v;
}

ReferenceSource Experiment::reference_for(const CellSpec& cell) {
    if (!mode_uses_verifier(cell.mode)) return ReferenceSource::none();
    const auto& vs = cfg_.verifier;
    if (vs.source == "oracle") return ReferenceSource::oracle();
    if (vs.source == "file") {
        const auto key = std::make_pair(0, InputAblation::None);
        auto it = verifiers_.find(key);
        if (it == verifiers_.end())
            it = verifiers_.emplace(key, std::make_shared<const Verifier>(load_verifier(vs.params_path))).first;
        return ReferenceSource::trained(it->second);
    }
    return ReferenceSource::trained(
        trained_verifier(training_chunk_size(cfg_, cell.chunk_size), mode_ablation(cell.mode)));
}

std::vector<EpisodeTrace> Experiment::run_batch(const CellSpec& cell) {
    const EpisodeConfig env = cfg_.episode_config(cell.disturbance);
    const auto planner = make_planner(cfg_.planner_kind, cell.chunk_size, cfg_.context_width, env);
    const ReferenceSource ref = reference_for(cell);
    const ThresholdConfig thr{cell.tau, cfg_.threshold.max_replans};
    std::vector<EpisodeTrace> traces;
    traces.reserve(static_cast<std::size_t>(cfg_.episodes));
    for (int i = 0; i < cfg_.episodes; ++i)
        traces.push_back(run_episode(env, *planner, ref, cell.mode, thr, cfg_.latency,
                                     cfg_.base_seed + static_cast<std::uint64_t>(i)));
    return traces;
}

std::vector<EpisodeTrace> Experiment::run_reference(const std::string& disturbance) {
    if (auto it = reference_cache_.find(disturbance); it != reference_cache_.end()) return it->second;
    auto traces = run_batch({ControllerMode::OpenLoop, cfg_.speedup_reference_k, cfg_.threshold.tau, disturbance});
    reference_cache_.emplace(disturbance, traces);
    return traces;
}

Experiment::SweepResult Experiment::run_cells(const std::vector<CellSpec>& cells) {
    SweepResult result;
    std::vector<std::string> ref_levels;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        const auto& cell = cells[i];
        if (log_) log_("running " + cell.label());
        auto traces = run_batch(cell);
        const auto reference = run_reference(cell.disturbance);
        result.table.push_back(aggregate(cell, traces, reference));
        result.cells.push_back(
            {{cell.label(), cell.mode, cell.chunk_size, cell.tau, cell.disturbance,
              reference_file_name(cell.disturbance)},
             std::move(traces)});
        if (std::find(ref_levels.begin(), ref_levels.end(), cell.disturbance) == ref_levels.end())
            ref_levels.push_back(cell.disturbance);
    }
    for (const auto& level : ref_levels) {
        CellSpec ref{ControllerMode::OpenLoop, cfg_.speedup_reference_k, cfg_.threshold.tau, level};
        result.references.push_back(
            {{ref.label(), ref.mode, ref.chunk_size, ref.tau, level, ""}, run_reference(level)});
    }
    return result;
}

Experiment::SweepResult Experiment::run_sweep() {
    const auto& s = cfg_.sweep;
    if (s.modes.empty() || s.chunk_sizes.empty() || s.taus.empty() || s.disturbances.empty())
        throw ConfigError("sweep: every axis needs at least one value");
    std::vector<CellSpec> cells;
    for (const auto& m : s.modes)
        for (int k : s.chunk_sizes)
            for (double tau : s.taus)
                for (const auto& d : s.disturbances) cells.push_back({parse_mode(m), k, tau, d});
    return run_cells(cells);
}

std::vector<EpisodeTrace> run_batch(const ExperimentConfig& cfg, std::optional<ControllerMode> mode) {
    Experiment exp(cfg);
    CellSpec cell = exp.default_cell();
    if (mode) cell.mode = *mode;
    return exp.run_batch(cell);
}

MetricsTable run_sweep(const ExperimentConfig& cfg) { return Experiment(cfg).run_sweep().table; }

void write_sweep_outputs(const Experiment::SweepResult& result, const std::filesystem::path& dir) {
    const auto traces = dir / "traces";
    std::filesystem::create_directories(traces);
    for (std::size_t i = 0; i < result.cells.size(); ++i)
        write_trace_file(traces / cell_file_name(i, result.cells[i].header.label), result.cells[i]);
    for (const auto& ref : result.references)
        write_trace_file(traces / reference_file_name(ref.header.disturbance), ref);
    std::ofstream out(dir / "summary.csv", std::ios::binary);
    if (!out) throw ConfigError("cannot write " + (dir / "summary.csv").string());
    write_metrics_csv(out, result.table);
}

MetricsTable report_from_traces(const std::filesystem::path& trace_dir) {
    if (!std::filesystem::is_directory(trace_dir)) throw ConfigError(trace_dir.string() + ": not a directory");
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(trace_dir))
        if (e.is_regular_file() && e.path().extension() == ".jsonl") files.push_back(e.path());
    std::sort(files.begin(), files.end());

    std::map<std::string, TraceFile> refs;
    std::vector<TraceFile> cells;
    for (const auto& f : files) {
        auto tf = read_trace_file(f);
        if (tf.header.reference.empty())
            refs.emplace(f.filename().string(), std::move(tf));
        else
            cells.push_back(std::move(tf));
    }
    MetricsTable table;
    for (const auto& c : cells) {
        auto it = refs.find(c.header.reference);
        if (it == refs.end()) throw ConfigError("missing reference trace file " + c.header.reference);
        const CellSpec cell{c.header.mode, c.header.chunk_size, c.header.tau, c.header.disturbance};
        table.push_back(aggregate(cell, c.traces, it->second.traces));
    }
    return table;
}

}  // namespace specctl
