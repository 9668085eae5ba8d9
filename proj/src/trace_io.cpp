#include "specctl/trace_io.hpp"

#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "json.hpp"
#include "specctl/errors.hpp"

namespace specctl {
namespace {

using nlohmann::json;
// Keeps key order as written so files diff cleanly.
using ojson = nlohmann::ordered_json;

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::uint64_t parse_hex64(const std::string& s) {
    if (s.size() != 16) throw ConfigError("trace: bad hash '" + s + "'");
    return std::stoull(s, nullptr, 16);
}

template <class T>
ojson opt(const std::optional<T>& v) {
    return v ? ojson(*v) : ojson(nullptr);
}

std::optional<double> opt_double(const json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<double>();
}

void write_episode(std::ostream& out, const EpisodeTrace& tr) {
    for (const auto& s : tr.steps) {
        ojson j;
        j["type"] = "step";
        j["episode"] = tr.seed;
        j["t"] = s.step;
        j["chunk"] = s.chunk;
        j["pos"] = s.index_in_chunk;
        j["action"] = s.action;
        j["heavy"] = s.heavy_calls;
        j["verify"] = s.verifier_calls;
        j["decision"] = s.decision ? ojson("accept") : ojson(nullptr);
        j["score"] = opt(s.score);
        j["replan_score"] = opt(s.replan_score);
        j["hash"] = hex64(s.state_hash);
        out << j.dump() << '\n';
    }
    std::optional<double> trailing_score;
    if (tr.trailing_verifier_calls > 0 && !tr.decisions.empty())
        trailing_score = tr.decisions.back().score.value();
    ojson j;
    j["type"] = "summary";
    j["episode"] = tr.seed;
    j["mode"] = to_string(tr.mode);
    j["K"] = tr.chunk_size;
    j["tau"] = tr.tau;
    j["t_heavy"] = tr.latency.t_heavy;
    j["t_verify"] = tr.latency.t_verify;
    j["t_ctrl"] = tr.latency.t_ctrl;
    j["initial_hash"] = hex64(tr.initial_state_hash);
    j["heavy_calls"] = tr.heavy_calls;
    j["verifier_calls"] = tr.verifier_calls;
    j["executed_steps"] = tr.executed_steps;
    j["replans"] = tr.replans;
    j["trailing_verifier_calls"] = tr.trailing_verifier_calls;
    j["trailing_replan_score"] = opt(trailing_score);
    j["guard_hit"] = tr.guard_hit;
    j["success"] = tr.success;
    j["simulated_inference_time"] = tr.simulated_inference_time;
    j["steps_before_replan"] = tr.steps_before_replan;
    j["chunk_steps"] = tr.chunk_steps;
    out << j.dump() << '\n';
}

StepRecord parse_step(const json& j) {
    StepRecord s;
    s.step = j.at("t").get<int>();
    s.chunk = j.at("chunk").get<int>();
    s.index_in_chunk = j.at("pos").get<int>();
    s.action = j.at("action").get<std::vector<double>>();
    s.heavy_calls = j.at("heavy").get<int>();
    s.verifier_calls = j.at("verify").get<int>();
    const auto& d = j.at("decision");
    if (!d.is_null()) {
        if (d.get<std::string>() != "accept") throw ConfigError("trace: unknown decision value");
        s.decision = DecisionKind::Accept;
    }
    s.score = opt_double(j, "score");
    s.replan_score = opt_double(j, "replan_score");
    s.state_hash = parse_hex64(j.at("hash").get<std::string>());
    return s;
}

void apply_summary(const json& j, EpisodeTrace& tr) {
    tr.seed = j.at("episode").get<std::uint64_t>();
    tr.mode = parse_mode(j.at("mode").get<std::string>());
    tr.chunk_size = j.at("K").get<int>();
    tr.tau = j.at("tau").get<double>();
    tr.latency = {j.at("t_heavy").get<double>(), j.at("t_verify").get<double>(), j.at("t_ctrl").get<double>()};
    tr.initial_state_hash = parse_hex64(j.at("initial_hash").get<std::string>());
    tr.heavy_calls = j.at("heavy_calls").get<int>();
    tr.verifier_calls = j.at("verifier_calls").get<int>();
    tr.executed_steps = j.at("executed_steps").get<int>();
    tr.replans = j.at("replans").get<int>();
    tr.trailing_verifier_calls = j.at("trailing_verifier_calls").get<int>();
    tr.guard_hit = j.at("guard_hit").get<bool>();
    tr.success = j.at("success").get<bool>();
    tr.simulated_inference_time = j.at("simulated_inference_time").get<double>();
    tr.steps_before_replan = j.at("steps_before_replan").get<std::vector<int>>();
    tr.chunk_steps = j.at("chunk_steps").get<std::vector<int>>();

    // Rebuild the decision log from the records.
    for (const auto& s : tr.steps) {
        if (s.replan_score) tr.decisions.push_back({DecisionKind::Replan, DeviationScore(*s.replan_score), s.step});
        if (s.decision) tr.decisions.push_back({DecisionKind::Accept, DeviationScore(s.score.value_or(0.0)), s.step});
    }
    if (auto ts = opt_double(j, "trailing_replan_score")) {
        const StepIndex at = tr.steps.empty() ? 0 : tr.steps.back().step + 1;
        tr.decisions.push_back({DecisionKind::Replan, DeviationScore(*ts), at});
    }
}

}  // namespace

std::string check_trace_counters(const EpisodeTrace& tr) {
    int heavy = 0, verify = tr.trailing_verifier_calls, replans = 0;
    for (const auto& s : tr.steps) {
        heavy += s.heavy_calls;
        verify += s.verifier_calls;
        if (s.replan_score) ++replans;
    }
    if (heavy != tr.heavy_calls) return "heavy_calls mismatch";
    if (verify != tr.verifier_calls) return "verifier_calls mismatch";
    if (static_cast<int>(tr.steps.size()) != tr.executed_steps) return "executed_steps mismatch";
    if (replans != tr.replans) return "replans mismatch";
    if (tr.simulated_inference_time !=
        tr.heavy_calls * tr.latency.t_heavy + tr.verifier_calls * tr.latency.t_verify)
        return "simulated_inference_time violates the accounting identity";
    return {};
}

void write_trace_file(std::ostream& out, const TraceFile& file) {
    ojson h;
    h["type"] = "cell";
    h["label"] = file.header.label;
    h["mode"] = to_string(file.header.mode);
    h["K"] = file.header.chunk_size;
    h["tau"] = file.header.tau;
    h["disturbance"] = file.header.disturbance;
    h["reference"] = file.header.reference;
    out << h.dump() << '\n';
    for (const auto& tr : file.traces) write_episode(out, tr);
}

void write_trace_file(const std::filesystem::path& path, const TraceFile& file) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write trace file " + path.string());
    write_trace_file(out, file);
}

TraceFile read_trace_file(std::istream& in) {
    TraceFile file;
    std::string line;
    bool have_header = false;
    EpisodeTrace current;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
            const auto type = j.at("type").get<std::string>();
            if (type == "cell") {
                file.header = {j.at("label").get<std::string>(), parse_mode(j.at("mode").get<std::string>()),
                               j.at("K").get<int>(),           j.at("tau").get<double>(),
                               j.at("disturbance").get<std::string>(), j.at("reference").get<std::string>()};
                have_header = true;
            } else if (type == "step") {
                current.steps.push_back(parse_step(j));
            } else if (type == "summary") {
                apply_summary(j, current);
                if (auto err = check_trace_counters(current); !err.empty())
                    throw ConfigError("episode " + std::to_string(current.seed) + ": " + err);
                file.traces.push_back(std::move(current));
                current = EpisodeTrace{};
            } else {
                throw ConfigError("unknown record type '" + type + "'");
            }
        } catch (const json::exception& e) {
            throw ConfigError("trace line " + std::to_string(lineno) + ": " + e.what());
        } catch (const ConfigError& e) {
            throw ConfigError("trace line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    if (!have_header) throw ConfigError("trace file has no cell header");
    if (!current.steps.empty()) throw ConfigError("trace file ends inside an episode");
    return file;
}

TraceFile read_trace_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open trace file " + path.string());
    return read_trace_file(in);
}

}  // namespace specctl
