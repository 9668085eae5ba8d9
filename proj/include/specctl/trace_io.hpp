#pragma once
// Line-delimited JSON trace format.
//
// A trace file holds one cell header line followed by any number of episodes.
// Each episode is its step records in execution order followed by one summary
// record. All numbers are written in shortest round-trip form.
//
// Cell header:
//   {"type":"cell","label":str,"mode":str,"K":int,"tau":num,"disturbance":str,
//    "reference":str}                   reference = file name of the speed-up reference cell
// Step record:
//   {"type":"step","episode":seed,"t":int,"chunk":int,"pos":int,"action":[num...],
//    "heavy":0|1,"verify":0|1,"decision":"accept"|null,"score":num|null,
//    "replan_score":num|null,"hash":"16 hex digits"}
//   heavy/verify are the calls charged immediately before the step; a step with
//   replan_score set is the first action of a chunk planned after a rejection.
// Summary record:
//   {"type":"summary","episode":seed,"mode":str,"K":int,"tau":num,"t_heavy":num,
//    "t_verify":num,"t_ctrl":num,"initial_hash":hex,"heavy_calls":int,
//    "verifier_calls":int,"executed_steps":int,"replans":int,
//    "trailing_verifier_calls":int,"trailing_replan_score":num|null,"guard_hit":bool,
//    "success":bool,"simulated_inference_time":num,"steps_before_replan":[int...],
//    "chunk_steps":[int...]}
//
// Counter identities an external tool can check:
//   heavy_calls    = sum of step.heavy
//   verifier_calls = sum of step.verify + trailing_verifier_calls
//   executed_steps = number of step records
//   replans        = number of steps with replan_score set
//   simulated_inference_time = heavy_calls * t_heavy + verifier_calls * t_verify

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "specctl/controller.hpp"

namespace specctl {

struct CellHeader {
    std::string label;
    ControllerMode mode = ControllerMode::SpeculativeVerification;
    int chunk_size = 1;
    double tau = 0.2;
    std::string disturbance;
    std::string reference;  // empty for reference cells themselves

    bool operator==(const CellHeader&) const = default;
};

struct TraceFile {
    CellHeader header;
    std::vector<EpisodeTrace> traces;
};

void write_trace_file(std::ostream& out, const TraceFile& file);
void write_trace_file(const std::filesystem::path& path, const TraceFile& file);

// Throws ConfigError on malformed input or counters that contradict the step
// records.
TraceFile read_trace_file(std::istream& in);
TraceFile read_trace_file(const std::filesystem::path& path);

// Recomputes every counter from the step records and compares it with the
// stored value. Returns an empty string when consistent, else a description.
std::string check_trace_counters(const EpisodeTrace& trace);

}  // namespace specctl
