#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "flpo/instance.hpp"

namespace flpo {

struct TracePoint {
    double beta = 0.0;
    std::size_t iter = 0;
    double free_energy = 0.0;
    double grad_norm = 0.0;
    double wall_ms = 0.0;
};

// Outcome of any solver in the toolkit.
struct SolveReport {
    std::string method;
    FacilityConfig facilities;
    std::vector<CanonicalPath> paths;  // one per agent
    double cost = 0.0;                 // weighted hard cost D of `paths` under `facilities`
    std::vector<TracePoint> trace;
    std::vector<double> best_history;  // best-so-far fitness per generation/iteration (baselines)
    std::vector<double> beta_wall_ms;
    std::vector<std::pair<std::string, double>> stats;
    double wall_ms = 0.0;
    std::string config_json;  // echo of the solver configuration
    std::uint64_t seed = 0;
};

// Sum of weight * path_cost over the reported paths, recomputed from scratch.
double recompute_cost(const Instance& inst, const SolveReport& report);

// Structured-text (JSON) report. With include_timing = false every wall-clock
// field is omitted, so identical runs serialize to identical bytes.
std::string serialize_report(const SolveReport& report, bool include_timing = true);

// CSV with header beta,iter,F,grad_norm,wall_ms.
std::string trace_csv(const SolveReport& report);

}  // namespace flpo
