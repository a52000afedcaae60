#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "flpo/anneal.hpp"
#include "flpo/baselines.hpp"
#include "flpo/instance.hpp"
#include "flpo/report.hpp"

namespace flpo {

// Solver methods addressable from the CLI and benchmark suites:
//   mep-annealed   exact-dp backend, beta 1e-3 -> 1e4, centroid start
//   mep-high-beta  exact-dp backend, single beta 1e4, random start
//   mep-mixture    mixture backend, beta 1e-3 -> 1e4, centroid start
//   ga, sa, cem    metaheuristic baselines with exact-route fitness
struct MethodConfig {
    AnnealConfig anneal;
    BaselineParams baselines;
    enum class Init { Default, Centroid, Random } init = Init::Default;
};

const std::vector<std::string>& known_methods();

// Defaults for `method` (annealing schedule, backend) layered under `base`'s other fields.
MethodConfig method_defaults(const std::string& method, MethodConfig base = {});

SolveReport run_method(const Instance& inst, const std::string& method, const MethodConfig& cfg,
                       std::uint64_t seed);

std::string config_echo(const std::string& method, const MethodConfig& cfg);

struct BenchEntry {
    std::string label;
    Instance instance;
    std::string method;
    MethodConfig config;
    std::size_t repetitions = 1;
    std::uint64_t seed_base = 0;
};

struct BenchSuite {
    std::vector<BenchEntry> entries;
    std::filesystem::path output_dir;
    std::size_t parallel = 1;
};

struct BenchRow {
    std::string instance;
    std::string method;
    std::uint64_t seed = 0;
    std::string status;  // "ok" or "error:<message>"
    double cost = 0.0;
    double wall_ms = 0.0;
    std::string config_hash;
};

struct BenchSummary {
    std::string instance;
    std::string method;
    std::size_t runs = 0;
    std::size_t ok = 0;
    double min_cost = 0.0;
    double median_cost = 0.0;
    double min_wall_ms = 0.0;
    double median_wall_ms = 0.0;
};

struct BenchResult {
    std::vector<BenchRow> rows;
    std::vector<BenchSummary> summary;
};

inline constexpr const char* kBenchCsvHeader = "instance,method,seed,status,cost,wall_ms,config_hash";

// Runs every (entry, repetition) cell; failures are recorded as rows and the
// harness moves on. Rows keep suite order regardless of `parallel`.
BenchResult run_benchmark(const BenchSuite& suite);

std::string bench_csv(const std::vector<BenchRow>& rows);
std::string summary_csv(const std::vector<BenchSummary>& summary);
std::string summary_table(const std::vector<BenchSummary>& summary);

// Writes runs.csv and summary.csv into suite.output_dir (created if needed).
void write_bench_outputs(const BenchSuite& suite, const BenchResult& result);

// Suite description file; see docs/bench-suite.md.
BenchSuite load_suite(const std::filesystem::path& file);

}  // namespace flpo
