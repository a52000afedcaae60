#include <CLI11.hpp>
#include <fmt/format.h>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>

#include "flpo/anneal.hpp"
#include "flpo/baselines.hpp"
#include "flpo/bench.hpp"
#include "flpo/errors.hpp"
#include "flpo/hash.hpp"
#include "flpo/instance.hpp"
#include "flpo/mixture_gradient.hpp"
#include "flpo/parallel.hpp"
#include "flpo/policy_bridge.hpp"
#include "flpo/stagewise_dp.hpp"

namespace {

using namespace flpo;

constexpr int kUsageExit = 2;

void write_text(const std::string& file, const std::string& text) {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw Error(fmt::format("cannot write '{}'", file));
    out << text;
}

std::string read_text(const std::string& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw Error(fmt::format("cannot read '{}'", file));
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct GenerateArgs {
    std::size_t agents = 0;
    std::size_t facilities = 4;
    std::size_t dim = 2;
    std::uint64_t seed = 0;
    std::string output;
};

int cmd_generate(const GenerateArgs& a) {
    const Instance inst = generate_instance(a.agents, a.facilities, a.dim, unit_box(a.dim), a.seed);
    save_instance(inst, a.output);
    fmt::print("wrote {} (N={}, M={}, d={}, seed={})\n", a.output, a.agents, a.facilities, a.dim, a.seed);
    return 0;
}

struct SolveArgs {
    std::string instance;
    std::string method = "mep";
    std::string backend = "exact-dp";
    std::string source = "exact-dp";
    double beta_start = 1e-3;
    double beta_end = 1e3;
    double rate = 10.0;
    std::optional<double> single_beta;
    std::size_t inner_iters = 100;
    double step_size = 0.01;
    double tol = 1e-3;
    std::size_t b = 5;
    std::size_t L = 15;
    bool dedup = false;
    bool sample_policy = false;
    bool clip_domain = false;
    std::string init = "centroid";
    std::string facilities;
    std::uint64_t seed = 0;
    std::size_t threads = 0;
    std::string report;
    std::string trace;
    bool no_timing = false;
    BaselineParams baselines;
};

FacilityConfig initial_facilities(const Instance& inst, const std::string& file, const std::string& init,
                                  std::uint64_t seed) {
    if (!file.empty()) {
        FacilityConfig y = parse_facilities(read_text(file));
        inst.check_config(y);
        return y;
    }
    if (init == "random") return random_init(inst, seed);
    return centroid_init(inst, seed);
}

PolicySource make_source(const std::string& spec, const Instance& inst, const FacilityConfig& y0) {
    if (spec == "exact-dp") return PolicySource::exact_dp();
    if (spec == "uniform") return PolicySource::uniform();
    const std::string prefix = "external:";
    if (spec.rfind(prefix, 0) == 0) {
        // The policy answers a request made at the starting facilities, so it is
        // checked against Y0; it is then held fixed while Y moves.
        auto policy = std::make_shared<ExternalPolicy>(import_policy(spec.substr(prefix.size()), inst, y0));
        return PolicySource::external(std::move(policy));
    }
    throw ArgumentError(fmt::format("unknown source '{}' (expected exact-dp, uniform or external:<file>)", spec));
}

int cmd_solve(const SolveArgs& a) {
    const Instance inst = load_instance(a.instance);
    const std::size_t threads = a.threads ? a.threads : default_thread_count();
    SolveReport report;
    if (a.method == "mep") {
        AnnealConfig cfg;
        cfg.beta_start = a.single_beta ? *a.single_beta : a.beta_start;
        cfg.beta_end = a.single_beta ? *a.single_beta : a.beta_end;
        cfg.growth = a.rate;
        cfg.inner_iters = a.inner_iters;
        cfg.step_size = a.step_size;
        cfg.tol = a.tol;
        cfg.backend = backend_from_string(a.backend);
        cfg.mixture = MixtureOptions{a.b, a.L, a.dedup, a.sample_policy};
        cfg.seed = a.seed;
        cfg.threads = threads;
        cfg.clip_domain = a.clip_domain;
        FacilityConfig y0 = initial_facilities(inst, a.facilities, a.init, a.seed);
        cfg.source = make_source(a.source, inst, y0);
        report = solve(inst, std::move(y0), cfg);
    } else if (a.method == "ga" || a.method == "sa" || a.method == "cem") {
        BaselineParams p = a.baselines;
        p.seed = a.seed;
        p.threads = threads;
        if (!a.facilities.empty()) p.init = initial_facilities(inst, a.facilities, a.init, a.seed);
        report = a.method == "ga" ? ga_solve(inst, p) : a.method == "sa" ? sa_solve(inst, p) : cem_solve(inst, p);
    } else {
        throw ArgumentError(fmt::format("unknown method '{}' (expected mep, ga, sa or cem)", a.method));
    }
    if (!a.report.empty()) write_text(a.report, serialize_report(report, !a.no_timing));
    if (!a.trace.empty()) write_text(a.trace, trace_csv(report));
    fmt::print("method {}  D = {}  wall {:.1f} ms\n", report.method, format_double(report.cost), report.wall_ms);
    return 0;
}

struct BenchArgs {
    std::string suite;
    std::vector<std::string> instances;
    std::vector<std::string> methods{"mep-annealed", "mep-high-beta", "ga", "sa", "cem"};
    std::size_t repetitions = 10;
    std::uint64_t seed = 0;
    std::string output_dir;
    std::size_t parallel = 0;
};

int cmd_bench(const BenchArgs& a) {
    BenchSuite suite;
    if (!a.suite.empty()) {
        suite = load_suite(a.suite);
    } else {
        if (a.instances.empty()) throw ArgumentError("bench needs a suite file or at least one --instance");
        for (const std::string& file : a.instances) {
            const Instance inst = load_instance(file);
            const std::string label = std::filesystem::path(file).stem().string();
            for (const std::string& m : a.methods) {
                method_defaults(m);
                suite.entries.push_back(BenchEntry{label, inst, m, MethodConfig{}, a.repetitions, a.seed});
            }
        }
        suite.output_dir = "bench-out";
    }
    if (!a.output_dir.empty()) suite.output_dir = a.output_dir;
    if (a.parallel) suite.parallel = a.parallel;
    const BenchResult result = run_benchmark(suite);
    write_bench_outputs(suite, result);
    fmt::print("{}", summary_table(result.summary));
    std::size_t failed = 0;
    for (const BenchRow& r : result.rows) failed += r.status != "ok";
    fmt::print("{} runs, {} failed; results in {}\n", result.rows.size(), failed, suite.output_dir.string());
    return 0;
}

struct PolicyArgs {
    std::string instance;
    std::string request;
    std::string facilities;
    std::string policy;
    std::string output;
    std::uint64_t seed = 0;
    double beta = 1e3;
    std::size_t paths = 0;
};

int cmd_export_request(const PolicyArgs& a) {
    const Instance inst = load_instance(a.instance);
    const FacilityConfig y = initial_facilities(inst, a.facilities, "centroid", a.seed);
    export_request(inst, y, a.output);
    fmt::print("wrote {} instance_hash {} Y_hash {}\n", a.output, hash_to_hex(instance_hash(inst)),
               hash_to_hex(facilities_hash(y)));
    return 0;
}

int cmd_export_exact(const PolicyArgs& a) {
    const PolicyRequest req = load_request(a.request);
    if (a.paths == 0) {
        export_exact_policy(req.instance, req.facilities, a.beta, a.output);
    } else {
        std::vector<std::vector<ScoredPath>> lists;
        for (std::size_t i = 0; i < req.instance.agent_count(); ++i)
            lists.push_back(
                beam_search(exact_policy_matrix(req.instance, req.facilities, a.beta, i), req.instance, i, a.paths));
        write_text(a.output, serialize_policy_paths(req.instance, req.facilities, lists));
    }
    fmt::print("wrote {}\n", a.output);
    return 0;
}

int cmd_validate(const PolicyArgs& a) {
    std::optional<Instance> inst;
    FacilityConfig y;
    if (!a.request.empty()) {
        PolicyRequest req = load_request(a.request);
        inst = std::move(req.instance);
        y = std::move(req.facilities);
    } else {
        if (a.instance.empty()) throw ArgumentError("policy validate needs --request or --instance");
        inst = load_instance(a.instance);
        y = initial_facilities(*inst, a.facilities, "centroid", a.seed);
    }
    PolicyFileHeader h;
    const ExternalPolicy p = import_policy(a.policy, *inst, y, &h);
    fmt::print("valid: mode {}, N={}, M={}, instance_hash {}, Y_hash {}\n",
               p.mode == ExternalPolicy::Mode::Matrix ? "matrix" : "paths", h.agents, h.facility_count,
               hash_to_hex(h.instance_hash), hash_to_hex(h.facilities_hash));
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Facility location and path optimization by annealed free-energy descent"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "flpo 0.1.0");
    app.footer("Environment: FLPO_THREADS caps worker threads. Exit codes: 0 ok, 1 runtime error, 2 usage error.");

    GenerateArgs gen;
    auto* g = app.add_subcommand("generate", "Write a random instance (uniform in the unit box)");
    g->add_option("--agents", gen.agents, "Number of agents N")->required()->check(CLI::PositiveNumber);
    g->add_option("--facilities", gen.facilities, "Number of facilities M")->check(CLI::PositiveNumber)
        ->capture_default_str();
    g->add_option("--dim", gen.dim, "Spatial dimension")->check(CLI::PositiveNumber)->capture_default_str();
    g->add_option("--seed", gen.seed, "Random seed")->capture_default_str();
    g->add_option("-o,--output", gen.output, "Instance file to write")->required();

    SolveArgs sol;
    auto* s = app.add_subcommand("solve", "Solve an instance and report the hard cost D");
    s->add_option("instance", sol.instance, "Instance file")->required()->check(CLI::ExistingFile);
    s->add_option("--method", sol.method, "mep | ga | sa | cem")
        ->check(CLI::IsMember({"mep", "ga", "sa", "cem"}))->capture_default_str();
    s->add_option("--backend", sol.backend, "Gradient backend for mep: exact-dp | mixture | oracle")
        ->check(CLI::IsMember({"exact-dp", "mixture", "oracle"}))->capture_default_str();
    s->add_option("--source", sol.source, "Policy source for the mixture backend: exact-dp | uniform | external:<file>")
        ->capture_default_str();
    s->add_option("--beta-start", sol.beta_start, "First annealing beta")->capture_default_str();
    s->add_option("--beta-end", sol.beta_end, "Final annealing beta")->capture_default_str();
    s->add_option("--rate", sol.rate, "Geometric beta growth factor")->capture_default_str();
    s->add_option("--single-beta", sol.single_beta, "Run at one beta only (no annealing)");
    s->add_option("--inner-iters", sol.inner_iters, "Gradient steps per beta")->capture_default_str();
    s->add_option("--step-size", sol.step_size, "Gradient step size")->capture_default_str();
    s->add_option("--tol", sol.tol, "Stop a beta step when the max coordinate update is below this")
        ->capture_default_str();
    s->add_option("--b", sol.b, "Policy paths per agent (mixture backend)")->capture_default_str();
    s->add_option("--L", sol.L, "Total sampled paths per agent (mixture backend)")->capture_default_str();
    s->add_flag("--dedup", sol.dedup, "Collapse repeated sampled paths before weighting");
    s->add_flag("--sample-policy", sol.sample_policy, "Sample the b policy paths instead of beam search");
    s->add_flag("--clip-domain", sol.clip_domain, "Project facilities back into the domain box");
    s->add_option("--init", sol.init, "Starting facilities: centroid | random")
        ->check(CLI::IsMember({"centroid", "random"}))->capture_default_str();
    s->add_option("--facilities", sol.facilities, "Starting facilities file ([[x, y], ...])")
        ->check(CLI::ExistingFile);
    s->add_option("--seed", sol.seed, "Random seed")->capture_default_str();
    s->add_option("--threads", sol.threads, "Worker threads (0 = FLPO_THREADS or all cores)");
    s->add_option("--report", sol.report, "Write the solve report (JSON)");
    s->add_option("--trace", sol.trace, "Write the free-energy trace (CSV)");
    s->add_flag("--no-timing", sol.no_timing, "Omit wall-clock fields from the report");
    s->add_option("--population", sol.baselines.ga.population, "GA population")->capture_default_str();
    s->add_option("--generations", sol.baselines.ga.generations, "GA generations")->capture_default_str();
    s->add_option("--sa-iterations", sol.baselines.sa.iterations, "SA iterations")->capture_default_str();
    s->add_option("--cem-population", sol.baselines.cem.population, "CEM population")->capture_default_str();
    s->add_option("--cem-iterations", sol.baselines.cem.iterations, "CEM iterations")->capture_default_str();

    BenchArgs ben;
    auto* b = app.add_subcommand("bench", "Run a benchmark suite; writes runs.csv and summary.csv");
    b->add_option("suite", ben.suite, "Suite description (JSON)")->check(CLI::ExistingFile);
    b->add_option("--instance", ben.instances, "Instance file (repeatable) when no suite is given")
        ->check(CLI::ExistingFile);
    b->add_option("--methods", ben.methods, "Methods for --instance runs")->delimiter(',')->capture_default_str();
    b->add_option("--repetitions", ben.repetitions, "Seeds per (instance, method)")->capture_default_str();
    b->add_option("--seed", ben.seed, "First seed")->capture_default_str();
    b->add_option("--output-dir", ben.output_dir, "Output directory (overrides the suite)");
    b->add_option("--parallel", ben.parallel, "Run this many cells concurrently");

    PolicyArgs pol;
    auto* p = app.add_subcommand("policy", "Exchange policies with external learners");
    p->require_subcommand(1);
    auto* req = p->add_subcommand("export-request", "Write a policy request for (instance, Y)");
    req->add_option("instance", pol.instance, "Instance file")->required()->check(CLI::ExistingFile);
    req->add_option("--facilities", pol.facilities, "Facilities file (default: centroid start)")
        ->check(CLI::ExistingFile);
    req->add_option("--seed", pol.seed, "Seed of the centroid-start jitter")->capture_default_str();
    req->add_option("-o,--output", pol.output, "Request file to write")->required();
    auto* val = p->add_subcommand("validate", "Check a policy file against its request");
    val->add_option("policy", pol.policy, "Policy file")->required()->check(CLI::ExistingFile);
    val->add_option("--request", pol.request, "Request the policy answers")->check(CLI::ExistingFile);
    val->add_option("--instance", pol.instance, "Instance file (with --facilities or the centroid start)")
        ->check(CLI::ExistingFile);
    val->add_option("--facilities", pol.facilities, "Facilities file")->check(CLI::ExistingFile);
    val->add_option("--seed", pol.seed, "Seed of the centroid-start jitter")->capture_default_str();
    auto* ex = p->add_subcommand("export-exact", "Answer a request with the exact stagewise policy");
    ex->add_option("--request", pol.request, "Request file")->required()->check(CLI::ExistingFile);
    ex->add_option("--beta", pol.beta, "Inverse temperature")->capture_default_str();
    ex->add_option("--paths", pol.paths, "Write the top-k beam paths instead of matrices");
    ex->add_option("-o,--output", pol.output, "Policy file to write")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsageExit;
    }

    try {
        if (*g) return cmd_generate(gen);
        if (*s) return cmd_solve(sol);
        if (*b) return cmd_bench(ben);
        if (*req) return cmd_export_request(pol);
        if (*val) return cmd_validate(pol);
        if (*ex) return cmd_export_exact(pol);
    } catch (const ArgumentError& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return kUsageExit;
    } catch (const std::exception& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return 1;
    }
    return kUsageExit;
}
