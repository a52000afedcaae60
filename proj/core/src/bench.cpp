#include "flpo/bench.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <fstream>
#include <mutex>
#include <sstream>

#include <json.hpp>

#include "flpo/hash.hpp"
#include "flpo/parallel.hpp"

namespace flpo {

const std::vector<std::string>& known_methods() {
    static const std::vector<std::string> m{"mep-annealed", "mep-high-beta", "mep-mixture", "ga", "sa", "cem"};
    return m;
}

MethodConfig method_defaults(const std::string& method, MethodConfig base) {
    AnnealConfig& a = base.anneal;
    if (method == "mep-annealed") {
        a.beta_start = 1e-3;
        a.beta_end = 1e4;
        a.backend = Backend::ExactDp;
        if (base.init == MethodConfig::Init::Default) base.init = MethodConfig::Init::Centroid;
    } else if (method == "mep-high-beta") {
        a.beta_start = 1e4;
        a.beta_end = 1e4;
        a.backend = Backend::ExactDp;
        if (base.init == MethodConfig::Init::Default) base.init = MethodConfig::Init::Random;
    } else if (method == "mep-mixture") {
        a.beta_start = 1e-3;
        a.beta_end = 1e4;
        a.backend = Backend::Mixture;
        if (base.init == MethodConfig::Init::Default) base.init = MethodConfig::Init::Centroid;
    } else if (method != "ga" && method != "sa" && method != "cem") {
        throw ArgumentError(fmt::format("unknown method '{}'", method));
    }
    return base;
}

std::string config_echo(const std::string& method, const MethodConfig& cfg) {
    if (method == "ga" || method == "sa" || method == "cem") {
        const BaselineParams& p = cfg.baselines;
        return fmt::format(
            "{{\"method\": \"{}\", \"ga\": [{}, {}, {}, {}], \"sa\": [{}, {}, {}], \"cem\": [{}, {}, {}]}}", method,
            p.ga.population, p.ga.generations, format_double(p.ga.crossover_rate), format_double(p.ga.mutation_rate),
            format_double(p.sa.initial_temperature), format_double(p.sa.cooling), p.sa.iterations,
            p.cem.population, p.cem.iterations, format_double(p.cem.elite_fraction));
    }
    const char* init = cfg.init == MethodConfig::Init::Random ? "random" : "centroid";
    return fmt::format("{{\"method\": \"{}\", \"init\": \"{}\", \"anneal\": {}}}", method, init, cfg.anneal.to_json());
}

SolveReport run_method(const Instance& inst, const std::string& method, const MethodConfig& cfg_in,
                       std::uint64_t seed) {
    const MethodConfig cfg = method_defaults(method, cfg_in);
    if (method == "ga" || method == "sa" || method == "cem") {
        BaselineParams p = cfg.baselines;
        p.seed = seed;
        SolveReport r = method == "ga" ? ga_solve(inst, p) : method == "sa" ? sa_solve(inst, p) : cem_solve(inst, p);
        r.method = method;
        return r;
    }
    AnnealConfig a = cfg.anneal;
    a.seed = seed;
    std::optional<FacilityConfig> y0;
    if (cfg.init == MethodConfig::Init::Random) y0 = random_init(inst, seed);
    SolveReport r = solve(inst, std::move(y0), a);
    r.method = method;
    return r;
}

namespace {

std::string sanitize(std::string s) {
    for (char& c : s)
        if (c == ',' || c == '\n' || c == '\r' || c == '"') c = ' ';
    return s;
}

double median(std::vector<double> v) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

BenchResult run_benchmark(const BenchSuite& suite) {
    struct Cell {
        const BenchEntry* entry;
        std::uint64_t seed;
    };
    std::vector<Cell> cells;
    for (const BenchEntry& e : suite.entries)
        for (std::size_t r = 0; r < e.repetitions; ++r) cells.push_back({&e, e.seed_base + r});

    BenchResult result;
    result.rows.resize(cells.size());
    const std::size_t workers = std::max<std::size_t>(1, suite.parallel);
    parallel_for(cells.size(), workers, [&](std::size_t k) {
        const Cell& c = cells[k];
        BenchRow& row = result.rows[k];
        row.instance = c.entry->label;
        row.method = c.entry->method;
        row.seed = c.seed;
        MethodConfig cfg = c.entry->config;
        if (workers > 1) {
            cfg.anneal.threads = 1;
            cfg.baselines.threads = 1;
        }
        row.config_hash = hash_to_hex(fnv1a64(config_echo(c.entry->method, method_defaults(c.entry->method, cfg))));
        try {
            const SolveReport rep = run_method(c.entry->instance, c.entry->method, cfg, c.seed);
            row.status = "ok";
            row.cost = rep.cost;
            row.wall_ms = rep.wall_ms;
        } catch (const std::exception& ex) {
            row.status = "error:" + sanitize(ex.what());
            row.cost = std::numeric_limits<double>::quiet_NaN();
        }
    });

    for (const BenchRow& row : result.rows) {
        auto it = std::find_if(result.summary.begin(), result.summary.end(), [&](const BenchSummary& s) {
            return s.instance == row.instance && s.method == row.method;
        });
        if (it == result.summary.end()) {
            result.summary.push_back(BenchSummary{row.instance, row.method});
            it = result.summary.end() - 1;
        }
        ++it->runs;
    }
    for (BenchSummary& s : result.summary) {
        std::vector<double> costs, walls;
        for (const BenchRow& row : result.rows) {
            if (row.instance != s.instance || row.method != s.method || row.status != "ok") continue;
            costs.push_back(row.cost);
            walls.push_back(row.wall_ms);
        }
        s.ok = costs.size();
        s.min_cost = costs.empty() ? std::numeric_limits<double>::quiet_NaN() : *std::min_element(costs.begin(), costs.end());
        s.median_cost = median(costs);
        s.min_wall_ms = walls.empty() ? std::numeric_limits<double>::quiet_NaN() : *std::min_element(walls.begin(), walls.end());
        s.median_wall_ms = median(walls);
    }
    return result;
}

std::string bench_csv(const std::vector<BenchRow>& rows) {
    std::string out = std::string(kBenchCsvHeader) + "\n";
    for (const BenchRow& r : rows)
        out += fmt::format("{},{},{},{},{},{},{}\n", sanitize(r.instance), sanitize(r.method), r.seed, r.status,
                           format_double(r.cost), fmt::format("{:.3f}", r.wall_ms), r.config_hash);
    return out;
}

std::string summary_csv(const std::vector<BenchSummary>& summary) {
    std::string out = "instance,method,runs,ok,min_cost,median_cost,min_wall_ms,median_wall_ms\n";
    for (const BenchSummary& s : summary)
        out += fmt::format("{},{},{},{},{},{},{:.3f},{:.3f}\n", sanitize(s.instance), sanitize(s.method), s.runs, s.ok,
                           format_double(s.min_cost), format_double(s.median_cost), s.min_wall_ms, s.median_wall_ms);
    return out;
}

std::string summary_table(const std::vector<BenchSummary>& summary) {
    std::string out = fmt::format("{:<16} {:<14} {:>5} {:>12} {:>12} {:>12} {:>12}\n", "instance", "method", "ok",
                                  "min_cost", "median_cost", "min_ms", "median_ms");
    for (const BenchSummary& s : summary)
        out += fmt::format("{:<16} {:<14} {:>2}/{:<2} {:>12.6f} {:>12.6f} {:>12.1f} {:>12.1f}\n", s.instance, s.method,
                           s.ok, s.runs, s.min_cost, s.median_cost, s.min_wall_ms, s.median_wall_ms);
    return out;
}

void write_bench_outputs(const BenchSuite& suite, const BenchResult& result) {
    std::filesystem::create_directories(suite.output_dir);
    auto write = [](const std::filesystem::path& p, const std::string& text) {
        std::ofstream out(p, std::ios::binary);
        if (!out) throw Error(fmt::format("cannot write '{}'", p.string()));
        out << text;
    };
    write(suite.output_dir / "runs.csv", bench_csv(result.rows));
    write(suite.output_dir / "summary.csv", summary_csv(result.summary));
}

namespace {

using nlohmann::json;

template <typename T>
void maybe(const json& obj, const char* key, T& out) {
    if (auto it = obj.find(key); it != obj.end()) out = it->get<T>();
}

void apply_overrides(const json& o, MethodConfig& cfg) {
    if (auto it = o.find("anneal"); it != o.end()) {
        AnnealConfig& a = cfg.anneal;
        maybe(*it, "inner_iters", a.inner_iters);
        maybe(*it, "step_size", a.step_size);
        maybe(*it, "tol", a.tol);
        maybe(*it, "growth", a.growth);
        maybe(*it, "b", a.mixture.b);
        maybe(*it, "L", a.mixture.L);
        maybe(*it, "dedup", a.mixture.dedup);
        maybe(*it, "clip_domain", a.clip_domain);
    }
    if (auto it = o.find("ga"); it != o.end()) {
        maybe(*it, "population", cfg.baselines.ga.population);
        maybe(*it, "generations", cfg.baselines.ga.generations);
        maybe(*it, "crossover_rate", cfg.baselines.ga.crossover_rate);
        maybe(*it, "mutation_rate", cfg.baselines.ga.mutation_rate);
    }
    if (auto it = o.find("sa"); it != o.end()) {
        maybe(*it, "initial_temperature", cfg.baselines.sa.initial_temperature);
        maybe(*it, "cooling", cfg.baselines.sa.cooling);
        maybe(*it, "iterations", cfg.baselines.sa.iterations);
    }
    if (auto it = o.find("cem"); it != o.end()) {
        maybe(*it, "population", cfg.baselines.cem.population);
        maybe(*it, "iterations", cfg.baselines.cem.iterations);
        maybe(*it, "elite_fraction", cfg.baselines.cem.elite_fraction);
    }
}

}  // namespace

BenchSuite load_suite(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw Error(fmt::format("cannot read '{}'", file.string()));
    std::stringstream ss;
    ss << in.rdbuf();
    BenchSuite suite;
    try {
        const json doc = json::parse(ss.str());
        suite.output_dir = doc.value("output_dir", std::string("bench-out"));
        suite.parallel = doc.value("parallel", std::size_t{1});
        const json& entries = doc.at("entries");
        for (std::size_t k = 0; k < entries.size(); ++k) {
            const json& e = entries[k];
            const json& ji = e.at("instance");
            std::optional<Instance> inst;
            std::string label;
            if (ji.is_string()) {
                std::filesystem::path p = ji.get<std::string>();
                if (p.is_relative()) p = file.parent_path() / p;
                inst = load_instance(p);
                label = p.stem().string();
            } else {
                const json& g = ji.at("generate");
                const std::size_t dim = g.value("dim", std::size_t{2});
                const std::uint64_t seed = g.value("seed", std::uint64_t{0});
                inst = generate_instance(g.at("agents").get<std::size_t>(), g.at("facilities").get<std::size_t>(), dim,
                                         unit_box(dim), seed);
                label = fmt::format("gen-n{}-m{}-s{}", inst->agent_count(), inst->facility_count(), seed);
            }
            label = e.value("label", label);
            MethodConfig base;
            if (auto it = e.find("overrides"); it != e.end()) apply_overrides(*it, base);
            for (const json& jm : e.at("methods")) {
                const std::string method = jm.get<std::string>();
                method_defaults(method);  // rejects unknown names early
                suite.entries.push_back(BenchEntry{label, *inst, method, base, e.value("repetitions", std::size_t{1}),
                                                   e.value("seed", std::uint64_t{0})});
            }
        }
    } catch (const json::exception& e) {
        throw ParseError(fmt::format("suite '{}': {}", file.string(), e.what()), "");
    }
    return suite;
}

}  // namespace flpo
