#include "flpo/baselines.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

#include "flpo/parallel.hpp"
#include "flpo/rng.hpp"
#include "flpo/shortest_path.hpp"

namespace flpo {

void BaselineParams::validate() const {
    auto rate = [](double r, const char* name) {
        if (!(r >= 0.0 && r <= 1.0)) throw ArgumentError(fmt::format("{} must lie in [0, 1]", name));
    };
    rate(ga.crossover_rate, "crossover_rate");
    rate(ga.mutation_rate, "mutation_rate");
    rate(cem.elite_fraction, "elite_fraction");
    if (ga.population < 2 || cem.population < 2) throw ArgumentError("population sizes must be at least 2");
    if (ga.tournament < 1) throw ArgumentError("tournament size must be at least 1");
    if (!(sa.cooling > 0.0 && sa.cooling < 1.0)) throw ArgumentError("cooling must lie in (0, 1)");
    if (!(sa.initial_temperature >= 0.0)) throw ArgumentError("initial temperature must be nonnegative");
    if (!(cem.variance_floor > 0.0)) throw ArgumentError("variance floor must be positive");
}

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

using Genome = std::vector<double>;

struct Problem {
    const Instance& inst;
    FitnessFn fit;
    std::size_t m;
    std::size_t d;

    FacilityConfig decode(const Genome& g) const {
        Matrix mat(m, d);
        std::copy(g.begin(), g.end(), mat.flat().begin());
        return FacilityConfig(std::move(mat));
    }

    Genome encode(const FacilityConfig& y) const {
        inst.check_config(y);
        return Genome(y.matrix().flat().begin(), y.matrix().flat().end());
    }

    double eval(const Genome& g) const { return fit(decode(g)); }

    double lo(std::size_t gene) const { return inst.bounds().lo[gene % d]; }
    double hi(std::size_t gene) const { return inst.bounds().hi[gene % d]; }
    double width(std::size_t gene) const { return hi(gene) - lo(gene); }
    double clip(std::size_t gene, double v) const { return std::clamp(v, lo(gene), hi(gene)); }

    Genome random(Rng& rng) const {
        std::uniform_real_distribution<double> u(0.0, 1.0);
        Genome g(m * d);
        for (std::size_t k = 0; k < g.size(); ++k) g[k] = lo(k) + u(rng) * width(k);
        return g;
    }
};

Problem make_problem(const Instance& inst, FitnessFn fit) {
    if (!fit) fit = [&inst](const FacilityConfig& y) { return fitness(inst, y); };
    return Problem{inst, std::move(fit), inst.facility_count(), inst.dim()};
}

void evaluate_all(const Problem& pb, const std::vector<Genome>& pop, std::vector<double>& out, std::size_t threads) {
    out.resize(pop.size());
    parallel_for(pop.size(), threads, [&](std::size_t k) { out[k] = pb.eval(pop[k]); });
}

SolveReport finish(const Instance& inst, const Problem& pb, std::string method, const Genome& best,
                   const BaselineParams& params, std::string config) {
    SolveReport r;
    r.method = std::move(method);
    r.facilities = pb.decode(best);
    r.seed = params.seed;
    r.config_json = std::move(config);
    for (std::size_t i = 0; i < inst.agent_count(); ++i)
        r.paths.push_back(canonicalize(shortest_path(inst, r.facilities, i)));
    r.cost = recompute_cost(inst, r);
    return r;
}

}  // namespace

SolveReport ga_solve(const Instance& inst, const BaselineParams& params, FitnessFn fit) {
    params.validate();
    const auto t0 = Clock::now();
    const Problem pb = make_problem(inst, std::move(fit));
    const GaParams& ga = params.ga;
    Rng rng(substream_seed({params.seed, 0x6a}));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_int_distribution<std::size_t> pick(0, ga.population - 1);

    std::vector<Genome> pop(ga.population);
    for (auto& g : pop) g = params.init ? pb.encode(*params.init) : pb.random(rng);
    std::vector<double> fit_values;
    evaluate_all(pb, pop, fit_values, params.threads);

    auto argmin = [](const std::vector<double>& v) {
        return static_cast<std::size_t>(std::min_element(v.begin(), v.end()) - v.begin());
    };
    std::size_t best_idx = argmin(fit_values);
    Genome best = pop[best_idx];
    double best_fit = fit_values[best_idx];

    SolveReport partial;
    partial.best_history.reserve(ga.generations);
    auto tournament = [&]() {
        std::size_t winner = pick(rng);
        for (std::size_t t = 1; t < ga.tournament; ++t) {
            const std::size_t c = pick(rng);
            if (fit_values[c] < fit_values[winner]) winner = c;
        }
        return winner;
    };

    std::vector<Genome> next(ga.population);
    for (std::size_t gen = 0; gen < ga.generations; ++gen) {
        next[0] = pop[argmin(fit_values)];
        for (std::size_t k = 1; k < ga.population; ++k) {
            const Genome& a = pop[tournament()];
            const Genome& b = pop[tournament()];
            Genome child = a;
            if (u(rng) < ga.crossover_rate) {
                for (std::size_t q = 0; q < child.size(); ++q)
                    if (u(rng) < 0.5) child[q] = b[q];
            }
            for (std::size_t q = 0; q < child.size(); ++q) {
                if (u(rng) < ga.mutation_rate)
                    child[q] = pb.clip(q, child[q] + ga.mutation_scale * pb.width(q) * normal(rng));
            }
            next[k] = std::move(child);
        }
        std::swap(pop, next);
        evaluate_all(pb, pop, fit_values, params.threads);
        best_idx = argmin(fit_values);
        if (fit_values[best_idx] < best_fit) {
            best_fit = fit_values[best_idx];
            best = pop[best_idx];
        }
        partial.best_history.push_back(best_fit);
    }

    const std::string config = fmt::format(
        "{{\"method\": \"ga\", \"population\": {}, \"generations\": {}, \"crossover_rate\": {}, "
        "\"mutation_rate\": {}, \"tournament\": {}, \"mutation_scale\": {}}}",
        ga.population, ga.generations, format_double(ga.crossover_rate), format_double(ga.mutation_rate),
        ga.tournament, format_double(ga.mutation_scale));
    SolveReport r = finish(inst, pb, "ga", best, params, config);
    r.best_history = std::move(partial.best_history);
    r.stats.emplace_back("best_fitness", best_fit);
    r.wall_ms = elapsed_ms(t0);
    return r;
}

SolveReport sa_solve(const Instance& inst, const BaselineParams& params, FitnessFn fit) {
    params.validate();
    const auto t0 = Clock::now();
    const Problem pb = make_problem(inst, std::move(fit));
    const SaParams& sa = params.sa;
    Rng rng(substream_seed({params.seed, 0x5a}));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);

    Genome cur = params.init ? pb.encode(*params.init) : pb.random(rng);
    double cur_fit = pb.eval(cur);
    Genome best = cur;
    double best_fit = cur_fit;
    std::size_t accepted = 0;
    std::size_t accepted_uphill = 0;
    std::vector<double> history;
    history.reserve(sa.iterations);

    double temperature = sa.initial_temperature;
    Genome cand(cur.size());
    for (std::size_t it = 0; it < sa.iterations; ++it) {
        for (std::size_t q = 0; q < cur.size(); ++q)
            cand[q] = pb.clip(q, cur[q] + sa.proposal_scale * pb.width(q) * normal(rng));
        const double cand_fit = pb.eval(cand);
        const double delta = cand_fit - cur_fit;
        const double draw = u(rng);
        const bool accept = delta <= 0.0 || (temperature > 0.0 && draw < std::exp(-delta / temperature));
        if (accept) {
            ++accepted;
            if (delta > 0.0) ++accepted_uphill;
            cur.swap(cand);
            cur_fit = cand_fit;
            if (cur_fit < best_fit) {
                best_fit = cur_fit;
                best = cur;
            }
        }
        history.push_back(best_fit);
        temperature *= sa.cooling;
    }

    const std::string config = fmt::format(
        "{{\"method\": \"sa\", \"initial_temperature\": {}, \"cooling\": {}, \"iterations\": {}, "
        "\"proposal_scale\": {}}}",
        format_double(sa.initial_temperature), format_double(sa.cooling), sa.iterations,
        format_double(sa.proposal_scale));
    SolveReport r = finish(inst, pb, "sa", best, params, config);
    r.best_history = std::move(history);
    r.stats.emplace_back("accepted", static_cast<double>(accepted));
    r.stats.emplace_back("accepted_uphill", static_cast<double>(accepted_uphill));
    r.stats.emplace_back("best_fitness", best_fit);
    r.wall_ms = elapsed_ms(t0);
    return r;
}

SolveReport cem_solve(const Instance& inst, const BaselineParams& params, FitnessFn fit) {
    params.validate();
    const auto t0 = Clock::now();
    const Problem pb = make_problem(inst, std::move(fit));
    const CemParams& cem = params.cem;
    const std::size_t genes = pb.m * pb.d;
    Rng rng(substream_seed({params.seed, 0xce}));
    std::normal_distribution<double> normal(0.0, 1.0);

    Genome mean(genes);
    Genome var(genes);
    for (std::size_t q = 0; q < genes; ++q) {
        mean[q] = 0.5 * (pb.lo(q) + pb.hi(q));
        const double sd = 0.5 * pb.width(q);
        var[q] = std::max(sd * sd, cem.variance_floor);
    }
    if (params.init) mean = pb.encode(*params.init);

    const std::size_t elite = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::ceil(cem.elite_fraction * static_cast<double>(cem.population))));
    std::vector<Genome> pop(cem.population, Genome(genes));
    std::vector<double> fit_values;
    std::vector<std::size_t> order(cem.population);
    double best_fit = std::numeric_limits<double>::infinity();
    std::vector<double> history;
    history.reserve(cem.iterations);
    std::size_t floor_hits = 0;

    for (std::size_t it = 0; it < cem.iterations; ++it) {
        for (auto& g : pop)
            for (std::size_t q = 0; q < genes; ++q) g[q] = pb.clip(q, mean[q] + std::sqrt(var[q]) * normal(rng));
        evaluate_all(pb, pop, fit_values, params.threads);
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return fit_values[a] < fit_values[b]; });
        best_fit = std::min(best_fit, fit_values[order[0]]);
        for (std::size_t q = 0; q < genes; ++q) {
            double mu = 0.0;
            for (std::size_t e = 0; e < elite; ++e) mu += pop[order[e]][q];
            mu /= static_cast<double>(elite);
            double v = 0.0;
            for (std::size_t e = 0; e < elite; ++e) {
                const double diff = pop[order[e]][q] - mu;
                v += diff * diff;
            }
            v /= static_cast<double>(elite);
            if (v < cem.variance_floor) ++floor_hits;
            mean[q] = mu;
            var[q] = std::max(v, cem.variance_floor);
        }
        history.push_back(best_fit);
    }

    const std::string config = fmt::format(
        "{{\"method\": \"cem\", \"population\": {}, \"iterations\": {}, \"elite_fraction\": {}, "
        "\"variance_floor\": {}}}",
        cem.population, cem.iterations, format_double(cem.elite_fraction), format_double(cem.variance_floor));
    SolveReport r = finish(inst, pb, "cem", mean, params, config);
    r.best_history = std::move(history);
    r.stats.emplace_back("best_sample_fitness", best_fit);
    r.stats.emplace_back("variance_floor_hits", static_cast<double>(floor_hits));
    r.wall_ms = elapsed_ms(t0);
    return r;
}

}  // namespace flpo
