#include "flpo/anneal.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <cmath>

#include "flpo/path_oracle.hpp"
#include "flpo/stagewise_dp.hpp"

namespace flpo {

std::string to_string(Backend b) {
    switch (b) {
        case Backend::ExactDp: return "exact-dp";
        case Backend::Mixture: return "mixture";
        case Backend::Oracle: return "oracle";
    }
    return "unknown";
}

Backend backend_from_string(const std::string& name) {
    if (name == "exact-dp") return Backend::ExactDp;
    if (name == "mixture") return Backend::Mixture;
    if (name == "oracle") return Backend::Oracle;
    throw ArgumentError(fmt::format("unknown backend '{}' (expected exact-dp, mixture or oracle)", name));
}

void AnnealConfig::validate() const {
    if (!(beta_start > 0.0) || !(beta_start <= beta_end) || !std::isfinite(beta_end))
        throw ArgumentError("need 0 < beta_start <= beta_end < inf");
    if (!(growth > 1.0)) throw ArgumentError("growth must exceed 1");
    if (!(step_size > 0.0)) throw ArgumentError("step_size must be positive");
    if (!(tol >= 0.0)) throw ArgumentError("tol must be nonnegative");
    if (mixture.b > mixture.L || mixture.L == 0) throw ArgumentError("need 0 <= b <= L and L >= 1");
}

namespace {

std::string source_name(const PolicySource& s) {
    switch (s.kind()) {
        case PolicySource::Kind::ExactDp: return "exact-dp";
        case PolicySource::Kind::Uniform: return "uniform";
        case PolicySource::Kind::External: return s.replays_paths() ? "external-paths" : "external-matrix";
    }
    return "unknown";
}

}  // namespace

std::string AnnealConfig::to_json() const {
    return fmt::format(
        "{{\"method\": \"mep\", \"beta_start\": {}, \"beta_end\": {}, \"growth\": {}, \"inner_iters\": {}, "
        "\"step_size\": {}, \"tol\": {}, \"backend\": \"{}\", \"source\": \"{}\", \"b\": {}, \"L\": {}, "
        "\"dedup\": {}, \"sample_policy\": {}, \"clip_domain\": {}, \"init_jitter\": {}, \"seed\": {}}}",
        format_double(beta_start), format_double(beta_end), format_double(growth), inner_iters,
        format_double(step_size), format_double(tol), to_string(backend), source_name(source), mixture.b, mixture.L,
        mixture.dedup, mixture.sample_policy, clip_domain, format_double(init_jitter), seed);
}

std::vector<double> beta_schedule(const AnnealConfig& cfg) {
    cfg.validate();
    std::vector<double> out;
    for (std::size_t k = 0;; ++k) {
        const double b = cfg.beta_start * std::pow(cfg.growth, static_cast<double>(k));
        // Values within rounding of beta_end are replaced by beta_end itself.
        if (b >= cfg.beta_end * (1.0 - 1e-9)) break;
        out.push_back(b);
    }
    out.push_back(cfg.beta_end);
    return out;
}

Extraction extract_solution(const Instance& inst, const FacilityConfig& y, const PolicySource& source, double beta) {
    inst.check_config(y);
    Extraction ex;
    for (std::size_t i = 0; i < inst.agent_count(); ++i) {
        Path p;
        if (source.replays_paths()) {
            const auto top = source.top_paths(inst, y, beta, i, 1);
            if (top.empty()) throw PolicyError(fmt::format("external policy lists no path for agent {}", i));
            p = top.front();
        } else {
            p = greedy_rollout(source.matrix(inst, y, beta, i), inst, i);
        }
        ex.cost += inst.weight(i) * path_cost(inst, y, p);
        ex.paths.push_back(canonicalize(p));
    }
    return ex;
}

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

struct Step {
    double free_energy = 0.0;
    Matrix gradient;
};

Step evaluate(const Instance& inst, const FacilityConfig& y, double beta, const AnnealConfig& cfg,
              std::size_t beta_index, std::size_t iter) {
    switch (cfg.backend) {
        case Backend::ExactDp: {
            FreeEnergyGradient fg = free_energy_and_gradient(inst, y, beta, cfg.threads);
            return {fg.free_energy, std::move(fg.gradient)};
        }
        case Backend::Oracle:
            return {exact_free_energy(inst, y, beta), exact_gradient(inst, y, beta)};
        case Backend::Mixture: {
            MixtureEstimate est = estimate_gradient(inst, y, beta, cfg.source, cfg.mixture,
                                                    SampleStream{cfg.seed, beta_index, iter}, cfg.threads);
            return {est.sample_free_energy, std::move(est.gradient)};
        }
    }
    throw ArgumentError("unknown backend");
}

// Mixture runs with an external source extract from that policy; everything
// else uses the exact stagewise policy.
PolicySource extraction_source(const AnnealConfig& cfg) {
    if (cfg.backend == Backend::Mixture && cfg.source.kind() == PolicySource::Kind::External) return cfg.source;
    return PolicySource::exact_dp();
}

}  // namespace

SolveReport solve(const Instance& inst, std::optional<FacilityConfig> y0, const AnnealConfig& cfg,
                  const IterateObserver& observer) {
    cfg.validate();
    const auto t0 = Clock::now();
    FacilityConfig y = y0 ? std::move(*y0) : centroid_init(inst, cfg.seed, cfg.init_jitter);
    inst.check_config(y);

    SolveReport report;
    report.method = "mep";
    report.seed = cfg.seed;
    report.config_json = cfg.to_json();

    const std::vector<double> betas = beta_schedule(cfg);
    const Bounds& box = inst.bounds();
    const std::size_t d = inst.dim();
    for (std::size_t bi = 0; bi < betas.size(); ++bi) {
        const double beta = betas[bi];
        const auto tb = Clock::now();
        for (std::size_t it = 0; it < cfg.inner_iters; ++it) {
            const auto ti = Clock::now();
            if (observer) observer(bi, it, y);
            Step step;
            try {
                step = evaluate(inst, y, beta, cfg, bi, it);
            } catch (const NumericError& e) {
                throw NumericError(fmt::format("beta {} (step {}), iteration {}: {}", beta, bi, it, e.what()));
            }
            if (!step.gradient.all_finite() || !std::isfinite(step.free_energy))
                throw NumericError(fmt::format("beta {} (step {}), iteration {}: non-finite gradient", beta, bi, it));

            double delta = 0.0;
            Matrix& loc = y.matrix();
            for (std::size_t j = 0; j < loc.rows(); ++j) {
                for (std::size_t c = 0; c < d; ++c) {
                    double v = loc(j, c) - cfg.step_size * step.gradient(j, c);
                    if (cfg.clip_domain) v = std::clamp(v, box.lo[c], box.hi[c]);
                    delta = std::max(delta, std::abs(v - loc(j, c)));
                    loc(j, c) = v;
                }
            }
            report.trace.push_back(
                TracePoint{beta, it, step.free_energy, step.gradient.frobenius_norm(), elapsed_ms(ti)});
            if (delta < cfg.tol) break;
        }
        report.beta_wall_ms.push_back(elapsed_ms(tb));
    }

    const Extraction ex = extract_solution(inst, y, extraction_source(cfg), betas.back());
    report.facilities = std::move(y);
    report.paths = ex.paths;
    report.cost = ex.cost;
    report.wall_ms = elapsed_ms(t0);
    return report;
}

}  // namespace flpo
