#pragma once

#include <cstdint>
#include <functional>
#include <optional>

#include "flpo/instance.hpp"
#include "flpo/report.hpp"

namespace flpo {

struct GaParams {
    std::size_t population = 100;
    std::size_t generations = 8000;
    double crossover_rate = 0.5;
    double mutation_rate = 0.3;
    std::size_t tournament = 3;
    double mutation_scale = 0.1;  // sigma as a fraction of the box width
};

struct SaParams {
    double initial_temperature = 1.0;
    double cooling = 0.995;
    std::size_t iterations = 50000;
    double proposal_scale = 0.05;
};

struct CemParams {
    std::size_t population = 100;
    std::size_t iterations = 2000;
    double elite_fraction = 0.2;
    double variance_floor = 1e-6;
};

struct BaselineParams {
    GaParams ga;
    SaParams sa;
    CemParams cem;
    std::uint64_t seed = 0;
    std::size_t threads = 1;
    // Starting point: GA population copies, SA state, CEM mean. Random / box centre when unset.
    std::optional<FacilityConfig> init;

    void validate() const;
};

// Objective over facility locations; defaults to flpo::fitness.
using FitnessFn = std::function<double(const FacilityConfig&)>;

SolveReport ga_solve(const Instance& inst, const BaselineParams& params, FitnessFn fit = {});
SolveReport sa_solve(const Instance& inst, const BaselineParams& params, FitnessFn fit = {});
SolveReport cem_solve(const Instance& inst, const BaselineParams& params, FitnessFn fit = {});

}  // namespace flpo
