#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "flpo/instance.hpp"
#include "flpo/mixture_gradient.hpp"
#include "flpo/report.hpp"

namespace flpo {

enum class Backend { ExactDp, Mixture, Oracle };

std::string to_string(Backend b);
Backend backend_from_string(const std::string& name);

struct AnnealConfig {
    double beta_start = 1e-3;
    double beta_end = 1e3;
    double growth = 10.0;
    std::size_t inner_iters = 100;
    double step_size = 0.01;
    double tol = 1e-3;
    Backend backend = Backend::ExactDp;
    PolicySource source = PolicySource::exact_dp();
    MixtureOptions mixture{};
    std::uint64_t seed = 0;
    std::size_t threads = 1;
    bool clip_domain = false;
    double init_jitter = 1e-4;

    void validate() const;
    std::string to_json() const;
};

// beta_start * growth^k while below beta_end, then beta_end itself.
std::vector<double> beta_schedule(const AnnealConfig& cfg);

// Called before every inner step with the iterate the gradient is taken at.
using IterateObserver = std::function<void(std::size_t beta_index, std::size_t iter, const FacilityConfig& y)>;

// Annealed gradient descent on facility locations. Y0 defaults to centroid_init(inst, cfg.seed).
SolveReport solve(const Instance& inst, std::optional<FacilityConfig> y0, const AnnealConfig& cfg,
                  const IterateObserver& observer = {});

struct Extraction {
    std::vector<CanonicalPath> paths;
    double cost = 0.0;
};

// Per-agent greedy rollout of the source's policy at `beta`; cost is the weighted hard cost.
Extraction extract_solution(const Instance& inst, const FacilityConfig& y, const PolicySource& source, double beta);

}  // namespace flpo
