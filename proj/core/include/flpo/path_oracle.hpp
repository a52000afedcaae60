#pragma once

#include <cstddef>
#include <vector>

#include "flpo/instance.hpp"
#include "flpo/matrix.hpp"

namespace flpo {

inline constexpr std::size_t kDefaultTrajectoryBudget = 1'000'000;

// Every absorbing trajectory of one agent's stage graph, waiting (consecutive
// repeat) variants included. Node sequences are in lexicographic order.
struct TrajectorySet {
    std::size_t facility_count = 0;
    std::vector<std::vector<NodeId>> trajectories;

    std::size_t size() const noexcept { return trajectories.size(); }
    Path path(std::size_t index, std::size_t agent) const { return Path{agent, trajectories[index]}; }
};

// sum_{j=0}^{M} M^j, saturating at SIZE_MAX.
std::size_t trajectory_count(std::size_t facility_count);

TrajectorySet enumerate_trajectories(std::size_t facility_count,
                                     std::size_t budget = kDefaultTrajectoryBudget);

// Path-level Gibbs distribution over `set` for one agent.
std::vector<double> exact_path_gibbs(const Instance& inst, const FacilityConfig& y, double beta,
                                     std::size_t agent, const TrajectorySet& set);

struct OracleFreeEnergy {
    double closed_form = 0.0;   // -(1/beta) sum_i rho_i log sum exp(-beta d)
    double definitional = 0.0;  // sum_i rho_i sum p (d + log(p)/beta)
};

OracleFreeEnergy exact_free_energy_forms(const Instance& inst, const FacilityConfig& y, double beta,
                                         std::size_t budget = kDefaultTrajectoryBudget);

// Closed form, after checking it against the definitional form (1e-10 relative).
double exact_free_energy(const Instance& inst, const FacilityConfig& y, double beta,
                         std::size_t budget = kDefaultTrajectoryBudget);

Matrix exact_gradient(const Instance& inst, const FacilityConfig& y, double beta,
                      std::size_t budget = kDefaultTrajectoryBudget);

// Minimum-cost trajectory; ties go to fewer facility stages, then lexicographic order.
Path exact_shortest_path(const Instance& inst, const FacilityConfig& y, std::size_t agent,
                         std::size_t budget = kDefaultTrajectoryBudget);

// Shannon entropy (nats) of a distribution.
double entropy(const std::vector<double>& p);

}  // namespace flpo
