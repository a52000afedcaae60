#pragma once

#include <cstddef>

#include "flpo/instance.hpp"

namespace flpo {

// Exact minimum trajectory cost for one agent by backward min-plus value
// iteration over the stage graph (the zero-temperature limit of the soft
// recursion). Iteration stops early once the values reach a fixed point.
double shortest_path_cost(const Instance& inst, const FacilityConfig& y, std::size_t agent);

// A minimum-cost trajectory. Ties prefer the destination, then the lowest facility.
Path shortest_path(const Instance& inst, const FacilityConfig& y, std::size_t agent);

// Weighted sum of per-agent shortest trajectory costs: the hard objective at optimal routes.
double fitness(const Instance& inst, const FacilityConfig& y);

}  // namespace flpo
