#include "flpo/path_oracle.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>

namespace flpo {

std::size_t trajectory_count(std::size_t facility_count) {
    constexpr std::size_t kMax = std::numeric_limits<std::size_t>::max();
    std::size_t total = 0;
    std::size_t term = 1;
    for (std::size_t j = 0; j <= facility_count; ++j) {
        if (total > kMax - term) return kMax;
        total += term;
        if (j < facility_count) {
            if (term > kMax / facility_count) return kMax;
            term *= facility_count;
        }
    }
    return total;
}

TrajectorySet enumerate_trajectories(std::size_t facility_count, std::size_t budget) {
    if (facility_count == 0) throw ArgumentError("facility_count must be at least 1");
    const std::size_t required = trajectory_count(facility_count);
    if (required > budget)
        throw GuardError(fmt::format("M={} needs {} trajectories, budget is {}; use a DP backend or raise the budget",
                                     facility_count, required, budget));
    const NodeId dest = facility_count + 1;
    TrajectorySet set{facility_count, {}};
    set.trajectories.reserve(required);
    std::vector<NodeId> cur(facility_count + 2, dest);
    cur[0] = kStartNode;
    // Depth-first with successors 1..M+1 in ascending order gives lexicographic output.
    auto rec = [&](auto&& self, std::size_t stage) -> void {
        if (stage > facility_count) {
            set.trajectories.push_back(cur);
            return;
        }
        for (NodeId nx = 1; nx <= dest; ++nx) {
            if (nx == dest) {
                std::fill(cur.begin() + static_cast<std::ptrdiff_t>(stage), cur.end(), dest);
                set.trajectories.push_back(cur);
            } else {
                cur[stage] = nx;
                self(self, stage + 1);
            }
        }
    };
    rec(rec, 1);
    return set;
}

namespace {

std::vector<double> costs_of(const Instance& inst, const FacilityConfig& y, std::size_t agent,
                             const TrajectorySet& set) {
    std::vector<double> c(set.size());
    for (std::size_t t = 0; t < set.size(); ++t) c[t] = path_cost(inst, y, set.path(t, agent));
    return c;
}

void check_beta(double beta) {
    if (!(beta > 0.0) || !std::isfinite(beta))
        throw ArgumentError(fmt::format("beta must be positive and finite, got {}", beta));
}

}  // namespace

std::vector<double> exact_path_gibbs(const Instance& inst, const FacilityConfig& y, double beta,
                                     std::size_t agent, const TrajectorySet& set) {
    check_beta(beta);
    const std::vector<double> c = costs_of(inst, y, agent, set);
    const double lo = *std::min_element(c.begin(), c.end());
    std::vector<double> p(c.size());
    double sum = 0.0;
    for (std::size_t t = 0; t < c.size(); ++t) {
        p[t] = std::exp(-beta * (c[t] - lo));
        sum += p[t];
    }
    for (double& v : p) v /= sum;
    return p;
}

OracleFreeEnergy exact_free_energy_forms(const Instance& inst, const FacilityConfig& y, double beta,
                                         std::size_t budget) {
    check_beta(beta);
    inst.check_config(y);
    const TrajectorySet set = enumerate_trajectories(inst.facility_count(), budget);
    OracleFreeEnergy out;
    for (std::size_t i = 0; i < inst.agent_count(); ++i) {
        const std::vector<double> c = costs_of(inst, y, i, set);
        const double lo = *std::min_element(c.begin(), c.end());
        double z = 0.0;
        for (double v : c) z += std::exp(-beta * (v - lo));
        out.closed_form += inst.weight(i) * (lo - std::log(z) / beta);

        double def = 0.0;
        for (double v : c) {
            const double log_p = -beta * (v - lo) - std::log(z);
            const double p = std::exp(log_p);
            def += p * (v + log_p / beta);
        }
        out.definitional += inst.weight(i) * def;
    }
    return out;
}

double exact_free_energy(const Instance& inst, const FacilityConfig& y, double beta, std::size_t budget) {
    const OracleFreeEnergy f = exact_free_energy_forms(inst, y, beta, budget);
    if (std::abs(f.closed_form - f.definitional) > 1e-10 * (1.0 + std::abs(f.closed_form)))
        throw NumericError(fmt::format("oracle free energy forms disagree: {} vs {}", f.closed_form, f.definitional));
    return f.closed_form;
}

Matrix exact_gradient(const Instance& inst, const FacilityConfig& y, double beta, std::size_t budget) {
    check_beta(beta);
    inst.check_config(y);
    const TrajectorySet set = enumerate_trajectories(inst.facility_count(), budget);
    Matrix total(inst.facility_count(), inst.dim());
    for (std::size_t i = 0; i < inst.agent_count(); ++i) {
        const std::vector<double> p = exact_path_gibbs(inst, y, beta, i, set);
        Matrix g(inst.facility_count(), inst.dim());
        for (std::size_t t = 0; t < set.size(); ++t) accumulate_path_gradient(inst, y, set.path(t, i), p[t], g);
        total.axpy(inst.weight(i), g);
    }
    return total;
}

Path exact_shortest_path(const Instance& inst, const FacilityConfig& y, std::size_t agent, std::size_t budget) {
    inst.check_config(y);
    const TrajectorySet set = enumerate_trajectories(inst.facility_count(), budget);
    const NodeId dest = inst.destination_node();
    auto visits = [&](const std::vector<NodeId>& nodes) {
        return static_cast<std::size_t>(std::count_if(nodes.begin(), nodes.end(), [&](NodeId n) {
            return n != kStartNode && n != dest;
        }));
    };
    std::size_t best = 0;
    double best_cost = std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < set.size(); ++t) {
        const double c = path_cost(inst, y, set.path(t, agent));
        // Enumeration order is lexicographic, so strict comparisons keep the earliest.
        if (c < best_cost || (c == best_cost && visits(set.trajectories[t]) < visits(set.trajectories[best]))) {
            best = t;
            best_cost = c;
        }
    }
    return set.path(best, agent);
}

double entropy(const std::vector<double>& p) {
    double h = 0.0;
    for (double v : p)
        if (v > 0.0) h -= v * std::log(v);
    return h;
}

}  // namespace flpo
