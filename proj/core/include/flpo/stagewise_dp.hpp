#pragma once

#include <cstddef>
#include <vector>

#include "flpo/instance.hpp"
#include "flpo/matrix.hpp"

namespace flpo {

// Leg costs between every pair of nodes 0..M+1 for one agent.
Matrix leg_costs(const Instance& inst, const FacilityConfig& y, std::size_t agent);

// Stage graph shape shared by the tables below. Stages run 0..M+1; node 0
// exists only at stage 0, nodes 1..M+1 at stages 1..M, and stage M+1 holds
// only the destination. Non-absorbing nodes at stages 0..M-1 may move to any
// of 1..M+1 (self-transitions at facilities cost nothing); stage M is forced
// into the destination, which then stays put.
struct StageGraph {
    std::size_t facility_count = 0;

    std::size_t nodes() const noexcept { return facility_count + 2; }
    std::size_t stages() const noexcept { return facility_count + 2; }
    std::size_t destination() const noexcept { return facility_count + 1; }
    bool valid(std::size_t stage, NodeId node) const noexcept;
    bool can_move(std::size_t stage, NodeId from, NodeId to) const noexcept;
};

// Soft values V[k][node]; NaN where the node does not exist at stage k.
struct ValueTable {
    StageGraph graph;
    double beta = 0.0;
    Matrix values;  // stages x nodes

    double at(std::size_t stage, NodeId node) const { return values(stage, node); }
};

// Lambda[k][node][next] = d(node, next) + V[k+1][next]; +inf where the move is illegal.
struct StateActionTable {
    StageGraph graph;
    double beta = 0.0;
    std::vector<double> data;

    double at(std::size_t stage, NodeId node, NodeId next) const {
        const std::size_t n = graph.nodes();
        return data[(stage * n + node) * n + next];
    }
};

// Stagewise Gibbs transition probabilities P[k][node][next].
struct StagewisePolicy {
    StageGraph graph;
    double beta = 0.0;
    std::vector<double> data;

    double at(std::size_t stage, NodeId node, NodeId next) const {
        const std::size_t n = graph.nodes();
        return data[(stage * n + node) * n + next];
    }
};

// One (M+2) x (M+2) row-stochastic transition matrix per agent. Column 0 is
// zero and the destination row is the indicator of the destination.
class PolicyMatrix {
public:
    PolicyMatrix() = default;
    explicit PolicyMatrix(Matrix rows);

    std::size_t facility_count() const noexcept { return rows_.rows() - 2; }
    std::size_t nodes() const noexcept { return rows_.rows(); }
    double operator()(NodeId from, NodeId to) const noexcept { return rows_(from, to); }
    std::span<const double> row(NodeId from) const noexcept { return rows_.row(from); }
    const Matrix& matrix() const noexcept { return rows_; }

    // Throws PolicyError naming the first offending row.
    void validate(double tol = 1e-9) const;

    static PolicyMatrix uniform(std::size_t facility_count);

    friend bool operator==(const PolicyMatrix&, const PolicyMatrix&) = default;

private:
    Matrix rows_;
};

struct BackwardTables {
    ValueTable values;
    StateActionTable state_action;
};

BackwardTables backward_values(const Instance& inst, const FacilityConfig& y, double beta,
                               std::size_t agent);

StagewisePolicy gibbs_policy(const ValueTable& values, const StateActionTable& sa, double beta);

// Single-matrix export: row 0 from stage 0, facility rows from stage 1.
PolicyMatrix export_policy_matrix(const StagewisePolicy& policy);

PolicyMatrix exact_policy_matrix(const Instance& inst, const FacilityConfig& y, double beta,
                                 std::size_t agent);

// G[k][node] = dV[k][node]/dY, one M x d matrix per (stage, node).
struct GradTable {
    StageGraph graph;
    std::vector<Matrix> data;

    const Matrix& at(std::size_t stage, NodeId node) const { return data[stage * graph.nodes() + node]; }
};

GradTable gradient_table(const Instance& inst, const FacilityConfig& y, double beta, std::size_t agent);

// V[0][0] for one agent.
double agent_free_energy(const Instance& inst, const FacilityConfig& y, double beta, std::size_t agent);

struct FreeEnergyGradient {
    double free_energy = 0.0;
    Matrix gradient;  // M x d
};

// Value and Y-gradient of V[0][0] for one agent.
FreeEnergyGradient agent_free_energy_gradient(const Instance& inst, const FacilityConfig& y,
                                              double beta, std::size_t agent);

// Sum over agents of weight * V[0][0]; agents reduced in ascending order.
double free_energy(const Instance& inst, const FacilityConfig& y, double beta, std::size_t threads = 1);

Matrix free_energy_gradient(const Instance& inst, const FacilityConfig& y, double beta,
                            std::size_t threads = 1);

FreeEnergyGradient free_energy_and_gradient(const Instance& inst, const FacilityConfig& y, double beta,
                                            std::size_t threads = 1);

// Follows the most probable successor until absorption. Self-transitions are
// skipped (a zero-cost wait would repeat forever under a single matrix) and
// the destination is forced after M facility stages. Ties prefer the
// destination, then the lowest facility index.
Path greedy_rollout(const PolicyMatrix& policy, const Instance& inst, std::size_t agent);

}  // namespace flpo
