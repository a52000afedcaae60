#include "flpo/stagewise_dp.hpp"

#include <fmt/format.h>

#include <cmath>
#include <limits>

#include "flpo/parallel.hpp"

namespace flpo {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void check_beta(double beta) {
    if (!(beta > 0.0) || !std::isfinite(beta))
        throw ArgumentError(fmt::format("beta must be positive and finite, got {}", beta));
}

// Optional full-table storage filled during the backward pass.
struct Recorder {
    ValueTable* values = nullptr;
    StateActionTable* state_action = nullptr;
    StagewisePolicy* policy = nullptr;
    GradTable* grads = nullptr;
};

struct PassResult {
    double value = 0.0;
    Matrix gradient;
};

// Backward recursion over stages M..0 with rolling value (and optionally
// gradient) buffers. Each non-absorbing node takes a stabilized soft-min over
// Lambda = d(node, next) + V[k+1][next]; its Gibbs row weights the successor
// gradients.
PassResult backward_pass(const Instance& inst, const FacilityConfig& y, double beta, std::size_t agent,
                         bool want_grad, const Recorder& rec) {
    check_beta(beta);
    inst.check_config(y);
    const std::size_t m = inst.facility_count();
    const std::size_t d = inst.dim();
    const StageGraph g{m};
    const std::size_t n = g.nodes();
    const NodeId dest = g.destination();
    const Matrix cost = leg_costs(inst, y, agent);

    std::vector<double> v_next(n, 0.0), v_cur(n, 0.0);
    std::vector<double> lam(n), prob(n);
    const std::size_t block = m * d;
    std::vector<double> g_next(want_grad ? n * block : 0, 0.0);
    std::vector<double> g_cur(want_grad ? n * block : 0, 0.0);

    auto record_stage_grads = [&](std::size_t stage, const std::vector<double>& buf) {
        if (!rec.grads) return;
        for (NodeId node = 0; node < n; ++node) {
            Matrix& out = rec.grads->data[stage * n + node];
            out = Matrix(m, d);
            if (!g.valid(stage, node)) continue;
            std::copy(buf.begin() + node * block, buf.begin() + (node + 1) * block, out.flat().begin());
        }
    };

    if (rec.values) rec.values->values(m + 1, dest) = 0.0;
    if (want_grad) record_stage_grads(m + 1, g_next);

    for (std::size_t stage = m + 1; stage-- > 0;) {
        const NodeId first = stage == 0 ? 0 : 1;
        const NodeId last = stage == 0 ? 0 : dest;
        const NodeId succ_lo = stage == m ? dest : 1;
        if (want_grad) std::fill(g_cur.begin(), g_cur.end(), 0.0);
        for (NodeId node = first; node <= last; ++node) {
            if (node == dest) {
                v_cur[node] = 0.0;
                if (rec.state_action) {
                    for (NodeId nx = 0; nx < n; ++nx)
                        rec.state_action->data[(stage * n + node) * n + nx] = nx == dest ? 0.0 : kInf;
                }
                if (rec.policy) {
                    for (NodeId nx = 0; nx < n; ++nx)
                        rec.policy->data[(stage * n + node) * n + nx] = nx == dest ? 1.0 : 0.0;
                }
                if (rec.values) rec.values->values(stage, node) = 0.0;
                continue;
            }
            double lo = kInf;
            for (NodeId nx = succ_lo; nx <= dest; ++nx) {
                lam[nx] = cost(node, nx) + v_next[nx];
                lo = std::min(lo, lam[nx]);
            }
            double sum = 0.0;
            for (NodeId nx = succ_lo; nx <= dest; ++nx) {
                prob[nx] = std::exp(-beta * (lam[nx] - lo));
                sum += prob[nx];
            }
            v_cur[node] = lo - std::log(sum) / beta;
            for (NodeId nx = succ_lo; nx <= dest; ++nx) prob[nx] /= sum;

            if (rec.values) rec.values->values(stage, node) = v_cur[node];
            if (rec.state_action) {
                for (NodeId nx = 0; nx < n; ++nx)
                    rec.state_action->data[(stage * n + node) * n + nx] = nx >= succ_lo ? lam[nx] : kInf;
            }
            if (rec.policy) {
                for (NodeId nx = 0; nx < n; ++nx)
                    rec.policy->data[(stage * n + node) * n + nx] = nx >= succ_lo ? prob[nx] : 0.0;
            }

            if (!want_grad) continue;
            double* out = g_cur.data() + node * block;
            // Successor value gradients (destination contributes zero).
            for (NodeId nx = succ_lo; nx < dest; ++nx) {
                const double p = prob[nx];
                if (p == 0.0) continue;
                const double* src = g_next.data() + nx * block;
                for (std::size_t q = 0; q < block; ++q) out[q] += p * src[q];
            }
            // Leg cost gradients: d/da |a-b|^2 = 2(a-b).
            const auto pa = inst.position(agent, y, node);
            for (NodeId nx = succ_lo; nx <= dest; ++nx) {
                const double p = prob[nx];
                if (p == 0.0 || nx == node) continue;
                const auto pb = inst.position(agent, y, nx);
                for (std::size_t c = 0; c < d; ++c) {
                    const double gc = 2.0 * p * (pa[c] - pb[c]);
                    if (node != kStartNode) out[(node - 1) * d + c] += gc;
                    if (nx != dest) out[(nx - 1) * d + c] -= gc;
                }
            }
        }
        std::swap(v_cur, v_next);
        if (want_grad) {
            std::swap(g_cur, g_next);
            record_stage_grads(stage, g_next);
        }
    }

    PassResult res;
    res.value = v_next[kStartNode];
    if (want_grad) {
        res.gradient = Matrix(m, d);
        std::copy(g_next.begin(), g_next.begin() + block, res.gradient.flat().begin());
    }
    return res;
}

}  // namespace

Matrix leg_costs(const Instance& inst, const FacilityConfig& y, std::size_t agent) {
    const std::size_t n = inst.facility_count() + 2;
    Matrix c(n, n);
    for (NodeId a = 0; a < n; ++a)
        for (NodeId b = 0; b < n; ++b) c(a, b) = pair_cost(inst.position(agent, y, a), inst.position(agent, y, b));
    if (!c.all_finite()) throw NumericError(fmt::format("non-finite leg cost for agent {}", agent));
    return c;
}

bool StageGraph::valid(std::size_t stage, NodeId node) const noexcept {
    if (stage == 0) return node == kStartNode;
    if (stage <= facility_count) return node >= 1 && node <= destination();
    if (stage == facility_count + 1) return node == destination();
    return false;
}

bool StageGraph::can_move(std::size_t stage, NodeId from, NodeId to) const noexcept {
    if (!valid(stage, from) || stage > facility_count) return false;
    if (from == destination() || stage == facility_count) return to == destination();
    return to >= 1 && to <= destination();
}

PolicyMatrix::PolicyMatrix(Matrix rows) : rows_(std::move(rows)) {
    if (rows_.rows() < 3 || rows_.rows() != rows_.cols())
        throw PolicyError(fmt::format("policy matrix must be square with at least 3 nodes, got {}x{}",
                                      rows_.rows(), rows_.cols()));
}

void PolicyMatrix::validate(double tol) const {
    const std::size_t n = nodes();
    const NodeId dest = n - 1;
    for (NodeId r = 0; r < n; ++r) {
        double sum = 0.0;
        for (NodeId c = 0; c < n; ++c) {
            const double p = rows_(r, c);
            if (!std::isfinite(p) || p < -tol || p > 1.0 + tol)
                throw PolicyError(fmt::format("row {} column {}: probability {} out of range", r, c, p));
            sum += p;
        }
        if (std::abs(sum - 1.0) > tol)
            throw PolicyError(fmt::format("row {} sums to {} (tolerance {})", r, sum, tol));
        if (std::abs(rows_(r, 0)) > tol)
            throw PolicyError(fmt::format("row {} puts mass {} on the start node", r, rows_(r, 0)));
    }
    if (std::abs(rows_(dest, dest) - 1.0) > tol)
        throw PolicyError(fmt::format("destination row {} is not absorbing", dest));
}

PolicyMatrix PolicyMatrix::uniform(std::size_t facility_count) {
    const std::size_t n = facility_count + 2;
    Matrix rows(n, n);
    for (NodeId r = 0; r + 1 < n; ++r)
        for (NodeId c = 1; c < n; ++c) rows(r, c) = 1.0 / static_cast<double>(n - 1);
    rows(n - 1, n - 1) = 1.0;
    return PolicyMatrix(std::move(rows));
}

BackwardTables backward_values(const Instance& inst, const FacilityConfig& y, double beta,
                               std::size_t agent) {
    const StageGraph g{inst.facility_count()};
    const std::size_t n = g.nodes();
    BackwardTables t{ValueTable{g, beta, Matrix(g.stages(), n, kNaN)},
                     StateActionTable{g, beta, std::vector<double>(g.stages() * n * n, kInf)}};
    Recorder rec;
    rec.values = &t.values;
    rec.state_action = &t.state_action;
    backward_pass(inst, y, beta, agent, false, rec);
    return t;
}

StagewisePolicy gibbs_policy(const ValueTable& values, const StateActionTable& sa, double beta) {
    if (values.beta != beta || sa.beta != beta)
        throw ContractError("tables were computed at a different beta");
    const StageGraph g = values.graph;
    const std::size_t n = g.nodes();
    StagewisePolicy p{g, beta, std::vector<double>(g.stages() * n * n, 0.0)};
    for (std::size_t k = 0; k < g.stages(); ++k) {
        for (NodeId node = 0; node < n; ++node) {
            if (!g.valid(k, node)) continue;
            double* row = p.data.data() + (k * n + node) * n;
            if (k == g.stages() - 1) {
                row[g.destination()] = 1.0;
                continue;
            }
            // Same shifted exponentials as the value recursion.
            double lo = kInf;
            for (NodeId nx = 0; nx < n; ++nx) lo = std::min(lo, sa.at(k, node, nx));
            double sum = 0.0;
            for (NodeId nx = 0; nx < n; ++nx) {
                const double lam = sa.at(k, node, nx);
                row[nx] = std::isinf(lam) ? 0.0 : std::exp(-beta * (lam - lo));
                sum += row[nx];
            }
            for (NodeId nx = 0; nx < n; ++nx) row[nx] /= sum;
        }
    }
    return p;
}

PolicyMatrix export_policy_matrix(const StagewisePolicy& policy) {
    const StageGraph g = policy.graph;
    const std::size_t n = g.nodes();
    Matrix rows(n, n);
    for (NodeId nx = 0; nx < n; ++nx) rows(0, nx) = policy.at(0, kStartNode, nx);
    for (NodeId node = 1; node < n; ++node)
        for (NodeId nx = 0; nx < n; ++nx) rows(node, nx) = policy.at(1, node, nx);
    return PolicyMatrix(std::move(rows));
}

PolicyMatrix exact_policy_matrix(const Instance& inst, const FacilityConfig& y, double beta,
                                 std::size_t agent) {
    const StageGraph g{inst.facility_count()};
    const std::size_t n = g.nodes();
    StagewisePolicy p{g, beta, std::vector<double>(g.stages() * n * n, 0.0)};
    p.data[((g.stages() - 1) * n + g.destination()) * n + g.destination()] = 1.0;
    Recorder rec;
    rec.policy = &p;
    backward_pass(inst, y, beta, agent, false, rec);
    return export_policy_matrix(p);
}

GradTable gradient_table(const Instance& inst, const FacilityConfig& y, double beta, std::size_t agent) {
    const StageGraph g{inst.facility_count()};
    GradTable t{g, std::vector<Matrix>(g.stages() * g.nodes())};
    Recorder rec;
    rec.grads = &t;
    backward_pass(inst, y, beta, agent, true, rec);
    return t;
}

double agent_free_energy(const Instance& inst, const FacilityConfig& y, double beta, std::size_t agent) {
    return backward_pass(inst, y, beta, agent, false, {}).value;
}

FreeEnergyGradient agent_free_energy_gradient(const Instance& inst, const FacilityConfig& y,
                                              double beta, std::size_t agent) {
    PassResult r = backward_pass(inst, y, beta, agent, true, {});
    return {r.value, std::move(r.gradient)};
}

double free_energy(const Instance& inst, const FacilityConfig& y, double beta, std::size_t threads) {
    std::vector<double> per_agent(inst.agent_count());
    parallel_for(inst.agent_count(), threads,
                 [&](std::size_t i) { per_agent[i] = agent_free_energy(inst, y, beta, i); });
    double total = 0.0;
    for (std::size_t i = 0; i < per_agent.size(); ++i) total += inst.weight(i) * per_agent[i];
    return total;
}

FreeEnergyGradient free_energy_and_gradient(const Instance& inst, const FacilityConfig& y, double beta,
                                            std::size_t threads) {
    std::vector<FreeEnergyGradient> per_agent(inst.agent_count());
    parallel_for(inst.agent_count(), threads,
                 [&](std::size_t i) { per_agent[i] = agent_free_energy_gradient(inst, y, beta, i); });
    FreeEnergyGradient out{0.0, Matrix(inst.facility_count(), inst.dim())};
    for (std::size_t i = 0; i < per_agent.size(); ++i) {
        if (!std::isfinite(per_agent[i].free_energy) || !per_agent[i].gradient.all_finite())
            throw NumericError(fmt::format("non-finite free energy contribution from agent {} at beta {}", i, beta));
        out.free_energy += inst.weight(i) * per_agent[i].free_energy;
        out.gradient.axpy(inst.weight(i), per_agent[i].gradient);
    }
    return out;
}

Matrix free_energy_gradient(const Instance& inst, const FacilityConfig& y, double beta, std::size_t threads) {
    return free_energy_and_gradient(inst, y, beta, threads).gradient;
}

Path greedy_rollout(const PolicyMatrix& policy, const Instance& inst, std::size_t agent) {
    const std::size_t m = inst.facility_count();
    if (policy.facility_count() != m)
        throw ContractError(fmt::format("policy has {} facilities, instance has {}", policy.facility_count(), m));
    const NodeId dest = m + 1;
    Path path{agent, std::vector<NodeId>(m + 2, dest)};
    path.nodes[0] = kStartNode;
    NodeId cur = kStartNode;
    for (std::size_t stage = 1; stage <= m; ++stage) {
        NodeId best = dest;
        double best_p = policy(cur, dest);
        for (NodeId nx = 1; nx <= m; ++nx) {
            if (nx == cur) continue;
            if (policy(cur, nx) > best_p) {
                best = nx;
                best_p = policy(cur, nx);
            }
        }
        path.nodes[stage] = best;
        if (best == dest) break;
        cur = best;
    }
    return path;
}

}  // namespace flpo
