#include "flpo/mixture_gradient.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <map>

#include "flpo/parallel.hpp"

namespace flpo {

PolicySource PolicySource::external(std::shared_ptr<const ExternalPolicy> policy) {
    if (!policy) throw ArgumentError("external policy source needs a policy");
    return PolicySource(Kind::External, std::move(policy));
}

PolicyMatrix PolicySource::matrix(const Instance& inst, const FacilityConfig& y, double beta,
                                  std::size_t agent) const {
    switch (kind_) {
        case Kind::ExactDp:
            return exact_policy_matrix(inst, y, beta, agent);
        case Kind::Uniform:
            return PolicyMatrix::uniform(inst.facility_count());
        case Kind::External:
            if (external_->mode != ExternalPolicy::Mode::Matrix)
                throw PolicyError("path-replay policies carry no transition matrix");
            if (agent >= external_->matrices.size())
                throw PolicyError(fmt::format("external policy has no matrix for agent {}", agent));
            external_->matrices[agent].validate(1e-6);
            return external_->matrices[agent];
    }
    throw PolicyError("unknown policy source");
}

std::vector<Path> PolicySource::top_paths(const Instance& inst, const FacilityConfig& y, double beta,
                                          std::size_t agent, std::size_t b) const {
    std::vector<Path> out;
    if (b == 0) return out;
    if (replays_paths()) {
        if (agent >= external_->paths.size())
            throw PolicyError(fmt::format("external policy has no paths for agent {}", agent));
        const auto& list = external_->paths[agent];
        for (std::size_t k = 0; k < std::min(b, list.size()); ++k) {
            Path p = list[k].path;
            p.agent = agent;
            out.push_back(std::move(p));
        }
        return out;
    }
    for (ScoredPath& sp : beam_search(matrix(inst, y, beta, agent), inst, agent, b))
        out.push_back(std::move(sp.path));
    return out;
}

std::vector<Path> sample_uniform_paths(const Instance& inst, std::size_t agent, std::size_t count, Rng& rng) {
    const std::size_t m = inst.facility_count();
    const NodeId dest = m + 1;
    std::uniform_int_distribution<NodeId> next(1, dest);
    std::vector<Path> out;
    out.reserve(count);
    for (std::size_t s = 0; s < count; ++s) {
        Path p{agent, std::vector<NodeId>(m + 2, dest)};
        p.nodes[0] = kStartNode;
        for (std::size_t stage = 1; stage <= m; ++stage) {
            const NodeId nx = next(rng);
            p.nodes[stage] = nx;
            if (nx == dest) break;
        }
        out.push_back(std::move(p));
    }
    return out;
}

std::vector<Path> sample_policy_paths(const PolicyMatrix& policy, const Instance& inst, std::size_t agent,
                                      std::size_t count, Rng& rng) {
    const std::size_t m = inst.facility_count();
    if (policy.facility_count() != m)
        throw PolicyError(fmt::format("policy has {} facilities, instance has {}", policy.facility_count(), m));
    policy.validate(1e-6);
    const NodeId dest = m + 1;
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<Path> out;
    out.reserve(count);
    for (std::size_t s = 0; s < count; ++s) {
        Path p{agent, std::vector<NodeId>(m + 2, dest)};
        p.nodes[0] = kStartNode;
        NodeId cur = kStartNode;
        for (std::size_t stage = 1; stage <= m; ++stage) {
            const auto row = policy.row(cur);
            const double u = unit(rng);
            double acc = 0.0;
            NodeId pick = dest;
            NodeId last_positive = dest;
            for (NodeId nx = 1; nx <= dest; ++nx) {
                if (row[nx] <= 0.0) continue;
                last_positive = nx;
                acc += row[nx];
                if (u < acc) {
                    pick = nx;
                    break;
                }
            }
            if (u >= acc) pick = last_positive;  // rounding slack in the row sum
            p.nodes[stage] = pick;
            if (pick == dest) break;
            cur = pick;
        }
        out.push_back(std::move(p));
    }
    return out;
}

namespace {

struct Hypothesis {
    std::vector<NodeId> facilities;
    double log_prob = 0.0;
    bool done = false;
};

bool ranks_before(const Hypothesis& a, const Hypothesis& b) {
    if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
    return a.facilities < b.facilities;
}

}  // namespace

std::vector<ScoredPath> beam_search(const PolicyMatrix& policy, const Instance& inst, std::size_t agent,
                                    std::size_t width) {
    const std::size_t m = inst.facility_count();
    if (width < 1) throw ArgumentError("beam width must be at least 1");
    if (policy.facility_count() != m)
        throw PolicyError(fmt::format("policy has {} facilities, instance has {}", policy.facility_count(), m));
    const NodeId dest = m + 1;

    std::vector<Hypothesis> beam{Hypothesis{}};
    std::vector<Hypothesis> cand;
    for (std::size_t stage = 1; stage <= m; ++stage) {
        cand.clear();
        bool any_live = false;
        for (const Hypothesis& h : beam) {
            if (h.done) {
                cand.push_back(h);
                continue;
            }
            const NodeId cur = h.facilities.empty() ? kStartNode : h.facilities.back();
            const auto row = policy.row(cur);
            bool extended = false;
            for (NodeId nx = 1; nx <= m; ++nx) {
                if (nx == cur || row[nx] <= 0.0) continue;
                Hypothesis next{h.facilities, h.log_prob + std::log(row[nx]), false};
                next.facilities.push_back(nx);
                cand.push_back(std::move(next));
                extended = true;
            }
            // With no other successor (all mass on waiting) the walk goes home, as in greedy_rollout.
            if (row[dest] > 0.0 || !extended)
                cand.push_back(Hypothesis{h.facilities, h.log_prob + std::log(row[dest]), true});
        }
        const std::size_t keep = std::min(width, cand.size());
        std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(keep), cand.end(), ranks_before);
        cand.resize(keep);
        beam.swap(cand);
        for (const Hypothesis& h : beam) any_live = any_live || !h.done;
        if (!any_live) break;
    }
    // Survivors at the last facility stage move to the destination with probability one.
    std::sort(beam.begin(), beam.end(), ranks_before);
    std::vector<ScoredPath> out;
    for (const Hypothesis& h : beam) {
        CanonicalPath c{h.facilities};
        out.push_back(ScoredPath{expand(c, agent, m), h.log_prob});
    }
    return out;
}

std::vector<double> empirical_gibbs_weights(const std::vector<double>& costs, double beta) {
    if (costs.empty()) throw ArgumentError("empirical Gibbs weights need at least one cost");
    if (!(beta > 0.0)) throw ArgumentError("beta must be positive");
    const double lo = *std::min_element(costs.begin(), costs.end());
    std::vector<double> w(costs.size());
    double sum = 0.0;
    for (std::size_t q = 0; q < costs.size(); ++q) {
        w[q] = std::exp(-beta * (costs[q] - lo));
        sum += w[q];
    }
    for (double& v : w) v /= sum;
    return w;
}

namespace {

struct AgentEstimate {
    AgentSamples samples;
    Matrix gradient;
    double soft_min = 0.0;
};

AgentEstimate weigh_agent(const Instance& inst, const FacilityConfig& y, double beta, std::vector<Path> paths,
                          std::size_t from_policy, bool dedup) {
    if (dedup) {
        std::map<CanonicalPath, std::size_t> seen;
        std::vector<Path> unique;
        std::size_t kept_policy = 0;
        for (std::size_t q = 0; q < paths.size(); ++q) {
            if (!seen.emplace(canonicalize(paths[q]), q).second) continue;
            if (q < from_policy) ++kept_policy;
            unique.push_back(std::move(paths[q]));
        }
        paths = std::move(unique);
        from_policy = kept_policy;
    }
    AgentEstimate est;
    est.samples.from_policy = from_policy;
    est.samples.costs.reserve(paths.size());
    for (const Path& p : paths) est.samples.costs.push_back(path_cost(inst, y, p));
    est.samples.weights = empirical_gibbs_weights(est.samples.costs, beta);
    est.gradient = Matrix(inst.facility_count(), inst.dim());
    for (std::size_t q = 0; q < paths.size(); ++q)
        accumulate_path_gradient(inst, y, paths[q], est.samples.weights[q], est.gradient);
    const double lo = *std::min_element(est.samples.costs.begin(), est.samples.costs.end());
    double z = 0.0;
    for (double c : est.samples.costs) z += std::exp(-beta * (c - lo));
    est.soft_min = lo - std::log(z) / beta;
    est.samples.paths = std::move(paths);
    return est;
}

MixtureEstimate reduce(const Instance& inst, std::vector<AgentEstimate>& per_agent, double beta, std::size_t b,
                       std::size_t L) {
    MixtureEstimate out;
    out.gradient = Matrix(inst.facility_count(), inst.dim());
    out.samples.b = b;
    out.samples.L = L;
    out.samples.beta = beta;
    for (std::size_t i = 0; i < per_agent.size(); ++i) {
        if (!per_agent[i].gradient.all_finite())
            throw NumericError(fmt::format("non-finite sampled gradient for agent {} at beta {}", i, beta));
        out.gradient.axpy(inst.weight(i), per_agent[i].gradient);
        out.sample_free_energy += inst.weight(i) * per_agent[i].soft_min;
        out.samples.agents.push_back(std::move(per_agent[i].samples));
    }
    return out;
}

}  // namespace

MixtureEstimate gradient_from_samples(const Instance& inst, const FacilityConfig& y, double beta,
                                      std::vector<std::vector<Path>> samples, bool dedup, std::size_t threads) {
    inst.check_config(y);
    if (samples.size() != inst.agent_count())
        throw ContractError(fmt::format("{} sample lists for {} agents", samples.size(), inst.agent_count()));
    std::vector<AgentEstimate> per_agent(inst.agent_count());
    parallel_for(inst.agent_count(), threads, [&](std::size_t i) {
        for (const Path& p : samples[i]) validate_path(p, inst.facility_count());
        per_agent[i] = weigh_agent(inst, y, beta, std::move(samples[i]), 0, dedup);
    });
    std::size_t longest = 0;
    for (const auto& a : per_agent) longest = std::max(longest, a.samples.paths.size());
    return reduce(inst, per_agent, beta, 0, longest);
}

MixtureEstimate estimate_gradient(const Instance& inst, const FacilityConfig& y, double beta,
                                  const PolicySource& source, const MixtureOptions& opts,
                                  const SampleStream& stream, std::size_t threads) {
    inst.check_config(y);
    if (opts.L == 0) throw ArgumentError("L must be at least 1");
    if (opts.b > opts.L) throw ArgumentError(fmt::format("b = {} exceeds L = {}", opts.b, opts.L));
    if (!(beta > 0.0)) throw ArgumentError("beta must be positive");
    std::vector<AgentEstimate> per_agent(inst.agent_count());
    parallel_for(inst.agent_count(), threads, [&](std::size_t i) {
        Rng rng = make_rng({stream.seed, i, stream.beta_step, stream.iteration});
        std::vector<Path> paths;
        if (opts.sample_policy && !source.replays_paths())
            paths = sample_policy_paths(source.matrix(inst, y, beta, i), inst, i, opts.b, rng);
        else
            paths = source.top_paths(inst, y, beta, i, opts.b);
        const std::size_t from_policy = paths.size();
        // A short beam (e.g. one-hot rows) is topped up with uniform paths so L stays fixed.
        std::vector<Path> explore = sample_uniform_paths(inst, i, opts.L - from_policy, rng);
        paths.insert(paths.end(), std::make_move_iterator(explore.begin()), std::make_move_iterator(explore.end()));
        per_agent[i] = weigh_agent(inst, y, beta, std::move(paths), from_policy, opts.dedup);
    });
    return reduce(inst, per_agent, beta, opts.b, opts.L);
}

}  // namespace flpo
