#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "flpo/instance.hpp"
#include "flpo/matrix.hpp"
#include "flpo/rng.hpp"
#include "flpo/stagewise_dp.hpp"

namespace flpo {

struct ScoredPath {
    Path path;
    double log_prob = 0.0;
};

// Policies delivered from outside the solver (see policy_bridge.hpp): either
// one transition matrix per agent, or per-agent ranked path lists that are
// replayed verbatim.
struct ExternalPolicy {
    enum class Mode { Matrix, Paths };
    Mode mode = Mode::Matrix;
    std::vector<PolicyMatrix> matrices;
    std::vector<std::vector<ScoredPath>> paths;
};

// Where the top-b paths of the estimator come from.
class PolicySource {
public:
    enum class Kind { ExactDp, External, Uniform };

    static PolicySource exact_dp() { return PolicySource(Kind::ExactDp, nullptr); }
    static PolicySource uniform() { return PolicySource(Kind::Uniform, nullptr); }
    static PolicySource external(std::shared_ptr<const ExternalPolicy> policy);

    Kind kind() const noexcept { return kind_; }
    bool replays_paths() const noexcept {
        return external_ && external_->mode == ExternalPolicy::Mode::Paths;
    }
    const ExternalPolicy* external_policy() const noexcept { return external_.get(); }

    // Row-stochastic matrix for `agent` at (y, beta). Not available in path-replay mode.
    PolicyMatrix matrix(const Instance& inst, const FacilityConfig& y, double beta, std::size_t agent) const;

    // Up to `b` ranked paths for `agent`: beam search on the matrix, or the
    // first b replayed paths.
    std::vector<Path> top_paths(const Instance& inst, const FacilityConfig& y, double beta, std::size_t agent,
                                std::size_t b) const;

private:
    PolicySource(Kind kind, std::shared_ptr<const ExternalPolicy> ext) : kind_(kind), external_(std::move(ext)) {}

    Kind kind_;
    std::shared_ptr<const ExternalPolicy> external_;
};

// Stagewise-uniform exploration: at each stage the next node is uniform over
// 1..M+1 until the destination absorbs the walk.
std::vector<Path> sample_uniform_paths(const Instance& inst, std::size_t agent, std::size_t count, Rng& rng);

// Ancestral sampling from the matrix rows. Throws PolicyError for rows that
// are not normalized within 1e-6.
std::vector<Path> sample_policy_paths(const PolicyMatrix& policy, const Instance& inst, std::size_t agent,
                                      std::size_t count, Rng& rng);

// Beam search over cumulative log-probability, following the same move rules
// as greedy_rollout. Returns distinct paths by descending log-probability;
// ties are ordered by canonical form.
std::vector<ScoredPath> beam_search(const PolicyMatrix& policy, const Instance& inst, std::size_t agent,
                                    std::size_t width);

// Softmax of -beta * costs, shifted by the minimum cost.
std::vector<double> empirical_gibbs_weights(const std::vector<double>& costs, double beta);

struct AgentSamples {
    std::vector<Path> paths;
    std::vector<double> costs;
    std::vector<double> weights;
    std::size_t from_policy = 0;  // leading paths that came from the policy source
};

struct SampleSet {
    std::size_t b = 0;
    std::size_t L = 0;
    double beta = 0.0;
    std::vector<AgentSamples> agents;
};

struct MixtureOptions {
    std::size_t b = 5;
    std::size_t L = 15;
    bool dedup = false;  // collapse repeated canonical paths before weighting
    bool sample_policy = false;  // ancestral sampling instead of beam search for the top-b group
};

// Identifies the random substream: per-agent generators are seeded from
// (seed, agent, beta_step, iteration).
struct SampleStream {
    std::uint64_t seed = 0;
    std::uint64_t beta_step = 0;
    std::uint64_t iteration = 0;
};

struct MixtureEstimate {
    Matrix gradient;
    SampleSet samples;
    // -(1/beta) sum_i rho_i log sum_q exp(-beta d_q): soft-min over the samples.
    double sample_free_energy = 0.0;
};

// Weights and gradient for explicitly supplied per-agent samples.
MixtureEstimate gradient_from_samples(const Instance& inst, const FacilityConfig& y, double beta,
                                      std::vector<std::vector<Path>> samples, bool dedup = false,
                                      std::size_t threads = 1);

MixtureEstimate estimate_gradient(const Instance& inst, const FacilityConfig& y, double beta,
                                  const PolicySource& source, const MixtureOptions& opts,
                                  const SampleStream& stream, std::size_t threads = 1);

}  // namespace flpo
