#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "flpo/errors.hpp"
#include "flpo/mixture_gradient.hpp"
#include "flpo/path_oracle.hpp"
#include "flpo/stagewise_dp.hpp"
#include "helpers.hpp"

using namespace flpo;
using flpo::test::cosine;
using flpo::test::max_rel_diff;
using flpo::test::random_instance;
using flpo::test::weighted_instance;

namespace {

std::map<CanonicalPath, double> histogram(const std::vector<Path>& paths) {
    std::map<CanonicalPath, double> h;
    for (const Path& p : paths) h[canonicalize(p)] += 1.0;
    return h;
}

PolicyMatrix one_hot_policy() {
    // start -> 2 -> 1 -> destination on M = 3
    Matrix m(5, 5);
    m(0, 2) = 1.0;
    m(2, 1) = 1.0;
    m(1, 4) = 1.0;
    m(3, 4) = 1.0;
    m(4, 4) = 1.0;
    return PolicyMatrix(m);
}

}  // namespace

TEST(UniformSampling, SingleFacilityIsFairCoin) {
    const Instance inst = random_instance(1, 1, 3);
    Rng rng = make_rng({42});
    const auto paths = sample_uniform_paths(inst, 0, 10000, rng);
    double hits = 0;
    for (const Path& p : paths) hits += p.nodes[1] == 1;
    EXPECT_NEAR(hits, 5000.0, 3 * std::sqrt(10000 * 0.25));
}

TEST(UniformSampling, DirectFraction) {
    const Instance inst = random_instance(1, 4, 3);
    Rng rng = make_rng({7});
    const std::size_t n = 20000;
    const auto paths = sample_uniform_paths(inst, 0, n, rng);
    double direct = 0;
    for (const Path& p : paths) {
        EXPECT_NO_THROW(validate_path(p, 4));
        direct += p.nodes[1] == 5;
    }
    const double p = 0.2;
    EXPECT_NEAR(direct, n * p, 3 * std::sqrt(n * p * (1 - p)));
}

TEST(UniformSampling, SeedDeterminism) {
    const Instance inst = random_instance(1, 4, 3);
    Rng a = make_rng({1, 2, 3}), b = make_rng({1, 2, 3});
    EXPECT_EQ(sample_uniform_paths(inst, 0, 50, a).front().nodes, sample_uniform_paths(inst, 0, 50, b).front().nodes);
    Rng c = make_rng({9}), d = make_rng({9});
    const auto x = sample_uniform_paths(inst, 0, 50, c);
    const auto y = sample_uniform_paths(inst, 0, 50, d);
    for (std::size_t k = 0; k < x.size(); ++k) EXPECT_EQ(x[k], y[k]);
}

TEST(PolicySampling, UniformMatrixMatchesUniformSampler) {
    // Two-sample chi-square over canonical paths, M = 2 (five categories, df = 4).
    const Instance inst = random_instance(1, 2, 5);
    Rng r1 = make_rng({11}), r2 = make_rng({12});
    const std::size_t n = 20000;
    const auto h1 = histogram(sample_policy_paths(PolicyMatrix::uniform(2), inst, 0, n, r1));
    const auto h2 = histogram(sample_uniform_paths(inst, 0, n, r2));
    std::map<CanonicalPath, std::pair<double, double>> both;
    for (auto& [k, v] : h1) both[k].first = v;
    for (auto& [k, v] : h2) both[k].second = v;
    EXPECT_EQ(both.size(), 5u);
    double chi2 = 0.0;
    for (auto& [k, v] : both) chi2 += (v.first - v.second) * (v.first - v.second) / (v.first + v.second);
    EXPECT_LT(chi2, 13.277);  // chi-square(4) upper 1% point
}

TEST(PolicySampling, OneHotPolicyIsDeterministic) {
    const Instance inst = random_instance(1, 3, 5);
    Rng rng = make_rng({3});
    for (const Path& p : sample_policy_paths(one_hot_policy(), inst, 0, 100, rng))
        EXPECT_EQ(p.nodes, (std::vector<NodeId>{0, 2, 1, 4, 4}));
}

TEST(PolicySampling, RejectsUnnormalizedRows) {
    const Instance inst = random_instance(1, 2, 5);
    Matrix m = PolicyMatrix::uniform(2).matrix();
    m(1, 1) += 1e-3;
    Rng rng = make_rng({3});
    EXPECT_THROW(sample_policy_paths(PolicyMatrix(m), inst, 0, 1, rng), PolicyError);
    m(1, 1) -= 1e-3 - 5e-7;  // inside the 1e-6 tolerance
    EXPECT_NO_THROW(sample_policy_paths(PolicyMatrix(m), inst, 0, 1, rng));
}

TEST(BeamSearch, WidthOneIsGreedy) {
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
        const Instance inst = random_instance(1, 1 + seed % 5, seed);
        const FacilityConfig y = random_init(inst, seed);
        for (double beta : {1e-2, 1.0, 30.0, 1e6}) {
            const PolicyMatrix p = exact_policy_matrix(inst, y, beta, 0);
            const auto beam = beam_search(p, inst, 0, 1);
            ASSERT_EQ(beam.size(), 1u);
            EXPECT_EQ(beam[0].path.nodes, greedy_rollout(p, inst, 0).nodes) << seed << " " << beta;
        }
    }
}

TEST(BeamSearch, OneHotPolicyYieldsSinglePath) {
    const Instance inst = random_instance(1, 3, 5);
    for (std::size_t w : {1u, 3u, 10u}) {
        const auto beam = beam_search(one_hot_policy(), inst, 0, w);
        ASSERT_EQ(beam.size(), 1u);
        EXPECT_EQ(beam[0].path.nodes, (std::vector<NodeId>{0, 2, 1, 4, 4}));
        EXPECT_EQ(beam[0].log_prob, 0.0);
    }
}

TEST(BeamSearch, DistinctAndSorted) {
    const Instance inst = random_instance(1, 4, 8);
    const FacilityConfig y = random_init(inst, 8);
    const auto beam = beam_search(exact_policy_matrix(inst, y, 3.0, 0), inst, 0, 12);
    ASSERT_EQ(beam.size(), 12u);
    std::set<CanonicalPath> seen;
    for (std::size_t k = 0; k < beam.size(); ++k) {
        EXPECT_NO_THROW(validate_path(beam[k].path, 4));
        EXPECT_TRUE(seen.insert(canonicalize(beam[k].path)).second);
        if (k) EXPECT_GE(beam[k - 1].log_prob, beam[k].log_prob);
    }
}

TEST(BeamSearch, TopPathAtLargeBetaIsShortest) {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        const Instance inst = random_instance(1, 4, 700 + seed);
        const FacilityConfig y = random_init(inst, seed);
        const auto beam = beam_search(exact_policy_matrix(inst, y, 1e6, 0), inst, 0, 5);
        EXPECT_EQ(canonicalize(beam[0].path), canonicalize(exact_shortest_path(inst, y, 0))) << seed;
    }
}

TEST(BeamSearch, WaitingOnlyRowGoesHome) {
    Matrix m(4, 4);
    m(0, 1) = 1.0;
    m(1, 1) = 1.0;
    m(2, 3) = 1.0;
    m(3, 3) = 1.0;
    const Instance inst = random_instance(1, 2, 1);
    const auto beam = beam_search(PolicyMatrix(m), inst, 0, 3);
    ASSERT_EQ(beam.size(), 1u);
    EXPECT_EQ(beam[0].path.nodes, greedy_rollout(PolicyMatrix(m), inst, 0).nodes);
}

TEST(GibbsWeights, HandComputed) {
    const auto w = empirical_gibbs_weights({0.1, 0.3}, 10.0);
    EXPECT_NEAR(w[0], 0.880797, 1e-6);
    EXPECT_NEAR(w[1], 0.119203, 1e-6);
}

TEST(GibbsWeights, EdgeCases) {
    for (double v : empirical_gibbs_weights({2.5, 2.5, 2.5, 2.5}, 3.0)) EXPECT_DOUBLE_EQ(v, 0.25);
    const auto sharp = empirical_gibbs_weights({1.0, 0.5, 0.9}, 1e9);
    EXPECT_EQ(sharp[1], 1.0);
    EXPECT_EQ(sharp[0], 0.0);
    EXPECT_THROW(empirical_gibbs_weights({}, 1.0), ArgumentError);
    EXPECT_THROW(empirical_gibbs_weights({1.0}, 0.0), ArgumentError);
}

TEST(GibbsWeights, ShiftInvariant) {
    const std::vector<double> c{0.3, 0.7, 0.31, 1.2};
    std::vector<double> shifted = c;
    for (double& v : shifted) v += 1234.5;
    const auto a = empirical_gibbs_weights(c, 5.0);
    const auto b = empirical_gibbs_weights(shifted, 5.0);
    for (std::size_t k = 0; k < c.size(); ++k) EXPECT_NEAR(a[k], b[k], 1e-12);
}

TEST(Estimator, FullTrajectorySetReducesToOracle) {
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
        const std::size_t m = 1 + seed % 3;
        const Instance inst = weighted_instance(3, m, 40 + seed);
        const FacilityConfig y = random_init(inst, seed);
        const TrajectorySet all = enumerate_trajectories(m);
        for (double beta : {1e-3, 1.0, 1e3}) {
            std::vector<std::vector<Path>> samples(3);
            for (std::size_t i = 0; i < 3; ++i)
                for (std::size_t k = 0; k < all.size(); ++k) samples[i].push_back(all.path(k, i));
            const MixtureEstimate est = gradient_from_samples(inst, y, beta, samples);
            EXPECT_LT(max_rel_diff(est.gradient, exact_gradient(inst, y, beta)), 1e-9);
            EXPECT_NEAR(est.sample_free_energy, exact_free_energy(inst, y, beta), 1e-9);
        }
    }
}

TEST(Estimator, EnumerationSourceWithBEqualsL) {
    // A path-replay source listing every trajectory, with b = L = |set|.
    const Instance inst = weighted_instance(2, 3, 5);
    const FacilityConfig y = random_init(inst, 5);
    const TrajectorySet all = enumerate_trajectories(3);
    auto ext = std::make_shared<ExternalPolicy>();
    ext->mode = ExternalPolicy::Mode::Paths;
    for (std::size_t i = 0; i < 2; ++i) {
        ext->paths.emplace_back();
        for (std::size_t k = 0; k < all.size(); ++k) ext->paths[i].push_back(ScoredPath{all.path(k, i), 0.0});
    }
    const MixtureOptions opts{all.size(), all.size(), false, false};
    const MixtureEstimate est = estimate_gradient(inst, y, 1.0, PolicySource::external(ext), opts, {});
    EXPECT_LT(max_rel_diff(est.gradient, exact_gradient(inst, y, 1.0)), 1e-9);
    EXPECT_EQ(est.samples.agents[0].from_policy, all.size());
}

TEST(Estimator, LargeBetaFollowsShortestPathGradient) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const Instance inst = random_instance(3, 4, 60 + seed);
        const FacilityConfig y = random_init(inst, seed);
        const MixtureEstimate est =
            estimate_gradient(inst, y, 1e6, PolicySource::exact_dp(), MixtureOptions{}, SampleStream{seed, 0, 0});
        Matrix target(4, 2);
        for (std::size_t i = 0; i < 3; ++i)
            accumulate_path_gradient(inst, y, exact_shortest_path(inst, y, i), inst.weight(i), target);
        if (target.max_abs() == 0.0) {
            EXPECT_EQ(est.gradient.max_abs(), 0.0);
            continue;
        }
        EXPECT_GE(cosine(est.gradient, target), 1.0 - 1e-3) << seed;
    }
}

TEST(Estimator, UniformErrorShrinksWithL) {
    // b = 0, Uniform source: the self-normalized estimator tends to the
    // proposal-weighted gradient sum_g q(g) e^{-beta d} grad d / sum_g q(g) e^{-beta d}.
    const std::size_t m = 4;
    const Instance inst = random_instance(1, m, 13);
    const FacilityConfig y = random_init(inst, 13);
    const double beta = 1.0;
    const TrajectorySet all = enumerate_trajectories(m);
    Matrix limit(m, 2);
    double z = 0.0;
    for (std::size_t k = 0; k < all.size(); ++k) {
        const Path p = all.path(k, 0);
        std::size_t visits = 0;
        for (std::size_t k = 1; k <= m; ++k) visits += p.nodes[k] != m + 1;
        const double draws = static_cast<double>(std::min(visits + 1, m));
        const double w = std::pow(1.0 / (m + 1), draws) * std::exp(-beta * path_cost(inst, y, p));
        accumulate_path_gradient(inst, y, p, w, limit);
        z += w;
    }
    limit *= 1.0 / z;
    std::vector<double> mean_err;
    for (std::size_t L : {10u, 40u, 160u}) {
        double err = 0.0;
        for (std::uint64_t seed = 0; seed < 100; ++seed) {
            const MixtureEstimate est = estimate_gradient(inst, y, beta, PolicySource::uniform(),
                                                          MixtureOptions{0, L, false, false}, SampleStream{seed, 0, 0});
            err += (est.gradient - limit).frobenius_norm();
        }
        mean_err.push_back(err / 100);
    }
    EXPECT_GT(mean_err[0], mean_err[1]);
    EXPECT_GT(mean_err[1], mean_err[2]);
}

TEST(Estimator, SampleSetShapeAndValidity) {
    const Instance inst = random_instance(4, 4, 2);
    const FacilityConfig y = random_init(inst, 2);
    const MixtureEstimate est =
        estimate_gradient(inst, y, 2.0, PolicySource::exact_dp(), MixtureOptions{}, SampleStream{5, 1, 2});
    ASSERT_EQ(est.samples.agents.size(), 4u);
    for (const AgentSamples& a : est.samples.agents) {
        EXPECT_EQ(a.paths.size(), 15u);
        EXPECT_EQ(a.from_policy, 5u);
        double total = 0.0;
        for (std::size_t q = 0; q < a.paths.size(); ++q) {
            EXPECT_NO_THROW(validate_path(a.paths[q], 4));
            EXPECT_DOUBLE_EQ(a.costs[q], path_cost(inst, y, a.paths[q]));
            total += a.weights[q];
        }
        EXPECT_NEAR(total, 1.0, 1e-12);
    }
}

TEST(Estimator, ShortBeamIsToppedUpWithUniformPaths) {
    const Instance inst = random_instance(1, 3, 2);
    const FacilityConfig y = random_init(inst, 2);
    auto ext = std::make_shared<ExternalPolicy>();
    ext->matrices.push_back(one_hot_policy());
    const MixtureEstimate est = estimate_gradient(inst, y, 1.0, PolicySource::external(ext), MixtureOptions{}, {});
    EXPECT_EQ(est.samples.agents[0].from_policy, 1u);
    EXPECT_EQ(est.samples.agents[0].paths.size(), 15u);
}

TEST(Estimator, DedupCollapsesRepeats) {
    const Instance inst = random_instance(1, 1, 2);
    const FacilityConfig y = random_init(inst, 2);
    const MixtureEstimate plain =
        estimate_gradient(inst, y, 1.0, PolicySource::exact_dp(), MixtureOptions{2, 15, false, false}, {});
    const MixtureEstimate dedup =
        estimate_gradient(inst, y, 1.0, PolicySource::exact_dp(), MixtureOptions{2, 15, true, false}, {});
    EXPECT_EQ(plain.samples.agents[0].paths.size(), 15u);
    EXPECT_EQ(dedup.samples.agents[0].paths.size(), 2u);  // only two trajectories exist for M = 1
    EXPECT_LT(max_rel_diff(dedup.gradient, exact_gradient(inst, y, 1.0)), 1e-12);
}

TEST(Estimator, ThreadCountAndSeedDeterminism) {
    const Instance inst = weighted_instance(9, 4, 3);
    const FacilityConfig y = random_init(inst, 3);
    const SampleStream s{77, 2, 5};
    const MixtureEstimate a = estimate_gradient(inst, y, 1.0, PolicySource::exact_dp(), MixtureOptions{}, s, 1);
    const MixtureEstimate b = estimate_gradient(inst, y, 1.0, PolicySource::exact_dp(), MixtureOptions{}, s, 4);
    EXPECT_EQ(a.gradient, b.gradient);
    for (std::size_t i = 0; i < 9; ++i) EXPECT_EQ(a.samples.agents[i].costs, b.samples.agents[i].costs);
    const MixtureEstimate c =
        estimate_gradient(inst, y, 1.0, PolicySource::exact_dp(), MixtureOptions{}, SampleStream{77, 2, 6}, 1);
    EXPECT_NE(a.gradient, c.gradient);
}

TEST(Estimator, RejectsBadOptions) {
    const Instance inst = random_instance(1, 2, 2);
    const FacilityConfig y = random_init(inst, 2);
    EXPECT_THROW(estimate_gradient(inst, y, 1.0, PolicySource::exact_dp(), MixtureOptions{6, 5, false, false}, {}),
                 ArgumentError);
    Matrix bad = PolicyMatrix::uniform(2).matrix();
    bad(0, 1) = 0.9;
    auto ext = std::make_shared<ExternalPolicy>();
    ext->matrices.push_back(PolicyMatrix(bad));
    EXPECT_THROW(estimate_gradient(inst, y, 1.0, PolicySource::external(ext), MixtureOptions{2, 5, false, true}, {}),
                 PolicyError);
}
