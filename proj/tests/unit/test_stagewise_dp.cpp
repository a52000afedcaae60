#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "flpo/errors.hpp"
#include "flpo/path_oracle.hpp"
#include "flpo/stagewise_dp.hpp"
#include "helpers.hpp"

using namespace flpo;
using flpo::test::make_facilities;
using flpo::test::make_instance;
using flpo::test::max_rel_diff;
using flpo::test::random_instance;
using flpo::test::weighted_instance;

namespace {

double row_sum(const StagewisePolicy& p, std::size_t k, NodeId node) {
    double s = 0.0;
    for (NodeId next = 0; next < p.graph.nodes(); ++next) s += p.at(k, node, next);
    return s;
}

}  // namespace

TEST(StageGraph, Shape) {
    const StageGraph g{3};
    EXPECT_TRUE(g.valid(0, 0));
    EXPECT_FALSE(g.valid(0, 1));
    EXPECT_FALSE(g.valid(1, 0));
    EXPECT_TRUE(g.valid(3, 2));
    EXPECT_FALSE(g.valid(4, 2));
    EXPECT_TRUE(g.valid(4, 4));
    EXPECT_TRUE(g.can_move(0, 0, 4));
    EXPECT_TRUE(g.can_move(1, 2, 2));
    EXPECT_FALSE(g.can_move(3, 2, 1));  // last facility stage is forced home
    EXPECT_TRUE(g.can_move(3, 2, 4));
    EXPECT_FALSE(g.can_move(2, 4, 1));  // destination absorbs
}

TEST(BackwardValues, SingleSuccessorValueIsLegCost) {
    const Instance inst = make_instance({{0.0, 0.0}}, {{1.0, 2.0}}, 1, {1.0});
    const FacilityConfig y = make_facilities({{0.25, 0.5}});
    for (double beta : {1e-3, 1.0, 1e3}) {
        const BackwardTables t = backward_values(inst, y, beta, 0);
        EXPECT_DOUBLE_EQ(t.values.at(1, 1), pair_cost(Point{0.25, 0.5}, Point{1.0, 2.0}));
        EXPECT_DOUBLE_EQ(t.values.at(2, 2), 0.0);
    }
}

TEST(BackwardValues, LargeBetaApproachesShortestPath) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const Instance inst = random_instance(1, 4, seed);
        const FacilityConfig y = random_init(inst, seed);
        const double v = backward_values(inst, y, 1e6, 0).values.at(0, 0);
        const double best = path_cost(inst, y, exact_shortest_path(inst, y, 0));
        EXPECT_NEAR(v, best, 1e-4);
        EXPECT_LE(v, best + 1e-12);
    }
}

TEST(BackwardValues, SmallBetaIsMeanMinusLogCount) {
    // For beta -> 0, -(1/beta) log sum_g exp(-beta d_g) = mean(d) - log(|G|)/beta + O(beta).
    const Instance inst = random_instance(1, 2, 4);
    const FacilityConfig y = random_init(inst, 4);
    const TrajectorySet all = enumerate_trajectories(2);
    ASSERT_EQ(all.size(), 7u);
    double mean = 0.0;
    for (std::size_t k = 0; k < all.size(); ++k) mean += path_cost(inst, y, all.path(k, 0));
    mean /= 7.0;
    const double beta = 1e-6;
    const double v = backward_values(inst, y, beta, 0).values.at(0, 0);
    EXPECT_NEAR(v + std::log(7.0) / beta, mean, 1e-5);
}

TEST(BackwardValues, RejectsBadBeta) {
    const Instance inst = random_instance(1, 2, 1);
    const FacilityConfig y = random_init(inst, 1);
    EXPECT_THROW(backward_values(inst, y, 0.0, 0), ArgumentError);
    EXPECT_THROW(backward_values(inst, y, -1.0, 0), ArgumentError);
    EXPECT_THROW(free_energy(inst, y, std::nan(""), 1), ArgumentError);
}

TEST(BackwardValues, NonFiniteCostIsNumericError) {
    const Instance inst = random_instance(2, 2, 1);
    const FacilityConfig y = make_facilities({{1e200, 0.0}, {0.5, 0.5}});
    EXPECT_THROW(free_energy(inst, y, 1.0), NumericError);
    try {
        free_energy_gradient(inst, y, 1.0);
    } catch (const NumericError& e) {
        EXPECT_NE(std::string(e.what()).find("agent 0"), std::string::npos);
    }
}

TEST(GibbsPolicy, ValueAndPolicyShareOneTable) {
    const Instance inst = random_instance(1, 4, 12);
    const FacilityConfig y = random_init(inst, 12);
    for (double beta : {1e-3, 1.0, 1e3}) {
        const BackwardTables t = backward_values(inst, y, beta, 0);
        const StagewisePolicy p = gibbs_policy(t.values, t.state_action, beta);
        const StageGraph g = t.values.graph;
        for (std::size_t k = 0; k + 1 < g.stages(); ++k)
            for (NodeId node = 0; node < g.nodes(); ++node) {
                if (!g.valid(k, node)) continue;
                double lo = INFINITY;
                for (NodeId next = 0; next < g.nodes(); ++next) lo = std::min(lo, t.state_action.at(k, node, next));
                double z = 0.0;
                for (NodeId next = 0; next < g.nodes(); ++next)
                    if (g.can_move(k, node, next)) z += std::exp(-beta * (t.state_action.at(k, node, next) - lo));
                EXPECT_NEAR(t.values.at(k, node), lo - std::log(z) / beta, 1e-12 * (1 + std::abs(lo)));
                for (NodeId next = 0; next < g.nodes(); ++next) {
                    const double expected =
                        g.can_move(k, node, next) ? std::exp(-beta * (t.state_action.at(k, node, next) - lo)) / z : 0.0;
                    EXPECT_NEAR(p.at(k, node, next), expected, 1e-14);
                }
                EXPECT_NEAR(row_sum(p, k, node), 1.0, 1e-12);
            }
    }
}

TEST(GibbsPolicy, MismatchedBetaRejected) {
    const Instance inst = random_instance(1, 2, 2);
    const BackwardTables t = backward_values(inst, random_init(inst, 2), 1.0, 0);
    EXPECT_THROW(gibbs_policy(t.values, t.state_action, 2.0), ContractError);
}

TEST(GibbsPolicy, UniformRowsAtVanishingBetaNearHorizon) {
    // On the last free stage every successor has exactly one completion, so the
    // row is a softmax of near-constants.
    const Instance inst = random_instance(1, 4, 3);
    const FacilityConfig y = random_init(inst, 3);
    const double beta = 1e-12;
    const BackwardTables t = backward_values(inst, y, beta, 0);
    const StagewisePolicy p = gibbs_policy(t.values, t.state_action, beta);
    for (NodeId node = 1; node <= 4; ++node)
        for (NodeId next = 1; next <= 5; ++next) EXPECT_NEAR(p.at(3, node, next), 0.2, 1e-9);
}

TEST(GibbsPolicy, VanishingBetaRowsFollowCompletionCounts) {
    // Earlier rows weight each successor by how many trajectories continue from
    // it: the trajectory-level distribution is uniform, the stagewise rows are not.
    const Instance inst = random_instance(1, 3, 8);
    const FacilityConfig y = random_init(inst, 8);
    const double beta = 1e-12;
    const BackwardTables t = backward_values(inst, y, beta, 0);
    const StagewisePolicy p = gibbs_policy(t.values, t.state_action, beta);
    // From a facility at stage 1 there are 13 completions (C_3 = 1, C_k = 3 C_{k+1} + 1);
    // from the destination exactly one.
    const double total = 3 * 13.0 + 1.0;
    for (NodeId f = 1; f <= 3; ++f) EXPECT_NEAR(p.at(0, 0, f), 13.0 / total, 1e-9);
    EXPECT_NEAR(p.at(0, 0, 4), 1.0 / total, 1e-9);
}

TEST(GibbsPolicy, LargeBetaConcentratesOnArgmin) {
    std::size_t checked = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const Instance inst = random_instance(1, 4, 100 + seed);
        const FacilityConfig y = random_init(inst, seed);
        const double beta = 1e6;
        const BackwardTables t = backward_values(inst, y, beta, 0);
        const StagewisePolicy p = gibbs_policy(t.values, t.state_action, beta);
        const StageGraph g = t.values.graph;
        for (std::size_t k = 0; k + 1 < g.stages(); ++k)
            for (NodeId node = 0; node < g.nodes(); ++node) {
                if (!g.valid(k, node)) continue;
                std::vector<double> lam;
                for (NodeId next = 0; next < g.nodes(); ++next) lam.push_back(t.state_action.at(k, node, next));
                std::vector<double> sorted = lam;
                std::sort(sorted.begin(), sorted.end());
                if (sorted.size() > 1 && std::isfinite(sorted[1]) && sorted[1] - sorted[0] < 1e-4) continue;
                const auto arg = static_cast<NodeId>(std::min_element(lam.begin(), lam.end()) - lam.begin());
                EXPECT_GE(p.at(k, node, arg), 1.0 - 1e-6);
                ++checked;
            }
    }
    EXPECT_GT(checked, 100u);
}

TEST(GibbsPolicy, FacilityRelabelingPermutesMatrix) {
    const Instance inst = random_instance(1, 3, 21);
    const FacilityConfig y = random_init(inst, 21);
    const std::vector<std::size_t> perm{2, 0, 1};  // new facility j is old perm[j]
    FacilityConfig yp(3, 2);
    for (std::size_t j = 0; j < 3; ++j)
        for (std::size_t a = 0; a < 2; ++a) yp.location(j)[a] = y.location(perm[j])[a];
    const PolicyMatrix p = exact_policy_matrix(inst, y, 2.0, 0);
    const PolicyMatrix q = exact_policy_matrix(inst, yp, 2.0, 0);
    auto old_of = [&](NodeId n) -> NodeId { return n >= 1 && n <= 3 ? perm[n - 1] + 1 : n; };
    for (NodeId r = 0; r < 5; ++r)
        for (NodeId c = 0; c < 5; ++c) EXPECT_NEAR(q(r, c), p(old_of(r), old_of(c)), 1e-14);
}

TEST(PolicyMatrix, ExportShape) {
    const Instance inst = random_instance(2, 4, 5);
    const FacilityConfig y = random_init(inst, 5);
    const PolicyMatrix p = exact_policy_matrix(inst, y, 1.0, 1);
    EXPECT_NO_THROW(p.validate(1e-12));
    for (NodeId r = 0; r < 6; ++r) EXPECT_EQ(p(r, 0), 0.0);
    EXPECT_EQ(p(5, 5), 1.0);
    for (NodeId c = 0; c < 5; ++c) EXPECT_EQ(p(5, c), 0.0);
    EXPECT_NO_THROW(PolicyMatrix::uniform(4).validate());
}

TEST(PolicyMatrix, ValidateNamesRow) {
    Matrix m = PolicyMatrix::uniform(2).matrix();
    m(2, 1) = 0.1;
    try {
        PolicyMatrix(m).validate();
        FAIL();
    } catch (const PolicyError& e) {
        EXPECT_NE(std::string(e.what()).find("row 2"), std::string::npos);
    }
    EXPECT_THROW(PolicyMatrix(Matrix(2, 2)), PolicyError);
}

TEST(FreeEnergy, TwoTrajectoryClosedForm) {
    const Instance inst = make_instance({{0.1, 0.9}}, {{0.8, 0.3}}, 1, {1.0});
    const FacilityConfig y = make_facilities({{0.6, 0.7}});
    const double direct = pair_cost(Point{0.1, 0.9}, Point{0.8, 0.3});
    const double via = pair_cost(Point{0.1, 0.9}, Point{0.6, 0.7}) + pair_cost(Point{0.6, 0.7}, Point{0.8, 0.3});
    for (double beta : {1e-3, 0.5, 1.0, 10.0}) {
        const double closed = -std::log(std::exp(-beta * direct) + std::exp(-beta * via)) / beta;
        EXPECT_NEAR(free_energy(inst, y, beta), closed, 1e-12 * (1 + std::abs(closed)));
    }
}

TEST(FreeEnergy, MatchesOracle) {
    for (std::uint64_t seed = 0; seed < 12; ++seed) {
        const Instance inst = weighted_instance(1 + seed % 3, 1 + seed % 4, seed);
        const FacilityConfig y = random_init(inst, seed);
        for (double beta : {1e-3, 1.0, 1e3}) {
            const double oracle = exact_free_energy(inst, y, beta);
            EXPECT_LT(std::abs(free_energy(inst, y, beta) - oracle) / (1 + std::abs(oracle)), 1e-9);
        }
    }
}

TEST(FreeEnergy, MonotoneInBeta) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const Instance inst = random_instance(3, 4, 40 + seed);
        const FacilityConfig y = random_init(inst, seed);
        double prev = -INFINITY;
        for (double beta : {1e-3, 1e-2, 1e-1, 1.0, 10.0, 100.0, 1e3, 1e4}) {
            const double f = free_energy(inst, y, beta);
            EXPECT_LE(prev, f);
            prev = f;
        }
    }
}

TEST(FreeEnergy, ThreadCountDoesNotChangeBits) {
    const Instance inst = weighted_instance(13, 5, 77);
    const FacilityConfig y = random_init(inst, 77);
    const FreeEnergyGradient one = free_energy_and_gradient(inst, y, 3.0, 1);
    for (std::size_t threads : {2u, 4u, 7u}) {
        const FreeEnergyGradient many = free_energy_and_gradient(inst, y, 3.0, threads);
        EXPECT_EQ(one.free_energy, many.free_energy);
        EXPECT_EQ(one.gradient, many.gradient);
    }
}

TEST(Gradient, MatchesCentralDifferences) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const Instance inst = weighted_instance(3, 4, 500 + seed);
        const FacilityConfig y = random_init(inst, seed);
        for (double beta : {1e-3, 1.0, 10.0}) {
            const Matrix g = free_energy_gradient(inst, y, beta);
            Matrix fd(4, 2);
            const double h = 1e-5;
            for (std::size_t j = 0; j < 4; ++j)
                for (std::size_t a = 0; a < 2; ++a) {
                    FacilityConfig up = y, down = y;
                    up.location(j)[a] += h;
                    down.location(j)[a] -= h;
                    fd(j, a) = (free_energy(inst, up, beta) - free_energy(inst, down, beta)) / (2 * h);
                }
            EXPECT_LT(max_rel_diff(g, fd), 1e-4) << "seed " << seed << " beta " << beta;
        }
    }
}

TEST(Gradient, MatchesOracle) {
    for (std::uint64_t seed = 0; seed < 8; ++seed) {
        const Instance inst = weighted_instance(1 + seed % 3, 1 + seed % 4, 900 + seed);
        const FacilityConfig y = random_init(inst, seed);
        for (double beta : {1e-3, 1.0, 1e3})
            EXPECT_LT(max_rel_diff(free_energy_gradient(inst, y, beta), exact_gradient(inst, y, beta)), 1e-7);
    }
}

TEST(Gradient, OffRouteFacilityHasNoGradient) {
    // Facility 2 sits far outside the disc around the route; at beta = 1e6 no
    // probable leg touches it.
    const Instance inst = make_instance({{0.0, 0.0}}, {{1.0, 0.0}}, 2, {1.0});
    const FacilityConfig y = make_facilities({{0.5, 0.1}, {5.0, 5.0}});
    const Matrix g = free_energy_gradient(inst, y, 1e6);
    const double row0 = std::hypot(g(0, 0), g(0, 1));
    const double row1 = std::hypot(g(1, 0), g(1, 1));
    EXPECT_GT(row0, 0.0);
    EXPECT_LE(row1, 1e-6 * row0);
}

TEST(Gradient, MirrorSymmetryCancelsNormalComponent) {
    // Two agents mirrored across the x axis, one facility on the axis.
    const Instance inst = make_instance({{0.0, 0.7}, {0.0, -0.7}}, {{1.0, 0.4}, {1.0, -0.4}}, 1);
    const FacilityConfig y = make_facilities({{0.45, 0.0}});
    for (double beta : {1e-3, 1.0, 1e3}) {
        const Matrix g = free_energy_gradient(inst, y, beta);
        EXPECT_NEAR(g(0, 1), 0.0, 1e-9);
    }
}

TEST(Gradient, TranslationEquivariance) {
    const Instance inst = weighted_instance(3, 3, 31);
    const FacilityConfig y = random_init(inst, 31);
    const Point shift{3.25, -1.5};
    Matrix s = inst.starts(), t = inst.destinations();
    FacilityConfig ys = y;
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t a = 0; a < 2; ++a) {
            s(i, a) += shift[a];
            t(i, a) += shift[a];
            ys.location(i)[a] += shift[a];
        }
    Bounds b{Point{-10, -10}, Point{10, 10}};
    const Instance moved(s, t, inst.weights(), 3, b);
    for (double beta : {1e-3, 1.0, 1e3}) {
        const FreeEnergyGradient a = free_energy_and_gradient(inst, y, beta);
        const FreeEnergyGradient c = free_energy_and_gradient(moved, ys, beta);
        EXPECT_NEAR(a.free_energy, c.free_energy, 1e-9 * (1 + std::abs(a.free_energy)));
        EXPECT_LT((a.gradient - c.gradient).max_abs(), 1e-9);
    }
}

TEST(GreedyRollout, OneHotDestinationGivesDirectPath) {
    Matrix m(4, 4);
    for (NodeId r = 0; r < 4; ++r) m(r, 3) = 1.0;
    const Instance inst = random_instance(1, 2, 1);
    EXPECT_EQ(greedy_rollout(PolicyMatrix(m), inst, 0).nodes, (std::vector<NodeId>{0, 3, 3, 3}));
}

TEST(GreedyRollout, TiePrefersDestination) {
    Matrix m = PolicyMatrix::uniform(3).matrix();
    for (NodeId c = 1; c <= 4; ++c) m(0, c) = 0.0;
    m(0, 2) = 0.5;
    m(0, 4) = 0.5;
    const Instance inst = random_instance(1, 3, 1);
    EXPECT_EQ(greedy_rollout(PolicyMatrix(m), inst, 0).nodes, (std::vector<NodeId>{0, 4, 4, 4, 4}));
}

TEST(GreedyRollout, ExactTieInTheSolverPolicyPrefersDestination) {
    // A facility placed on the destination makes "go there, then home" cost
    // exactly the direct leg, so both successors of the start share one Lambda.
    const Instance inst = make_instance({{0.0, 0.0}}, {{1.0, 1.0}}, 1, {1.0});
    const FacilityConfig y = make_facilities({{1.0, 1.0}});
    const PolicyMatrix p = exact_policy_matrix(inst, y, 1e6, 0);
    EXPECT_EQ(p(0, 1), p(0, 2));
    EXPECT_EQ(greedy_rollout(p, inst, 0).nodes, (std::vector<NodeId>{0, 2, 2}));
}

TEST(GreedyRollout, SkipsSelfTransitionsAndTerminates) {
    Matrix m(5, 5);
    m(0, 1) = 1.0;
    m(1, 1) = 0.9;
    m(1, 2) = 0.1;
    m(2, 2) = 0.8;
    m(2, 1) = 0.2;
    m(3, 4) = 1.0;
    m(4, 4) = 1.0;
    const Instance inst = random_instance(1, 3, 1);
    const Path p = greedy_rollout(PolicyMatrix(m), inst, 0);
    EXPECT_NO_THROW(validate_path(p, 3));
    EXPECT_EQ(p.nodes, (std::vector<NodeId>{0, 1, 2, 1, 4}));
}

TEST(GreedyRollout, LargeBetaMatchesShortestPath) {
    std::size_t compared = 0;
    for (std::uint64_t seed = 0; compared < 25 && seed < 200; ++seed) {
        const Instance inst = random_instance(1, 4, 2000 + seed);
        const FacilityConfig y = random_init(inst, seed);
        const Path best = exact_shortest_path(inst, y, 0);
        const Path roll = greedy_rollout(exact_policy_matrix(inst, y, 1e6, 0), inst, 0);
        EXPECT_EQ(canonicalize(roll), canonicalize(best)) << "seed " << seed;
        ++compared;
    }
}
