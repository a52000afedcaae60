// Gradient cost against the number of facilities M, single-threaded.
// Exact DP is bounded by M^4 (measured slope is a little under 4); the mixture
// estimator with a ready-made policy grows like M^2.
#include <benchmark/benchmark.h>

#include <memory>

#include "flpo/instance.hpp"
#include "flpo/mixture_gradient.hpp"
#include "flpo/path_oracle.hpp"
#include "flpo/stagewise_dp.hpp"

namespace {

using namespace flpo;

constexpr std::size_t kAgents = 4;
constexpr double kBeta = 10.0;

struct Setup {
    Instance inst;
    FacilityConfig y;

    explicit Setup(std::size_t m)
        : inst(generate_instance(kAgents, m, 2, unit_box(2), 900 + m)), y(random_init(inst, m)) {}
};

void BM_ExactGradient(benchmark::State& state) {
    const Setup s(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(free_energy_gradient(s.inst, s.y, kBeta, 1));
    state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_ExactGradient)->RangeMultiplier(2)->Range(8, 64)->Complexity(benchmark::oNCubed)->Unit(benchmark::kMicrosecond);

void BM_MixtureGradient(benchmark::State& state) {
    const Setup s(static_cast<std::size_t>(state.range(0)));
    auto policy = std::make_shared<ExternalPolicy>();
    for (std::size_t i = 0; i < kAgents; ++i) policy->matrices.push_back(exact_policy_matrix(s.inst, s.y, kBeta, i));
    const PolicySource source = PolicySource::external(policy);
    std::uint64_t iter = 0;
    for (auto _ : state)
        benchmark::DoNotOptimize(estimate_gradient(s.inst, s.y, kBeta, source, MixtureOptions{}, SampleStream{1, 0, iter++}, 1));
    state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_MixtureGradient)->RangeMultiplier(2)->Range(8, 64)->Complexity(benchmark::oNSquared)->Unit(benchmark::kMicrosecond);

void BM_ExactPolicyMatrix(benchmark::State& state) {
    const Setup s(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(exact_policy_matrix(s.inst, s.y, kBeta, 0));
}
BENCHMARK(BM_ExactPolicyMatrix)->RangeMultiplier(2)->Range(8, 64)->Unit(benchmark::kMicrosecond);

void BM_PathOracleGradient(benchmark::State& state) {
    const Setup s(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(exact_gradient(s.inst, s.y, kBeta));
}
BENCHMARK(BM_PathOracleGradient)->DenseRange(2, 6)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
