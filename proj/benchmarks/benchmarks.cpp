#include <benchmark/benchmark.h>

#include <vector>

#include "hhfs/finalsize.hpp"
#include "hhfs/likelihood.hpp"
#include "hhfs/model.hpp"
#include "hhfs/rng.hpp"
#include "hhfs/sellke.hpp"

namespace {

hhfs::EpiParams scenario_params(const hhfs::FeatureConfig& cfg) {
    hhfs::EpiParams epi;
    epi.Lambda = 0.014;
    epi.lambda = 0.53;
    epi.vartheta = 1.0;
    epi.eta = -0.3;
    epi.alpha.assign(cfg.external.size(), 0.2);
    epi.beta.assign(cfg.susceptibility.size(), -0.1);
    epi.gamma.assign(cfg.transmissibility.size(), 0.15);
    return epi;
}

hhfs::Household random_household(int n, const hhfs::FeatureConfig& cfg, hhfs::rng::Stream& stream) {
    hhfs::Household hh;
    hh.id = "bench";
    hh.size = n;
    const std::size_t p = cfg.feature_count();
    hh.x.resize(static_cast<std::size_t>(n) * p);
    hh.y.assign(static_cast<std::size_t>(n), 0);
    for (auto& v : hh.x) v = stream.below(4) == 0 ? 1 : 0;
    return hh;
}

void BM_Solve(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    auto cfg = hhfs::FeatureConfig::defaults();
    auto epi = scenario_params(cfg);
    hhfs::rng::Stream stream(hhfs::rng::stream_key(7, 0, static_cast<std::uint64_t>(n)));
    auto hh = random_household(n, cfg, stream);
    for (auto _ : state) {
        auto dist = hhfs::solve(hh, epi, cfg);
        benchmark::DoNotOptimize(dist.p.data());
    }
}
BENCHMARK(BM_Solve)->DenseRange(2, 6);

void BM_LogLikelihood(benchmark::State& state) {
    auto cfg = hhfs::FeatureConfig::defaults();
    auto epi = scenario_params(cfg);
    hhfs::PopulationSpec pop;
    pop.households = static_cast<std::size_t>(state.range(0));
    auto generated = hhfs::generate_cohort(epi, cfg, pop, 11);
    hhfs::LikelihoodEvaluator evaluator(generated.cohort, 0);
    auto theta = hhfs::encode(epi, cfg);
    for (auto _ : state) {
        double ll = evaluator.log_likelihood(theta);
        benchmark::DoNotOptimize(ll);
    }
}
BENCHMARK(BM_LogLikelihood)->Arg(10000)->Arg(100000)->Unit(benchmark::kMillisecond);

void BM_SellkeReplicate(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    auto cfg = hhfs::FeatureConfig::defaults();
    auto epi = scenario_params(cfg);
    hhfs::rng::Stream stream(hhfs::rng::stream_key(7, 1, static_cast<std::uint64_t>(n)));
    auto hh = random_household(n, cfg, stream);
    hhfs::HouseholdTemplate tpl{n, hh.x};
    std::uint64_t rep = 0;
    for (auto _ : state) {
        hhfs::rng::Stream replicate(hhfs::rng::stream_key(7, 2, rep++));
        benchmark::DoNotOptimize(hhfs::simulate_household(tpl, epi, cfg, replicate));
    }
}
BENCHMARK(BM_SellkeReplicate)->Arg(3)->Arg(6);

}  // namespace

BENCHMARK_MAIN();
