#include <benchmark/benchmark.h>

#include <thread>
#include <vector>

#include "tsdyn/bandit.hpp"
#include "tsdyn/rng.hpp"
#include "tsdyn/sde.hpp"

using namespace tsdyn;

namespace {

struct State {
    std::vector<double> u;
    std::vector<double> w;
    std::vector<double> draws;
};

State make_state(std::size_t m, std::size_t mc) {
    Stream rng = substream(1, 0);
    State s;
    double total = 0.0;
    for (std::size_t a = 0; a < m; ++a) {
        s.u.push_back(0.5 + rng.uniform_open());
        total += s.u.back();
        s.w.push_back(rng.normal());
    }
    for (auto& x : s.u) x /= total;
    s.draws.resize(m * mc);
    for (auto& z : s.draws) z = rng.normal();
    return s;
}

int max_threads() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

void BM_EstimatePSerial(benchmark::State& state) {
    const auto s = make_state(static_cast<std::size_t>(state.range(0)), static_cast<std::size_t>(state.range(1)));
    const auto dist = SamplingDistribution::gaussian();
    for (auto _ : state) {
        benchmark::DoNotOptimize(estimate_p_from_draws_serial(s.u, s.w, s.draws, dist, 1e-10));
    }
}

void BM_EstimatePParallel(benchmark::State& state) {
    const auto s = make_state(static_cast<std::size_t>(state.range(0)), static_cast<std::size_t>(state.range(1)));
    const auto dist = SamplingDistribution::gaussian();
    const int threads = max_threads();
    for (auto _ : state) {
        benchmark::DoNotOptimize(estimate_p_from_draws(s.u, s.w, s.draws, dist, 1e-10, threads));
    }
    state.counters["threads"] = threads;
}

BanditConfig setting_one() {
    BanditConfig c;
    c.mu = {1.0, 1.0, 0.5, 0.0};
    c.horizon = 20000;
    c.seed = 3;
    return c;
}

void BM_ReplicateSerial(benchmark::State& state) {
    const auto c = setting_one();
    for (auto _ : state) {
        benchmark::DoNotOptimize(replicate_serial(c, static_cast<std::size_t>(state.range(0))));
    }
}

void BM_ReplicateParallel(benchmark::State& state) {
    const auto c = setting_one();
    const int threads = max_threads();
    for (auto _ : state) {
        benchmark::DoNotOptimize(replicate(c, static_cast<std::size_t>(state.range(0)), threads));
    }
    state.counters["threads"] = threads;
}

}  // namespace

BENCHMARK(BM_EstimatePSerial)->Args({3, 400})->Args({6, 400})->Args({6, 4000});
BENCHMARK(BM_EstimatePParallel)->Args({3, 400})->Args({6, 400})->Args({6, 4000});
BENCHMARK(BM_ReplicateSerial)->Arg(64)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ReplicateParallel)->Arg(64)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
