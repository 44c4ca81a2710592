#include <benchmark/benchmark.h>

#include <random>

#include "survband/bands.hpp"
#include "survband/hazardnet.hpp"
#include "survband/simgen.hpp"
#include "survband/survest.hpp"

using namespace survband;

namespace {

Dataset simulated(std::size_t n) {
    Rng rng(11);
    const Dataset raw = generate(make_setting(1), n, rng).data;
    return standardize(raw, std::vector<std::size_t>{0, 1, 2}, all_rows(n));
}

HazardNet network(const Dataset& ds, std::size_t width) {
    NetConfig cfg;
    cfg.layer_width = width;
    Rng rng(3);
    HazardNet net = HazardNet::init(cfg, ds.dim() + 1, rng);
    net.set_scaling(ds.standardization());
    return net;
}

void BM_ForwardBackward(benchmark::State& state) {
    const Dataset ds = simulated(1000);
    const HazardNet net = network(ds, static_cast<std::size_t>(state.range(0)));
    const RiskSetSampler sampler(ds, all_rows(ds.size()));
    Rng rng(5);
    std::vector<std::size_t> events(sampler.event_positions().begin(), sampler.event_positions().begin() + 256);
    const CaseControlBatch batch = sampler.make_batch(events, 8, rng);
    for (auto _ : state) {
        ForwardCache cache;
        benchmark::DoNotOptimize(ccl_loss_gradient(net, batch, Mode::train, &rng, &cache));
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(batch.inputs.cols()));
}
BENCHMARK(BM_ForwardBackward)->Arg(16)->Arg(32)->Arg(64);

void BM_BreslowConstant(benchmark::State& state) {
    const Dataset ds = simulated(static_cast<std::size_t>(state.range(0)));
    const auto g = constant_g(0.0);
    for (auto _ : state) benchmark::DoNotOptimize(breslow_fit(ds, *g));
}
BENCHMARK(BM_BreslowConstant)->Arg(1000)->Arg(10000);

void BM_BreslowNetwork(benchmark::State& state) {
    const Dataset ds = simulated(static_cast<std::size_t>(state.range(0)));
    const auto g = net_g(network(ds, 32));
    for (auto _ : state) benchmark::DoNotOptimize(breslow_fit(ds, *g));
}
BENCHMARK(BM_BreslowNetwork)->Arg(200)->Arg(800)->Unit(benchmark::kMillisecond);

void BM_KsBand(benchmark::State& state) {
    const TimeGrid grid = TimeGrid::uniform(0.1, 27.0, 0.1);
    std::mt19937_64 rng(7);
    std::normal_distribution<double> z(0.0, 0.05);
    auto curve = [&](double shift) {
        std::vector<double> v(grid.size());
        for (std::size_t k = 0; k < grid.size(); ++k) v[k] = std::exp(-(0.04 + shift) * grid[k]);
        return SurvCurve(grid, std::move(v));
    };
    BootstrapReplicates reps;
    reps.base = curve(0.0);
    reps.center = curve(0.001);
    for (int b = 0; b < state.range(0); ++b) reps.curves.push_back(curve(std::abs(z(rng)) * 0.1));
    for (auto _ : state) benchmark::DoNotOptimize(ks_band(reps, 0.1));
}
BENCHMARK(BM_KsBand)->Arg(100)->Arg(1000);

}  // namespace

BENCHMARK_MAIN();
