#include <benchmark/benchmark.h>

#include <vector>

#include "unica/adapter.hpp"
#include "unica/metrics.hpp"
#include "unica/ops.hpp"
#include "unica/rng.hpp"
#include "unica/synthetic.hpp"

using namespace unica;

namespace {

Tensor random_tensor(Shape shape, std::uint64_t seed) {
    Rng rng(seed);
    Tensor t(shape);
    for (auto& v : t.data()) v = rng.normal();
    return t;
}

struct AdapterFixture {
    Backbone backbone;
    Dataset ds;
    PreparedDataset pd;
    Adapter adapter;
    WindowData window;

    explicit AdapterFixture(std::size_t known) {
        backbone = Backbone(BackboneConfig{}, 1);
        backbone.freeze();
        SyntheticSpec s = synthetic_preset("regime");
        s.n_series = 1;
        s.known_beta.assign(known, 0.5);
        s.het_dim = 8;
        s.het_scale = 0.5;
        ds = gen_synthetic(s);
        pd = prepare(ds);
        adapter = Adapter(ds.schema, backbone.config(), FusionConfig{}, 2);
        window = make_window(pd, Window{0, pd.series[0].length() - pd.horizon});
    }
};

}  // namespace

static void BM_Matmul(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const Tensor a = random_tensor({n, n}, 1), b = random_tensor({n, n}, 2);
    for (auto _ : state) {
        Tape t(false);
        benchmark::DoNotOptimize(ops::matmul(t.constant(a), t.constant(b)).value().data().data());
    }
    state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Matmul)->RangeMultiplier(2)->Range(16, 128)->Complexity();

static void BM_SoftmaxRows(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const Tensor x = random_tensor({n, n}, 3);
    for (auto _ : state) {
        Tape t(false);
        benchmark::DoNotOptimize(ops::softmax_rows(t.constant(x)).value().data().data());
    }
}
BENCHMARK(BM_SoftmaxRows)->Arg(16)->Arg(64);

static void BM_BackboneForecast(benchmark::State& state) {
    Backbone b(BackboneConfig{}, 1);
    const Tensor h = random_tensor({b.config().context}, 4);
    const std::vector<double> history(h.data().begin(), h.data().end());
    for (auto _ : state) benchmark::DoNotOptimize(b.forecast(history).data().data());
}
BENCHMARK(BM_BackboneForecast)->Unit(benchmark::kMicrosecond);

static void BM_AdapterForecast(benchmark::State& state) {
    AdapterFixture f(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(f.adapter.forecast(f.backbone, f.window).data().data());
    state.counters["channels"] = static_cast<double>(f.adapter.registry().size());
}
BENCHMARK(BM_AdapterForecast)->Arg(1)->Arg(4)->Arg(16)->Unit(benchmark::kMicrosecond);

static void BM_AdapterTrainStep(benchmark::State& state) {
    AdapterFixture f(static_cast<std::size_t>(state.range(0)));
    const auto& levels = f.backbone.config().levels;
    std::vector<double> target(f.window.future.size());
    for (auto _ : state) {
        Tape t;
        Normalized norm;
        Var q = f.adapter.forward(t, f.backbone, f.window, &norm);
        for (std::size_t i = 0; i < target.size(); ++i) target[i] = (f.window.future[i] - norm.mu) / norm.sigma;
        t.backward(ops::quantile_loss(q, target, levels));
    }
}
BENCHMARK(BM_AdapterTrainStep)->Arg(1)->Arg(4)->Unit(benchmark::kMicrosecond);

static void BM_Crps(benchmark::State& state) {
    const auto frames_n = static_cast<std::size_t>(state.range(0));
    const std::vector<double> levels{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
    std::vector<EvalFrame> frames;
    Rng rng(5);
    for (std::size_t i = 0; i < frames_n; ++i) {
        std::vector<double> y(24);
        for (auto& v : y) v = rng.normal(10.0);
        frames.push_back(EvalFrame{"s" + std::to_string(i), 96, y, random_tensor({24, 9}, 10 + i)});
    }
    for (auto _ : state) benchmark::DoNotOptimize(crps(frames, levels).value);
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * frames_n));
}
BENCHMARK(BM_Crps)->Arg(16)->Arg(256);

BENCHMARK_MAIN();
