#include <benchmark/benchmark.h>

#include <set>

#include "frisk/baseline.hpp"
#include "frisk/cluster.hpp"
#include "frisk/random.hpp"
#include "frisk/stages.hpp"
#include "frisk/synth.hpp"
#include "frisk/transform.hpp"

using namespace frisk;

namespace {

Eigen::MatrixXd uniform_points(Eigen::Index n, Eigen::Index d, std::uint64_t seed) {
    Rng rng(seed);
    Eigen::MatrixXd x(n, d);
    for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = uniform01(rng);
    return x;
}

SynthDataset dataset(int strangers_per_user) {
    SynthConfig c;
    c.n_users = 20;
    c.strangers_per_user = strangers_per_user;
    c.rounding = LabelRounding::discrete;
    c.label_noise_sigma = 0.3;
    return generate(c);
}

} // namespace

static void BM_KMeans(benchmark::State& state) {
    const auto x = uniform_points(state.range(0), 11, 1);
    for (auto _ : state) benchmark::DoNotOptimize(kmeans_fit(x, 6, 7));
    state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_KMeans)->RangeMultiplier(4)->Range(256, 4096)->Complexity();

static void BM_CompleteLinkage(benchmark::State& state) {
    const auto x = uniform_points(state.range(0), 11, 2);
    for (auto _ : state) benchmark::DoNotOptimize(complete_linkage(x));
    state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_CompleteLinkage)->RangeMultiplier(2)->Range(250, 2000)->Complexity();

static void BM_MultinomialFit(benchmark::State& state) {
    const auto n = state.range(0);
    const auto x = uniform_points(n, 12, 3);
    Rng rng(4);
    std::vector<int> y;
    for (Eigen::Index i = 0; i < n; ++i) y.push_back(1 + static_cast<int>(uniform_index(rng, 3)));
    std::vector<std::string> names;
    for (int j = 0; j < 12; ++j) names.push_back("x" + std::to_string(j));
    for (auto _ : state) benchmark::DoNotOptimize(fit_multinomial(x, y, names));
    state.SetComplexityN(n);
}
BENCHMARK(BM_MultinomialFit)->RangeMultiplier(4)->Range(500, 8000)->Complexity();

static void BM_BuildSfms(benchmark::State& state) {
    const auto ds = dataset(static_cast<int>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(build_sfms(ds.data.net, ds.data.records));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(ds.data.records.size()));
}
BENCHMARK(BM_BuildSfms)->Arg(100)->Arg(400);

static void BM_BuildSfmf(benchmark::State& state) {
    const auto ds = dataset(static_cast<int>(state.range(0)));
    const auto owners = labeling_users(ds.data.records);
    for (auto _ : state) benchmark::DoNotOptimize(build_sfmf(ds.data.net, owners));
}
BENCHMARK(BM_BuildSfmf)->Arg(100);

static void BM_Stages(benchmark::State& state) {
    const auto ds = dataset(static_cast<int>(state.range(0)));
    PipelineConfig cfg;
    for (auto _ : state) benchmark::DoNotOptimize(run_stages(ds.data, cfg));
}
BENCHMARK(BM_Stages)->Arg(100)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
