#include <benchmark/benchmark.h>

#include "fsbdp/partition_posterior.hpp"
#include "fsbdp/postprocess.hpp"
#include "fsbdp/sampler.hpp"
#include "fsbdp/synthetic.hpp"

using namespace fsbdp;

namespace {

const SyntheticDataset& dataset1() {
  static const SyntheticDataset d = [] {
    RngStream rng(1);
    return generate_dataset1(rng);
  }();
  return d;
}

void BM_SweepDataset1(benchmark::State& st) {
  const auto& d = dataset1();
  const HyperParams hyper;
  SamplerConfig config;
  config.mpp_every = 0;
  RngStream rng(2);
  auto state = initialise_state(d.data, hyper, static_cast<int>(st.range(0)), rng);
  for (int k = 0; k < 200; ++k) sweep(state, d.data, hyper, config, rng);
  for (auto _ : st) benchmark::DoNotOptimize(sweep(state, d.data, hyper, config, rng));
}
BENCHMARK(BM_SweepDataset1)->Arg(1)->Arg(30)->Unit(benchmark::kMicrosecond);

void BM_SweepDataset2(benchmark::State& st) {
  RngStream rng(3);
  Dataset2Options options;
  options.n = static_cast<std::size_t>(st.range(0));
  const auto d = generate_dataset2(rng, options);
  const HyperParams hyper;
  SamplerConfig config;
  config.mpp_every = 0;
  auto state = initialise_state(d.data, hyper, 30, rng);
  for (int k = 0; k < 200; ++k) sweep(state, d.data, hyper, config, rng);
  for (auto _ : st) benchmark::DoNotOptimize(sweep(state, d.data, hyper, config, rng));
}
BENCHMARK(BM_SweepDataset2)->Arg(500)->Unit(benchmark::kMicrosecond);

void BM_LogMppTruth(benchmark::State& st) {
  const auto& d = dataset1();
  const HyperParams hyper;
  for (auto _ : st) benchmark::DoNotOptimize(log_mpp(d.truth, d.data, hyper, 1.0));
}
BENCHMARK(BM_LogMppTruth)->Unit(benchmark::kMicrosecond);

void BM_OptimalPartition(benchmark::State& st) {
  const auto& d = dataset1();
  const HyperParams hyper;
  SamplerConfig config;
  config.mpp_every = 0;
  RngStream rng(4);
  auto state = initialise_state(d.data, hyper, 5, rng);
  std::vector<std::vector<int>> samples;
  for (int k = 0; k < 400; ++k) {
    sweep(state, d.data, hyper, config, rng);
    if (k >= 200) samples.push_back(state.z);
  }
  const auto s = accumulate_similarity(samples);
  for (auto _ : st) benchmark::DoNotOptimize(optimal_partition(s, 1, static_cast<std::size_t>(st.range(0))));
}
BENCHMARK(BM_OptimalPartition)->Arg(10)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
