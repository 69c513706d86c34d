#include <benchmark/benchmark.h>

#include "halfspec/archive.hpp"
#include "halfspec/pipeline.hpp"
#include "halfspec/synth.hpp"

using namespace halfspec;

namespace {

TimeCube bench_cube() {
  GeneratorSpec spec;
  spec.n_lat = 16;
  spec.n_lon = 32;
  spec.T = 64;
  spec.mean.mu0 = 15.0;
  spec.seed = 4;
  return generate(spec, 1);
}

CompressOptions bench_options(double ratio, Variant variant) {
  CompressOptions o;
  o.selection.ratio = ratio;
  o.selection.variant = variant;
  o.selection.threads = 1;
  o.seed = 4;
  return o;
}

void BM_Compress(benchmark::State& state) {
  const auto cube = bench_cube();
  const auto variant = state.range(1) ? Variant::distributed : Variant::sequential;
  const auto o = bench_options(static_cast<double>(state.range(0)), variant);
  for (auto _ : state) benchmark::DoNotOptimize(compress(cube, o));
}
BENCHMARK(BM_Compress)->Args({5, 0})->Args({5, 1})->Args({10, 0})->Unit(benchmark::kMillisecond);

void BM_Decompress(benchmark::State& state) {
  const auto cube = bench_cube();
  const auto a = compress(cube, bench_options(5.0, Variant::sequential));
  const auto mode = state.range(0) ? DecodeMode::simulate : DecodeMode::mean;
  for (auto _ : state) benchmark::DoNotOptimize(decompress(a, mode, 1, 1));
}
BENCHMARK(BM_Decompress)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_ArchiveSerialize(benchmark::State& state) {
  const auto a = compress(bench_cube(), bench_options(5.0, Variant::sequential));
  for (auto _ : state) {
    const auto bytes = serialize(a);
    benchmark::DoNotOptimize(deserialize(bytes));
  }
}
BENCHMARK(BM_ArchiveSerialize)->Unit(benchmark::kMicrosecond);

}  // namespace
