#include <benchmark/benchmark.h>

#include <random>

#include "halfspec/spectral.hpp"
#include "halfspec/spectral_model.hpp"

using namespace halfspec;

namespace {

TimeCube noise_cube(std::size_t nlat, std::size_t nlon, std::size_t T) {
  TimeCube c(Grid::global_cell_centred(nlat, nlon), T);
  std::mt19937 rng(1);
  std::normal_distribution<float> nd;
  for (auto& v : c.values) v = nd(rng);
  return c;
}

void BM_ForwardDft(benchmark::State& state) {
  const auto cube = noise_cube(32, 64, static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(forward_dft_all(cube));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(cube.values.size()));
}
BENCHMARK(BM_ForwardDft)->Arg(128)->Arg(365)->Unit(benchmark::kMillisecond);

void BM_InverseDft(benchmark::State& state) {
  const auto cube = noise_cube(32, 64, static_cast<std::size_t>(state.range(0)));
  const auto field = forward_dft_all(cube);
  for (auto _ : state) benchmark::DoNotOptimize(inverse_dft_all(field, cube.T));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(cube.values.size()));
}
BENCHMARK(BM_InverseDft)->Arg(128)->Arg(365)->Unit(benchmark::kMillisecond);

void BM_WhittleFitAll(benchmark::State& state) {
  const auto cube = noise_cube(16, 32, 365);
  auto field = forward_dft_all(cube);
  remove_mean(field, estimate_mean(field, {}));
  const auto basis = build_basis(field);
  const auto pgram = periodogram(field);
  for (auto _ : state) benchmark::DoNotOptimize(fit_theta_all(pgram, basis, cube.T, 1));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(cube.n()));
}
BENCHMARK(BM_WhittleFitAll)->Unit(benchmark::kMillisecond);

}  // namespace
