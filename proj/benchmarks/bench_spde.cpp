#include <benchmark/benchmark.h>

#include <numeric>
#include <random>

#include "halfspec/conditional.hpp"
#include "halfspec/spde.hpp"

using namespace halfspec;

namespace {

struct Mesh {
  SphereMesh mesh;
  SpdeOperator op;
  explicit Mesh(std::size_t nlat) : mesh(build_mesh(Grid::global_cell_centred(nlat, 2 * nlat))), op(mesh) {}
};

std::vector<std::size_t> every_nth(std::size_t n, std::size_t step) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < n; i += step) out.push_back(i);
  return out;
}

void BM_FullPrecisionFactor(benchmark::State& state) {
  const Mesh m(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(FullPrecisionFactor(m.op, 5.0).logdet());
  state.counters["vertices"] = static_cast<double>(m.mesh.n_vertices());
}
BENCHMARK(BM_FullPrecisionFactor)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_ConditionalRefactor(benchmark::State& state) {
  const Mesh m(static_cast<std::size_t>(state.range(0)));
  ConditionalSystem sys(m.op, every_nth(m.mesh.n_vertices(), 10));
  double kappa = 4.0;
  for (auto _ : state) {
    sys.set_kappa(kappa);
    kappa = kappa == 4.0 ? 5.0 : 4.0;
  }
  state.counters["vertices"] = static_cast<double>(m.mesh.n_vertices());
}
BENCHMARK(BM_ConditionalRefactor)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_ConditionalMean(benchmark::State& state) {
  const Mesh m(static_cast<std::size_t>(state.range(0)));
  const std::size_t n = m.mesh.n_vertices();
  ConditionalSystem sys(m.op, every_nth(n, 10));
  sys.set_kappa(5.0);
  std::mt19937 rng(2);
  std::normal_distribution<double> nd;
  Eigen::VectorXcd z(static_cast<Eigen::Index>(n));
  for (auto& v : z) v = {nd(rng), nd(rng)};
  for (auto _ : state) benchmark::DoNotOptimize(sys.conditional_mean(z));
}
BENCHMARK(BM_ConditionalMean)->Arg(32)->Arg(64)->Unit(benchmark::kMicrosecond);

void BM_ConditionalLoglik(benchmark::State& state) {
  const Mesh m(static_cast<std::size_t>(state.range(0)));
  const std::size_t n = m.mesh.n_vertices();
  ConditionalSystem sys(m.op, every_nth(n, 10));
  sys.set_kappa(5.0);
  std::mt19937 rng(3);
  std::normal_distribution<double> nd;
  Eigen::VectorXcd z(static_cast<Eigen::Index>(n));
  for (auto& v : z) v = {nd(rng), nd(rng)};
  const Eigen::VectorXd log_f = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  for (auto _ : state) benchmark::DoNotOptimize(sys.loglik(z, log_f, false));
}
BENCHMARK(BM_ConditionalLoglik)->Arg(32)->Arg(64)->Unit(benchmark::kMicrosecond);

}  // namespace
