#include "halfspec/pipeline.hpp"

#include <cmath>

#include "halfspec/error.hpp"
#include "halfspec/parallel.hpp"
#include "halfspec/random.hpp"
#include "halfspec/spde.hpp"

namespace halfspec {

namespace {

double q(double v) { return static_cast<double>(static_cast<float>(v)); }

std::complex<double> q(std::complex<double> v) { return {q(v.real()), q(v.imag())}; }

}  // namespace

DecodedModel decode_model(const CompressedArchive& a) {
  a.validate();
  DecodedModel m;
  m.mean.mu0 = a.mu0;
  m.mean.mu1 = {a.mu1.real(), a.mu1.imag()};
  m.basis.u0.assign(a.basis[0].begin(), a.basis[0].end());
  for (std::size_t j = 0; j < 3; ++j) m.basis.u[j].assign(a.basis[j + 1].begin(), a.basis[j + 1].end());
  m.theta.theta.resize(a.n());
  for (std::size_t p = 0; p < a.n(); ++p)
    for (std::size_t j = 0; j < 3; ++j) m.theta.theta[p][j] = a.theta[3 * p + j];
  m.spectra = fitted_spectra(m.theta, m.basis);
  return m;
}

FittedModel fit_model(const TimeCube& cube, unsigned threads) {
  cube.validate();
  const std::size_t n = cube.n(), T = cube.T;
  FittedModel m;
  m.field = forward_dft_all(cube);
  const std::size_t K = m.field.K();

  m.mean = estimate_mean(m.field, pixel_area_weights(cube.grid));
  m.mean.mu0 = q(m.mean.mu0);
  m.mean.mu1 = q(m.mean.mu1);
  remove_mean(m.field, m.mean);

  m.basis = build_basis(m.field);
  for (auto& v : m.basis.u0) v = q(v);
  for (auto& u : m.basis.u)
    for (auto& v : u) v = q(v);

  m.theta = fit_theta_all(periodogram(m.field), m.basis, T, threads);
  for (auto& th : m.theta.theta)
    for (auto& v : th) v = q(v);
  m.spectra = fitted_spectra(m.theta, m.basis);

  for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(K); ++k) {
    const bool real = is_real_frequency(static_cast<std::size_t>(k), T);
    for (Eigen::Index p = 0; p < static_cast<Eigen::Index>(n); ++p) {
      auto v = q(m.field.coeffs(p, k));
      if (real) v.imag(0.0);
      m.field.coeffs(p, k) = v;
    }
  }
  return m;
}

CompressedArchive compress(const TimeCube& cube, const CompressOptions& options, CompressReport* report) {
  cube.validate();
  options.selection.validate();
  const Grid& grid = cube.grid;
  const std::size_t n = grid.size(), T = cube.T;
  const unsigned threads = options.selection.threads;

  FittedModel model = fit_model(cube, threads);
  const SpectralField& field = model.field;
  const FittedSpectra& spectra = model.spectra;
  const std::size_t K = field.K();

  CompressedArchive a;
  a.grid = grid;
  a.T = T;
  a.ratio = static_cast<float>(options.selection.ratio);
  a.variant = static_cast<std::uint8_t>(options.selection.variant);
  a.seed = options.seed;
  a.mu0 = static_cast<float>(model.mean.mu0);
  a.mu1 = {static_cast<float>(model.mean.mu1.real()), static_cast<float>(model.mean.mu1.imag())};
  a.basis[0].assign(model.basis.u0.begin(), model.basis.u0.end());
  for (std::size_t j = 0; j < 3; ++j) a.basis[j + 1].assign(model.basis.u[j].begin(), model.basis.u[j].end());
  a.theta.resize(3 * n);
  for (std::size_t p = 0; p < n; ++p)
    for (std::size_t j = 0; j < 3; ++j) a.theta[3 * p + j] = static_cast<float>(model.theta.theta[p][j]);

  const SphereMesh mesh = build_mesh(grid);
  const SpdeOperator op(mesh);
  const UnitSphereCoords coords = sphere_coords(grid);
  SelectionProblem problem;
  problem.grid = &grid;
  problem.T = T;
  problem.op = &op;
  problem.coords = &coords;
  problem.field = &field;
  problem.spectra = &spectra;
  problem.fixed_bytes = archive_fixed_bytes(grid, T);

  CoherenceParams initial =
      CoherenceParams::with_pinned(K, options.initial_kappa, std::min(options.pinned_count, K), options.pinned_kappa);
  std::vector<std::uint8_t> initial_bound;
  initial = estimate_initial_kappa(problem, initial, threads, &initial_bound);

  SelectionResult result = run_selection(problem, options.selection, initial);

  a.kappa.resize(K);
  for (std::size_t k = 0; k < K; ++k) a.kappa[k] = static_cast<float>(result.coherence.kappa[k]);

  std::vector<std::uint64_t> keys;
  keys.reserve(result.state.count());
  for (std::size_t k = 0; k < K; ++k)
    for (auto p : result.state.partitions[k].stored) keys.push_back(static_cast<std::uint64_t>(k) * n + p);
  a.indices.reserve(keys.size());
  for (auto key : keys) {
    const std::size_t k = key / n, p = key % n;
    a.indices.push_back({k, p});
    const auto v = field.coeffs(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(k));
    a.values.push_back(static_cast<float>(v.real()));
    if (!is_real_frequency(k, T)) a.values.push_back(static_cast<float>(v.imag()));
  }

  if (report) {
    report->budget = result.budget;
    report->trace = std::move(result.trace);
    report->kappa0 = result.kappa0;
    report->kappa_at_bound = result.kappa_at_bound;
    for (std::size_t k = 0; k < K; ++k) report->kappa_at_bound[k] |= initial_bound[k];
    report->iterations = result.iterations;
    report->reestimations = result.reestimations;
    report->archive_bytes = result.archive_bytes;
  }
  return a;
}

std::vector<std::size_t> stored_per_frequency(const CompressedArchive& a) {
  std::vector<std::size_t> counts(a.K(), 0);
  for (const auto& p : a.indices) ++counts[p.k];
  return counts;
}

SpectralField decompress_spectrum(const CompressedArchive& a, DecodeMode mode, std::uint64_t seed,
                                  unsigned threads) {
  const DecodedModel model = decode_model(a);
  const std::size_t n = a.n(), K = a.K(), T = a.T;

  // stored values per frequency
  std::vector<std::vector<std::size_t>> stored(K);
  std::vector<std::vector<std::complex<double>>> stored_values(K);
  std::size_t pos = 0;
  for (const auto& p : a.indices) {
    const bool real = is_real_frequency(p.k, T);
    const double re = a.values[pos++];
    const double im = real ? 0.0 : a.values[pos++];
    stored[p.k].push_back(p.pixel);
    stored_values[p.k].emplace_back(re, im);
  }

  const SphereMesh mesh = build_mesh(a.grid);
  const SpdeOperator op(mesh);

  SpectralField field;
  field.grid = a.grid;
  field.T = T;
  field.coeffs.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(K));

  parallel_for(K, threads, [&](std::size_t k) {
    const auto col = static_cast<Eigen::Index>(k);
    const bool real = is_real_frequency(k, T);
    const Eigen::VectorXd sqrt_f = model.spectra.values.col(col).cwiseSqrt();
    Eigen::VectorXcd y;
    if (stored[k].size() == n) {
      y = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(n));
    } else {
      Eigen::VectorXcd z = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(n));
      for (std::size_t i = 0; i < stored[k].size(); ++i) {
        const auto p = static_cast<Eigen::Index>(stored[k][i]);
        z[p] = stored_values[k][i] / sqrt_f[p];
      }
      ConditionalSystem system(op, stored[k]);
      system.set_kappa(a.kappa[k]);
      if (mode == DecodeMode::mean) {
        z = system.conditional_mean(z);
      } else {
        Rng rng(derive_seed(seed, k));
        z = system.simulate(z, rng, real);
      }
      y = z.cwiseProduct(sqrt_f.cast<std::complex<double>>());
    }
    for (std::size_t i = 0; i < stored[k].size(); ++i) y[static_cast<Eigen::Index>(stored[k][i])] = stored_values[k][i];
    if (real) y.imag().setZero();
    field.coeffs.col(col) = y;
  });

  add_mean(field, model.mean);
  return field;
}

TimeCube decompress(const CompressedArchive& a, DecodeMode mode, std::uint64_t seed, unsigned threads) {
  return inverse_dft_all(decompress_spectrum(a, mode, seed, threads), a.T);
}

std::vector<TimeCube> emulate(const CompressedArchive& a, std::size_t count, std::uint64_t seed,
                              unsigned threads) {
  std::vector<TimeCube> out;
  out.reserve(count);
  for (std::size_t r = 0; r < count; ++r)
    out.push_back(decompress(a, DecodeMode::simulate, derive_seed(seed, r), threads));
  return out;
}

}  // namespace halfspec
