// Desk-scale acceptance suite: one PASS/FAIL line per criterion.
// Usage: halfspec_acceptance [criterion numbers...]

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "halfspec/archive.hpp"
#include "halfspec/conditional.hpp"
#include "halfspec/metrics.hpp"
#include "halfspec/pipeline.hpp"
#include "halfspec/spde.hpp"
#include "halfspec/spectral.hpp"
#include "halfspec/spectral_model.hpp"
#include "halfspec/synth.hpp"
#include "halfspec/varint.hpp"
#include "oracles.hpp"

using namespace halfspec;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<std::size_t> random_subset(std::size_t n, std::size_t m, unsigned seed) {
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), 0);
  std::mt19937 rng(seed);
  std::shuffle(all.begin(), all.end(), rng);
  all.resize(m);
  std::sort(all.begin(), all.end());
  return all;
}

Eigen::VectorXcd random_complex(std::size_t n, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> nd;
  Eigen::VectorXcd z(n);
  for (auto& v : z) v = {nd(rng), nd(rng)};
  return z;
}

double data_range(const TimeCube& c) {
  const auto [lo, hi] = std::minmax_element(c.values.begin(), c.values.end());
  return static_cast<double>(*hi) - static_cast<double>(*lo);
}

double max_abs_diff(const TimeCube& a, const TimeCube& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i)
    m = std::max(m, std::abs(static_cast<double>(a.values[i]) - static_cast<double>(b.values[i])));
  return m;
}

// Shared 32x64x128 synthetic cube and its archives at ratios 20, 10, 5.
struct LargeCase {
  TimeCube cube;
  std::map<int, CompressedArchive> archives;
  std::map<int, double> compress_seconds;

  static LargeCase& get() {
    static LargeCase c = [] {
      LargeCase lc;
      GeneratorSpec spec;
      spec.n_lat = 32;
      spec.n_lon = 64;
      spec.T = 128;
      spec.mean.mu0 = 15.0;
      spec.mean.mu1 = {10.0, 5.0};
      spec.ar = 0.8;
      spec.seed = 11;
      lc.cube = generate(spec, 0);
      for (int ratio : {20, 10, 5}) {
        CompressOptions o;
        o.selection.ratio = ratio;
        o.seed = 11;
        const auto t0 = std::chrono::steady_clock::now();
        lc.archives.emplace(ratio, compress(lc.cube, o));
        lc.compress_seconds[ratio] = seconds_since(t0);
      }
      return lc;
    }();
    return c;
  }
};

Outcome dft_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto cube = oracle::random_cube(Grid::global_cell_centred(16, 32), 64, 1, 5.0);
  const auto field = forward_dft_all(cube);
  const std::size_t T = cube.T, K = half_spectrum_size(T);
  double err = 0.0, scale = 0.0;
  for (std::size_t p = 0; p < cube.n(); ++p) {
    std::vector<double> y(T);
    for (std::size_t t = 0; t < T; ++t) y[t] = cube.at(p, t);
    const auto ref = oracle::direct_dft(y, K);
    for (std::size_t k = 0; k < K; ++k) {
      err = std::max(err, std::abs(field.coeffs(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(k)) - ref[k]));
      scale = std::max(scale, std::abs(ref[k]));
    }
  }
  const Eigen::MatrixXd back = inverse_dft_all_double(field);
  double rt = 0.0, range = 0.0;
  for (std::size_t p = 0; p < cube.n(); ++p) {
    for (std::size_t t = 0; t < T; ++t) {
      const double y = cube.at(p, t);
      rt = std::max(rt, std::abs(back(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(t)) - y));
      range = std::max(range, std::abs(y));
    }
  }
  const double secs = seconds_since(t0);
  const double fe = err / scale, ie = rt / range;
  return {fe < 1e-6 && ie < 1e-6 && secs < 5.0,
          fmt("forward rel err %.2e, round trip rel err %.2e, %.2f s (limits 1e-6, 1e-6, 5 s)", fe, ie, secs)};
}

Outcome conditioning_identity() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto m = build_mesh(Grid::global_cell_centred(12, 24));
  const SpdeOperator op(m);
  const auto stored = random_subset(m.n_vertices(), 50, 8);
  const auto part = FrequencyPartition::from_stored(5, m.n_vertices(), stored);
  const auto z1 = random_complex(stored.size(), 2);
  double worst = 0.0;
  for (double kappa : {1.0, 10.0, 100.0}) {
    const auto q = op.precision(kappa);
    const auto hat = conditional_expectation(q, part, z1);
    const auto ref = oracle::dense_kriging(oracle::dense_inverse(Eigen::MatrixXd(q.Q)), part.stored,
                                           part.unstored, z1);
    worst = std::max(worst, (hat - ref).norm() / ref.norm());
  }
  const double secs = seconds_since(t0);
  return {worst < 1e-8 && secs < 10.0,
          fmt("max rel err %.2e over kappa {1, 10, 100}, %.2f s (limits 1e-8, 10 s)", worst, secs)};
}

Outcome simulation_law() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto m = build_mesh(Grid::global_cell_centred(10, 12));
  const SpdeOperator op(m);
  const std::size_t n = m.n_vertices();
  const auto stored = random_subset(n, 25, 3);
  const auto part = FrequencyPartition::from_stored(7, n, stored);
  const double kappa = 4.0;
  ConditionalSystem sys(op, stored);
  sys.set_kappa(kappa);
  const Eigen::MatrixXd q = Eigen::MatrixXd(op.precision(kappa).Q);
  const std::size_t nu = part.unstored.size();
  Eigen::MatrixXd q22(nu, nu);
  for (std::size_t i = 0; i < nu; ++i)
    for (std::size_t j = 0; j < nu; ++j)
      q22(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          q(static_cast<Eigen::Index>(part.unstored[i]), static_cast<Eigen::Index>(part.unstored[j]));
  const Eigen::MatrixXd sigma = oracle::dense_inverse(q22);
  const Eigen::VectorXcd zero = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(n));
  Rng rng(44);
  Eigen::MatrixXcd acc = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(nu), static_cast<Eigen::Index>(nu));
  constexpr int draws = 20000;
  Eigen::VectorXcd e(static_cast<Eigen::Index>(nu));
  for (int d = 0; d < draws; ++d) {
    const auto s = sys.simulate(zero, rng, false);
    for (std::size_t i = 0; i < nu; ++i) e(static_cast<Eigen::Index>(i)) = s(static_cast<Eigen::Index>(part.unstored[i]));
    acc.noalias() += e * e.adjoint();
  }
  acc /= double(draws);
  const Eigen::MatrixXcd diff = acc - sigma.cast<std::complex<double>>();
  const double err = diff.cwiseAbs().maxCoeff();
  const double secs = seconds_since(t0);
  return {nu <= 100 && err < 0.05 && secs < 60.0,
          fmt("%zu unstored vertices, %d draws, max entry error %.4f, %.1f s (limits 0.05, 60 s)", nu, draws, err,
              secs)};
}

Outcome likelihood_oracle() {
  const auto m = build_mesh(Grid::global_cell_centred(8, 12));
  const SpdeOperator op(m);
  const std::size_t n = m.n_vertices();
  const auto stored = random_subset(n, 30, 12);
  const auto part = FrequencyPartition::from_stored(4, n, stored);
  std::mt19937 rng(6);
  std::uniform_real_distribution<double> ud(0.5, 2.0);
  Eigen::VectorXd fhat(static_cast<Eigen::Index>(n));
  for (auto& v : fhat) v = ud(rng);
  const Eigen::VectorXcd z = random_complex(n, 13);
  double spread = 0.0;
  for (bool real_case : {false, true}) {
    Eigen::VectorXcd zz = z;
    if (real_case) zz.imag().setZero();
    std::vector<double> diff;
    for (double kappa : {0.5, 2.0, 5.0, 20.0, 80.0}) {
      ConditionalSystem sys(op, stored);
      sys.set_kappa(kappa);
      const double cl = sys.loglik(zz, fhat.array().log().matrix(), real_case);
      const auto q = op.precision(kappa);
      const double dense = oracle::dense_conditional_logdensity(oracle::dense_inverse(Eigen::MatrixXd(q.Q)),
                                                                part.stored, part.unstored, zz, real_case);
      diff.push_back(cl - (real_case ? 1.0 : 0.5) * dense);
    }
    const auto [lo, hi] = std::minmax_element(diff.begin(), diff.end());
    spread = std::max(spread, *hi - *lo);
  }
  return {spread < 1e-6, fmt("offset spread %.2e across 5 kappa values, complex and real rows (limit 1e-6)", spread)};
}

Outcome whittle_recovery() {
  GeneratorSpec spec;
  spec.n_lat = 10;
  spec.n_lon = 10;
  spec.T = 365;
  const Grid grid = spec.grid();
  const auto basis = spec.basis();
  const auto truth = spec.theta(grid);
  const std::size_t T = spec.T, K = half_spectrum_size(T), n = grid.size();
  // independent series per pixel drawn from their own spectra
  SpectralField field;
  field.grid = grid;
  field.T = T;
  field.coeffs.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(K));
  Rng rng(5);
  std::normal_distribution<double> nd;
  for (std::size_t p = 0; p < n; ++p) {
    for (std::size_t k = 0; k < K; ++k) {
      const double sd = std::sqrt(spectral_density(truth.theta[p], basis, k));
      const std::complex<double> e = is_real_frequency(k, T)
                                         ? std::complex<double>(nd(rng), 0.0)
                                         : std::complex<double>(nd(rng), nd(rng)) / std::sqrt(2.0);
      field.coeffs(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(k)) = sd * e;
    }
  }
  const auto pgram = periodogram(forward_dft_all(inverse_dft_all(field, T)));
  std::array<double, 3> err{};
  double worst_grad = 0.0;
  std::vector<double> row(K);
  for (std::size_t p = 0; p < n; ++p) {
    for (std::size_t k = 0; k < K; ++k) row[k] = pgram(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(k));
    const auto fit = fit_theta_whittle(row, basis, T);
    worst_grad = std::max(worst_grad, fit.gradient_norm);
    for (std::size_t j = 0; j < 3; ++j) err[j] += (fit.theta[j] - truth.theta[p][j]) / double(n);
  }
  const bool ok = std::abs(err[0]) < 0.1 && std::abs(err[1]) < 0.1 && std::abs(err[2]) < 0.1 && worst_grad < 1e-8;
  return {ok, fmt("mean error (%.3f, %.3f, %.3f) over %zu pixels, max gradient norm %.1e (limits 0.1, 1e-8)",
                  err[0], err[1], err[2], n, worst_grad)};
}

Outcome kappa_recovery() {
  const auto m = build_mesh(Grid::global_cell_centred(19, 36));
  const SpdeOperator op(m);
  const std::size_t n = m.n_vertices();
  const double truth = 10.0;
  const FullPrecisionFactor q(op, truth);
  Rng rng(2024);
  const auto eps = complex_standard_normal(rng, n);
  Eigen::MatrixXd noise(static_cast<Eigen::Index>(n), 2);
  for (std::size_t i = 0; i < n; ++i) noise.row(static_cast<Eigen::Index>(i)) << eps[i].real(), eps[i].imag();
  const Eigen::MatrixXd s = q.sample(noise);
  Eigen::VectorXcd z(static_cast<Eigen::Index>(n));
  z.real() = s.col(0);
  z.imag() = s.col(1);
  const Eigen::VectorXd log_f = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  const auto marginal = estimate_kappa(KappaObjective::marginal, op, {}, z, log_f, false, 1.0);
  const auto stored = random_subset(n, (3 * n) / 10, 77);
  const auto conditional = estimate_kappa(KappaObjective::conditional, op, stored, z, log_f, false, 1.0);
  const double em = marginal.kappa / truth - 1.0, ec = conditional.kappa / truth - 1.0;
  return {std::abs(em) < 0.2 && std::abs(ec) < 0.3,
          fmt("marginal %.3f (%+.1f%%), conditional with %zu/%zu stored %.3f (%+.1f%%) (limits 20%%, 30%%)",
              marginal.kappa, 100 * em, stored.size(), n, conditional.kappa, 100 * ec)};
}

Outcome variance_normalization() {
  const auto m = build_mesh(Grid::global_cell_centred(40, 80));
  const SpdeOperator op(m);
  const Eigen::MatrixXd q = Eigen::MatrixXd(op.precision(30.0).Q);
  const Eigen::LLT<Eigen::MatrixXd> llt(q);
  const Eigen::MatrixXd l = llt.matrixL();
  const Eigen::MatrixXd linv =
      l.triangularView<Eigen::Lower>().solve(Eigen::MatrixXd::Identity(q.rows(), q.cols()));
  const double mean_var = linv.colwise().squaredNorm().mean();
  return {m.n_vertices() >= 1500 && mean_var >= 0.8 && mean_var <= 1.2,
          fmt("%zu vertices, mean marginal variance %.4f at kappa 30 (range [0.8, 1.2])", m.n_vertices(), mean_var)};
}

Outcome saturation() {
  GeneratorSpec spec;
  spec.n_lat = 16;
  spec.n_lon = 32;
  spec.T = 64;
  spec.mean.mu0 = 15.0;
  spec.mean.mu1 = {10.0, 5.0};
  spec.seed = 8;
  const auto cube = generate(spec, 0);
  CompressOptions o;
  o.selection.ratio = 1.05;
  o.seed = 8;
  const auto a = compress(cube, o);
  const auto rec = decompress(a, DecodeMode::mean, 0);
  const double rel = max_abs_diff(cube, rec) / data_range(cube);
  return {rel < 1e-3, fmt("stored %zu of %zu coefficients, max abs error %.3e of the data range (limit 1e-3)",
                          a.indices.size(), cube.n() * a.K(), rel)};
}

Outcome budget_bound() {
  auto& lc = LargeCase::get();
  bool ok = true;
  std::string detail;
  const double nT = double(lc.cube.n() * lc.cube.T);
  for (auto& [ratio, a] : lc.archives) {
    const auto bytes = serialize(a);
    const auto limit = static_cast<std::size_t>(std::floor(4.0 * nT / ratio));
    const auto path = oracle::temp_dir() / fmt("acceptance_%d.arc", ratio);
    write_archive(a, path);
    const std::string arg = path.string();
    const char* argv[] = {"halfspec", "inspect", arg.c_str()};
    std::ostringstream out, err;
    const int code = cli::run(3, argv, out, err);
    const auto text = out.str();
    const auto at = text.find("bits_per_index_pair ");
    const bool reported = code == 0 && at != std::string::npos;
    const double bits = reported ? std::stod(text.substr(at + 20)) : 0.0;
    ok = ok && bytes.size() <= limit && reported;
    detail += fmt("%s%d:1 %zu <= %zu bytes, %.2f bits/pair", detail.empty() ? "" : "; ", ratio, bytes.size(),
                  limit, bits);
  }
  return {ok, detail};
}

Outcome monotone_fidelity() {
  auto& lc = LargeCase::get();
  const auto w = pixel_area_weights(lc.cube.grid);
  std::map<int, double> r;
  for (auto& [ratio, a] : lc.archives) r[ratio] = rmspe(lc.cube, decompress(a, DecodeMode::mean, 0), w).rmspe_all;
  return {r[20] > r[10] && r[10] > r[5],
          fmt("RMSPE 20:1 %.4f, 10:1 %.4f, 5:1 %.4f (compress %.0f s, %.0f s, %.0f s)", r[20], r[10], r[5],
              lc.compress_seconds[20], lc.compress_seconds[10], lc.compress_seconds[5])};
}

Outcome contrast_fidelity() {
  auto& lc = LargeCase::get();
  const auto sim = decompress(lc.archives.at(5), DecodeMode::simulate, 2024);
  const auto o = contrast_variances(lc.cube);
  const auto d = contrast_variances(sim);
  const double ns = map_correlation(log_map(o.north_south), log_map(d.north_south));
  const double ew = map_correlation(log_map(o.east_west), log_map(d.east_west));
  const double tt = map_correlation(log_map(o.temporal), log_map(d.temporal));
  return {ns > 0.9 && ew > 0.9 && tt > 0.9,
          fmt("log contrast correlations NS %.4f, EW %.4f, temporal %.4f (limit 0.9)", ns, ew, tt)};
}

Outcome index_codec() {
  std::mt19937_64 rng(12);
  std::size_t failures = 0;
  for (int c = 0; c < 10000; ++c) {
    const std::size_t n = 1 + rng() % 5000;
    const std::size_t count = rng() % 2000;
    const double p_gap = std::uniform_real_distribution<double>(1e-4, 1.0)(rng);
    std::geometric_distribution<std::uint64_t> gap(p_gap);
    std::vector<IndexPair> pairs;
    std::uint64_t key = rng() % (4 * n);
    for (std::size_t i = 0; i < count; ++i) {
      pairs.push_back({key / n, key % n});
      key += 1 + gap(rng) + (rng() % 500 == 0 ? rng() % (1ull << 40) : 0);
    }
    const auto bytes = encode_indices(pairs, n);
    if (decode_indices(bytes, pairs.size(), n) != pairs) ++failures;
  }
  std::vector<IndexPair> dense;
  const std::size_t n = 2048;
  for (std::size_t k = 0; k < 4; ++k)
    for (std::size_t p = 0; p < n; p += 1 + (p % 3)) dense.push_back({k, p});
  const double bits = 8.0 * double(encode_indices(dense, n).size()) / double(dense.size());
  return {failures == 0 && bits <= 8.5,
          fmt("%zu of 10000 fuzz round trips failed; dense run %.3f bits/pair (limit 8.5)", failures, bits)};
}

Outcome determinism() {
  GeneratorSpec spec;
  spec.n_lat = 12;
  spec.n_lon = 24;
  spec.T = 32;
  spec.seed = 13;
  const auto cube = generate(spec, 1);
  if (generate(spec, 4).values != cube.values) return {false, "generator differs across thread counts"};
  std::vector<std::vector<std::uint8_t>> archives;
  std::vector<std::vector<float>> sims;
  for (Variant v : {Variant::sequential, Variant::distributed}) {
    archives.clear();
    sims.clear();
    for (unsigned threads : {1u, 1u, 2u, 4u}) {
      CompressOptions o;
      o.selection.ratio = 4.0;
      o.selection.M = 10;
      o.selection.variant = v;
      o.selection.threads = threads;
      o.seed = 3;
      const auto a = compress(cube, o);
      archives.push_back(serialize(a));
      sims.push_back(decompress(a, DecodeMode::simulate, 99, threads).values);
    }
    for (std::size_t i = 1; i < archives.size(); ++i) {
      if (archives[i] != archives[0]) return {false, fmt("archive differs (variant %d, run %zu)", int(v), i)};
      if (sims[i] != sims[0]) return {false, fmt("simulation differs (variant %d, run %zu)", int(v), i)};
    }
  }
  return {true, "archives and simulate-mode cubes identical over repeated runs and 1, 2, 4 threads, both variants"};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"dft-oracle", dft_oracle},
      {"conditioning-identity", conditioning_identity},
      {"conditional-simulation-law", simulation_law},
      {"likelihood-oracle", likelihood_oracle},
      {"whittle-recovery", whittle_recovery},
      {"kappa-recovery", kappa_recovery},
      {"spde-variance-normalization", variance_normalization},
      {"saturation-losslessness", saturation},
      {"budget-bound", budget_bound},
      {"monotone-fidelity", monotone_fidelity},
      {"contrast-variance-fidelity", contrast_fidelity},
      {"index-codec", index_codec},
      {"determinism", determinism},
  };
  std::vector<std::size_t> selected;
  for (int i = 1; i < argc; ++i) {
    const int c = std::atoi(argv[i]);
    if (c < 1 || c > static_cast<int>(criteria.size())) {
      std::fprintf(stderr, "unknown criterion %s\n", argv[i]);
      return 2;
    }
    selected.push_back(static_cast<std::size_t>(c - 1));
  }
  if (selected.empty()) {
    selected.resize(criteria.size());
    std::iota(selected.begin(), selected.end(), 0);
  }
  int failed = 0;
  for (std::size_t i : selected) {
    Outcome r;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      r = criteria[i].second();
    } catch (const std::exception& e) {
      r = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s %2zu %-28s %s [%.1f s]\n", r.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, r.detail.c_str(),
                seconds_since(t0));
    std::fflush(stdout);
    failed += r.pass ? 0 : 1;
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(selected.size()) - failed, selected.size());
  return failed == 0 ? 0 : 1;
}
