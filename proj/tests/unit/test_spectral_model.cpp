#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "halfspec/spectral_model.hpp"
#include "oracles.hpp"

using namespace halfspec;

namespace {

// Smooth, orthonormal test basis over K frequencies.
SpectralBasis test_basis(std::size_t K) {
  SpectralBasis b;
  b.u0.resize(K);
  Eigen::MatrixXd u(K, 3);
  for (std::size_t k = 0; k < K; ++k) {
    const double w = std::numbers::pi * double(k) / double(K - 1);
    b.u0[k] = -std::log(1.0 + 4.0 * w * w);
    u(k, 0) = 1.0;
    u(k, 1) = std::cos(w);
    u(k, 2) = std::cos(2.0 * w);
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(u);
  const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(K, 3);
  for (int j = 0; j < 3; ++j) b.u[j].assign(q.col(j).data(), q.col(j).data() + K);
  return b;
}

// Periodogram row from coefficients drawn with E|Y_k|^2 = f_k.
std::vector<double> simulated_pgram(const SpectralBasis& b, const Theta& th, std::size_t T,
                                    std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  std::vector<double> row(b.K());
  for (std::size_t k = 0; k < b.K(); ++k) {
    const double f = spectral_density(th, b, k);
    if (is_real_frequency(k, T)) {
      const double z = nd(rng);
      row[k] = f * z * z;
    } else {
      const double a = nd(rng), c = nd(rng);
      row[k] = f * 0.5 * (a * a + c * c);
    }
  }
  return row;
}

}  // namespace

TEST(SpectralModel, MeanOfConstantAndTone) {
  const std::size_t T = 36;
  const auto g = Grid::global_cell_centred(3, 4);
  TimeCube c(g, T);
  for (std::size_t p = 0; p < g.size(); ++p)
    for (std::size_t t = 0; t < T; ++t) c.at(p, t) = 7.0f;
  auto m = estimate_mean(forward_dft_all(c), pixel_area_weights(g));
  EXPECT_NEAR(m.mu0, 7.0, 1e-6);
  EXPECT_NEAR(std::abs(m.mu1), 0.0, 1e-6);

  for (std::size_t p = 0; p < g.size(); ++p)
    for (std::size_t t = 0; t < T; ++t)
      c.at(p, t) = static_cast<float>(std::cos(2.0 * std::numbers::pi * double(t + 1) / double(T)));
  m = estimate_mean(forward_dft_all(c), {});
  EXPECT_NEAR(m.mu0, 0.0, 1e-6);
  EXPECT_NEAR(m.mu1.real(), 0.5, 1e-6);
  EXPECT_NEAR(m.mu1.imag(), 0.0, 1e-6);
}

TEST(SpectralModel, TwoPixelAverageAndRemoval) {
  Grid g;
  g.latitudes = {0.0};
  g.longitudes = {0.0, 10.0};
  TimeCube c(g, 8);
  for (std::size_t t = 0; t < 8; ++t) {
    c.at(0, t) = 1.0f;
    c.at(1, t) = 3.0f;
  }
  auto f = forward_dft_all(c);
  const auto m = estimate_mean(f, pixel_area_weights(g));
  EXPECT_NEAR(m.mu0, 2.0, 1e-6);
  const auto orig = f.coeffs;
  remove_mean(f, m);
  EXPECT_NEAR(f.coeffs(0, 0).real(), -std::sqrt(8.0), 1e-6);
  add_mean(f, m);
  EXPECT_LT((f.coeffs - orig).norm(), 1e-12);
}

TEST(SpectralModel, U0) {
  const auto g = Grid::global_cell_centred(2, 3);
  const auto f = forward_dft_all(oracle::random_cube(g, 20, 6));
  const auto u0 = compute_u0(f);
  for (std::size_t k = 0; k < f.K(); ++k) {
    double s = 0.0;
    for (std::size_t p = 0; p < g.size(); ++p) s += std::norm(f.coeffs(p, k));
    EXPECT_NEAR(u0[k], std::log(s / double(g.size())), 1e-12);
  }
  SpectralField one{Grid::global_cell_centred(1, 1), 20, f.coeffs.topRows(1)};
  const auto u1 = compute_u0(one);
  for (std::size_t k = 0; k < f.K(); ++k) EXPECT_NEAR(u1[k], std::log(std::norm(f.coeffs(0, k))), 1e-12);

  SpectralField zero = one;
  zero.coeffs(0, 3) = 0.0;
  EXPECT_THROW(compute_u0(zero), InvalidInput);
}

TEST(SpectralModel, SmoothedLogPeriodogram) {
  const std::size_t T = 30;
  const auto g = Grid::global_cell_centred(2, 3);
  const auto f = forward_dft_all(oracle::random_cube(g, T, 12));
  const auto u0 = compute_u0(f);
  const auto gm = smoothed_normalized_logpgram(f, u0);
  const auto alpha = SmoothingKernel::appendix_exponential(T).weights;
  for (std::size_t p = 0; p < g.size(); ++p) {
    std::vector<double> ratio(f.K());
    for (std::size_t k = 0; k < f.K(); ++k) ratio[k] = std::norm(f.coeffs(p, k)) / std::exp(u0[k]);
    const auto full = mirror_half_spectrum(ratio, T);
    for (std::size_t k = 0; k < f.K(); ++k) {
      double s = 0.0;
      for (std::size_t l = 0; l < T; ++l) s += alpha[(l + T - k) % T] * full[l];
      EXPECT_NEAR(gm(p, k), std::log(s), 1e-10);
    }
  }

  // every pixel identical => normalised periodogram is 1 => g = 0
  SpectralField same = f;
  for (std::size_t p = 1; p < g.size(); ++p) same.coeffs.row(p) = f.coeffs.row(0);
  const auto g0 = smoothed_normalized_logpgram(same, compute_u0(same));
  EXPECT_LT(g0.cwiseAbs().maxCoeff(), 1e-12);
}

TEST(SpectralModel, PrincipalComponentsMatchJacobi) {
  std::mt19937 rng(21);
  std::normal_distribution<double> nd;
  const Eigen::Index n = 60, K = 12;
  Eigen::MatrixXd gm(n, K);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index k = 0; k < K; ++k) gm(i, k) = nd(rng) * (1.0 + 0.3 * double(k));
  const auto pcs = principal_components(gm);

  const Eigen::MatrixXd c = gm.rowwise() - gm.colwise().mean();
  const Eigen::MatrixXd cov = c.transpose() * c / double(n);
  Eigen::VectorXd vals;
  Eigen::MatrixXd vecs;
  oracle::jacobi_eigen(cov, vals, vecs);
  for (int j = 0; j < 3; ++j) {
    const Eigen::Map<const Eigen::VectorXd> u(pcs[j].data(), K);
    Eigen::VectorXd ref = vecs.col(j);
    if (ref.dot(u) < 0) ref = -ref;
    EXPECT_LT((u - ref).cwiseAbs().maxCoeff(), 1e-8);
    Eigen::Index at;
    u.cwiseAbs().maxCoeff(&at);
    EXPECT_GT(u[at], 0.0);
    for (int i = 0; i < 3; ++i) {
      const Eigen::Map<const Eigen::VectorXd> v(pcs[i].data(), K);
      EXPECT_NEAR(u.dot(v), i == j ? 1.0 : 0.0, 1e-10);
    }
  }
}

TEST(SpectralModel, PrincipalComponentsRankDeficiency) {
  const Eigen::Index n = 20, K = 8;
  Eigen::VectorXd v = Eigen::VectorXd::LinSpaced(K, 1.0, 2.0).normalized();
  Eigen::MatrixXd gm(n, K);
  for (Eigen::Index i = 0; i < n; ++i) gm.row(i) = double(i) * v.transpose();
  EXPECT_THROW(principal_components(gm), InvalidInput);
  gm.rowwise() = v.transpose();
  EXPECT_THROW(principal_components(gm), InvalidInput);
}

TEST(SpectralModel, DensityIsLogLinear) {
  const auto b = test_basis(10);
  EXPECT_DOUBLE_EQ(spectral_density({0, 0, 0}, b, 4), std::exp(b.u0[4]));
  SpectralBasis b2 = b;
  b2.u[0][4] = 0.5;
  EXPECT_NEAR(spectral_density({1, 0, 0}, b2, 4), std::exp(b.u0[4] + 0.5), 1e-12);
  const Theta a{0.3, -0.2, 0.7}, c{-1.1, 0.4, 0.05};
  for (std::size_t k = 0; k < b.K(); ++k) {
    const double la = std::log(spectral_density(a, b, k)) - b.u0[k];
    const double lc = std::log(spectral_density(c, b, k)) - b.u0[k];
    const double lac = std::log(spectral_density({a[0] + c[0], a[1] + c[1], a[2] + c[2]}, b, k)) - b.u0[k];
    EXPECT_NEAR(lac, la + lc, 1e-12);
  }
}

TEST(SpectralModel, WhittleGradientAndConcavity) {
  const std::size_t T = 64;
  const auto b = test_basis(half_spectrum_size(T));
  std::mt19937_64 rng(3);
  const auto row = simulated_pgram(b, {0.4, -0.3, 0.2}, T, rng);
  std::uniform_real_distribution<double> ud(-1.0, 1.0);
  for (int rep = 0; rep < 10; ++rep) {
    const Theta th{ud(rng), ud(rng), ud(rng)};
    const auto grad = whittle_gradient(th, row, b, T);
    const auto hess = whittle_hessian(th, row, b, T);
    for (int j = 0; j < 3; ++j) {
      const double h = 1e-5;
      Theta p = th, m = th;
      p[j] += h;
      m[j] -= h;
      const double fd = (whittle_objective(p, row, b, T) - whittle_objective(m, row, b, T)) / (2 * h);
      EXPECT_NEAR(grad[j], fd, 1e-5 * std::max(1.0, std::abs(fd)));
      const auto gp = whittle_gradient(p, row, b, T), gmn = whittle_gradient(m, row, b, T);
      for (int i = 0; i < 3; ++i)
        EXPECT_NEAR(hess(i, j), (gp[i] - gmn[i]) / (2 * h), 1e-4 * std::max(1.0, std::abs(hess(i, j))));
    }
    const Theta o{ud(rng), ud(rng), ud(rng)};
    const Theta mid{(th[0] + o[0]) / 2, (th[1] + o[1]) / 2, (th[2] + o[2]) / 2};
    EXPECT_GE(whittle_objective(mid, row, b, T),
              0.5 * (whittle_objective(th, row, b, T) + whittle_objective(o, row, b, T)));
  }
}

TEST(SpectralModel, WhittleNoiselessRecovery) {
  const std::size_t T = 50;
  const auto b = test_basis(half_spectrum_size(T));
  std::vector<double> row(b.K());
  for (std::size_t k = 0; k < b.K(); ++k) row[k] = std::exp(b.u0[k]);
  auto fit = fit_theta_whittle(row, b, T);
  for (double t : fit.theta) EXPECT_NEAR(t, 0.0, 1e-10);
  EXPECT_LT(fit.gradient_norm, 1e-8);

  for (std::size_t k = 0; k < b.K(); ++k) row[k] = std::exp(b.u0[k] + b.u[0][k]);
  fit = fit_theta_whittle(row, b, T);
  EXPECT_NEAR(fit.theta[0], 1.0, 1e-6);
  EXPECT_NEAR(fit.theta[1], 0.0, 1e-6);
  EXPECT_NEAR(fit.theta[2], 0.0, 1e-6);
}

TEST(SpectralModel, WhittleSimulationRecovery) {
  const std::size_t T = 365;
  const auto b = test_basis(half_spectrum_size(T));
  const Theta truth{1.5, -0.8, 0.6};
  std::mt19937_64 rng(17);
  // With unit-norm basis vectors each fit has standard deviation close to 1,
  // so the replicate mean is checked against its own standard error.
  const int reps = 400;
  Eigen::Vector3d sum = Eigen::Vector3d::Zero(), sumsq = Eigen::Vector3d::Zero();
  for (int rep = 0; rep < reps; ++rep) {
    const auto fit = fit_theta_whittle(simulated_pgram(b, truth, T, rng), b, T);
    EXPECT_LT(fit.gradient_norm, 1e-8);
    for (int j = 0; j < 3; ++j) {
      sum[j] += fit.theta[j];
      sumsq[j] += fit.theta[j] * fit.theta[j];
    }
  }
  for (int j = 0; j < 3; ++j) {
    const double mean = sum[j] / reps;
    const double sd = std::sqrt(sumsq[j] / reps - mean * mean);
    EXPECT_NEAR(sd, 1.0, 0.15);
    EXPECT_NEAR(mean, truth[j], 3.5 * sd / std::sqrt(double(reps)));
  }
}

TEST(SpectralModel, WhittleShiftInvariance) {
  // u-span containing the constant vector: scaling I by e^s shifts theta
  // along the constant direction and changes the objective by a constant.
  const std::size_t T = 80;
  const auto b = test_basis(half_spectrum_size(T));
  std::mt19937_64 rng(5);
  auto row = simulated_pgram(b, {0.2, 0.1, -0.3}, T, rng);
  const auto fit = fit_theta_whittle(row, b, T);
  const double s = 0.7;
  for (auto& v : row) v *= std::exp(s);
  const auto fit2 = fit_theta_whittle(row, b, T);
  const double c0 = b.u[0][0];  // first basis vector is constant
  EXPECT_NEAR(fit2.theta[0] - fit.theta[0], s / c0, 1e-8);
  EXPECT_NEAR(fit2.theta[1], fit.theta[1], 1e-8);
  EXPECT_NEAR(fit2.theta[2], fit.theta[2], 1e-8);
}

TEST(SpectralModel, FittedSpectraFromRealCube) {
  const std::size_t T = 64;
  const auto g = Grid::global_cell_centred(4, 6);
  auto f = forward_dft_all(oracle::random_cube(g, T, 30));
  remove_mean(f, estimate_mean(f, pixel_area_weights(g)));
  const auto basis = build_basis(f);
  const auto pg = periodogram(f);
  const auto th = fit_theta_all(pg, basis, T, 2);
  const auto spectra = fitted_spectra(th, basis);
  EXPECT_EQ(spectra.values.rows(), static_cast<Eigen::Index>(g.size()));
  EXPECT_TRUE((spectra.values.array() > 0).all());
  for (std::size_t p = 0; p < g.size(); ++p) {
    std::vector<double> row(pg.cols());
    for (std::size_t k = 0; k < row.size(); ++k) row[k] = pg(p, k);
    EXPECT_LT(whittle_gradient(th.theta[p], row, basis, T).norm(), 1e-8);
  }
}
