#include "halfspec/spectral_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "halfspec/parallel.hpp"

namespace halfspec {

namespace {

double whittle_weight(std::size_t k, std::size_t T) { return is_real_frequency(k, T) ? 1.0 : 2.0; }

void check_row(std::span<const double> row, const SpectralBasis& basis, std::size_t T) {
  if (row.size() != basis.K() || basis.K() != half_spectrum_size(T)) {
    throw InvalidInput("periodogram row, basis and T disagree on the spectrum size");
  }
}

}  // namespace

MeanModel estimate_mean(const SpectralField& field, std::span<const double> weights) {
  const std::size_t n = field.n();
  if (!weights.empty() && weights.size() != n) throw InvalidInput("weight count mismatch");
  const double rootT = std::sqrt(static_cast<double>(field.T));
  double total = 0.0;
  double mu0 = 0.0;
  std::complex<double> mu1 = 0.0;
  for (std::size_t p = 0; p < n; ++p) {
    const double w = weights.empty() ? 1.0 : weights[p];
    const auto ip = static_cast<Eigen::Index>(p);
    mu0 += w * field.coeffs(ip, 0).real();
    mu1 += w * field.coeffs(ip, 1);
    total += w;
  }
  if (total <= 0.0) throw InvalidInput("weights sum to zero");
  return {mu0 / (total * rootT), mu1 / (total * rootT)};
}

void remove_mean(SpectralField& field, const MeanModel& mean) {
  const double rootT = std::sqrt(static_cast<double>(field.T));
  field.coeffs.col(0).array() -= rootT * mean.mu0;
  field.coeffs.col(1).array() -= rootT * mean.mu1;
}

void add_mean(SpectralField& field, const MeanModel& mean) {
  const double rootT = std::sqrt(static_cast<double>(field.T));
  field.coeffs.col(0).array() += rootT * mean.mu0;
  field.coeffs.col(1).array() += rootT * mean.mu1;
}

std::vector<double> compute_u0(const SpectralField& field) {
  if (field.n() == 0) throw InvalidInput("u0 needs at least one pixel");
  const Eigen::MatrixXd pgram = periodogram(field);
  std::vector<double> u0(field.K());
  for (std::size_t k = 0; k < u0.size(); ++k) {
    const double avg = pgram.col(static_cast<Eigen::Index>(k)).mean();
    if (!(avg > 0.0)) {
      throw InvalidInput("average periodogram is zero at frequency " + std::to_string(k));
    }
    u0[k] = std::log(avg);
  }
  return u0;
}

Eigen::MatrixXd smoothed_normalized_logpgram(const SpectralField& field,
                                             std::span<const double> u0) {
  const std::size_t T = field.T;
  const std::size_t K = field.K();
  if (u0.size() != K) throw InvalidInput("u0 length mismatch");
  const SmoothingKernel kernel = SmoothingKernel::appendix_exponential(T);
  std::vector<std::size_t> support;
  for (std::size_t l = 0; l < T; ++l) {
    if (kernel.weights[l] != 0.0) support.push_back(l);
  }
  const std::vector<double> u0_full = mirror_half_spectrum(u0, T);

  Eigen::MatrixXd g(static_cast<Eigen::Index>(field.n()), static_cast<Eigen::Index>(K));
  std::vector<double> half(K);
  for (std::size_t p = 0; p < field.n(); ++p) {
    const auto ip = static_cast<Eigen::Index>(p);
    for (std::size_t k = 0; k < K; ++k) half[k] = std::norm(field.coeffs(ip, static_cast<Eigen::Index>(k)));
    std::vector<double> ratio = mirror_half_spectrum(half, T);
    for (std::size_t l = 0; l < T; ++l) ratio[l] /= std::exp(u0_full[l]);
    for (std::size_t k = 0; k < K; ++k) {
      double acc = 0.0;
      for (std::size_t lag : support) acc += kernel.weights[lag] * ratio[(k + lag) % T];
      const double v = std::log(acc);
      if (!std::isfinite(v)) {
        throw InvalidInput("smoothed periodogram vanishes at pixel " + std::to_string(p));
      }
      g(ip, static_cast<Eigen::Index>(k)) = v;
    }
  }
  return g;
}

std::array<std::vector<double>, 3> principal_components(const Eigen::MatrixXd& g,
                                                        std::span<const double> pixel_weights) {
  const Eigen::Index n = g.rows();
  const Eigen::Index K = g.cols();
  if (n < 4) throw InvalidInput("principal components need at least 4 pixels");
  if (K < 3) throw InvalidInput("principal components need at least 3 frequencies");
  Eigen::VectorXd w = Eigen::VectorXd::Ones(n);
  if (!pixel_weights.empty()) {
    if (static_cast<Eigen::Index>(pixel_weights.size()) != n) {
      throw InvalidInput("pixel weight count mismatch");
    }
    w = Eigen::Map<const Eigen::VectorXd>(pixel_weights.data(), n);
  }
  w /= w.sum();
  const Eigen::RowVectorXd mean = w.transpose() * g;
  const Eigen::MatrixXd centred = g.rowwise() - mean;
  const Eigen::MatrixXd cov = centred.transpose() * w.asDiagonal() * centred;

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success) throw Error("eigendecomposition failed");
  const Eigen::VectorXd& values = eig.eigenvalues();  // ascending
  const double top = values(K - 1);
  const double scale = g.squaredNorm() / static_cast<double>(n);
  if (!(top > 1e-20 * scale) || !(top > std::numeric_limits<double>::min())) {
    throw InvalidInput("log periodograms do not vary across pixels (rank 0)");
  }
  std::array<std::vector<double>, 3> out;
  for (int j = 0; j < 3; ++j) {
    const Eigen::Index col = K - 1 - j;
    if (values(col) <= 1e-12 * top) {
      throw InvalidInput("log periodograms have rank " + std::to_string(j) + " < 3");
    }
    Eigen::VectorXd v = eig.eigenvectors().col(col);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0.0) v = -v;
    out[static_cast<std::size_t>(j)].assign(v.data(), v.data() + K);
  }
  return out;
}

SpectralBasis build_basis(const SpectralField& mean_removed,
                          std::span<const double> pixel_weights) {
  SpectralBasis basis;
  basis.u0 = compute_u0(mean_removed);
  basis.u = principal_components(smoothed_normalized_logpgram(mean_removed, basis.u0),
                                 pixel_weights);
  return basis;
}

double spectral_density(const Theta& theta, const SpectralBasis& basis, std::size_t k) {
  if (k >= basis.K()) throw InvalidInput("frequency index out of range");
  return std::exp(basis.log_density(theta, k));
}

double whittle_objective(const Theta& theta, std::span<const double> row,
                         const SpectralBasis& basis, std::size_t T) {
  check_row(row, basis, T);
  double sum = 0.0;
  for (std::size_t k = 1; k < row.size(); ++k) {
    const double log_f = basis.log_density(theta, k);
    sum += whittle_weight(k, T) * (-log_f - row[k] * std::exp(-log_f));
  }
  return sum;
}

Eigen::Vector3d whittle_gradient(const Theta& theta, std::span<const double> row,
                                 const SpectralBasis& basis, std::size_t T) {
  check_row(row, basis, T);
  Eigen::Vector3d g = Eigen::Vector3d::Zero();
  for (std::size_t k = 1; k < row.size(); ++k) {
    const double r = row[k] * std::exp(-basis.log_density(theta, k));
    const double c = whittle_weight(k, T) * (r - 1.0);
    for (int j = 0; j < 3; ++j) g(j) += c * basis.u[static_cast<std::size_t>(j)][k];
  }
  return g;
}

Eigen::Matrix3d whittle_hessian(const Theta& theta, std::span<const double> row,
                                const SpectralBasis& basis, std::size_t T) {
  check_row(row, basis, T);
  Eigen::Matrix3d h = Eigen::Matrix3d::Zero();
  for (std::size_t k = 1; k < row.size(); ++k) {
    const double r = row[k] * std::exp(-basis.log_density(theta, k));
    const Eigen::Vector3d u(basis.u[0][k], basis.u[1][k], basis.u[2][k]);
    h.noalias() -= whittle_weight(k, T) * r * u * u.transpose();
  }
  return h;
}

WhittleFit fit_theta_whittle(std::span<const double> row, const SpectralBasis& basis,
                             std::size_t T) {
  constexpr int kMaxIterations = 100;
  constexpr double kTolerance = 1e-8;

  Theta theta{0.0, 0.0, 0.0};
  double value = whittle_objective(theta, row, basis, T);
  for (int it = 0; it < kMaxIterations; ++it) {
    const Eigen::Vector3d g = whittle_gradient(theta, row, basis, T);
    const double gnorm = g.norm();
    if (gnorm < kTolerance) return {theta, gnorm, it};

    const Eigen::LLT<Eigen::Matrix3d> llt(-whittle_hessian(theta, row, basis, T));
    if (llt.info() != Eigen::Success) {
      throw WhittleConvergenceError("Whittle Hessian is not negative definite", theta);
    }
    const Eigen::Vector3d step = llt.solve(g);
    const double slope = g.dot(step);
    double t = 1.0;
    Theta next = theta;
    double next_value = value;
    // predicted gain below the objective's rounding: Armijo cannot discriminate
    bool accepted = 0.5 * slope <= 1e-12 * (1.0 + std::abs(value));
    if (accepted) {
      for (int j = 0; j < 3; ++j) next[static_cast<std::size_t>(j)] = theta[static_cast<std::size_t>(j)] + step(j);
      next_value = whittle_objective(next, row, basis, T);
      accepted = std::isfinite(next_value);
    }
    for (int half = 0; !accepted && half < 60; ++half, t *= 0.5) {
      for (int j = 0; j < 3; ++j) next[static_cast<std::size_t>(j)] = theta[static_cast<std::size_t>(j)] + t * step(j);
      next_value = whittle_objective(next, row, basis, T);
      if (std::isfinite(next_value) && next_value >= value + 1e-4 * t * slope) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      // At machine precision the Armijo test can fail although the step is
      // still an improvement in gradient; take it if the gradient shrinks.
      for (int j = 0; j < 3; ++j) next[static_cast<std::size_t>(j)] = theta[static_cast<std::size_t>(j)] + step(j);
      next_value = whittle_objective(next, row, basis, T);
      if (!std::isfinite(next_value) || whittle_gradient(next, row, basis, T).norm() >= gnorm) {
        throw WhittleConvergenceError("Whittle line search stalled", theta);
      }
    }
    theta = next;
    value = next_value;
  }
  const double gnorm = whittle_gradient(theta, row, basis, T).norm();
  if (gnorm < kTolerance) return {theta, gnorm, kMaxIterations};
  throw WhittleConvergenceError("Whittle fit did not converge in 100 iterations", theta);
}

ThetaField fit_theta_all(const Eigen::MatrixXd& pgram, const SpectralBasis& basis, std::size_t T,
                         unsigned threads) {
  const std::size_t n = static_cast<std::size_t>(pgram.rows());
  ThetaField out;
  out.theta.resize(n);
  parallel_for(n, threads, [&](std::size_t p) {
    std::vector<double> row(basis.K());
    for (std::size_t k = 0; k < row.size(); ++k) {
      row[k] = pgram(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(k));
    }
    out.theta[p] = fit_theta_whittle(row, basis, T).theta;
  });
  return out;
}

FittedSpectra fitted_spectra(const ThetaField& theta, const SpectralBasis& basis) {
  FittedSpectra s;
  const std::size_t n = theta.theta.size();
  s.values.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(basis.K()));
  for (std::size_t p = 0; p < n; ++p) {
    for (std::size_t k = 0; k < basis.K(); ++k) {
      s.values(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(k)) =
          std::exp(basis.log_density(theta.theta[p], k));
    }
  }
  return s;
}

}  // namespace halfspec
