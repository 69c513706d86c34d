#include "halfspec/spectral.hpp"

#include <fftw3.h>

#include <cmath>
#include <mutex>
#include <numbers>

#include "halfspec/error.hpp"

namespace halfspec {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// FFTW's planner is not re-entrant.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

std::complex<double> unit_phase(std::size_t k, std::size_t T) {
  if (k == 0) return 1.0;
  if (2 * k == T) return -1.0;
  const double w = kTwoPi * static_cast<double>(k) / static_cast<double>(T);
  return {std::cos(w), std::sin(w)};
}

}  // namespace

SmoothingKernel SmoothingKernel::daniell(std::size_t bandwidth, std::size_t T) {
  if (2 * bandwidth + 1 > T) throw InvalidInput("Daniell window wider than the spectrum");
  SmoothingKernel k;
  k.kind = Kind::daniell;
  k.weights.assign(T, 0.0);
  const double w = 1.0 / static_cast<double>(2 * bandwidth + 1);
  k.weights[0] = w;
  for (std::size_t l = 1; l <= bandwidth; ++l) {
    k.weights[l] = w;
    k.weights[T - l] = w;
  }
  return k;
}

SmoothingKernel SmoothingKernel::appendix_exponential(std::size_t T) {
  SmoothingKernel k;
  k.kind = Kind::appendix_exponential;
  k.weights.resize(T);
  double c = 0.0;
  for (std::size_t l = 0; l < T; ++l) {
    const double w = kTwoPi * static_cast<double>(std::min(l, T - l)) / static_cast<double>(T);
    k.weights[l] = std::exp(100.0 * (std::cos(w) - 1.0));
    c += k.weights[l];
  }
  for (auto& w : k.weights) w /= c;
  return k;
}

SpectralField forward_dft_all(const TimeCube& cube) {
  cube.validate();
  const std::size_t n = cube.n();
  const std::size_t T = cube.T;
  const std::size_t K = half_spectrum_size(T);

  double* in = fftw_alloc_real(n * T);
  fftw_complex* out = fftw_alloc_complex(n * K);
  for (std::size_t i = 0; i < n * T; ++i) in[i] = static_cast<double>(cube.values[i]);
  fftw_plan plan;
  {
    std::lock_guard lock(planner_mutex());
    const int len = static_cast<int>(T);
    plan = fftw_plan_many_dft_r2c(1, &len, static_cast<int>(n), in, nullptr, 1,
                                  static_cast<int>(T), out, nullptr, 1, static_cast<int>(K),
                                  FFTW_ESTIMATE);
  }
  fftw_execute(plan);

  SpectralField field;
  field.grid = cube.grid;
  field.T = T;
  field.coeffs.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(K));
  const double scale = 1.0 / std::sqrt(static_cast<double>(T));
  for (std::size_t k = 0; k < K; ++k) {
    // shift from t = 0..T-1 to t = 1..T
    const std::complex<double> phase = std::conj(unit_phase(k, T)) * scale;
    for (std::size_t p = 0; p < n; ++p) {
      const fftw_complex& c = out[p * K + k];
      field.coeffs(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(k)) =
          std::complex<double>(c[0], c[1]) * phase;
    }
  }
  {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(plan);
  }
  fftw_free(in);
  fftw_free(out);
  return field;
}

Eigen::MatrixXd inverse_dft_all_double(const SpectralField& field) {
  const std::size_t n = field.n();
  const std::size_t T = field.T;
  const std::size_t K = half_spectrum_size(T);
  if (field.K() != K) throw InvalidInput("spectral field width does not match T");

  for (std::size_t p = 0; p < n; ++p) {
    double energy = 0.0;
    double residue = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      const auto c = field.coeffs(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(k));
      energy += std::norm(c) * (is_real_frequency(k, T) ? 1.0 : 2.0);
      if (is_real_frequency(k, T)) residue += c.imag() * c.imag();
    }
    if (residue > 1e-12 * energy) {
      throw InvalidInput("imaginary residue at a real frequency exceeds tolerance (pixel " +
                         std::to_string(p) + ")");
    }
  }

  fftw_complex* in = fftw_alloc_complex(n * K);
  double* out = fftw_alloc_real(n * T);
  const double scale = std::sqrt(static_cast<double>(T)) / static_cast<double>(T);
  for (std::size_t k = 0; k < K; ++k) {
    const std::complex<double> phase = unit_phase(k, T) * scale;
    for (std::size_t p = 0; p < n; ++p) {
      auto c = field.coeffs(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(k)) * phase;
      in[p * K + k][0] = c.real();
      in[p * K + k][1] = c.imag();
    }
  }
  fftw_plan plan;
  {
    std::lock_guard lock(planner_mutex());
    const int len = static_cast<int>(T);
    plan = fftw_plan_many_dft_c2r(1, &len, static_cast<int>(n), in, nullptr, 1,
                                  static_cast<int>(K), out, nullptr, 1, static_cast<int>(T),
                                  FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  Eigen::MatrixXd values(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(T));
  for (std::size_t p = 0; p < n; ++p) {
    for (std::size_t t = 0; t < T; ++t) {
      values(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(t)) = out[p * T + t];
    }
  }
  {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(plan);
  }
  fftw_free(in);
  fftw_free(out);
  return values;
}

TimeCube inverse_dft_all(const SpectralField& field, std::size_t T) {
  if (T != field.T) throw InvalidInput("T does not match the spectral field");
  const Eigen::MatrixXd values = inverse_dft_all_double(field);
  TimeCube cube(field.grid, T);
  for (std::size_t p = 0; p < cube.n(); ++p) {
    for (std::size_t t = 0; t < T; ++t) {
      cube.at(p, t) =
          static_cast<float>(values(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(t)));
    }
  }
  return cube;
}

Eigen::MatrixXd periodogram(const SpectralField& field) {
  return field.coeffs.cwiseAbs2();
}

std::vector<double> mirror_half_spectrum(std::span<const double> half, std::size_t T) {
  if (half.size() != half_spectrum_size(T)) throw InvalidInput("half spectrum length mismatch");
  std::vector<double> full(T);
  for (std::size_t l = 0; l < T; ++l) full[l] = l < half.size() ? half[l] : half[T - l];
  return full;
}

std::vector<double> smooth_periodogram(std::span<const double> row, std::size_t T,
                                       const SmoothingKernel& kernel) {
  if (kernel.weights.size() != T) throw InvalidInput("kernel length does not match T");
  const std::vector<double> full = mirror_half_spectrum(row, T);
  std::vector<std::size_t> support;
  for (std::size_t l = 0; l < T; ++l) {
    if (kernel.weights[l] != 0.0) support.push_back(l);
  }
  std::vector<double> out(row.size());
  for (std::size_t k = 0; k < row.size(); ++k) {
    double acc = 0.0;
    // alpha(k - j) with lag l = k - j mod T, i.e. j = k - l mod T
    for (std::size_t l : support) acc += kernel.weights[l] * full[(k + T - l) % T];
    out[k] = acc / kTwoPi;
  }
  return out;
}

SummaryMaps summary_maps(const SpectralField& field, const SmoothingKernel& kernel) {
  const std::size_t T = field.T;
  const std::size_t n = field.n();
  const std::size_t K = field.K();
  if (T < 5) throw InvalidInput("summary maps need T >= 5");
  const double rootT = std::sqrt(static_cast<double>(T));

  SummaryMaps maps;
  maps.mean_map.resize(n);
  maps.seasonal_map.resize(n);
  maps.sigma_tilde.resize(n);
  maps.norm_forecast_sd.resize(n);
  const Eigen::MatrixXd pgram = periodogram(field);
  std::vector<double> row(K);
  for (std::size_t p = 0; p < n; ++p) {
    const auto ip = static_cast<Eigen::Index>(p);
    maps.mean_map[p] = field.coeffs(ip, 0).real() / rootT;
    maps.seasonal_map[p] = 2.0 * field.coeffs(ip, 1).real() / rootT;

    for (std::size_t k = 0; k < K; ++k) row[k] = pgram(ip, static_cast<Eigen::Index>(k));
    const std::vector<double> smooth = smooth_periodogram(row, T, kernel);
    double energy = 0.0;
    for (std::size_t k = 0; k < K; ++k) energy += row[k] * (is_real_frequency(k, T) ? 1.0 : 2.0);
    double sum_sq = 0.0;
    double sum_log = 0.0;
    bool log_defined = true;
    for (std::size_t k = 2; k <= T - 2; ++k) {
      const std::size_t h = k < K ? k : T - k;
      sum_sq += row[h];
      if (smooth[h] > 0.0) {
        sum_log += std::log(smooth[h]);
      } else {
        log_defined = false;
      }
    }
    // transform round-off of a constant deseasonalized series counts as zero
    if (sum_sq <= 1e-24 * energy) sum_sq = 0.0;
    const double sigma = std::sqrt(sum_sq / static_cast<double>(T - 3));
    maps.sigma_tilde[p] = sigma;
    if (sigma > 0.0 && log_defined) {
      const double forecast_var = kTwoPi * std::exp(sum_log / static_cast<double>(T));
      maps.norm_forecast_sd[p] = std::sqrt(forecast_var) / sigma;
    }
  }
  return maps;
}

}  // namespace halfspec
