#pragma once

#include <Eigen/Dense>
#include <complex>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "halfspec/grid.hpp"

namespace halfspec {

/// Number of half-spectrum frequencies for T time steps: floor(T/2) + 1.
constexpr std::size_t half_spectrum_size(std::size_t T) { return T / 2 + 1; }

/// True when frequency k has no conjugate partner (k = 0, or k = T/2 for even T).
constexpr bool is_real_frequency(std::size_t k, std::size_t T) {
  return k == 0 || (T % 2 == 0 && k == T / 2);
}

/// Per-pixel Fourier coefficients on the half spectrum,
///   Y(w_k; x) = T^{-1/2} sum_{t=1..T} Y(x, t) exp(-i w_k t),  w_k = 2 pi k / T.
/// coeffs is n x K; column k is the spatial map at frequency w_k.
struct SpectralField {
  Grid grid;
  std::size_t T = 0;
  Eigen::MatrixXcd coeffs;

  std::size_t n() const { return static_cast<std::size_t>(coeffs.rows()); }
  std::size_t K() const { return static_cast<std::size_t>(coeffs.cols()); }
};

/// Circular smoothing weights alpha(l), l = 0..T-1, summing to one.
struct SmoothingKernel {
  enum class Kind { daniell, appendix_exponential };

  Kind kind = Kind::daniell;
  std::vector<double> weights;

  /// Centred moving average over 2 * bandwidth + 1 frequencies.
  static SmoothingKernel daniell(std::size_t bandwidth, std::size_t T);
  /// alpha(l) proportional to exp(100 (cos w_l - 1)).
  static SmoothingKernel appendix_exponential(std::size_t T);
};

SpectralField forward_dft_all(const TimeCube& cube);

/// Inverse of forward_dft_all. Throws InvalidInput if the imaginary parts at
/// the real frequencies exceed 1e-6 of the pixel's spectral energy.
TimeCube inverse_dft_all(const SpectralField& field, std::size_t T);

/// Same as inverse_dft_all but keeps double precision.
Eigen::MatrixXd inverse_dft_all_double(const SpectralField& field);

/// |Y|^2 entrywise, n x K.
Eigen::MatrixXd periodogram(const SpectralField& field);

/// Mirrors a half-spectrum row to all T frequencies.
std::vector<double> mirror_half_spectrum(std::span<const double> half, std::size_t T);

/// f~(w_k) = (1 / 2 pi) sum_j alpha(k - j) P(w_j), circular over T frequencies.
/// `row` is a half-spectrum periodogram row; the result covers the half spectrum.
std::vector<double> smooth_periodogram(std::span<const double> row, std::size_t T,
                                       const SmoothingKernel& kernel);

struct SummaryMaps {
  std::vector<double> mean_map;
  std::vector<double> seasonal_map;
  std::vector<double> sigma_tilde;
  /// Missing (nullopt) where sigma_tilde is zero.
  std::vector<std::optional<double>> norm_forecast_sd;
};

SummaryMaps summary_maps(const SpectralField& field, const SmoothingKernel& kernel);

}  // namespace halfspec
