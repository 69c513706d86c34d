#pragma once

#include <Eigen/Dense>
#include <array>
#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "halfspec/error.hpp"
#include "halfspec/spectral.hpp"

namespace halfspec {

/// Global mean mu(x, t) = mu0 + mu1 exp(i w_1 t) + conj(mu1) exp(i w_{T-1} t).
struct MeanModel {
  double mu0 = 0.0;
  std::complex<double> mu1 = 0.0;
};

using Theta = std::array<double, 3>;

/// u0 (log average periodogram) and the three principal-component loadings,
/// each over the K half-spectrum frequencies.
struct SpectralBasis {
  std::vector<double> u0;
  std::array<std::vector<double>, 3> u;

  std::size_t K() const { return u0.size(); }
  double log_density(const Theta& theta, std::size_t k) const {
    return u0[k] + theta[0] * u[0][k] + theta[1] * u[1][k] + theta[2] * u[2][k];
  }
};

struct ThetaField {
  std::vector<Theta> theta;  // one row per pixel
};

/// f^(w_k; x), n x K, strictly positive.
struct FittedSpectra {
  Eigen::MatrixXd values;
};

/// Weighted average over pixels of T^{-1/2} Y(w_0) and T^{-1/2} Y(w_1).
/// An empty weight span means a plain average.
MeanModel estimate_mean(const SpectralField& field, std::span<const double> weights);

/// Subtracts sqrt(T) mu0 at k = 0 and sqrt(T) mu1 at k = 1 from every pixel.
void remove_mean(SpectralField& field, const MeanModel& mean);
/// Inverse of remove_mean.
void add_mean(SpectralField& field, const MeanModel& mean);

/// u0(w_k) = log(n^{-1} sum_i |Y(w_k; x_i)|^2). Throws InvalidInput when a
/// frequency has zero average periodogram.
std::vector<double> compute_u0(const SpectralField& field);

/// g(w_k, x) = log(sum_l alpha(l - k) |Y(w_l, x)|^2 / exp(u0(w_l))) with the
/// exp(100 (cos w - 1)) kernel, n x K.
Eigen::MatrixXd smoothed_normalized_logpgram(const SpectralField& field,
                                             std::span<const double> u0);

/// Three leading eigenvectors of the column-centred covariance of g (K x K),
/// by decreasing eigenvalue, each with its largest-magnitude entry positive.
/// Optional pixel weights give a weighted covariance. Throws InvalidInput
/// when the centred matrix has rank below three.
std::array<std::vector<double>, 3> principal_components(const Eigen::MatrixXd& g,
                                                        std::span<const double> pixel_weights = {});

/// u0 plus principal components for a mean-removed field.
SpectralBasis build_basis(const SpectralField& mean_removed,
                          std::span<const double> pixel_weights = {});

double spectral_density(const Theta& theta, const SpectralBasis& basis, std::size_t k);

/// Whittle log-likelihood sum_{k=1}^{K-1} w_k [-log f_k - I_k / f_k], with
/// w_k = 2 where w_k has a conjugate partner and 1 otherwise.
double whittle_objective(const Theta& theta, std::span<const double> pgram_row,
                         const SpectralBasis& basis, std::size_t T);
Eigen::Vector3d whittle_gradient(const Theta& theta, std::span<const double> pgram_row,
                                 const SpectralBasis& basis, std::size_t T);
Eigen::Matrix3d whittle_hessian(const Theta& theta, std::span<const double> pgram_row,
                                const SpectralBasis& basis, std::size_t T);

class WhittleConvergenceError : public Error {
 public:
  WhittleConvergenceError(const std::string& what, Theta last_iterate)
      : Error(what), last(last_iterate) {}
  Theta last;
};

struct WhittleFit {
  Theta theta{};
  double gradient_norm = 0.0;
  int iterations = 0;
};

/// Damped Newton maximisation of the Whittle objective (strictly concave).
/// Converges at gradient norm < 1e-8 within 100 iterations or throws
/// WhittleConvergenceError carrying the last iterate.
WhittleFit fit_theta_whittle(std::span<const double> pgram_row, const SpectralBasis& basis,
                             std::size_t T);

/// Per-pixel fits over a periodogram matrix (n x K).
ThetaField fit_theta_all(const Eigen::MatrixXd& pgram, const SpectralBasis& basis, std::size_t T,
                         unsigned threads = 0);

FittedSpectra fitted_spectra(const ThetaField& theta, const SpectralBasis& basis);

}  // namespace halfspec
