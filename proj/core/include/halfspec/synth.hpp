#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "halfspec/conditional.hpp"
#include "halfspec/grid.hpp"
#include "halfspec/spectral_model.hpp"

namespace halfspec {

/// Fully specified half-spectral model used to simulate test cubes.
///
/// Defaults: log f(w; x) = log sigma^2 + u0(w) + sum_j theta_j(x) u_j(w) with
/// u0 an AR(1) log spectrum and u1..u3 proportional to 1, cos w and cos 2w
/// (unit norm over the half spectrum). theta_amplitude gives the peak
/// contribution of each term to log f; the theta_j(x) are smooth functions of
/// latitude and longitude, the level term producing several-fold variance
/// contrasts. kappa rises geometrically from kappa_low at k = 0 to
/// kappa_high at the last frequency.
struct GeneratorSpec {
  std::size_t n_lat = 16;
  std::size_t n_lon = 32;
  std::size_t T = 64;
  bool poles = false;
  MeanModel mean{};
  double sigma = 1.0;
  double ar = 0.6;
  std::array<double, 3> theta_amplitude{1.0, 0.5, 0.25};
  double kappa_low = 2.0;
  double kappa_high = 60.0;
  std::uint64_t seed = 1;

  void validate() const;

  Grid grid() const;
  SpectralBasis basis() const;
  ThetaField theta(const Grid& grid) const;
  /// kappa per half-spectrum frequency.
  std::vector<double> kappa() const;
  /// f(w_k; x), n x K.
  FittedSpectra spectra(const Grid& grid) const;
};

/// "key value..." lines; '#' starts a comment. Keys: nlat nlon ntime poles
/// mu0 mu1 (re im) sigma ar theta_amp (3 values) kappa_low kappa_high seed.
GeneratorSpec parse_generator_spec(const std::string& text);
GeneratorSpec load_generator_spec(const std::filesystem::path& path);
std::string format_generator_spec(const GeneratorSpec& spec);

/// Unconditional draw: Z(w_k) from Q(kappa_k) (real noise at the real
/// frequencies) rescaled to unit marginal variance, scaled by f^{1/2}, mean
/// added, inverse transformed.
/// Frequency k uses the stream derive_seed(seed, k).
TimeCube generate(const GeneratorSpec& spec, unsigned threads = 0);

}  // namespace halfspec
