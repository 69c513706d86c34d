#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "halfspec/random.hpp"
#include "halfspec/spde.hpp"
#include "halfspec/spectral.hpp"
#include "halfspec/spectral_model.hpp"

namespace halfspec {

/// Z(w_k; x) = Y(w_k; x) / f^(w_k; x)^{1/2}, n x K.
struct ScaledField {
  Eigen::MatrixXcd Z;
};

ScaledField scale_field(const SpectralField& field, const FittedSpectra& spectra);
/// Inverse of scale_field; the result carries `grid` and `T`.
SpectralField unscale_field(const ScaledField& scaled, const FittedSpectra& spectra,
                            const Grid& grid, std::size_t T);

/// Stored / unstored split of the pixels at one frequency.
struct FrequencyPartition {
  std::size_t k = 0;
  std::vector<std::size_t> stored;    // sorted ascending, unique
  std::vector<std::size_t> unstored;  // complement, sorted ascending

  static FrequencyPartition from_stored(std::size_t k, std::size_t n,
                                        std::vector<std::size_t> stored);
  void validate(std::size_t n) const;
};

struct CoherenceParams {
  std::vector<double> kappa;
  std::vector<std::uint8_t> fixed_mask;

  /// kappa = `initial` everywhere except the first `pinned_count`
  /// frequencies, which are fixed at `pinned_value`.
  static CoherenceParams with_pinned(std::size_t K, double initial, std::size_t pinned_count = 3,
                                     double pinned_value = 0.01);
};

/// Principal block Q22 (unstored x unstored) and off-diagonal block Q21
/// (unstored x stored) of a symmetric sparse matrix. Index sets refer to the
/// matrix rows. Values are gathered from any matrix sharing `pattern`.
class PrecisionBlocks {
 public:
  PrecisionBlocks(const SparseMatrix& pattern, std::vector<std::size_t> stored);

  const std::vector<std::size_t>& stored() const { return stored_; }
  const std::vector<std::size_t>& unstored() const { return unstored_; }

  /// Copies the block values out of `full`, which must have the pattern
  /// this object was built from.
  void gather(const SparseMatrix& full);

  const SparseMatrix& q22() const { return q22_; }
  const SparseMatrix& q21() const { return q21_; }

 private:
  Eigen::Index pattern_nnz_ = 0;
  std::vector<std::size_t> stored_, unstored_;
  SparseMatrix q22_, q21_;
  std::vector<int> src22_, src21_;
};

/// Conditional distribution of the scaled coefficients at one frequency
/// given the stored pixels, on the mesh vertices.
///
/// A vertex counts as stored when any of its pixels is stored; its value is
/// the mean of its stored pixels. This only matters at merged pole vertices.
class ConditionalSystem {
 public:
  ConditionalSystem(const SpdeOperator& op, std::span<const std::size_t> stored_pixels);

  /// Numeric factorization of Q22(kappa); the symbolic analysis is reused.
  /// Throws NotPositiveDefinite.
  void set_kappa(double kappa);
  double kappa() const { return kappa_; }

  std::size_t unstored_vertex_count() const { return blocks_.unstored().size(); }
  /// True when nothing is stored: the full precision is handled through
  /// FullPrecisionFactor and there is no Q22 factor.
  bool unconditional() const { return blocks_.stored().empty(); }
  /// Factor of Q22; throws when unconditional().
  const CholeskyFactor& factor() const;

  /// Per-pixel conditional means; stored pixels keep their values.
  Eigen::VectorXcd conditional_mean(const Eigen::VectorXcd& z) const;

  /// Conditional mean plus a draw of the conditional residual. Noise is real
  /// N(0, 1) at real frequencies and CN(0, 1) otherwise.
  Eigen::VectorXcd simulate(const Eigen::VectorXcd& z, Rng& rng, bool real_frequency) const;

  /// -1/2 sum log f^ + 1/2 log det Q22 - 1/2 (Z2 - Z2^)^H Q22 (Z2 - Z2^), the
  /// sum running over pixels of unstored vertices. Additive constants are
  /// dropped; at real frequencies only the real parts are used.
  double loglik(const Eigen::VectorXcd& z, const Eigen::VectorXd& log_f,
                bool real_frequency) const;

 private:
  Eigen::VectorXcd vertex_values(const Eigen::VectorXcd& z) const;
  Eigen::VectorXcd predict_unstored(const Eigen::VectorXcd& vertex_z) const;

  const SpdeOperator* op_;
  std::vector<std::uint8_t> pixel_stored_;
  PrecisionBlocks blocks_;
  std::shared_ptr<const SymbolicCholesky> symbolic_;
  std::optional<CholeskyFactor> factor_;
  std::optional<FullPrecisionFactor> full_;
  double kappa_ = 0.0;
};

/// -Q22^{-1} Q21 Z1 over the unstored indices of `part` (matrix indices).
Eigen::VectorXcd conditional_expectation(const SparsePrecision& q, const FrequencyPartition& part,
                                         const Eigen::VectorXcd& z1);

/// Z2^ + L^{-T} eps for the factor of Q22.
Eigen::VectorXcd conditional_simulation(const CholeskyFactor& q22_factor,
                                        const Eigen::VectorXcd& zhat2, Rng& rng,
                                        bool real_frequency);

/// CL_k for a full row of scaled coefficients and fitted spectra.
double conditional_loglik(const SparsePrecision& q, const FrequencyPartition& part,
                          const Eigen::VectorXcd& z, const Eigen::VectorXd& fhat,
                          bool real_frequency);

enum class KappaObjective { marginal, conditional };

struct KappaBounds {
  double lower = 1e-3;
  double upper = 1e3;
};

struct KappaEstimate {
  double kappa = 0.0;
  double loglik = 0.0;
  bool at_bound = false;
  int evaluations = 0;
};

/// Maximises the marginal (no stored pixels) or conditional loglikelihood
/// over log kappa, starting from `start`, by bracketing and golden-section
/// search to width 1e-3 in log kappa.
KappaEstimate estimate_kappa(KappaObjective objective, const SpdeOperator& op,
                             std::span<const std::size_t> stored_pixels,
                             const Eigen::VectorXcd& z, const Eigen::VectorXd& log_f,
                             bool real_frequency, double start, KappaBounds bounds = {});

/// Precondition wrapper: refuses pinned frequencies.
KappaEstimate estimate_kappa(KappaObjective objective, const SpdeOperator& op,
                             const CoherenceParams& params, const FrequencyPartition& part,
                             const ScaledField& scaled, const FittedSpectra& spectra,
                             std::size_t T, KappaBounds bounds = {});

}  // namespace halfspec
