#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "halfspec/conditional.hpp"
#include "halfspec/grid.hpp"
#include "halfspec/spde.hpp"
#include "halfspec/spectral.hpp"
#include "halfspec/spectral_model.hpp"
#include "halfspec/varint.hpp"

namespace halfspec {

enum class Variant { sequential, distributed };

struct SelectionConfig {
  double ratio = 10.0;
  std::size_t M = 50;
  std::size_t J = 8;
  double d_min = 0.05;
  std::pair<std::size_t, std::size_t> seed_grid_subsample{2, 4};
  Variant variant = Variant::sequential;
  /// Enforce d_min against coefficients stored by earlier batches as well.
  bool d_min_across_batches = false;
  double index_bits_per_pair = 8.0;
  unsigned threads = 0;

  void validate() const;
};

/// Number accounting in 32-bit units.
struct BudgetReport {
  double ratio = 0.0;
  std::size_t n = 0, T = 0;
  double total_numbers = 0.0;       // nT / ratio
  std::size_t model_numbers = 0;    // 3 + 3n + ceil(5T/2)
  double remaining = 0.0;           // B
  double index_bits_per_pair = 8.0;
  std::size_t byte_limit = 0;       // floor(4 nT / ratio)

  /// c0 real-frequency and c_plus complex coefficients fit the plan:
  /// c0 + 2 c_plus + (c0 + c_plus) bits / 32 <= B.
  bool fits(std::size_t c0, std::size_t c_plus) const;
};

/// Throws BudgetError when the model alone exceeds the budget.
BudgetReport compute_budget(double ratio, std::size_t n, std::size_t T,
                            double index_bits_per_pair = 8.0);

/// Pixels on every lat_stride-th row and lon_stride-th column, from (0, 0).
std::vector<std::size_t> seed_grid(const Grid& grid, std::pair<std::size_t, std::size_t> strides);

/// Up to m unstored pixels by decreasing |R|^2 (ties to the lower index),
/// skipping any pixel closer than d_min to one already accepted. `blocked`
/// pixels are treated as accepted for the distance test but never returned.
std::vector<std::size_t> pick_batch(const Eigen::VectorXcd& residual,
                                    std::span<const std::size_t> unstored,
                                    const UnitSphereCoords& coords, std::size_t m, double d_min,
                                    std::span<const std::size_t> blocked = {});

/// Largest-remainder split of M proportional to D. Entries with capacity 0
/// get nothing; shares above capacity are capped and the excess is
/// redistributed. Throws InvalidInput when no eligible score is positive.
std::vector<std::size_t> allocate_m_k(std::span<const double> D, std::size_t M,
                                      std::span<const std::size_t> capacity = {});

/// Everything the selection needs from the fitted model.
struct SelectionProblem {
  const Grid* grid = nullptr;
  std::size_t T = 0;
  const SpdeOperator* op = nullptr;
  const UnitSphereCoords* coords = nullptr;
  /// Mean-removed coefficients exactly as they will be stored.
  const SpectralField* field = nullptr;
  const FittedSpectra* spectra = nullptr;
  /// Archive bytes that do not depend on the selection (header + model).
  std::size_t fixed_bytes = 0;
};

struct SelectionState {
  std::vector<FrequencyPartition> partitions;
  /// R(w_k; x) = Y - f^{1/2} Z^, n x K; zero at stored pixels.
  Eigen::MatrixXcd residuals;
  /// D(w_k) = max over unstored x of |R|^2; -1 when nothing is unstored.
  std::vector<double> scores;
  std::size_t real_count = 0;
  std::size_t complex_count = 0;
  IndexSizeTracker index;

  std::size_t count() const { return real_count + complex_count; }
};

struct SelectionResult {
  SelectionState state;
  CoherenceParams coherence;
  std::vector<double> kappa0;
  std::vector<std::uint8_t> kappa_at_bound;
  std::vector<std::string> trace;
  std::size_t iterations = 0;
  std::size_t reestimations = 0;
  BudgetReport budget;
  std::size_t archive_bytes = 0;
};

/// Marginal kappa for every non-pinned frequency (pinned ones keep their value).
/// `at_bound` receives one flag per frequency when non-null.
CoherenceParams estimate_initial_kappa(const SelectionProblem& problem, CoherenceParams params,
                                       unsigned threads, std::vector<std::uint8_t>* at_bound = nullptr);

/// Greedy selection. `initial` carries kappa0 (marginal) and the pinned mask.
SelectionResult run_selection(const SelectionProblem& problem, const SelectionConfig& config,
                              const CoherenceParams& initial);

}  // namespace halfspec
