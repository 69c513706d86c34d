#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "halfspec/archive.hpp"
#include "halfspec/conditional.hpp"
#include "halfspec/grid.hpp"
#include "halfspec/selection.hpp"
#include "halfspec/spectral.hpp"
#include "halfspec/spectral_model.hpp"

namespace halfspec {

struct CompressOptions {
  SelectionConfig selection;
  std::uint64_t seed = 0;
  /// Frequencies 0..pinned_count-1 keep kappa = pinned_kappa.
  std::size_t pinned_count = 3;
  double pinned_kappa = 0.01;
  /// Starting point of the marginal kappa searches.
  double initial_kappa = 1.0;
};

struct CompressReport {
  BudgetReport budget;
  std::vector<std::string> trace;
  std::vector<double> kappa0;
  std::vector<std::uint8_t> kappa_at_bound;
  std::size_t iterations = 0;
  std::size_t reestimations = 0;
  std::size_t archive_bytes = 0;
};

/// Everything the compressor derives before selection, rounded to the
/// precision the archive stores.
struct FittedModel {
  SpectralField field;  // mean removed; imaginary parts zero at real frequencies
  MeanModel mean;
  SpectralBasis basis;
  ThetaField theta;
  FittedSpectra spectra;
};

FittedModel fit_model(const TimeCube& cube, unsigned threads = 0);

CompressedArchive compress(const TimeCube& cube, const CompressOptions& options,
                           CompressReport* report = nullptr);

enum class DecodeMode { mean, simulate };

/// Model pieces rebuilt from an archive exactly as the compressor used them.
struct DecodedModel {
  MeanModel mean;
  SpectralBasis basis;
  ThetaField theta;
  FittedSpectra spectra;
};

DecodedModel decode_model(const CompressedArchive& archive);

/// Half-spectrum coefficients (mean included) of the reconstruction.
/// Simulate mode draws frequency k from the stream derive_seed(seed, k).
SpectralField decompress_spectrum(const CompressedArchive& archive, DecodeMode mode,
                                  std::uint64_t seed, unsigned threads = 0);

TimeCube decompress(const CompressedArchive& archive, DecodeMode mode, std::uint64_t seed,
                    unsigned threads = 0);

/// Realization r is decompress(archive, simulate, derive_seed(seed, r)).
std::vector<TimeCube> emulate(const CompressedArchive& archive, std::size_t count,
                              std::uint64_t seed, unsigned threads = 0);

/// Stored coefficient counts per frequency.
std::vector<std::size_t> stored_per_frequency(const CompressedArchive& archive);

}  // namespace halfspec
