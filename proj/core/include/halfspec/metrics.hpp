#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "halfspec/grid.hpp"

namespace halfspec {

struct ContrastMaps {
  /// Mean squared difference to the next row (missing on the last row).
  std::vector<std::optional<double>> north_south;
  /// Mean squared difference to the next column, wrapping around.
  std::vector<double> east_west;
  /// Mean squared one-step temporal difference.
  std::vector<double> temporal;
};

struct FidelityReport {
  std::vector<double> rmspe_map;
  std::optional<double> rmspe_land;
  std::optional<double> rmspe_ocean;
  double rmspe_all = 0.0;
  std::optional<ContrastMaps> original_contrasts;
  std::optional<ContrastMaps> decompressed_contrasts;
  double runtime_seconds = 0.0;
};

/// s(x) = sqrt(T^{-1} sum_t (Y - Yhat)^2) and sqrt(sum w s^2 / sum w)
/// aggregates. Land/ocean aggregates need a mask (the explicit `mask` or the
/// grid's own) and a nonempty subset.
FidelityReport rmspe(const TimeCube& original, const TimeCube& decompressed,
                     std::span<const double> weights,
                     std::optional<std::span<const std::uint8_t>> mask = std::nullopt);

ContrastMaps contrast_variances(const TimeCube& cube);

/// Natural logarithm of a contrast map; nullopt where the value is missing or zero.
std::vector<std::optional<double>> log_map(std::span<const std::optional<double>> values);
std::vector<std::optional<double>> log_map(std::span<const double> values);

/// Pearson correlation over entries present in both maps.
double map_correlation(std::span<const std::optional<double>> a,
                       std::span<const std::optional<double>> b);

/// Writes `dir/summary.csv` (metric,subset,value), the RMSPE map and, when
/// present, the log contrast maps as map files (NaN where missing).
void emit_report(const FidelityReport& report, const Grid& grid, const std::filesystem::path& dir);

/// The CSV text written by emit_report.
std::string report_csv(const FidelityReport& report);

}  // namespace halfspec
