#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "halfspec/grid.hpp"
#include "halfspec/varint.hpp"

namespace halfspec {

inline constexpr std::uint16_t kArchiveVersion = 1;

enum ArchiveFlags : std::uint16_t {
  kFlagLandMask = 1u << 0,
  kFlagUniformLat = 1u << 1,
  kFlagUniformLon = 1u << 2,
};

/// Self-contained compressed representation of a cube.
///
/// Little-endian layout:
///   "HSGC" | u16 version | u16 flags | u32 n_lat | u32 n_lon | u32 T |
///   f32 ratio | u8 variant | 3 reserved bytes | u64 seed | u64 index_count |
///   u64 index_bytes
///   grid: latitudes (f64 lat0, dlat when uniform, else n_lat f64), the same
///         for longitudes, then ceil(n / 8) mask bytes when a mask is present
///   model: f32 mu0, Re mu1, Im mu1 | theta (3n, pixel-major) |
///          u0, u1, u2, u3 (K each) | kappa (K)
///   index: index_bytes of varint-coded flattened keys k * n + pixel
///   values: per stored pair in key order, f32 Re (real frequencies) or
///           f32 Re, f32 Im (complex frequencies)
struct CompressedArchive {
  std::uint16_t version = kArchiveVersion;
  Grid grid;
  std::size_t T = 0;
  float ratio = 0.0f;
  std::uint8_t variant = 0;
  std::uint64_t seed = 0;

  float mu0 = 0.0f;
  std::complex<float> mu1{};
  std::vector<float> theta;                 // 3n
  std::array<std::vector<float>, 4> basis;  // u0..u3, K each
  std::vector<float> kappa;                 // K

  std::vector<IndexPair> indices;  // strictly increasing keys
  std::vector<float> values;

  std::size_t n() const { return grid.size(); }
  std::size_t K() const { return T / 2 + 1; }

  /// Number of f32 values the index list requires.
  std::size_t expected_value_count() const;
  /// Throws FormatError when sizes or ordering are inconsistent.
  void validate() const;

  bool operator==(const CompressedArchive&) const = default;
};

/// Bytes of everything except the index and value blocks.
std::size_t archive_fixed_bytes(const Grid& grid, std::size_t T);

std::vector<std::uint8_t> serialize(const CompressedArchive& archive);
CompressedArchive deserialize(std::span<const std::uint8_t> bytes);

void write_archive(const CompressedArchive& archive, const std::filesystem::path& path);
CompressedArchive read_archive(const std::filesystem::path& path);

}  // namespace halfspec
