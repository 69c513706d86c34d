#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace halfspec {

/// Regular latitude/longitude grid. Pixels are ordered row-major with
/// latitude as the outer index: pixel = lat_index * n_lon + lon_index.
struct Grid {
  std::vector<double> latitudes;   // degrees, strictly increasing in [-90, 90]
  std::vector<double> longitudes;  // degrees, strictly increasing, span < 360
  std::optional<std::vector<std::uint8_t>> land_mask;  // 1 = land

  std::size_t n_lat() const { return latitudes.size(); }
  std::size_t n_lon() const { return longitudes.size(); }
  std::size_t size() const { return latitudes.size() * longitudes.size(); }

  std::size_t lat_index(std::size_t pixel) const { return pixel / n_lon(); }
  std::size_t lon_index(std::size_t pixel) const { return pixel % n_lon(); }
  double latitude_of(std::size_t pixel) const { return latitudes[lat_index(pixel)]; }
  double longitude_of(std::size_t pixel) const { return longitudes[lon_index(pixel)]; }

  /// Throws InvalidInput when the invariants above do not hold.
  void validate() const;

  /// Grid with uniformly spaced rows and columns.
  static Grid uniform(std::size_t n_lat, double lat0, double dlat, std::size_t n_lon,
                      double lon0, double dlon);

  /// n_lat rows of cell centres strictly inside (-90, 90) and n_lon columns
  /// starting at longitude 0.
  static Grid global_cell_centred(std::size_t n_lat, std::size_t n_lon);

  /// n_lat rows from -90 to 90 inclusive (both pole rows present).
  static Grid global_with_poles(std::size_t n_lat, std::size_t n_lon);

  bool operator==(const Grid&) const = default;
};

/// Real field Y(x, t) on the grid, stored pixel-major at float precision.
struct TimeCube {
  Grid grid;
  std::size_t T = 0;
  std::vector<float> values;  // values[pixel * T + t]

  TimeCube() = default;
  TimeCube(Grid g, std::size_t steps);

  std::size_t n() const { return grid.size(); }
  float& at(std::size_t pixel, std::size_t t) { return values[pixel * T + t]; }
  float at(std::size_t pixel, std::size_t t) const { return values[pixel * T + t]; }
  std::span<const float> series(std::size_t pixel) const {
    return {values.data() + pixel * T, T};
  }

  /// Checks T >= 4, payload size and finiteness.
  void validate() const;
};

using Vec3 = std::array<double, 3>;

/// Unit-sphere embedding of pixel centres, one row per pixel.
struct UnitSphereCoords {
  std::vector<Vec3> xyz;
  std::size_t size() const { return xyz.size(); }
  const Vec3& operator[](std::size_t i) const { return xyz[i]; }
};

std::pair<Grid, TimeCube> load_cube(const std::filesystem::path& path);
void save_cube(const Grid& grid, const TimeCube& cube, const std::filesystem::path& path);

/// Per-pixel map in the cube format with ntime 1; NaN marks missing entries.
std::pair<Grid, std::vector<float>> load_map(const std::filesystem::path& path);
void save_map(const Grid& grid, std::span<const float> values, const std::filesystem::path& path);

Vec3 to_unit_sphere(double lat_deg, double lon_deg);
UnitSphereCoords sphere_coords(const Grid& grid);
double chordal_distance(const Vec3& a, const Vec3& b);

/// cos(latitude) weights normalised to sum to one.
std::vector<double> pixel_area_weights(const Grid& grid);

}  // namespace halfspec
