#include "halfspec/grid.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>
#include <string>

#include "halfspec/error.hpp"

namespace halfspec {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

bool is_uniform(const std::vector<double>& v) {
  if (v.size() < 2) return true;
  const double step = v[1] - v[0];
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v[0] + static_cast<double>(i) * step != v[i]) return false;
  }
  return true;
}

std::string format_double(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

void write_axis(std::ostream& os, const std::string& prefix, const std::vector<double>& v) {
  if (is_uniform(v)) {
    os << prefix << "0 " << format_double(v[0]) << '\n';
    os << 'd' << prefix << ' ' << format_double(v.size() > 1 ? v[1] - v[0] : 0.0) << '\n';
  } else {
    os << prefix << 's';
    for (double x : v) os << ' ' << format_double(x);
    os << '\n';
  }
}

std::uint32_t to_little_endian(std::uint32_t bits) {
  if constexpr (std::endian::native == std::endian::big) {
    return ((bits & 0xffu) << 24) | ((bits & 0xff00u) << 8) | ((bits >> 8) & 0xff00u) |
           (bits >> 24);
  }
  return bits;
}

struct AxisSpec {
  std::optional<double> start;
  std::optional<double> step;
  std::optional<std::vector<double>> explicit_values;

  std::vector<double> build(std::size_t count, const char* name) const {
    if (explicit_values) {
      if (start || step) throw FormatError(std::string("both explicit and uniform ") + name);
      if (explicit_values->size() != count) {
        throw FormatError(std::string("explicit ") + name + " list has wrong length");
      }
      return *explicit_values;
    }
    if (!start || (!step && count > 1)) throw FormatError(std::string("missing ") + name);
    std::vector<double> out(count);
    for (std::size_t i = 0; i < count; ++i) {
      out[i] = *start + static_cast<double>(i) * step.value_or(0.0);
    }
    return out;
  }
};

double parse_double(const std::string& token) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(token, &used);
  } catch (const std::exception&) {
    throw FormatError("bad number in cube header: " + token);
  }
  if (used != token.size()) throw FormatError("bad number in cube header: " + token);
  return v;
}

std::size_t parse_count(const std::string& token) {
  std::size_t used = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(token, &used);
  } catch (const std::exception&) {
    throw FormatError("bad count in cube header: " + token);
  }
  if (used != token.size()) throw FormatError("bad count in cube header: " + token);
  return static_cast<std::size_t>(v);
}

}  // namespace

void Grid::validate() const {
  if (latitudes.empty() || longitudes.empty()) throw InvalidInput("grid has no pixels");
  for (std::size_t i = 0; i < latitudes.size(); ++i) {
    if (!std::isfinite(latitudes[i]) || latitudes[i] < -90.0 || latitudes[i] > 90.0) {
      throw InvalidInput("latitude out of [-90, 90]");
    }
    if (i > 0 && !(latitudes[i] > latitudes[i - 1])) {
      throw InvalidInput("latitudes not strictly increasing");
    }
  }
  for (std::size_t j = 0; j < longitudes.size(); ++j) {
    if (!std::isfinite(longitudes[j])) throw InvalidInput("non-finite longitude");
    if (j > 0 && !(longitudes[j] > longitudes[j - 1])) {
      throw InvalidInput("longitudes not strictly increasing");
    }
  }
  if (longitudes.back() - longitudes.front() >= 360.0) {
    throw InvalidInput("longitude span must be below 360 degrees");
  }
  if (land_mask && land_mask->size() != size()) throw InvalidInput("land mask size mismatch");
}

Grid Grid::uniform(std::size_t n_lat, double lat0, double dlat, std::size_t n_lon, double lon0,
                   double dlon) {
  Grid g;
  g.latitudes.resize(n_lat);
  g.longitudes.resize(n_lon);
  for (std::size_t i = 0; i < n_lat; ++i) g.latitudes[i] = lat0 + static_cast<double>(i) * dlat;
  for (std::size_t j = 0; j < n_lon; ++j) g.longitudes[j] = lon0 + static_cast<double>(j) * dlon;
  return g;
}

Grid Grid::global_cell_centred(std::size_t n_lat, std::size_t n_lon) {
  const double dlat = 180.0 / static_cast<double>(n_lat);
  return uniform(n_lat, -90.0 + dlat / 2.0, dlat, n_lon, 0.0, 360.0 / static_cast<double>(n_lon));
}

Grid Grid::global_with_poles(std::size_t n_lat, std::size_t n_lon) {
  if (n_lat < 2) throw InvalidInput("a grid with both poles needs at least two rows");
  Grid g = uniform(n_lat, -90.0, 180.0 / static_cast<double>(n_lat - 1), n_lon, 0.0,
                   360.0 / static_cast<double>(n_lon));
  g.latitudes.back() = 90.0;
  return g;
}

TimeCube::TimeCube(Grid g, std::size_t steps)
    : grid(std::move(g)), T(steps), values(grid.size() * steps, 0.0f) {}

void TimeCube::validate() const {
  grid.validate();
  if (T < 4) throw InvalidInput("time cube needs at least 4 time steps");
  if (values.size() != grid.size() * T) throw InvalidInput("cube payload size mismatch");
  for (float v : values) {
    if (!std::isfinite(v)) throw InvalidInput("cube contains non-finite values");
  }
}

namespace {

struct RawGridFile {
  Grid grid;
  std::size_t steps = 0;
  std::vector<float> values;
};

RawGridFile read_grid_file(const std::filesystem::path& path, bool map_file) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open cube file " + path.string());

  std::optional<std::size_t> nlat, nlon, ntime;
  AxisSpec lat, lon;
  std::optional<std::string> mask;
  std::string line;
  bool terminated = false;
  while (std::getline(in, line)) {
    if (line.empty()) {
      terminated = true;
      break;
    }
    std::istringstream ls(line);
    std::vector<std::string> tokens;
    for (std::string tok; ls >> tok;) tokens.push_back(tok);
    // scalar keys may share a line ("lat0 -89 dlat 2"); list keys take the rest
    std::size_t pos = 0;
    while (pos < tokens.size()) {
      const std::string key = tokens[pos++];
      auto single = [&]() -> const std::string& {
        if (pos >= tokens.size()) throw FormatError("key '" + key + "' expects a value");
        return tokens[pos++];
      };
      if (key == "nlat") {
        nlat = parse_count(single());
      } else if (key == "nlon") {
        nlon = parse_count(single());
      } else if (key == "ntime") {
        ntime = parse_count(single());
      } else if (key == "lat0") {
        lat.start = parse_double(single());
      } else if (key == "dlat") {
        lat.step = parse_double(single());
      } else if (key == "lon0") {
        lon.start = parse_double(single());
      } else if (key == "dlon") {
        lon.step = parse_double(single());
      } else if (key == "lats" || key == "lons") {
        std::vector<double> v;
        for (; pos < tokens.size(); ++pos) v.push_back(parse_double(tokens[pos]));
        (key == "lats" ? lat : lon).explicit_values = std::move(v);
      } else if (key == "mask") {
        mask = single();
      } else {
        throw FormatError("unknown cube header key '" + key + "'");
      }
    }
  }
  if (!terminated) throw FormatError("cube header not terminated by a blank line");
  if (!nlat || !nlon || !ntime) throw FormatError("cube header lacks nlat/nlon/ntime");
  if (map_file && *ntime != 1) throw FormatError("map file must have ntime 1");
  if (!map_file && *ntime < 4) throw FormatError("cube needs at least 4 time steps");

  Grid grid;
  grid.latitudes = lat.build(*nlat, "latitudes");
  grid.longitudes = lon.build(*nlon, "longitudes");
  if (mask) {
    if (mask->size() != grid.size()) throw FormatError("mask length does not match grid");
    std::vector<std::uint8_t> m(mask->size());
    for (std::size_t i = 0; i < mask->size(); ++i) {
      if ((*mask)[i] != '0' && (*mask)[i] != '1') throw FormatError("mask must be 0/1");
      m[i] = static_cast<std::uint8_t>((*mask)[i] == '1');
    }
    grid.land_mask = std::move(m);
  }
  try {
    grid.validate();
  } catch (const InvalidInput& e) {
    throw FormatError(std::string("invalid grid in cube header: ") + e.what());
  }

  const std::size_t count = grid.size() * *ntime;
  std::vector<std::uint32_t> raw(count);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(count * 4));
  if (static_cast<std::size_t>(in.gcount()) != count * 4) {
    throw FormatError("cube payload shorter than header declares");
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw FormatError("cube payload longer than header declares");
  }
  RawGridFile file{std::move(grid), *ntime, std::vector<float>(count)};
  for (std::size_t i = 0; i < count; ++i) {
    file.values[i] = std::bit_cast<float>(to_little_endian(raw[i]));
    // maps use NaN for missing entries
    if (!map_file && !std::isfinite(file.values[i])) throw FormatError("cube contains non-finite values");
  }
  return file;
}

void write_grid_file(const Grid& grid, std::size_t steps, std::span<const float> values,
                     const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write cube file " + path.string());
  std::ostringstream header;
  header << "nlat " << grid.n_lat() << '\n'
         << "nlon " << grid.n_lon() << '\n'
         << "ntime " << steps << '\n';
  write_axis(header, "lat", grid.latitudes);
  write_axis(header, "lon", grid.longitudes);
  if (grid.land_mask) {
    header << "mask ";
    for (auto m : *grid.land_mask) header << (m ? '1' : '0');
    header << '\n';
  }
  header << '\n';
  const std::string h = header.str();
  out.write(h.data(), static_cast<std::streamsize>(h.size()));
  std::vector<std::uint32_t> raw(values.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    raw[i] = to_little_endian(std::bit_cast<std::uint32_t>(values[i]));
  }
  out.write(reinterpret_cast<const char*>(raw.data()),
            static_cast<std::streamsize>(raw.size() * 4));
  if (!out) throw Error("failed writing cube file " + path.string());
}

}  // namespace

std::pair<Grid, TimeCube> load_cube(const std::filesystem::path& path) {
  RawGridFile file = read_grid_file(path, false);
  TimeCube cube(file.grid, file.steps);
  cube.values = std::move(file.values);
  return {std::move(file.grid), std::move(cube)};
}

void save_cube(const Grid& grid, const TimeCube& cube, const std::filesystem::path& path) {
  grid.validate();
  if (cube.values.size() != grid.size() * cube.T) {
    throw InvalidInput("cube payload does not match grid");
  }
  write_grid_file(grid, cube.T, cube.values, path);
}

std::pair<Grid, std::vector<float>> load_map(const std::filesystem::path& path) {
  RawGridFile file = read_grid_file(path, true);
  return {std::move(file.grid), std::move(file.values)};
}

void save_map(const Grid& grid, std::span<const float> values, const std::filesystem::path& path) {
  grid.validate();
  if (values.size() != grid.size()) throw InvalidInput("map size does not match grid");
  write_grid_file(grid, 1, values, path);
}

Vec3 to_unit_sphere(double lat_deg, double lon_deg) {
  const double phi = lat_deg * kDegToRad;
  const double lambda = lon_deg * kDegToRad;
  return {std::cos(phi) * std::cos(lambda), std::cos(phi) * std::sin(lambda), std::sin(phi)};
}

UnitSphereCoords sphere_coords(const Grid& grid) {
  UnitSphereCoords c;
  c.xyz.reserve(grid.size());
  for (std::size_t p = 0; p < grid.size(); ++p) {
    c.xyz.push_back(to_unit_sphere(grid.latitude_of(p), grid.longitude_of(p)));
  }
  return c;
}

double chordal_distance(const Vec3& a, const Vec3& b) {
  const double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

std::vector<double> pixel_area_weights(const Grid& grid) {
  std::vector<double> w(grid.size());
  double total = 0.0;
  for (std::size_t p = 0; p < w.size(); ++p) {
    const double lat = grid.latitude_of(p);
    // cos(90 deg) is not exactly zero in floating point
    w[p] = std::abs(lat) == 90.0 ? 0.0 : std::max(0.0, std::cos(lat * kDegToRad));
    total += w[p];
  }
  if (total <= 0.0) throw InvalidInput("grid has zero total area weight");
  for (auto& v : w) v /= total;
  return w;
}

}  // namespace halfspec
