#include "halfspec/metrics.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>

#include "halfspec/error.hpp"

namespace halfspec {

namespace {

std::string shortest(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::optional<double> weighted_rms(std::span<const double> s, std::span<const double> w,
                                   const std::vector<std::uint8_t>* mask, std::uint8_t keep) {
  double num = 0.0, den = 0.0;
  bool any = false;
  for (std::size_t p = 0; p < s.size(); ++p) {
    if (mask && (*mask)[p] != keep) continue;
    any = true;
    num += w[p] * s[p] * s[p];
    den += w[p];
  }
  if (!any || !(den > 0.0)) return std::nullopt;
  return std::sqrt(num / den);
}

std::vector<float> to_floats(std::span<const std::optional<double>> v) {
  std::vector<float> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i)
    out[i] = v[i] ? static_cast<float>(*v[i]) : std::numeric_limits<float>::quiet_NaN();
  return out;
}

}  // namespace

FidelityReport rmspe(const TimeCube& original, const TimeCube& decompressed,
                     std::span<const double> weights,
                     std::optional<std::span<const std::uint8_t>> mask) {
  if (!(original.grid == decompressed.grid) || original.T != decompressed.T ||
      original.values.size() != decompressed.values.size())
    throw InvalidInput("cube shapes differ");
  const std::size_t n = original.n(), T = original.T;
  if (weights.size() != n) throw InvalidInput("weight count does not match the grid");
  FidelityReport r;
  r.rmspe_map.resize(n);
  for (std::size_t p = 0; p < n; ++p) {
    double acc = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
      const double d = static_cast<double>(original.at(p, t)) - static_cast<double>(decompressed.at(p, t));
      acc += d * d;
    }
    r.rmspe_map[p] = std::sqrt(acc / static_cast<double>(T));
  }
  r.rmspe_all = weighted_rms(r.rmspe_map, weights, nullptr, 0).value_or(0.0);
  std::vector<std::uint8_t> m;
  if (mask) {
    if (mask->size() != n) throw InvalidInput("mask size does not match the grid");
    m.assign(mask->begin(), mask->end());
  } else if (original.grid.land_mask) {
    m = *original.grid.land_mask;
  }
  if (!m.empty()) {
    r.rmspe_land = weighted_rms(r.rmspe_map, weights, &m, 1);
    r.rmspe_ocean = weighted_rms(r.rmspe_map, weights, &m, 0);
  }
  return r;
}

ContrastMaps contrast_variances(const TimeCube& cube) {
  if (cube.T < 2) throw InvalidInput("contrast variances need T >= 2");
  const Grid& g = cube.grid;
  const std::size_t n = cube.n(), T = cube.T, nlon = g.n_lon(), nlat = g.n_lat();
  ContrastMaps c;
  c.north_south.assign(n, std::nullopt);
  c.east_west.assign(n, 0.0);
  c.temporal.assign(n, 0.0);
  auto mean_sq = [&](std::size_t a, std::size_t b) {
    double acc = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
      const double d = static_cast<double>(cube.at(a, t)) - static_cast<double>(cube.at(b, t));
      acc += d * d;
    }
    return acc / static_cast<double>(T);
  };
  for (std::size_t p = 0; p < n; ++p) {
    const std::size_t i = p / nlon, j = p % nlon;
    if (i + 1 < nlat) c.north_south[p] = mean_sq(p, p + nlon);
    c.east_west[p] = mean_sq(p, i * nlon + (j + 1) % nlon);
    double acc = 0.0;
    for (std::size_t t = 0; t + 1 < T; ++t) {
      const double d = static_cast<double>(cube.at(p, t)) - static_cast<double>(cube.at(p, t + 1));
      acc += d * d;
    }
    c.temporal[p] = acc / static_cast<double>(T - 1);
  }
  return c;
}

std::vector<std::optional<double>> log_map(std::span<const std::optional<double>> values) {
  std::vector<std::optional<double>> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i)
    if (values[i] && *values[i] > 0.0) out[i] = std::log(*values[i]);
  return out;
}

std::vector<std::optional<double>> log_map(std::span<const double> values) {
  std::vector<std::optional<double>> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i)
    if (values[i] > 0.0) out[i] = std::log(values[i]);
  return out;
}

double map_correlation(std::span<const std::optional<double>> a, std::span<const std::optional<double>> b) {
  if (a.size() != b.size()) throw InvalidInput("map sizes differ");
  double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0, m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!a[i] || !b[i]) continue;
    m += 1;
    sa += *a[i];
    sb += *b[i];
  }
  if (m < 2) throw InvalidInput("fewer than two common map entries");
  const double ma = sa / m, mb = sb / m;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!a[i] || !b[i]) continue;
    const double da = *a[i] - ma, db = *b[i] - mb;
    saa += da * da;
    sbb += db * db;
    sab += da * db;
  }
  if (!(saa > 0.0) || !(sbb > 0.0)) throw InvalidInput("constant map has no correlation");
  return sab / std::sqrt(saa * sbb);
}

std::string report_csv(const FidelityReport& r) {
  std::string out = "metric,subset,value\n";
  auto row = [&](const std::string& metric, const std::string& subset, double v) {
    out += metric + "," + subset + "," + shortest(v) + "\n";
  };
  if (r.rmspe_land) row("rmspe", "land", *r.rmspe_land);
  if (r.rmspe_ocean) row("rmspe", "ocean", *r.rmspe_ocean);
  row("rmspe", "all", r.rmspe_all);
  if (r.original_contrasts && r.decompressed_contrasts) {
    const auto& o = *r.original_contrasts;
    const auto& d = *r.decompressed_contrasts;
    row("log_contrast_correlation", "north_south", map_correlation(log_map(o.north_south), log_map(d.north_south)));
    row("log_contrast_correlation", "east_west", map_correlation(log_map(o.east_west), log_map(d.east_west)));
    row("log_contrast_correlation", "temporal", map_correlation(log_map(o.temporal), log_map(d.temporal)));
  }
  if (r.runtime_seconds > 0.0) row("runtime_seconds", "all", r.runtime_seconds);
  return out;
}

void emit_report(const FidelityReport& r, const Grid& grid, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error("cannot create report directory " + dir.string() + ": " + ec.message());
  {
    std::ofstream out(dir / "summary.csv");
    if (!out) throw Error("cannot write " + (dir / "summary.csv").string());
    out << report_csv(r);
    if (!out) throw Error("failed writing " + (dir / "summary.csv").string());
  }
  std::vector<float> s(r.rmspe_map.begin(), r.rmspe_map.end());
  save_map(grid, s, dir / "rmspe.map");
  auto write_contrasts = [&](const ContrastMaps& c, const std::string& tag) {
    save_map(grid, to_floats(log_map(c.north_south)), dir / ("log_contrast_ns_" + tag + ".map"));
    save_map(grid, to_floats(log_map(c.east_west)), dir / ("log_contrast_ew_" + tag + ".map"));
    save_map(grid, to_floats(log_map(c.temporal)), dir / ("log_contrast_t_" + tag + ".map"));
  };
  if (r.original_contrasts) write_contrasts(*r.original_contrasts, "original");
  if (r.decompressed_contrasts) write_contrasts(*r.decompressed_contrasts, "decompressed");
}

}  // namespace halfspec
