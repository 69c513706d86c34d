#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "halfspec/archive.hpp"
#include "halfspec/error.hpp"
#include "halfspec/pipeline.hpp"
#include "halfspec/random.hpp"
#include "halfspec/spectral.hpp"
#include "halfspec/varint.hpp"
#include "halfspec/synth.hpp"
#include "oracles.hpp"

using namespace halfspec;

namespace {

TimeCube small_cube(std::uint64_t seed, std::size_t nlat = 8, std::size_t nlon = 16, std::size_t T = 16) {
  GeneratorSpec spec;
  spec.n_lat = nlat;
  spec.n_lon = nlon;
  spec.T = T;
  spec.seed = seed;
  spec.mean.mu0 = 12.0;
  spec.mean.mu1 = {4.0, -2.0};
  return generate(spec, 1);
}

CompressOptions options(double ratio, unsigned threads = 1) {
  CompressOptions o;
  o.selection.ratio = ratio;
  o.selection.M = 8;
  o.selection.J = 2;
  o.selection.threads = threads;
  o.seed = 99;
  return o;
}

// every coefficient stored
CompressedArchive saturated_archive(const TimeCube& cube) {
  CompressedArchive a = compress(cube, options(3.0));
  const FittedModel m = fit_model(cube, 1);
  a.indices.clear();
  a.values.clear();
  for (std::size_t k = 0; k < a.K(); ++k) {
    for (std::size_t p = 0; p < a.n(); ++p) {
      a.indices.push_back({k, p});
      const auto v = m.field.coeffs(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(k));
      a.values.push_back(static_cast<float>(v.real()));
      if (!is_real_frequency(k, a.T)) a.values.push_back(static_cast<float>(v.imag()));
    }
  }
  return a;
}

// all pixels stored at frequency k on top of the selection
CompressedArchive with_full_frequency(CompressedArchive a, const TimeCube& cube, std::size_t k_full) {
  const FittedModel m = fit_model(cube, 1);
  std::vector<IndexPair> idx;
  std::vector<float> vals;
  std::size_t pos = 0;
  auto push = [&](std::size_t k, std::size_t p, std::complex<double> v) {
    idx.push_back({k, p});
    vals.push_back(static_cast<float>(v.real()));
    if (!is_real_frequency(k, a.T)) vals.push_back(static_cast<float>(v.imag()));
  };
  for (const auto& pr : a.indices) {
    const bool real = is_real_frequency(pr.k, a.T);
    const std::complex<double> v(a.values[pos], real ? 0.0f : a.values[pos + 1]);
    pos += real ? 1 : 2;
    if (pr.k != k_full) push(pr.k, pr.pixel, v);
  }
  for (std::size_t p = 0; p < a.n(); ++p)
    push(k_full, p, m.field.coeffs(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(k_full)));
  std::vector<std::size_t> order(idx.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t n = a.n();
  std::sort(order.begin(), order.end(), [&](auto x, auto y) {
    return idx[x].k * n + idx[x].pixel < idx[y].k * n + idx[y].pixel;
  });
  // values are laid out per pair; rebuild in sorted order
  std::vector<std::size_t> offset(idx.size());
  for (std::size_t i = 0, o = 0; i < idx.size(); ++i) {
    offset[i] = o;
    o += is_real_frequency(idx[i].k, a.T) ? 1 : 2;
  }
  a.indices.clear();
  a.values.clear();
  for (auto i : order) {
    a.indices.push_back(idx[i]);
    a.values.push_back(vals[offset[i]]);
    if (!is_real_frequency(idx[i].k, a.T)) a.values.push_back(vals[offset[i] + 1]);
  }
  return a;
}

}  // namespace

TEST(Archive, RoundTripIsBitExact) {
  const auto cube = small_cube(1);
  const auto a = compress(cube, options(4.0));
  const auto bytes = serialize(a);
  const auto b = deserialize(bytes);
  EXPECT_EQ(a, b);
  EXPECT_EQ(serialize(b), bytes);
  const auto path = oracle::temp_dir() / "roundtrip.arc";
  write_archive(a, path);
  EXPECT_EQ(read_archive(path), a);
}

TEST(Archive, IrregularGridAndMaskRoundTrip) {
  auto cube = small_cube(2);
  cube.grid.latitudes[3] += 0.25;
  std::vector<std::uint8_t> mask(cube.n());
  for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = (i * 7) % 3 == 0;
  cube.grid.land_mask = mask;
  const auto a = compress(cube, options(3.0));
  const auto b = deserialize(serialize(a));
  EXPECT_EQ(b.grid, cube.grid);
  EXPECT_EQ(a, b);
}

TEST(Archive, FixedBytesMatchEmptyArchive) {
  const auto cube = small_cube(3);
  auto a = compress(cube, options(4.0));
  const auto full = serialize(a).size();
  const auto index = encode_indices(a.indices, a.n()).size();
  EXPECT_EQ(full, archive_fixed_bytes(cube.grid, cube.T) + index + 4 * a.values.size());
  a.indices.clear();
  a.values.clear();
  EXPECT_EQ(serialize(a).size(), archive_fixed_bytes(cube.grid, cube.T));
}

TEST(Archive, CorruptionIsDetected) {
  const auto bytes = serialize(compress(small_cube(4), options(4.0)));
  auto bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(deserialize(bad), FormatError);
  bad = bytes;
  bad[4] = 2;  // version
  EXPECT_THROW(deserialize(bad), FormatError);
  bad = bytes;
  bad[6] = 0x80;  // unknown flag
  EXPECT_THROW(deserialize(bad), FormatError);
  EXPECT_THROW(deserialize(std::span(bytes).first(bytes.size() - 1)), FormatError);
  EXPECT_THROW(deserialize(std::span(bytes).first(30)), FormatError);
  bad = bytes;
  bad.push_back(0);
  EXPECT_THROW(deserialize(bad), FormatError);
  EXPECT_THROW(read_archive(oracle::temp_dir() / "does_not_exist.arc"), Error);
}

TEST(Archive, ValidateRejectsInconsistentBlocks) {
  auto a = compress(small_cube(5), options(4.0));
  auto b = a;
  b.values.pop_back();
  EXPECT_THROW(b.validate(), FormatError);
  b = a;
  std::swap(b.indices[0], b.indices[1]);
  EXPECT_THROW(b.validate(), FormatError);
  b = a;
  b.kappa[3] = 0.0f;
  EXPECT_THROW(b.validate(), FormatError);
  b = a;
  b.theta.pop_back();
  EXPECT_THROW(serialize(b), FormatError);
}

TEST(Compress, ByteBoundAcrossRatios) {
  const auto cube = small_cube(6, 12, 24, 32);
  for (double ratio : {3.0, 5.0, 8.0}) {
    CompressReport report;
    const auto a = compress(cube, options(ratio), &report);
    const auto size = serialize(a).size();
    EXPECT_LE(size, static_cast<std::size_t>(std::floor(4.0 * cube.n() * cube.T / ratio))) << ratio;
    EXPECT_EQ(size, report.archive_bytes);
    EXPECT_EQ(report.budget.byte_limit, static_cast<std::size_t>(std::floor(4.0 * cube.n() * cube.T / ratio)));
  }
}

TEST(Compress, DeterministicAcrossRunsAndThreads) {
  const auto cube = small_cube(7);
  const auto a = serialize(compress(cube, options(4.0, 1)));
  EXPECT_EQ(serialize(compress(cube, options(4.0, 1))), a);
  EXPECT_EQ(serialize(compress(cube, options(4.0, 3))), a);
  auto dist = options(4.0, 1);
  dist.selection.variant = Variant::distributed;
  const auto d1 = serialize(compress(cube, dist));
  dist.selection.threads = 4;
  EXPECT_EQ(serialize(compress(cube, dist)), d1);
}

TEST(Compress, InfeasibleRatioThrows) {
  EXPECT_THROW(compress(small_cube(8), options(20.0)), BudgetError);
}

TEST(Decompress, SaturatedArchiveIsExactUpToFloat) {
  const auto cube = small_cube(9);
  const auto a = saturated_archive(cube);
  const auto rec = decompress(deserialize(serialize(a)), DecodeMode::mean, 0, 1);
  double range = 0.0, err = 0.0;
  const auto [lo, hi] = std::minmax_element(cube.values.begin(), cube.values.end());
  range = *hi - *lo;
  for (std::size_t i = 0; i < cube.values.size(); ++i)
    err = std::max(err, std::abs(static_cast<double>(cube.values[i]) - rec.values[i]));
  EXPECT_LT(err, 1e-5 * range);
  const auto sim = decompress(a, DecodeMode::simulate, 5, 1);
  EXPECT_EQ(sim.values, rec.values);
}

TEST(Decompress, StoredCoefficientsAreReinsertedVerbatim) {
  const auto cube = small_cube(10);
  const auto a = compress(cube, options(3.0));
  const auto model = decode_model(a);
  for (auto mode : {DecodeMode::mean, DecodeMode::simulate}) {
    const auto field = decompress_spectrum(a, mode, 3, 1);
    std::size_t pos = 0;
    const double rootT = std::sqrt(static_cast<double>(a.T));
    for (const auto& pr : a.indices) {
      const bool real = is_real_frequency(pr.k, a.T);
      std::complex<double> v(a.values[pos], real ? 0.0f : a.values[pos + 1]);
      pos += real ? 1 : 2;
      if (pr.k == 0) v += rootT * model.mean.mu0;
      if (pr.k == 1) v += rootT * model.mean.mu1;
      EXPECT_EQ(field.coeffs(static_cast<Eigen::Index>(pr.pixel), static_cast<Eigen::Index>(pr.k)), v);
    }
  }
}

TEST(Decompress, MeanModeIsDeterministicAcrossThreads) {
  const auto a = compress(small_cube(11), options(3.0));
  const auto x = decompress(a, DecodeMode::mean, 0, 1);
  EXPECT_EQ(decompress(a, DecodeMode::mean, 0, 4).values, x.values);
  EXPECT_EQ(decompress(a, DecodeMode::mean, 12345, 1).values, x.values);
  const auto s = decompress(a, DecodeMode::simulate, 8, 1);
  EXPECT_EQ(decompress(a, DecodeMode::simulate, 8, 3).values, s.values);
}

TEST(Decompress, SimulationSeedsDifferExceptAtFullFrequencies) {
  const auto cube = small_cube(12);
  const auto a = with_full_frequency(compress(cube, options(3.0)), cube, 5);
  ASSERT_NO_THROW(a.validate());
  const auto f1 = decompress_spectrum(a, DecodeMode::simulate, 1, 1);
  const auto f2 = decompress_spectrum(a, DecodeMode::simulate, 2, 1);
  EXPECT_EQ(f1.coeffs.col(5), f2.coeffs.col(5));
  EXPECT_GT((f1.coeffs.col(6) - f2.coeffs.col(6)).norm(), 0.0);
  EXPECT_NE(inverse_dft_all(f1, a.T).values, inverse_dft_all(f2, a.T).values);
}

TEST(Emulate, MatchesDerivedSeedsAndSharesStoredValues) {
  const auto a = compress(small_cube(13), options(3.0));
  const auto runs = emulate(a, 3, 77, 1);
  ASSERT_EQ(runs.size(), 3u);
  for (std::size_t r = 0; r < 3; ++r)
    EXPECT_EQ(runs[r].values, decompress(a, DecodeMode::simulate, derive_seed(77, r), 1).values);
  EXPECT_NE(runs[0].values, runs[1].values);
  const auto s0 = decompress_spectrum(a, DecodeMode::simulate, derive_seed(77, 0), 1);
  const auto s1 = decompress_spectrum(a, DecodeMode::simulate, derive_seed(77, 1), 1);
  for (const auto& pr : a.indices) {
    const auto i = static_cast<Eigen::Index>(pr.pixel), k = static_cast<Eigen::Index>(pr.k);
    EXPECT_EQ(s0.coeffs(i, k), s1.coeffs(i, k));
  }
}

TEST(Emulate, EnsembleMeanApproachesConditionalMean) {
  const auto a = compress(small_cube(14, 6, 12, 16), options(2.0));
  const auto mean = decompress_spectrum(a, DecodeMode::mean, 0, 1);
  const Eigen::Index n = mean.coeffs.rows(), K = mean.coeffs.cols();
  constexpr int R = 400;
  Eigen::MatrixXcd sum = Eigen::MatrixXcd::Zero(n, K);
  Eigen::MatrixXd sumsq = Eigen::MatrixXd::Zero(n, K);
  for (int r = 0; r < R; ++r) {
    const auto s = decompress_spectrum(a, DecodeMode::simulate, derive_seed(5, r), 1);
    const Eigen::MatrixXcd d = s.coeffs - mean.coeffs;
    sum += d;
    sumsq += d.cwiseAbs2();
  }
  // sum over coefficients of |ensemble mean - mean|^2 / (var / R) ~ chi-square
  double stat = 0.0;
  int terms = 0;
  for (Eigen::Index k = 0; k < K; ++k) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double var = sumsq(i, k) / R;
      if (var < 1e-20) continue;
      stat += std::norm(sum(i, k) / double(R)) / (var / R);
      ++terms;
    }
  }
  ASSERT_GT(terms, 100);
  EXPECT_NEAR(stat / terms, 1.0, 0.15);
}
