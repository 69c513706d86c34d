#include "halfspec/archive.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "halfspec/error.hpp"
#include "halfspec/spectral.hpp"

namespace halfspec {

namespace {

constexpr char kMagic[4] = {'H', 'S', 'G', 'C'};
constexpr std::size_t kHeaderBytes = 4 + 2 + 2 + 4 * 3 + 4 + 4 + 8 * 3;

class Writer {
 public:
  explicit Writer(std::vector<std::uint8_t>& out) : out_(out) {}
  void u8(std::uint8_t v) { out_.push_back(v); }
  template <typename U>
  void uint(U v) {
    for (std::size_t i = 0; i < sizeof(U); ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float v) { uint(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { uint(std::bit_cast<std::uint64_t>(v)); }
  void bytes(std::span<const std::uint8_t> b) { out_.insert(out_.end(), b.begin(), b.end()); }

 private:
  std::vector<std::uint8_t>& out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}
  std::span<const std::uint8_t> take(std::size_t count) {
    if (count > in_.size() - pos_) throw FormatError("archive truncated");
    auto s = in_.subspan(pos_, count);
    pos_ += count;
    return s;
  }
  template <typename U>
  U uint() {
    const auto b = take(sizeof(U));
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(static_cast<U>(b[i]) << (8 * i));
    return v;
  }
  std::uint8_t u8() { return take(1)[0]; }
  float f32() { return std::bit_cast<float>(uint<std::uint32_t>()); }
  double f64() { return std::bit_cast<double>(uint<std::uint64_t>()); }
  std::size_t remaining() const { return in_.size() - pos_; }

 private:
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

// True when lat0 + i * dlat reproduces every coordinate bit for bit.
bool is_uniform(const std::vector<double>& v) {
  if (v.size() < 2) return false;
  const double d = v[1] - v[0];
  for (std::size_t i = 0; i < v.size(); ++i)
    if (v[0] + static_cast<double>(i) * d != v[i]) return false;
  return true;
}

std::uint16_t grid_flags(const Grid& g) {
  std::uint16_t f = 0;
  if (g.land_mask) f |= kFlagLandMask;
  if (is_uniform(g.latitudes)) f |= kFlagUniformLat;
  if (is_uniform(g.longitudes)) f |= kFlagUniformLon;
  return f;
}

std::size_t grid_bytes(const Grid& g) {
  const auto f = grid_flags(g);
  std::size_t b = 8 * ((f & kFlagUniformLat) ? 2 : g.n_lat()) + 8 * ((f & kFlagUniformLon) ? 2 : g.n_lon());
  if (f & kFlagLandMask) b += (g.size() + 7) / 8;
  return b;
}

void write_axis(Writer& w, const std::vector<double>& v, bool uniform) {
  if (uniform) {
    w.f64(v[0]);
    w.f64(v[1] - v[0]);
  } else {
    for (double x : v) w.f64(x);
  }
}

std::vector<double> read_axis(Reader& r, std::size_t count, bool uniform) {
  std::vector<double> v(count);
  if (uniform) {
    const double x0 = r.f64(), d = r.f64();
    for (std::size_t i = 0; i < count; ++i) v[i] = x0 + static_cast<double>(i) * d;
  } else {
    for (auto& x : v) x = r.f64();
  }
  return v;
}

}  // namespace

std::size_t CompressedArchive::expected_value_count() const {
  std::size_t c = 0;
  for (const auto& p : indices) c += is_real_frequency(p.k, T) ? 1 : 2;
  return c;
}

void CompressedArchive::validate() const {
  if (version != kArchiveVersion) throw FormatError("unsupported archive version " + std::to_string(version));
  try {
    grid.validate();
  } catch (const InvalidInput& e) {
    throw FormatError(std::string("archive grid: ") + e.what());
  }
  if (T < 4) throw FormatError("archive T must be at least 4");
  const std::size_t n = this->n(), K = this->K();
  if (theta.size() != 3 * n) throw FormatError("theta block size mismatch");
  for (const auto& u : basis)
    if (u.size() != K) throw FormatError("basis block size mismatch");
  if (kappa.size() != K) throw FormatError("kappa block size mismatch");
  for (float k : kappa)
    if (!(k > 0.0f) || !std::isfinite(k)) throw FormatError("kappa must be positive and finite");
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i].k >= K || indices[i].pixel >= n) throw FormatError("index out of range");
    if (i > 0 && indices[i].k * n + indices[i].pixel <= indices[i - 1].k * n + indices[i - 1].pixel)
      throw FormatError("index keys not strictly increasing");
  }
  if (values.size() != expected_value_count()) throw FormatError("value count does not match the index");
}

std::size_t archive_fixed_bytes(const Grid& grid, std::size_t T) {
  const std::size_t K = half_spectrum_size(T);
  return kHeaderBytes + grid_bytes(grid) + 4 * (3 + 3 * grid.size() + 5 * K);
}

std::vector<std::uint8_t> serialize(const CompressedArchive& a) {
  a.validate();
  const auto index = encode_indices(a.indices, a.n());
  std::vector<std::uint8_t> out;
  out.reserve(archive_fixed_bytes(a.grid, a.T) + index.size() + 4 * a.values.size());
  Writer w(out);
  for (char c : kMagic) w.u8(static_cast<std::uint8_t>(c));
  const auto flags = grid_flags(a.grid);
  w.uint<std::uint16_t>(a.version);
  w.uint<std::uint16_t>(flags);
  w.uint<std::uint32_t>(static_cast<std::uint32_t>(a.grid.n_lat()));
  w.uint<std::uint32_t>(static_cast<std::uint32_t>(a.grid.n_lon()));
  w.uint<std::uint32_t>(static_cast<std::uint32_t>(a.T));
  w.f32(a.ratio);
  w.u8(a.variant);
  for (int i = 0; i < 3; ++i) w.u8(0);
  w.uint<std::uint64_t>(a.seed);
  w.uint<std::uint64_t>(a.indices.size());
  w.uint<std::uint64_t>(index.size());

  write_axis(w, a.grid.latitudes, flags & kFlagUniformLat);
  write_axis(w, a.grid.longitudes, flags & kFlagUniformLon);
  if (flags & kFlagLandMask) {
    std::vector<std::uint8_t> bits((a.n() + 7) / 8, 0);
    for (std::size_t i = 0; i < a.n(); ++i)
      if ((*a.grid.land_mask)[i]) bits[i / 8] |= static_cast<std::uint8_t>(1u << (i % 8));
    w.bytes(bits);
  }

  w.f32(a.mu0);
  w.f32(a.mu1.real());
  w.f32(a.mu1.imag());
  for (float v : a.theta) w.f32(v);
  for (const auto& u : a.basis)
    for (float v : u) w.f32(v);
  for (float v : a.kappa) w.f32(v);
  w.bytes(index);
  for (float v : a.values) w.f32(v);
  return out;
}

CompressedArchive deserialize(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  const auto magic = r.take(4);
  if (std::memcmp(magic.data(), kMagic, 4) != 0) throw FormatError("not an archive (bad magic)");
  CompressedArchive a;
  a.version = r.uint<std::uint16_t>();
  if (a.version != kArchiveVersion) throw FormatError("unsupported archive version " + std::to_string(a.version));
  const auto flags = r.uint<std::uint16_t>();
  if (flags & ~(kFlagLandMask | kFlagUniformLat | kFlagUniformLon)) throw FormatError("unknown archive flags");
  const std::size_t n_lat = r.uint<std::uint32_t>();
  const std::size_t n_lon = r.uint<std::uint32_t>();
  a.T = r.uint<std::uint32_t>();
  a.ratio = r.f32();
  a.variant = r.u8();
  r.take(3);
  a.seed = r.uint<std::uint64_t>();
  const auto count = r.uint<std::uint64_t>();
  const auto index_bytes = r.uint<std::uint64_t>();
  if (n_lat == 0 || n_lon == 0 || a.T < 4) throw FormatError("archive dimensions out of range");
  // every stored number takes at least one byte
  if (n_lat * n_lon > bytes.size() || a.T > bytes.size() || count > bytes.size() || index_bytes > bytes.size())
    throw FormatError("archive dimensions exceed the file size");

  a.grid.latitudes = read_axis(r, n_lat, flags & kFlagUniformLat);
  a.grid.longitudes = read_axis(r, n_lon, flags & kFlagUniformLon);
  const std::size_t n = n_lat * n_lon;
  if (flags & kFlagLandMask) {
    const auto bits = r.take((n + 7) / 8);
    std::vector<std::uint8_t> mask(n);
    for (std::size_t i = 0; i < n; ++i) mask[i] = (bits[i / 8] >> (i % 8)) & 1u;
    a.grid.land_mask = std::move(mask);
  }
  const std::size_t K = a.K();
  a.mu0 = r.f32();
  const float re = r.f32(), im = r.f32();
  a.mu1 = {re, im};
  a.theta.resize(3 * n);
  for (auto& v : a.theta) v = r.f32();
  for (auto& u : a.basis) {
    u.resize(K);
    for (auto& v : u) v = r.f32();
  }
  a.kappa.resize(K);
  for (auto& v : a.kappa) v = r.f32();
  a.indices = decode_indices(r.take(index_bytes), count, n);
  for (const auto& p : a.indices)
    if (p.k >= K) throw FormatError("index frequency out of range");
  const std::size_t nvalues = a.expected_value_count();
  if (r.remaining() != 4 * nvalues) throw FormatError("value block size mismatch");
  a.values.resize(nvalues);
  for (auto& v : a.values) v = r.f32();
  a.validate();
  return a;
}

void write_archive(const CompressedArchive& archive, const std::filesystem::path& path) {
  const auto bytes = serialize(archive);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("failed writing " + path.string());
}

CompressedArchive read_archive(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize(bytes);
}

}  // namespace halfspec
