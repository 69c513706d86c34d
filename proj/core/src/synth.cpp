#include "halfspec/synth.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>

#include "halfspec/error.hpp"
#include "halfspec/parallel.hpp"
#include "halfspec/random.hpp"
#include "halfspec/spde.hpp"
#include "halfspec/spectral.hpp"

namespace halfspec {

void GeneratorSpec::validate() const {
  if (n_lat < 2 || n_lon < 3) throw InvalidInput("generator grid needs nlat >= 2 and nlon >= 3");
  if (poles && n_lat < 3) throw InvalidInput("a grid with poles needs nlat >= 3");
  if (T < 5) throw InvalidInput("generator needs ntime >= 5");
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw InvalidInput("sigma must be nonnegative");
  if (!(std::abs(ar) < 1.0)) throw InvalidInput("ar must lie in (-1, 1)");
  if (!(kappa_low > 0.0) || !(kappa_high > 0.0)) throw InvalidInput("kappa must be positive");
  for (double a : theta_amplitude)
    if (!std::isfinite(a)) throw InvalidInput("theta amplitudes must be finite");
}

Grid GeneratorSpec::grid() const {
  return poles ? Grid::global_with_poles(n_lat, n_lon) : Grid::global_cell_centred(n_lat, n_lon);
}

namespace {

// Unnormalised shape curves behind u1..u3: level, cos w, cos 2w.
double raw_curve(std::size_t j, double w) { return j == 0 ? 1.0 : std::cos(static_cast<double>(j) * w); }

double raw_norm(std::size_t j, std::size_t T) {
  double norm = 0.0;
  for (std::size_t k = 0; k < half_spectrum_size(T); ++k) {
    const double v = raw_curve(j, 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(T));
    norm += v * v;
  }
  return std::sqrt(norm);
}

}  // namespace

SpectralBasis GeneratorSpec::basis() const {
  const std::size_t K = half_spectrum_size(T);
  SpectralBasis b;
  b.u0.resize(K);
  for (std::size_t k = 0; k < K; ++k) {
    const double w = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(T);
    b.u0[k] = -std::log(1.0 - 2.0 * ar * std::cos(w) + ar * ar) + std::log(1.0 - ar * ar);
  }
  for (std::size_t j = 0; j < 3; ++j) {
    const double norm = raw_norm(j, T);
    b.u[j].resize(K);
    for (std::size_t k = 0; k < K; ++k) {
      const double w = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(T);
      b.u[j][k] = raw_curve(j, w) / norm;
    }
  }
  return b;
}

ThetaField GeneratorSpec::theta(const Grid& g) const {
  ThetaField out;
  out.theta.resize(g.size());
  constexpr double deg = std::numbers::pi / 180.0;
  // theta_amplitude is the peak contribution of each term to log f
  const std::array<double, 3> scale{theta_amplitude[0] * raw_norm(0, T), theta_amplitude[1] * raw_norm(1, T),
                                    theta_amplitude[2] * raw_norm(2, T)};
  for (std::size_t p = 0; p < g.size(); ++p) {
    const double lat = g.latitude_of(p) * deg, lon = g.longitude_of(p) * deg;
    out.theta[p] = {scale[0] * (0.6 * std::sin(lat) + 0.4 * std::cos(lat) * std::cos(lon)),
                    scale[1] * std::cos(lat) * std::cos(lon),
                    scale[2] * std::cos(lat) * std::sin(2.0 * lon)};
  }
  return out;
}

std::vector<double> GeneratorSpec::kappa() const {
  const std::size_t K = half_spectrum_size(T);
  std::vector<double> out(K);
  for (std::size_t k = 0; k < K; ++k) {
    const double s = static_cast<double>(k) / static_cast<double>(K - 1);
    out[k] = kappa_low * std::pow(kappa_high / kappa_low, s);
  }
  return out;
}

FittedSpectra GeneratorSpec::spectra(const Grid& g) const {
  FittedSpectra f = fitted_spectra(theta(g), basis());
  f.values *= sigma * sigma;
  return f;
}

GeneratorSpec parse_generator_spec(const std::string& text) {
  GeneratorSpec s;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream ls(line);
    std::string key;
    if (!(ls >> key)) continue;
    auto fail = [&](const std::string& why) {
      throw FormatError("spec line " + std::to_string(line_no) + ": " + why);
    };
    auto read = [&](auto& v) {
      if (!(ls >> v)) fail("bad value for " + key);
    };
    if (key == "nlat") read(s.n_lat);
    else if (key == "nlon") read(s.n_lon);
    else if (key == "ntime") read(s.T);
    else if (key == "poles") read(s.poles);
    else if (key == "mu0") read(s.mean.mu0);
    else if (key == "mu1") {
      double re = 0, im = 0;
      read(re);
      read(im);
      s.mean.mu1 = {re, im};
    } else if (key == "sigma") read(s.sigma);
    else if (key == "ar") read(s.ar);
    else if (key == "theta_amp") {
      for (auto& a : s.theta_amplitude) read(a);
    } else if (key == "kappa_low") read(s.kappa_low);
    else if (key == "kappa_high") read(s.kappa_high);
    else if (key == "seed") read(s.seed);
    else fail("unknown key '" + key + "'");
    std::string extra;
    if (ls >> extra) fail("trailing text after " + key);
  }
  s.validate();
  return s;
}

GeneratorSpec load_generator_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_generator_spec(buf.str());
}

std::string format_generator_spec(const GeneratorSpec& s) {
  std::ostringstream out;
  out << std::setprecision(17);
  out << "nlat " << s.n_lat << "\nnlon " << s.n_lon << "\nntime " << s.T << "\npoles " << s.poles
      << "\nmu0 " << s.mean.mu0 << "\nmu1 " << s.mean.mu1.real() << ' ' << s.mean.mu1.imag()
      << "\nsigma " << s.sigma << "\nar " << s.ar << "\ntheta_amp " << s.theta_amplitude[0] << ' '
      << s.theta_amplitude[1] << ' ' << s.theta_amplitude[2] << "\nkappa_low " << s.kappa_low
      << "\nkappa_high " << s.kappa_high << "\nseed " << s.seed << '\n';
  return out.str();
}

TimeCube generate(const GeneratorSpec& spec, unsigned threads) {
  spec.validate();
  const Grid g = spec.grid();
  const std::size_t n = g.size(), T = spec.T, K = half_spectrum_size(T);
  const FittedSpectra f = spec.spectra(g);
  const auto kappa = spec.kappa();
  const SphereMesh mesh = build_mesh(g);
  const SpdeOperator op(mesh);
  const auto nv = static_cast<Eigen::Index>(mesh.n_vertices());
  const auto symbolic = CholeskyFactor(op.precision(kappa[0]).Q).symbolic();

  SpectralField field;
  field.grid = g;
  field.T = T;
  field.coeffs.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(K));
  parallel_for(K, threads, [&](std::size_t k) {
    Rng rng(derive_seed(spec.seed, k));
    const bool real = is_real_frequency(k, T);
    const FullPrecisionFactor factor(op, kappa[k]);
    Eigen::MatrixXd noise(nv, 2);
    if (real) {
      const auto e = standard_normal(rng, static_cast<std::size_t>(nv));
      for (Eigen::Index i = 0; i < nv; ++i) noise(i, 0) = e[static_cast<std::size_t>(i)];
      noise.col(1).setZero();
    } else {
      const auto e = complex_standard_normal(rng, static_cast<std::size_t>(nv));
      for (Eigen::Index i = 0; i < nv; ++i) {
        noise(i, 0) = e[static_cast<std::size_t>(i)].real();
        noise(i, 1) = e[static_cast<std::size_t>(i)].imag();
      }
    }
    Eigen::MatrixXd z = factor.sample(noise);
    // unit marginal variance on the discrete mesh
    const Eigen::VectorXd var = CholeskyFactor(symbolic, op.precision(kappa[k]).Q).inverse_diagonal();
    z.array().colwise() /= var.array().sqrt();
    const auto col = static_cast<Eigen::Index>(k);
    for (std::size_t p = 0; p < n; ++p) {
      const auto v = static_cast<Eigen::Index>(mesh.vertex_of_pixel[p]);
      const auto ip = static_cast<Eigen::Index>(p);
      field.coeffs(ip, col) = std::complex<double>(z(v, 0), real ? 0.0 : z(v, 1)) * std::sqrt(f.values(ip, col));
    }
  });
  add_mean(field, spec.mean);
  return inverse_dft_all(field, T);
}

}  // namespace halfspec
