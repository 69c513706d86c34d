#include "halfspec/conditional.hpp"

#include <algorithm>
#include <boost/math/tools/minima.hpp>
#include <cmath>
#include <limits>
#include <numeric>
#include <utility>

#include "halfspec/error.hpp"

namespace halfspec {

ScaledField scale_field(const SpectralField& field, const FittedSpectra& spectra) {
  if (spectra.values.rows() != field.coeffs.rows() || spectra.values.cols() != field.coeffs.cols())
    throw InvalidInput("scale_field: spectra shape does not match the field");
  if (!(spectra.values.array() > 0.0).all())
    throw InvalidInput("scale_field: spectra must be strictly positive");
  ScaledField out;
  out.Z = field.coeffs.array() / spectra.values.array().sqrt().cast<std::complex<double>>();
  return out;
}

SpectralField unscale_field(const ScaledField& scaled, const FittedSpectra& spectra,
                            const Grid& grid, std::size_t T) {
  if (spectra.values.rows() != scaled.Z.rows() || spectra.values.cols() != scaled.Z.cols())
    throw InvalidInput("unscale_field: spectra shape does not match the field");
  SpectralField out;
  out.grid = grid;
  out.T = T;
  out.coeffs = scaled.Z.array() * spectra.values.array().sqrt().cast<std::complex<double>>();
  return out;
}

FrequencyPartition FrequencyPartition::from_stored(std::size_t k, std::size_t n,
                                                   std::vector<std::size_t> stored) {
  std::sort(stored.begin(), stored.end());
  if (std::adjacent_find(stored.begin(), stored.end()) != stored.end())
    throw InvalidInput("partition: duplicate stored pixel");
  if (!stored.empty() && stored.back() >= n) throw InvalidInput("partition: pixel out of range");
  FrequencyPartition p;
  p.k = k;
  p.unstored.reserve(n - stored.size());
  std::size_t s = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (s < stored.size() && stored[s] == i)
      ++s;
    else
      p.unstored.push_back(i);
  }
  p.stored = std::move(stored);
  return p;
}

void FrequencyPartition::validate(std::size_t n) const {
  if (stored.size() + unstored.size() != n) throw InvalidInput("partition: sizes do not cover the grid");
  std::vector<std::uint8_t> seen(n, 0);
  auto mark = [&](const std::vector<std::size_t>& v) {
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (v[i] >= n) throw InvalidInput("partition: pixel out of range");
      if (i > 0 && v[i] <= v[i - 1]) throw InvalidInput("partition: list not strictly ascending");
      if (seen[v[i]]++) throw InvalidInput("partition: stored and unstored overlap");
    }
  };
  mark(stored);
  mark(unstored);
}

CoherenceParams CoherenceParams::with_pinned(std::size_t K, double initial,
                                             std::size_t pinned_count, double pinned_value) {
  if (!(initial > 0.0) || !(pinned_value > 0.0)) throw InvalidInput("kappa must be positive");
  CoherenceParams p;
  p.kappa.assign(K, initial);
  p.fixed_mask.assign(K, 0);
  for (std::size_t k = 0; k < std::min(K, pinned_count); ++k) {
    p.kappa[k] = pinned_value;
    p.fixed_mask[k] = 1;
  }
  return p;
}

// ---------------------------------------------------------------------------

PrecisionBlocks::PrecisionBlocks(const SparseMatrix& pattern, std::vector<std::size_t> stored)
    : pattern_nnz_(pattern.nonZeros()), stored_(std::move(stored)) {
  const auto n = static_cast<std::size_t>(pattern.rows());
  if (pattern.cols() != pattern.rows()) throw InvalidInput("PrecisionBlocks: matrix not square");
  auto part = FrequencyPartition::from_stored(0, n, stored_);
  stored_ = std::move(part.stored);
  unstored_ = std::move(part.unstored);

  std::vector<int> local(n, -1);
  std::vector<std::uint8_t> is_stored(n, 0);
  for (std::size_t i = 0; i < stored_.size(); ++i) {
    local[stored_[i]] = static_cast<int>(i);
    is_stored[stored_[i]] = 1;
  }
  for (std::size_t i = 0; i < unstored_.size(); ++i) local[unstored_[i]] = static_cast<int>(i);

  const int nu = static_cast<int>(unstored_.size());
  const int ns = static_cast<int>(stored_.size());
  const int* op = pattern.outerIndexPtr();
  const int* ii = pattern.innerIndexPtr();

  // Columns of the local blocks follow ascending original index, so the row
  // indices inside each column stay sorted.
  std::vector<int> p22(nu + 1, 0), p21(ns + 1, 0), i22, i21;
  for (std::size_t j = 0; j < n; ++j) {
    for (int q = op[j]; q < op[j + 1]; ++q) {
      const auto i = static_cast<std::size_t>(ii[q]);
      if (is_stored[i]) continue;
      if (is_stored[j]) {
        i21.push_back(local[i]);
        src21_.push_back(q);
      } else {
        i22.push_back(local[i]);
        src22_.push_back(q);
      }
    }
    if (is_stored[j])
      p21[local[j] + 1] = static_cast<int>(i21.size());
    else
      p22[local[j] + 1] = static_cast<int>(i22.size());
  }

  auto build = [](int rows, int cols, const std::vector<int>& p, const std::vector<int>& idx) {
    SparseMatrix m(rows, cols);
    m.resizeNonZeros(static_cast<Eigen::Index>(idx.size()));
    std::copy(p.begin(), p.end(), m.outerIndexPtr());
    std::copy(idx.begin(), idx.end(), m.innerIndexPtr());
    std::fill(m.valuePtr(), m.valuePtr() + idx.size(), 0.0);
    return m;
  };
  q22_ = build(nu, nu, p22, i22);
  q21_ = build(nu, ns, p21, i21);
}

void PrecisionBlocks::gather(const SparseMatrix& full) {
  if (full.nonZeros() != pattern_nnz_) throw InvalidInput("PrecisionBlocks: pattern mismatch");
  const double* v = full.valuePtr();
  double* d22 = q22_.valuePtr();
  for (std::size_t q = 0; q < src22_.size(); ++q) d22[q] = v[src22_[q]];
  double* d21 = q21_.valuePtr();
  for (std::size_t q = 0; q < src21_.size(); ++q) d21[q] = v[src21_[q]];
}

namespace {

Eigen::VectorXcd solve_complex(const CholeskyFactor& f, const Eigen::VectorXcd& b) {
  Eigen::MatrixXd rhs(b.size(), 2);
  rhs.col(0) = b.real();
  rhs.col(1) = b.imag();
  const Eigen::MatrixXd x = f.solve(rhs);
  Eigen::VectorXcd out(b.size());
  out.real() = x.col(0);
  out.imag() = x.col(1);
  return out;
}

// -Q22^{-1} Q21 z1
Eigen::VectorXcd kriging(const CholeskyFactor& f, const SparseMatrix& q21, const Eigen::VectorXcd& z1) {
  if (q21.rows() == 0) return {};
  if (q21.cols() == 0) return Eigen::VectorXcd::Zero(q21.rows());
  Eigen::VectorXcd rhs(q21.rows());
  rhs.real() = -(q21 * z1.real());
  rhs.imag() = -(q21 * z1.imag());
  return solve_complex(f, rhs);
}

Eigen::VectorXcd draw_residual(const CholeskyFactor& f, Rng& rng, bool real_frequency) {
  const auto m = static_cast<std::size_t>(f.size());
  Eigen::VectorXcd e(m);
  if (real_frequency) {
    const auto eps = standard_normal(rng, m);
    e.real() = f.sample(Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(eps.data(), static_cast<Eigen::Index>(m))));
    e.imag().setZero();
  } else {
    const auto eps = complex_standard_normal(rng, m);
    Eigen::MatrixXd noise(m, 2);
    for (std::size_t i = 0; i < m; ++i) {
      noise(i, 0) = eps[i].real();
      noise(i, 1) = eps[i].imag();
    }
    const Eigen::MatrixXd s = f.sample(noise);
    e.real() = s.col(0);
    e.imag() = s.col(1);
  }
  return e;
}

double quadratic(const SparseMatrix& q, const Eigen::VectorXcd& r, bool real_frequency) {
  const Eigen::VectorXd re = r.real();
  double v = re.dot(q * re);
  if (!real_frequency) {
    const Eigen::VectorXd im = r.imag();
    v += im.dot(q * im);
  }
  return v;
}

}  // namespace

// ---------------------------------------------------------------------------

namespace {

std::vector<std::size_t> stored_vertices(const SphereMesh& mesh, std::span<const std::size_t> pixels) {
  std::vector<std::size_t> v;
  v.reserve(pixels.size());
  for (auto p : pixels) {
    if (p >= mesh.n_pixels()) throw InvalidInput("stored pixel out of range");
    v.push_back(mesh.vertex_of_pixel[p]);
  }
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

}  // namespace

ConditionalSystem::ConditionalSystem(const SpdeOperator& op, std::span<const std::size_t> stored_pixels)
    : op_(&op),
      pixel_stored_(op.mesh().n_pixels(), 0),
      blocks_(op.pattern(), stored_vertices(op.mesh(), stored_pixels)) {
  for (auto p : stored_pixels) {
    if (pixel_stored_[p]) throw InvalidInput("duplicate stored pixel");
    pixel_stored_[p] = 1;
  }
}

void ConditionalSystem::set_kappa(double kappa) {
  if (!(kappa > 0.0) || !std::isfinite(kappa)) throw InvalidInput("kappa must be positive");
  if (unconditional()) {
    full_.reset();
    full_.emplace(*op_, kappa);
    kappa_ = kappa;
    return;
  }
  blocks_.gather(op_->precision(kappa).Q);
  kappa_ = kappa;
  if (blocks_.unstored().empty()) return;
  if (!symbolic_) {
    factor_.reset();
    factor_.emplace(blocks_.q22());
    symbolic_ = factor_->symbolic();
  } else if (factor_) {
    factor_->refactorize(blocks_.q22());
  } else {
    factor_.emplace(symbolic_, blocks_.q22());
  }
}

const CholeskyFactor& ConditionalSystem::factor() const {
  if (!factor_) throw InvalidInput("ConditionalSystem: no Q22 factor available");
  return *factor_;
}

Eigen::VectorXcd ConditionalSystem::vertex_values(const Eigen::VectorXcd& z) const {
  const auto& mesh = op_->mesh();
  if (static_cast<std::size_t>(z.size()) != mesh.n_pixels())
    throw InvalidInput("coefficient row has the wrong length");
  const auto nv = mesh.n_vertices();
  Eigen::VectorXcd sum = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(nv));
  std::vector<int> count(nv, 0);
  // stored pixels feed stored vertices; unstored vertices average all pixels
  std::vector<std::uint8_t> vstored(nv, 0);
  for (auto v : blocks_.stored()) vstored[v] = 1;
  for (std::size_t p = 0; p < mesh.n_pixels(); ++p) {
    const auto v = mesh.vertex_of_pixel[p];
    if (vstored[v] && !pixel_stored_[p]) continue;
    sum[v] += z[p];
    ++count[v];
  }
  for (std::size_t v = 0; v < nv; ++v)
    if (count[v] > 0) sum[v] /= static_cast<double>(count[v]);
  return sum;
}

Eigen::VectorXcd ConditionalSystem::predict_unstored(const Eigen::VectorXcd& vz) const {
  if (blocks_.unstored().empty()) return {};
  if (unconditional()) return Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(blocks_.unstored().size()));
  if (!factor_) throw InvalidInput("ConditionalSystem: set_kappa has not been called");
  Eigen::VectorXcd z1(static_cast<Eigen::Index>(blocks_.stored().size()));
  for (std::size_t i = 0; i < blocks_.stored().size(); ++i) z1[i] = vz[blocks_.stored()[i]];
  return kriging(*factor_, blocks_.q21(), z1);
}

Eigen::VectorXcd ConditionalSystem::conditional_mean(const Eigen::VectorXcd& z) const {
  const Eigen::VectorXcd vz = vertex_values(z);
  Eigen::VectorXcd vpred = vz;
  const Eigen::VectorXcd hat = predict_unstored(vz);
  for (std::size_t i = 0; i < blocks_.unstored().size(); ++i) vpred[blocks_.unstored()[i]] = hat[i];
  const auto& mesh = op_->mesh();
  Eigen::VectorXcd out(z.size());
  for (std::size_t p = 0; p < mesh.n_pixels(); ++p)
    out[p] = pixel_stored_[p] ? z[p] : vpred[mesh.vertex_of_pixel[p]];
  return out;
}

Eigen::VectorXcd ConditionalSystem::simulate(const Eigen::VectorXcd& z, Rng& rng,
                                             bool real_frequency) const {
  const Eigen::VectorXcd vz = vertex_values(z);
  Eigen::VectorXcd vpred = vz;
  if (unconditional()) {
    if (!full_) throw InvalidInput("ConditionalSystem: set_kappa has not been called");
    const auto m = full_->size();
    if (real_frequency) {
      const auto eps = standard_normal(rng, m);
      vpred.real() = full_->sample(Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(eps.data(), static_cast<Eigen::Index>(m))));
      vpred.imag().setZero();
    } else {
      const auto eps = complex_standard_normal(rng, m);
      Eigen::MatrixXd noise(m, 2);
      for (std::size_t i = 0; i < m; ++i) noise.row(static_cast<Eigen::Index>(i)) << eps[i].real(), eps[i].imag();
      const Eigen::MatrixXd s = full_->sample(noise);
      vpred.real() = s.col(0);
      vpred.imag() = s.col(1);
    }
  } else if (!blocks_.unstored().empty()) {
    const Eigen::VectorXcd draw =
        conditional_simulation(*factor_, predict_unstored(vz), rng, real_frequency);
    for (std::size_t i = 0; i < blocks_.unstored().size(); ++i) vpred[blocks_.unstored()[i]] = draw[i];
  }
  const auto& mesh = op_->mesh();
  Eigen::VectorXcd out(z.size());
  for (std::size_t p = 0; p < mesh.n_pixels(); ++p)
    out[p] = pixel_stored_[p] ? z[p] : vpred[mesh.vertex_of_pixel[p]];
  return out;
}

double ConditionalSystem::loglik(const Eigen::VectorXcd& z, const Eigen::VectorXd& log_f,
                                 bool real_frequency) const {
  const auto& unstored = blocks_.unstored();
  if (unstored.empty()) return 0.0;
  const auto& mesh = op_->mesh();
  if (static_cast<std::size_t>(log_f.size()) != mesh.n_pixels())
    throw InvalidInput("log spectrum row has the wrong length");
  Eigen::VectorXcd vz = vertex_values(z);
  if (real_frequency) vz.imag().setZero();
  const Eigen::VectorXcd hat = predict_unstored(vz);
  Eigen::VectorXcd r(static_cast<Eigen::Index>(unstored.size()));
  for (std::size_t i = 0; i < unstored.size(); ++i) r[i] = vz[unstored[i]] - hat[i];

  std::vector<std::uint8_t> vunstored(mesh.n_vertices(), 0);
  for (auto v : unstored) vunstored[v] = 1;
  double sum_log_f = 0.0;
  for (std::size_t p = 0; p < mesh.n_pixels(); ++p)
    if (vunstored[mesh.vertex_of_pixel[p]]) sum_log_f += log_f[p];

  if (unconditional()) {
    if (!full_) throw InvalidInput("ConditionalSystem: set_kappa has not been called");
    double quad = full_->quadratic(r.real());
    if (!real_frequency) quad += full_->quadratic(r.imag());
    return -0.5 * sum_log_f + 0.5 * full_->logdet() - 0.5 * quad;
  }
  return -0.5 * sum_log_f + 0.5 * factor_->logdet() - 0.5 * quadratic(blocks_.q22(), r, real_frequency);
}

// ---------------------------------------------------------------------------

Eigen::VectorXcd conditional_expectation(const SparsePrecision& q, const FrequencyPartition& part,
                                         const Eigen::VectorXcd& z1) {
  if (static_cast<std::size_t>(z1.size()) != part.stored.size())
    throw InvalidInput("conditional_expectation: |Z1| differs from the stored count");
  part.validate(static_cast<std::size_t>(q.Q.rows()));
  if (part.unstored.empty()) return {};
  if (part.stored.empty()) return Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(part.unstored.size()));
  PrecisionBlocks blocks(q.Q, part.stored);
  blocks.gather(q.Q);
  const CholeskyFactor f(blocks.q22());
  return kriging(f, blocks.q21(), z1);
}

Eigen::VectorXcd conditional_simulation(const CholeskyFactor& q22_factor,
                                        const Eigen::VectorXcd& zhat2, Rng& rng,
                                        bool real_frequency) {
  if (zhat2.size() != q22_factor.size())
    throw InvalidInput("conditional_simulation: mean and factor sizes differ");
  return zhat2 + draw_residual(q22_factor, rng, real_frequency);
}

double conditional_loglik(const SparsePrecision& q, const FrequencyPartition& part,
                          const Eigen::VectorXcd& z, const Eigen::VectorXd& fhat,
                          bool real_frequency) {
  const auto n = static_cast<std::size_t>(q.Q.rows());
  part.validate(n);
  if (static_cast<std::size_t>(z.size()) != n || static_cast<std::size_t>(fhat.size()) != n)
    throw InvalidInput("conditional_loglik: row length differs from the precision size");
  if (part.unstored.empty()) return 0.0;
  PrecisionBlocks blocks(q.Q, part.stored);
  blocks.gather(q.Q);
  const CholeskyFactor f(blocks.q22());
  Eigen::VectorXcd z1(static_cast<Eigen::Index>(part.stored.size()));
  for (std::size_t i = 0; i < part.stored.size(); ++i) z1[i] = z[part.stored[i]];
  if (real_frequency) z1.imag().setZero();
  const Eigen::VectorXcd hat = kriging(f, blocks.q21(), z1);
  Eigen::VectorXcd r(static_cast<Eigen::Index>(part.unstored.size()));
  double sum_log_f = 0.0;
  for (std::size_t i = 0; i < part.unstored.size(); ++i) {
    const auto p = part.unstored[i];
    r[i] = (real_frequency ? std::complex<double>(z[p].real(), 0.0) : z[p]) - hat[i];
    sum_log_f += std::log(fhat[p]);
  }
  return -0.5 * sum_log_f + 0.5 * f.logdet() - 0.5 * quadratic(blocks.q22(), r, real_frequency);
}

// ---------------------------------------------------------------------------

KappaEstimate estimate_kappa(KappaObjective objective, const SpdeOperator& op,
                             std::span<const std::size_t> stored_pixels,
                             const Eigen::VectorXcd& z, const Eigen::VectorXd& log_f,
                             bool real_frequency, double start, KappaBounds bounds) {
  if (!(bounds.lower > 0.0) || !(bounds.upper > bounds.lower))
    throw InvalidInput("estimate_kappa: invalid bounds");
  const std::span<const std::size_t> none;
  ConditionalSystem sys(op, objective == KappaObjective::marginal ? none : stored_pixels);

  KappaEstimate est;
  const double lo = std::log(bounds.lower), hi = std::log(bounds.upper);
  auto f = [&](double x) {
    ++est.evaluations;
    try {
      sys.set_kappa(std::exp(x));
      return sys.loglik(z, log_f, real_frequency);
    } catch (const NotPositiveDefinite&) {
      return -std::numeric_limits<double>::infinity();
    }
  };

  constexpr double tol = 1e-3;
  constexpr int kBrentBits = 12;
  constexpr double golden = 1.618033988749895;
  double x0 = std::clamp(std::isfinite(std::log(start)) && start > 0 ? std::log(start) : 0.0, lo, hi);
  double f0 = f(x0);
  double h = 0.5;
  double xr = std::min(x0 + h, hi), xl = std::max(x0 - h, lo);
  double fr = xr > x0 ? f(xr) : -std::numeric_limits<double>::infinity();
  double fl = xl < x0 ? f(xl) : -std::numeric_limits<double>::infinity();

  double a, c;
  auto walk = [&](int dir, double xm, double fm, double xprev) {
    double step = h;
    double bound = dir > 0 ? hi : lo;
    while (true) {
      if (xm == bound) return std::pair<double, double>{xprev, xm};
      step *= golden;
      double xn = dir > 0 ? std::min(xm + dir * step, hi) : std::max(xm + dir * step, lo);
      double fn = f(xn);
      if (fn < fm) return std::pair<double, double>{xprev, xn};
      xprev = xm;
      xm = xn;
      fm = fn;
    }
  };
  if (fr > f0 && fr >= fl) {
    std::tie(a, c) = walk(+1, xr, fr, x0);
  } else if (fl > f0) {
    std::tie(c, a) = walk(-1, xl, fl, x0);
  } else {
    a = xl;
    c = xr;
  }
  if (a > c) std::swap(a, c);

  // Brent on [a, c]; 11 bits of relative precision is well below the 1e-3 width
  std::uintmax_t max_iter = 200;
  const auto [bx, neg] = boost::math::tools::brent_find_minima([&](double x) { return -f(x); }, a, c,
                                                               kBrentBits, max_iter);
  double best_x = bx;
  double best_f = -neg;
  // a maximum at a bound shows up as the bracket touching it
  for (double xe : {a, c}) {
    if (xe != lo && xe != hi) continue;
    const double fe = f(xe);
    if (fe > best_f) {
      best_f = fe;
      best_x = xe;
    }
  }
  if (!std::isfinite(best_f)) throw Error("estimate_kappa: no kappa in the bounds gives a positive definite precision");
  est.kappa = std::exp(best_x);
  est.loglik = best_f;
  est.at_bound = best_x - lo < 2 * tol || hi - best_x < 2 * tol;
  return est;
}

KappaEstimate estimate_kappa(KappaObjective objective, const SpdeOperator& op,
                             const CoherenceParams& params, const FrequencyPartition& part,
                             const ScaledField& scaled, const FittedSpectra& spectra,
                             std::size_t T, KappaBounds bounds) {
  const auto k = part.k;
  if (k >= params.kappa.size()) throw InvalidInput("estimate_kappa: frequency out of range");
  if (params.fixed_mask[k]) throw InvalidInput("estimate_kappa: kappa is pinned at this frequency");
  const Eigen::VectorXcd z = scaled.Z.col(static_cast<Eigen::Index>(k));
  const Eigen::VectorXd log_f = spectra.values.col(static_cast<Eigen::Index>(k)).array().log();
  return estimate_kappa(objective, op, part.stored, z, log_f, is_real_frequency(k, T),
                        params.kappa[k], bounds);
}

}  // namespace halfspec
