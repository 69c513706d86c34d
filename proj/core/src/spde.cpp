#include "halfspec/spde.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>

#include "halfspec/error.hpp"

namespace halfspec {

namespace {

Vec3 sub(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}
double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }

bool is_pole(double lat) { return std::abs(lat) == 90.0; }

// Values of `m` on the (superset) pattern of `pattern`, zero where m has no entry.
std::vector<double> values_on_pattern(const SparseMatrix& m, const SparseMatrix& pattern) {
  std::vector<double> out(static_cast<std::size_t>(pattern.nonZeros()), 0.0);
  for (Eigen::Index j = 0; j < pattern.outerSize(); ++j) {
    SparseMatrix::InnerIterator it_m(m, j);
    for (int p = pattern.outerIndexPtr()[j]; p < pattern.outerIndexPtr()[j + 1]; ++p) {
      const int row = pattern.innerIndexPtr()[p];
      while (it_m && it_m.row() < row) ++it_m;
      if (it_m && it_m.row() == row) out[static_cast<std::size_t>(p)] = it_m.value();
    }
  }
  return out;
}

}  // namespace

SphereMesh build_mesh(const Grid& grid) {
  grid.validate();
  const std::size_t nlat = grid.n_lat();
  const std::size_t nlon = grid.n_lon();
  if (nlat < 2 || nlon < 3) throw InvalidInput("mesh needs n_lat >= 2 and n_lon >= 3");
  for (std::size_t r = 1; r + 1 < nlat; ++r) {
    if (is_pole(grid.latitudes[r])) throw InvalidInput("pole row must be the first or last row");
  }
  if (nlat == 2 && is_pole(grid.latitudes[0]) && is_pole(grid.latitudes[1])) {
    throw InvalidInput("mesh needs at least one non-pole row");
  }

  SphereMesh mesh;
  mesh.vertex_of_pixel.resize(grid.size());
  std::vector<std::size_t> row_start(nlat);
  for (std::size_t r = 0; r < nlat; ++r) {
    const double lat = grid.latitudes[r];
    row_start[r] = mesh.vertices.size();
    if (is_pole(lat)) {
      mesh.vertices.push_back({0.0, 0.0, lat > 0 ? 1.0 : -1.0});
      for (std::size_t j = 0; j < nlon; ++j) mesh.vertex_of_pixel[r * nlon + j] = row_start[r];
    } else {
      for (std::size_t j = 0; j < nlon; ++j) {
        mesh.vertex_of_pixel[r * nlon + j] = mesh.vertices.size();
        mesh.vertices.push_back(to_unit_sphere(lat, grid.longitudes[j]));
      }
    }
  }

  auto add = [&](std::size_t a, std::size_t b, std::size_t c) {
    const Vec3& pa = mesh.vertices[a];
    const Vec3& pb = mesh.vertices[b];
    const Vec3& pc = mesh.vertices[c];
    const Vec3 centroid{pa[0] + pb[0] + pc[0], pa[1] + pb[1] + pc[1], pa[2] + pb[2] + pc[2]};
    if (dot(cross(sub(pb, pa), sub(pc, pa)), centroid) < 0.0) std::swap(b, c);
    mesh.triangles.push_back({a, b, c});
  };
  auto vertex = [&](std::size_t r, std::size_t j) { return mesh.vertex_of_pixel[r * nlon + j % nlon]; };

  for (std::size_t r = 0; r + 1 < nlat; ++r) {
    const bool lower_pole = is_pole(grid.latitudes[r]);
    const bool upper_pole = is_pole(grid.latitudes[r + 1]);
    for (std::size_t j = 0; j < nlon; ++j) {
      if (lower_pole) {
        add(row_start[r], vertex(r + 1, j), vertex(r + 1, j + 1));
      } else if (upper_pole) {
        add(row_start[r + 1], vertex(r, j), vertex(r, j + 1));
      } else {
        add(vertex(r, j), vertex(r, j + 1), vertex(r + 1, j + 1));
        add(vertex(r, j), vertex(r + 1, j + 1), vertex(r + 1, j));
      }
    }
  }
  return mesh;
}

FemMatrices assemble_fem(const SphereMesh& mesh) {
  const std::size_t nv = mesh.n_vertices();
  FemMatrices fem;
  fem.mass = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(nv));
  std::vector<Eigen::Triplet<double, int>> triplets;
  triplets.reserve(mesh.triangles.size() * 9);
  for (const auto& tri : mesh.triangles) {
    const Vec3 e01 = sub(mesh.vertices[tri[1]], mesh.vertices[tri[0]]);
    const Vec3 e02 = sub(mesh.vertices[tri[2]], mesh.vertices[tri[0]]);
    const double area = 0.5 * norm(cross(e01, e02));
    if (!(area > 1e-14)) throw InvalidInput("degenerate mesh triangle");
    for (int local = 0; local < 3; ++local) {
      // edge (i, j) opposite vertex k
      const std::size_t k = tri[static_cast<std::size_t>(local)];
      const std::size_t i = tri[static_cast<std::size_t>((local + 1) % 3)];
      const std::size_t j = tri[static_cast<std::size_t>((local + 2) % 3)];
      const Vec3 a = sub(mesh.vertices[i], mesh.vertices[k]);
      const Vec3 b = sub(mesh.vertices[j], mesh.vertices[k]);
      const double w = 0.5 * dot(a, b) / norm(cross(a, b));
      const int ii = static_cast<int>(i), jj = static_cast<int>(j);
      triplets.emplace_back(ii, jj, -w);
      triplets.emplace_back(jj, ii, -w);
      triplets.emplace_back(ii, ii, w);
      triplets.emplace_back(jj, jj, w);
      fem.mass(static_cast<Eigen::Index>(k)) += area / 3.0;
    }
  }
  fem.stiffness.resize(static_cast<Eigen::Index>(nv), static_cast<Eigen::Index>(nv));
  fem.stiffness.setFromTriplets(triplets.begin(), triplets.end());
  fem.stiffness.makeCompressed();
  return fem;
}

SpdeOperator::SpdeOperator(const SphereMesh& mesh) : mesh_(mesh), fem_(assemble_fem(mesh)) {
  const auto nv = static_cast<Eigen::Index>(mesh_.n_vertices());
  SparseMatrix c(nv, nv);
  std::vector<Eigen::Triplet<double, int>> diag;
  for (Eigen::Index i = 0; i < nv; ++i) diag.emplace_back(static_cast<int>(i), static_cast<int>(i), fem_.mass(i));
  c.setFromTriplets(diag.begin(), diag.end());
  const Eigen::VectorXd inv_mass = fem_.mass.cwiseInverse();
  SparseMatrix h = fem_.stiffness * inv_mass.asDiagonal() * fem_.stiffness;
  h.makeCompressed();
  // structural union; the values of the sum are not used
  SparseMatrix abs_sum = SparseMatrix(c.cwiseAbs()) + SparseMatrix(fem_.stiffness.cwiseAbs()) +
                         SparseMatrix(h.cwiseAbs());
  pattern_ = abs_sum;
  pattern_.makeCompressed();
  c_ = values_on_pattern(c, pattern_);
  g_ = values_on_pattern(fem_.stiffness, pattern_);
  h_ = values_on_pattern(h, pattern_);
  k_symbolic_ = std::make_shared<SymbolicCholesky>(fem_.stiffness);
}

SparseMatrix SpdeOperator::operator_matrix(double kappa) const {
  if (!(kappa > 0.0) || !std::isfinite(kappa)) throw InvalidInput("kappa must be positive");
  SparseMatrix k = fem_.stiffness;
  for (Eigen::Index i = 0; i < k.rows(); ++i) k.coeffRef(i, i) += kappa * kappa * fem_.mass(i);
  return k;
}

FullPrecisionFactor::FullPrecisionFactor(const SpdeOperator& op, double kappa)
    : kappa_(kappa),
      tau2_(1.0 / (4.0 * std::numbers::pi * kappa * kappa)),
      mass_(op.fem().mass),
      k_matrix_(op.operator_matrix(kappa)),
      k_(op.operator_symbolic(), k_matrix_) {}

double FullPrecisionFactor::logdet() const {
  return static_cast<double>(size()) * std::log(tau2_) + 2.0 * k_.logdet() -
         mass_.array().log().sum();
}

double FullPrecisionFactor::quadratic(const Eigen::VectorXd& x) const {
  if (x.size() != mass_.size()) throw InvalidInput("vector length does not match the precision");
  const Eigen::VectorXd y = k_matrix_ * x;
  return tau2_ * (y.array().square() / mass_.array()).sum();
}

Eigen::VectorXd FullPrecisionFactor::solve(const Eigen::VectorXd& b) const {
  const Eigen::VectorXd u = k_.solve(b);
  return k_.solve(Eigen::VectorXd(mass_.cwiseProduct(u))) / tau2_;
}

Eigen::VectorXd FullPrecisionFactor::sample(const Eigen::VectorXd& noise) const {
  if (noise.size() != mass_.size()) throw InvalidInput("noise length does not match the precision");
  return k_.solve(Eigen::VectorXd(mass_.cwiseSqrt().cwiseProduct(noise))) / std::sqrt(tau2_);
}

Eigen::MatrixXd FullPrecisionFactor::sample(const Eigen::MatrixXd& noise) const {
  if (noise.rows() != mass_.size()) throw InvalidInput("noise length does not match the precision");
  const Eigen::MatrixXd scaled = mass_.cwiseSqrt().asDiagonal() * noise;
  return k_.solve(scaled) / std::sqrt(tau2_);
}

std::array<double, 3> SpdeOperator::weights(double kappa) {
  const double s = 1.0 / (4.0 * std::numbers::pi);
  return {kappa * kappa * s, 2.0 * s, s / (kappa * kappa)};
}

SparsePrecision SpdeOperator::precision(double kappa) const {
  if (!(kappa > 0.0) || !std::isfinite(kappa)) throw InvalidInput("kappa must be positive");
  const auto w = weights(kappa);
  SparsePrecision out;
  out.kappa = kappa;
  out.tau = 1.0 / (kappa * std::sqrt(4.0 * std::numbers::pi));
  out.Q = pattern_;
  double* v = out.Q.valuePtr();
  for (std::size_t p = 0; p < c_.size(); ++p) v[p] = w[0] * c_[p] + w[1] * g_[p] + w[2] * h_[p];
  return out;
}

SparsePrecision assemble_precision(const SphereMesh& mesh, double kappa) {
  if (!(kappa > 0.0)) throw InvalidInput("kappa must be positive");
  return SpdeOperator(mesh).precision(kappa);
}

CholeskyFactor factorize(const SparseMatrix& q, Ordering ordering) {
  return CholeskyFactor(q, ordering);
}

Eigen::VectorXd solve(const CholeskyFactor& factor, const Eigen::VectorXd& b) {
  return factor.solve(b);
}

double logdet(const CholeskyFactor& factor) { return factor.logdet(); }

Eigen::VectorXd sample_precision(const CholeskyFactor& factor, const Eigen::VectorXd& noise) {
  return factor.sample(noise);
}

void dump_coordinate(const SparseMatrix& m, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << std::setprecision(17);
  for (Eigen::Index j = 0; j < m.outerSize(); ++j) {
    for (SparseMatrix::InnerIterator it(m, j); it; ++it) {
      out << it.row() << ' ' << it.col() << ' ' << it.value() << '\n';
    }
  }
}

}  // namespace halfspec
