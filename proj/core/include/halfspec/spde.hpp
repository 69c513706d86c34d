#pragma once

#include <Eigen/Sparse>
#include <array>
#include <cstddef>
#include <filesystem>
#include <memory>
#include <vector>

#include "halfspec/grid.hpp"
#include "halfspec/sparse_cholesky.hpp"

namespace halfspec {

/// Triangulation of the grid on the unit sphere. Each lat/lon quad is split
/// into two triangles, longitudes wrap around, and a pole row (|lat| = 90)
/// collapses into one vertex joined to the next row by a triangle fan.
struct SphereMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<std::size_t, 3>> triangles;  // outward orientation
  std::vector<std::size_t> vertex_of_pixel;

  std::size_t n_vertices() const { return vertices.size(); }
  std::size_t n_pixels() const { return vertex_of_pixel.size(); }
  /// True when every vertex carries exactly one pixel.
  bool bijective() const { return vertices.size() == vertex_of_pixel.size(); }
};

SphereMesh build_mesh(const Grid& grid);

/// Linear finite elements on the flat facets: lumped (diagonal) mass and the
/// cotangent stiffness matrix.
struct FemMatrices {
  Eigen::VectorXd mass;
  SparseMatrix stiffness;
};

FemMatrices assemble_fem(const SphereMesh& mesh);

/// SPDE precision for Matern smoothness 1 on the mesh:
///   Q = tau^2 (kappa^2 C + G) C^{-1} (kappa^2 C + G),  tau^2 = 1 / (4 pi kappa^2),
/// which gives unit marginal variance in the planar limit.
struct SparsePrecision {
  SparseMatrix Q;
  double kappa = 0.0;
  double tau = 0.0;
};

class SpdeOperator;

/// Q(kappa) handled through the factor of K = kappa^2 C + G, using
/// Q = tau^2 K C^{-1} K. The condition number of Q grows like kappa^{-4},
/// so at small kappa a direct Cholesky of Q breaks down in double precision
/// while K stays well conditioned.
class FullPrecisionFactor {
 public:
  FullPrecisionFactor(const SpdeOperator& op, double kappa);

  std::size_t size() const { return static_cast<std::size_t>(mass_.size()); }
  double kappa() const { return kappa_; }
  /// log det Q.
  double logdet() const;
  /// x^T Q x.
  double quadratic(const Eigen::VectorXd& x) const;
  /// Q^{-1} b.
  Eigen::VectorXd solve(const Eigen::VectorXd& b) const;
  /// tau^{-1} K^{-1} C^{1/2} noise: covariance Q^{-1} for iid N(0, 1) noise.
  Eigen::VectorXd sample(const Eigen::VectorXd& noise) const;
  Eigen::MatrixXd sample(const Eigen::MatrixXd& noise) const;

 private:
  double kappa_;
  double tau2_;
  Eigen::VectorXd mass_;
  SparseMatrix k_matrix_;
  CholeskyFactor k_;
};

/// Holds the kappa-independent pieces of Q so precisions for many kappa
/// values share one sparsity pattern:
///   Q(kappa) = (kappa^2 C + 2 G + kappa^{-2} G C^{-1} G) / (4 pi).
class SpdeOperator {
 public:
  explicit SpdeOperator(const SphereMesh& mesh);

  std::size_t size() const { return static_cast<std::size_t>(pattern_.rows()); }
  const SphereMesh& mesh() const { return mesh_; }
  const FemMatrices& fem() const { return fem_; }

  /// Coefficients multiplying C, G and G C^{-1} G at (kappa).
  static std::array<double, 3> weights(double kappa);

  SparsePrecision precision(double kappa) const;
  /// kappa^2 C + G.
  SparseMatrix operator_matrix(double kappa) const;
  const std::shared_ptr<const SymbolicCholesky>& operator_symbolic() const { return k_symbolic_; }

  /// Union pattern of C, G and G C^{-1} G with per-entry component values.
  const SparseMatrix& pattern() const { return pattern_; }
  const std::vector<double>& mass_values() const { return c_; }
  const std::vector<double>& stiffness_values() const { return g_; }
  const std::vector<double>& biharmonic_values() const { return h_; }

 private:
  SphereMesh mesh_;
  FemMatrices fem_;
  SparseMatrix pattern_;
  std::vector<double> c_, g_, h_;
  std::shared_ptr<const SymbolicCholesky> k_symbolic_;
};

SparsePrecision assemble_precision(const SphereMesh& mesh, double kappa);

CholeskyFactor factorize(const SparseMatrix& q, Ordering ordering = Ordering::amd);
Eigen::VectorXd solve(const CholeskyFactor& factor, const Eigen::VectorXd& b);
double logdet(const CholeskyFactor& factor);
Eigen::VectorXd sample_precision(const CholeskyFactor& factor, const Eigen::VectorXd& noise);

/// Writes "row col value" lines (0-based) for every stored entry.
void dump_coordinate(const SparseMatrix& m, const std::filesystem::path& path);

}  // namespace halfspec
