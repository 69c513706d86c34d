#pragma once

#include <Eigen/Sparse>
#include <cstddef>
#include <memory>
#include <vector>

namespace halfspec {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;

enum class Ordering { amd, natural };

/// Fill-reducing permutation plus the elimination tree and column layout of
/// L for one sparsity pattern. Shared between numeric factorizations of
/// matrices with identical patterns.
///
/// The input must be square and store both triangles of a symmetric pattern.
class SymbolicCholesky {
 public:
  explicit SymbolicCholesky(const SparseMatrix& pattern, Ordering ordering = Ordering::amd);

  int size() const { return n_; }
  /// perm[new] = old
  const std::vector<int>& permutation() const { return perm_; }
  std::size_t nonzeros() const { return static_cast<std::size_t>(lp_.back()); }
  /// True when `a` has the pattern this analysis was built from.
  bool matches(const SparseMatrix& a) const;

 private:
  friend class CholeskyFactor;

  int n_ = 0;
  Eigen::Index source_nnz_ = 0;
  std::vector<int> perm_;
  std::vector<int> pinv_;
  // upper triangle of P A P^T by columns; cx_src_ indexes A.valuePtr()
  std::vector<int> cp_, ci_, c_src_;
  std::vector<int> parent_;
  std::vector<int> lp_;
};

/// Sparse Cholesky factor L of P A P^T = L L^T (up-looking algorithm).
class CholeskyFactor {
 public:
  /// Analyses and factors `a`. Throws NotPositiveDefinite naming the pivot.
  explicit CholeskyFactor(const SparseMatrix& a, Ordering ordering = Ordering::amd);
  /// Numeric factorization reusing a symbolic analysis of the same pattern.
  CholeskyFactor(std::shared_ptr<const SymbolicCholesky> symbolic, const SparseMatrix& a);

  /// Re-runs the numeric phase for new values on the same pattern.
  void refactorize(const SparseMatrix& a);

  int size() const { return symbolic_->n_; }
  const std::vector<int>& permutation() const { return symbolic_->perm_; }
  std::size_t nonzeros() const { return symbolic_->nonzeros(); }
  const std::shared_ptr<const SymbolicCholesky>& symbolic() const { return symbolic_; }

  /// A^{-1} b.
  Eigen::VectorXd solve(const Eigen::VectorXd& b) const;
  /// A^{-1} B, column by column.
  Eigen::MatrixXd solve(const Eigen::MatrixXd& b) const;
  /// 2 sum log diag(L).
  double logdet() const;
  /// P^T L^{-T} noise: covariance A^{-1} when noise is iid N(0, 1).
  Eigen::VectorXd sample(const Eigen::VectorXd& noise) const;
  Eigen::MatrixXd sample(const Eigen::MatrixXd& noise) const;

  /// diag(A^{-1}) in the original order, by selected inversion on the
  /// pattern of L.
  Eigen::VectorXd inverse_diagonal() const;

  /// L as a sparse matrix (rows and columns in permuted order).
  SparseMatrix lower() const;

 private:
  void numeric(const SparseMatrix& a);
  void lower_solve(double* x) const;
  void upper_solve(double* x) const;

  std::shared_ptr<const SymbolicCholesky> symbolic_;
  std::vector<int> li_;
  std::vector<double> lx_;
};

}  // namespace halfspec
