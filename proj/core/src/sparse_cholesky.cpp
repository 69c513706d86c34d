#include "halfspec/sparse_cholesky.hpp"

#include <Eigen/OrderingMethods>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "halfspec/error.hpp"

namespace halfspec {

namespace {

// Nonzero pattern of row k of L, returned in s[top..n) in topological order.
// `mark` must be all-false on entry and is restored on exit.
int ereach(const std::vector<int>& cp, const std::vector<int>& ci, int k,
           const std::vector<int>& parent, std::vector<int>& s, std::vector<char>& mark) {
  const int n = static_cast<int>(parent.size());
  int top = n;
  mark[static_cast<std::size_t>(k)] = 1;
  for (int p = cp[static_cast<std::size_t>(k)]; p < cp[static_cast<std::size_t>(k) + 1]; ++p) {
    int i = ci[static_cast<std::size_t>(p)];
    if (i > k) continue;
    int len = 0;
    for (; !mark[static_cast<std::size_t>(i)]; i = parent[static_cast<std::size_t>(i)]) {
      s[static_cast<std::size_t>(len++)] = i;
      mark[static_cast<std::size_t>(i)] = 1;
    }
    while (len > 0) s[static_cast<std::size_t>(--top)] = s[static_cast<std::size_t>(--len)];
  }
  for (int p = top; p < n; ++p) mark[static_cast<std::size_t>(s[static_cast<std::size_t>(p)])] = 0;
  mark[static_cast<std::size_t>(k)] = 0;
  return top;
}

}  // namespace

SymbolicCholesky::SymbolicCholesky(const SparseMatrix& a, Ordering ordering) {
  if (a.rows() != a.cols()) throw InvalidInput("Cholesky needs a square matrix");
  if (!a.isCompressed()) throw InvalidInput("Cholesky needs a compressed matrix");
  n_ = static_cast<int>(a.rows());
  source_nnz_ = a.nonZeros();
  const auto un = static_cast<std::size_t>(n_);

  perm_.resize(un);
  if (ordering == Ordering::amd && n_ > 0) {
    Eigen::PermutationMatrix<Eigen::Dynamic, Eigen::Dynamic, int> p;
    Eigen::AMDOrdering<int> amd;
    amd(a, p);
    for (std::size_t i = 0; i < un; ++i) perm_[i] = p.indices()[static_cast<Eigen::Index>(i)];
  } else {
    std::iota(perm_.begin(), perm_.end(), 0);
  }
  pinv_.resize(un);
  for (std::size_t i = 0; i < un; ++i) pinv_[static_cast<std::size_t>(perm_[i])] = static_cast<int>(i);

  // C = upper triangle of P A P^T
  const int* outer = a.outerIndexPtr();
  const int* inner = a.innerIndexPtr();
  std::vector<int> count(un + 1, 0);
  for (int j = 0; j < n_; ++j) {
    for (int p = outer[j]; p < outer[j + 1]; ++p) {
      const int i = inner[p];
      if (i > j) continue;
      const int i2 = pinv_[static_cast<std::size_t>(i)];
      const int j2 = pinv_[static_cast<std::size_t>(j)];
      ++count[static_cast<std::size_t>(std::max(i2, j2))];
    }
  }
  cp_.assign(un + 1, 0);
  for (std::size_t j = 0; j < un; ++j) cp_[j + 1] = cp_[j] + count[j];
  ci_.resize(static_cast<std::size_t>(cp_[un]));
  c_src_.resize(ci_.size());
  std::vector<int> next(cp_.begin(), cp_.end() - 1);
  for (int j = 0; j < n_; ++j) {
    for (int p = outer[j]; p < outer[j + 1]; ++p) {
      const int i = inner[p];
      if (i > j) continue;
      const int i2 = pinv_[static_cast<std::size_t>(i)];
      const int j2 = pinv_[static_cast<std::size_t>(j)];
      const int q = next[static_cast<std::size_t>(std::max(i2, j2))]++;
      ci_[static_cast<std::size_t>(q)] = std::min(i2, j2);
      c_src_[static_cast<std::size_t>(q)] = p;
    }
  }

  // elimination tree with path compression
  parent_.assign(un, -1);
  std::vector<int> ancestor(un, -1);
  for (int k = 0; k < n_; ++k) {
    for (int p = cp_[static_cast<std::size_t>(k)]; p < cp_[static_cast<std::size_t>(k) + 1]; ++p) {
      int i = ci_[static_cast<std::size_t>(p)];
      while (i != -1 && i < k) {
        const int inext = ancestor[static_cast<std::size_t>(i)];
        ancestor[static_cast<std::size_t>(i)] = k;
        if (inext == -1) parent_[static_cast<std::size_t>(i)] = k;
        i = inext;
      }
    }
  }

  // column counts from the row patterns of L
  std::vector<int> colcount(un, 1);
  std::vector<int> s(un);
  std::vector<char> mark(un, 0);
  for (int k = 0; k < n_; ++k) {
    const int top = ereach(cp_, ci_, k, parent_, s, mark);
    for (int p = top; p < n_; ++p) ++colcount[static_cast<std::size_t>(s[static_cast<std::size_t>(p)])];
  }
  lp_.assign(un + 1, 0);
  for (std::size_t j = 0; j < un; ++j) lp_[j + 1] = lp_[j] + colcount[j];
}

bool SymbolicCholesky::matches(const SparseMatrix& a) const {
  return a.rows() == n_ && a.cols() == n_ && a.nonZeros() == source_nnz_ && a.isCompressed();
}

CholeskyFactor::CholeskyFactor(const SparseMatrix& a, Ordering ordering)
    : symbolic_(std::make_shared<SymbolicCholesky>(a, ordering)) {
  numeric(a);
}

CholeskyFactor::CholeskyFactor(std::shared_ptr<const SymbolicCholesky> symbolic,
                               const SparseMatrix& a)
    : symbolic_(std::move(symbolic)) {
  numeric(a);
}

void CholeskyFactor::refactorize(const SparseMatrix& a) { numeric(a); }

void CholeskyFactor::numeric(const SparseMatrix& a) {
  const SymbolicCholesky& sym = *symbolic_;
  if (!sym.matches(a)) throw InvalidInput("matrix pattern differs from the symbolic analysis");
  const int n = sym.n_;
  const auto un = static_cast<std::size_t>(n);
  const double* ax = a.valuePtr();

  li_.resize(sym.nonzeros());
  lx_.resize(sym.nonzeros());
  std::vector<int> c(sym.lp_.begin(), sym.lp_.end() - 1);
  std::vector<double> x(un, 0.0);
  std::vector<int> s(un);
  std::vector<char> mark(un, 0);

  for (int k = 0; k < n; ++k) {
    const auto uk = static_cast<std::size_t>(k);
    const int top = ereach(sym.cp_, sym.ci_, k, sym.parent_, s, mark);
    x[uk] = 0.0;
    for (int p = sym.cp_[uk]; p < sym.cp_[uk + 1]; ++p) {
      x[static_cast<std::size_t>(sym.ci_[static_cast<std::size_t>(p)])] +=
          ax[sym.c_src_[static_cast<std::size_t>(p)]];
    }
    double d = x[uk];
    x[uk] = 0.0;
    for (int q = top; q < n; ++q) {
      const auto i = static_cast<std::size_t>(s[static_cast<std::size_t>(q)]);
      const double lki = x[i] / lx_[static_cast<std::size_t>(sym.lp_[i])];
      x[i] = 0.0;
      for (int p = sym.lp_[i] + 1; p < c[i]; ++p) {
        x[static_cast<std::size_t>(li_[static_cast<std::size_t>(p)])] -= lx_[static_cast<std::size_t>(p)] * lki;
      }
      d -= lki * lki;
      const auto p = static_cast<std::size_t>(c[i]++);
      li_[p] = k;
      lx_[p] = lki;
    }
    if (!(d > 0.0)) {
      throw NotPositiveDefinite(uk, static_cast<std::size_t>(sym.perm_[uk]), d);
    }
    const auto p = static_cast<std::size_t>(c[uk]++);
    li_[p] = k;
    lx_[p] = std::sqrt(d);
  }
}

void CholeskyFactor::lower_solve(double* x) const {
  const auto& lp = symbolic_->lp_;
  const int n = symbolic_->n_;
  for (int j = 0; j < n; ++j) {
    const auto uj = static_cast<std::size_t>(j);
    x[j] /= lx_[static_cast<std::size_t>(lp[uj])];
    for (int p = lp[uj] + 1; p < lp[uj + 1]; ++p) {
      x[li_[static_cast<std::size_t>(p)]] -= lx_[static_cast<std::size_t>(p)] * x[j];
    }
  }
}

void CholeskyFactor::upper_solve(double* x) const {
  const auto& lp = symbolic_->lp_;
  for (int j = symbolic_->n_ - 1; j >= 0; --j) {
    const auto uj = static_cast<std::size_t>(j);
    for (int p = lp[uj] + 1; p < lp[uj + 1]; ++p) {
      x[j] -= lx_[static_cast<std::size_t>(p)] * x[li_[static_cast<std::size_t>(p)]];
    }
    x[j] /= lx_[static_cast<std::size_t>(lp[uj])];
  }
}

Eigen::VectorXd CholeskyFactor::solve(const Eigen::VectorXd& b) const {
  const int n = symbolic_->n_;
  if (b.size() != n) throw InvalidInput("right-hand side has the wrong dimension");
  const auto& perm = symbolic_->perm_;
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) y(i) = b(perm[static_cast<std::size_t>(i)]);
  lower_solve(y.data());
  upper_solve(y.data());
  Eigen::VectorXd out(n);
  for (int i = 0; i < n; ++i) out(perm[static_cast<std::size_t>(i)]) = y(i);
  return out;
}

Eigen::VectorXd CholeskyFactor::inverse_diagonal() const {
  const auto& lp = symbolic_->lp_;
  const auto& perm = symbolic_->perm_;
  const int n = symbolic_->n_;
  // Takahashi recursion; z holds entries of A^{-1} on the pattern of L.
  // For rows k < i of column j, row i also appears in column k.
  std::vector<double> z(lx_.size(), 0.0);
  std::vector<double> acc;
  for (int j = n - 1; j >= 0; --j) {
    const auto uj = static_cast<std::size_t>(j);
    const auto begin = static_cast<std::size_t>(lp[uj] + 1), end = static_cast<std::size_t>(lp[uj + 1]);
    const std::size_t m = end - begin;
    acc.assign(m, 0.0);
    for (std::size_t b = 0; b < m; ++b) {
      const auto k = static_cast<std::size_t>(li_[begin + b]);
      const double lb = lx_[begin + b];
      acc[b] += lb * z[static_cast<std::size_t>(lp[k])];
      auto q = static_cast<std::size_t>(lp[k] + 1);
      const auto qend = static_cast<std::size_t>(lp[k + 1]);
      for (std::size_t a = b + 1; a < m; ++a) {
        const int row = li_[begin + a];
        while (q < qend && li_[q] < row) ++q;
        if (q >= qend || li_[q] != row) throw Error("factor pattern is not closed");
        const double v = z[q];
        acc[a] += lb * v;
        acc[b] += lx_[begin + a] * v;
      }
    }
    const double ljj = lx_[static_cast<std::size_t>(lp[uj])];
    double diag = 0.0;
    for (std::size_t a = 0; a < m; ++a) {
      z[begin + a] = -acc[a] / ljj;
      diag += lx_[begin + a] * z[begin + a];
    }
    z[static_cast<std::size_t>(lp[uj])] = (1.0 / ljj - diag) / ljj;
  }
  Eigen::VectorXd out(n);
  for (int i = 0; i < n; ++i) out(perm[static_cast<std::size_t>(i)]) = z[static_cast<std::size_t>(lp[static_cast<std::size_t>(i)])];
  return out;
}

Eigen::MatrixXd CholeskyFactor::solve(const Eigen::MatrixXd& b) const {
  Eigen::MatrixXd out(b.rows(), b.cols());
  for (Eigen::Index j = 0; j < b.cols(); ++j) out.col(j) = solve(Eigen::VectorXd(b.col(j)));
  return out;
}

double CholeskyFactor::logdet() const {
  const auto& lp = symbolic_->lp_;
  double sum = 0.0;
  for (int j = 0; j < symbolic_->n_; ++j) {
    sum += std::log(lx_[static_cast<std::size_t>(lp[static_cast<std::size_t>(j)])]);
  }
  return 2.0 * sum;
}

Eigen::VectorXd CholeskyFactor::sample(const Eigen::VectorXd& noise) const {
  const int n = symbolic_->n_;
  if (noise.size() != n) throw InvalidInput("noise vector has the wrong dimension");
  Eigen::VectorXd y = noise;
  upper_solve(y.data());
  Eigen::VectorXd out(n);
  const auto& perm = symbolic_->perm_;
  for (int i = 0; i < n; ++i) out(perm[static_cast<std::size_t>(i)]) = y(i);
  return out;
}

Eigen::MatrixXd CholeskyFactor::sample(const Eigen::MatrixXd& noise) const {
  Eigen::MatrixXd out(noise.rows(), noise.cols());
  for (Eigen::Index j = 0; j < noise.cols(); ++j) out.col(j) = sample(Eigen::VectorXd(noise.col(j)));
  return out;
}

SparseMatrix CholeskyFactor::lower() const {
  const int n = symbolic_->n_;
  SparseMatrix l(n, n);
  std::vector<Eigen::Triplet<double, int>> t;
  t.reserve(lx_.size());
  const auto& lp = symbolic_->lp_;
  for (int j = 0; j < n; ++j) {
    for (int p = lp[static_cast<std::size_t>(j)]; p < lp[static_cast<std::size_t>(j) + 1]; ++p) {
      t.emplace_back(li_[static_cast<std::size_t>(p)], j, lx_[static_cast<std::size_t>(p)]);
    }
  }
  l.setFromTriplets(t.begin(), t.end());
  return l;
}

}  // namespace halfspec
