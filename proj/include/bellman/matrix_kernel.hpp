#pragma once

// Small dense symmetric-matrix algebra shared by the PDE checkers:
// Schur products, modified Hessians, definiteness, kernel projectors,
// minors and the Sherman-Morrison rank-one inverse.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "bellman/errors.hpp"

namespace bellman {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Default relative tolerance for exact identities.
inline constexpr double kDefaultTol = 1e-8;

/// Square symmetric matrix. Construction symmetrizes its input, so
/// entries(i, j) == entries(j, i) holds bit-for-bit.
class SymMatrix {
 public:
  SymMatrix() : m_(Matrix::Zero(1, 1)) {}

  explicit SymMatrix(const Matrix& m) {
    if (m.rows() != m.cols() || m.rows() < 1) {
      throw usage_error("SymMatrix: expected a non-empty square matrix, got " +
                        std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
    }
    m_ = 0.5 * (m + m.transpose());
  }

  static SymMatrix identity(int dim) { return SymMatrix(Matrix::Identity(dim, dim)); }
  static SymMatrix zero(int dim) { return SymMatrix(Matrix::Zero(dim, dim)); }
  static SymMatrix diagonal(const Vector& d) { return SymMatrix(Matrix(d.asDiagonal())); }

  int dim() const { return static_cast<int>(m_.rows()); }
  double operator()(int i, int j) const { return m_(i, j); }
  const Matrix& matrix() const { return m_; }

 private:
  Matrix m_;
};

/// The k x n matrix A given by its columns a_1..a_n in R^k.
class ColumnSystem {
 public:
  explicit ColumnSystem(Matrix columns) : a_(std::move(columns)) {
    if (a_.rows() < 1 || a_.cols() < 1) throw usage_error("ColumnSystem: empty matrix");
    if (a_.rows() > a_.cols()) {
      throw usage_error("ColumnSystem: need k <= n, got k=" + std::to_string(a_.rows()) +
                        ", n=" + std::to_string(a_.cols()));
    }
    Eigen::JacobiSVD<Matrix> svd(a_);
    const auto& s = svd.singularValues();
    full_rank_ = s.size() > 0 && s(s.size() - 1) > 1e-10 * std::max(1.0, s(0));
  }

  /// Builds the system from a list of column vectors of equal length.
  static ColumnSystem from_columns(const std::vector<Vector>& cols) {
    if (cols.empty()) throw usage_error("ColumnSystem: no columns");
    Matrix a(cols.front().size(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t j = 0; j < cols.size(); ++j) {
      if (cols[j].size() != a.rows()) throw usage_error("ColumnSystem: ragged columns");
      a.col(static_cast<Eigen::Index>(j)) = cols[j];
    }
    return ColumnSystem(std::move(a));
  }

  int k() const { return static_cast<int>(a_.rows()); }
  int n() const { return static_cast<int>(a_.cols()); }
  const Matrix& matrix() const { return a_; }
  Vector column(int j) const { return a_.col(j); }
  bool full_rank() const { return full_rank_; }

 private:
  Matrix a_;
  bool full_rank_ = false;
};

/// Orthogonal projector, P = P^T = P^2.
struct Projection {
  Matrix entries;
  int dim() const { return static_cast<int>(entries.rows()); }
};

inline SymMatrix schur_product(const SymMatrix& m1, const SymMatrix& m2) {
  if (m1.dim() != m2.dim()) {
    throw usage_error("schur_product: dimension mismatch " + std::to_string(m1.dim()) +
                      " vs " + std::to_string(m2.dim()));
  }
  return SymMatrix(m1.matrix().cwiseProduct(m2.matrix()));
}

/// Gram matrix {<C a_i, a_j>} of the columns under C.
inline SymMatrix column_gram(const ColumnSystem& sys, const SymMatrix& c) {
  if (c.dim() != sys.k()) {
    throw usage_error("column_gram: C is " + std::to_string(c.dim()) + "x" +
                      std::to_string(c.dim()) + " but columns live in R^" +
                      std::to_string(sys.k()));
  }
  return SymMatrix(sys.matrix().transpose() * c.matrix() * sys.matrix());
}

/// The matrix A*CA . Hess B with entries <C a_i, a_j> * hess(i, j).
inline SymMatrix modified_hessian(const ColumnSystem& sys, const SymMatrix& c,
                                  const SymMatrix& hess) {
  if (hess.dim() != sys.n()) {
    throw usage_error("modified_hessian: Hessian is " + std::to_string(hess.dim()) +
                      "x" + std::to_string(hess.dim()) + " but the system has n=" +
                      std::to_string(sys.n()));
  }
  return schur_product(column_gram(sys, c), hess);
}

struct NsdResult {
  bool nsd = true;
  double worst_eigenvalue = 0.0;
};

/// Negative semidefiniteness via the symmetric eigendecomposition; the
/// largest eigenvalue is returned as the witness.
inline NsdResult is_nsd(const SymMatrix& m, double tol) {
  if (!(tol > 0)) throw usage_error("is_nsd: tolerance must be positive");
  Eigen::SelfAdjointEigenSolver<Matrix> es(m.matrix(), Eigen::EigenvaluesOnly);
  const double worst = es.eigenvalues().maxCoeff();
  return {worst <= tol, worst};
}

inline Vector eigenvalues(const SymMatrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(m.matrix(), Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

/// Orthogonal projector onto null(T) for an arbitrary r x m matrix T. Uses
/// I - T^T (T T^T)^{-1} T when T T^T is well conditioned (smallest singular
/// value >= 1e-10 times the largest), otherwise an SVD null-space basis.
inline Projection projector_onto_kernel(const Matrix& t) {
  const Eigen::Index m = t.cols();
  const Matrix gram = t * t.transpose();
  Eigen::JacobiSVD<Matrix> gsvd(gram);
  const auto& gs = gsvd.singularValues();
  const double gmax = gs.size() ? gs(0) : 0.0;
  if (gmax > 0 && gs(gs.size() - 1) >= 1e-10 * gmax) {
    Matrix p = Matrix::Identity(m, m) - t.transpose() * gram.ldlt().solve(t);
    return {0.5 * (p + p.transpose())};
  }
  Eigen::JacobiSVD<Matrix> svd(t, Eigen::ComputeFullV);
  const auto& s = svd.singularValues();
  const double smax = s.size() ? s(0) : 0.0;
  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (smax > 0 && s(i) > 1e-10 * smax) ++rank;
  }
  const Matrix basis = svd.matrixV().rightCols(m - rank);
  Matrix p = basis * basis.transpose();
  return {0.5 * (p + p.transpose())};
}

/// A D with D = diag(grad).
inline Matrix scaled_columns(const ColumnSystem& sys, const Vector& grad) {
  if (grad.size() != sys.n()) {
    throw usage_error("kernel_projection: gradient has " + std::to_string(grad.size()) +
                      " entries, expected " + std::to_string(sys.n()));
  }
  return sys.matrix() * grad.asDiagonal();
}

/// Projector onto K(x) = ker(A D), D = diag(grad B).
inline Projection kernel_projection(const ColumnSystem& sys, const Vector& grad) {
  return projector_onto_kernel(scaled_columns(sys, grad));
}

struct MinorResult {
  bool vanish = true;
  double worst_minor = 0.0;
  int numerical_rank = 0;
};

namespace detail {

inline bool next_combination(std::vector<int>& idx, int n) {
  const int s = static_cast<int>(idx.size());
  for (int i = s - 1; i >= 0; --i) {
    if (idx[i] < n - s + i) {
      ++idx[i];
      for (int j = i + 1; j < s; ++j) idx[j] = idx[j - 1] + 1;
      return true;
    }
  }
  return false;
}

inline int numerical_rank(const Matrix& m, double tol) {
  Eigen::JacobiSVD<Matrix> svd(m);
  const auto& s = svd.singularValues();
  int r = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) > tol) ++r;
  }
  return r;
}

}  // namespace detail

/// Largest s x s minor in absolute value. Enumerated combinatorially for
/// dim <= 8; above that the s-th singular value stands in for the minors
/// (all s-minors vanish iff rank < s).
inline MinorResult minors_vanish(const SymMatrix& m, int s, double tol) {
  const int n = m.dim();
  if (s < 1 || s > n) {
    throw usage_error("minors_vanish: minor size " + std::to_string(s) +
                      " outside [1, " + std::to_string(n) + "]");
  }
  MinorResult out;
  out.numerical_rank = detail::numerical_rank(m.matrix(), tol);
  if (n <= 8) {
    std::vector<int> rows(s);
    std::iota(rows.begin(), rows.end(), 0);
    Matrix sub(s, s);
    do {
      std::vector<int> cols(s);
      std::iota(cols.begin(), cols.end(), 0);
      do {
        for (int i = 0; i < s; ++i)
          for (int j = 0; j < s; ++j) sub(i, j) = m(rows[i], cols[j]);
        out.worst_minor = std::max(out.worst_minor, std::abs(sub.determinant()));
      } while (detail::next_combination(cols, n));
    } while (detail::next_combination(rows, n));
  } else {
    Eigen::JacobiSVD<Matrix> svd(m.matrix());
    out.worst_minor = svd.singularValues()(s - 1);
  }
  out.vanish = out.worst_minor <= tol;
  return out;
}

/// (bn^2 a a^T + D^2)^{-1} for diagonal D = diag(d2) by the rank-one
/// update formula D^-2 - bn^2 D^-2 a a^T D^-2 / (1 + bn^2 a^T D^-2 a).
inline SymMatrix sherman_morrison(const Vector& d2, const Vector& a, double bn) {
  if (d2.size() != a.size() || d2.size() < 1) {
    throw usage_error("sherman_morrison: diagonal and vector sizes differ");
  }
  for (Eigen::Index i = 0; i < d2.size(); ++i) {
    if (d2(i) == 0.0) {
      throw usage_error("sherman_morrison: zero diagonal entry at index " + std::to_string(i));
    }
  }
  const Vector inv_sq = d2.array().square().inverse();
  const Vector w = inv_sq.cwiseProduct(a);
  const double denom = 1.0 + bn * bn * a.dot(w);
  Matrix out = Matrix(inv_sq.asDiagonal()) - (bn * bn / denom) * (w * w.transpose());
  return SymMatrix(out);
}

/// Relative determinant |det M| / (1 + prod_i ||row_i||).
inline double relative_determinant(const Matrix& m) {
  double prod = 1.0;
  for (Eigen::Index i = 0; i < m.rows(); ++i) prod *= m.row(i).norm();
  return std::abs(m.determinant()) / (1.0 + prod);
}

}  // namespace bellman
