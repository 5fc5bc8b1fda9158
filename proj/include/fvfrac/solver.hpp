#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fvfrac/core.hpp"

namespace fvfrac {

// ---------------------------------------------------------------------------
// Dense storage
// ---------------------------------------------------------------------------

/// Row-major dense matrix. Used for cross-checks and small systems.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

  static DenseMatrix identity(std::size_t n) {
    DenseMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  Vector operator*(std::span<const double> x) const {
    if (x.size() != cols_) throw Error("dense matrix-vector product: dimension mismatch");
    Vector y(rows_, 0.0);
    for (std::size_t i = 0; i < rows_; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < cols_; ++j) s += data_[i * cols_ + j] * x[j];
      y[i] = s;
    }
    return y;
  }

 private:
  std::size_t rows_ = 0, cols_ = 0;
  Vector data_;
};

/// LU factorisation with partial pivoting.
class DenseLU {
 public:
  explicit DenseLU(DenseMatrix a) : lu_(std::move(a)), perm_(lu_.rows()) {
    const std::size_t n = lu_.rows();
    if (lu_.cols() != n) throw Error("dense_solve: matrix must be square");
    std::iota(perm_.begin(), perm_.end(), std::size_t{0});
    double scale = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) scale = std::max(scale, std::abs(lu_(i, j)));
    const double tiny = static_cast<double>(n) * std::numeric_limits<double>::epsilon() * scale;

    for (std::size_t k = 0; k < n; ++k) {
      std::size_t piv = k;
      for (std::size_t i = k + 1; i < n; ++i)
        if (std::abs(lu_(i, k)) > std::abs(lu_(piv, k))) piv = i;
      if (!(std::abs(lu_(piv, k)) > tiny))
        throw Error("dense_solve: matrix is singular to working precision (column " + std::to_string(k) + ")");
      if (piv != k) {
        for (std::size_t j = 0; j < n; ++j) std::swap(lu_(k, j), lu_(piv, j));
        std::swap(perm_[k], perm_[piv]);
      }
      const double inv = 1.0 / lu_(k, k);
      for (std::size_t i = k + 1; i < n; ++i) {
        const double f = lu_(i, k) *= inv;
        if (f == 0.0) continue;
        for (std::size_t j = k + 1; j < n; ++j) lu_(i, j) -= f * lu_(k, j);
      }
    }
  }

  Vector solve(std::span<const double> b) const {
    const std::size_t n = lu_.rows();
    if (b.size() != n) throw Error("dense_solve: right-hand side has wrong length");
    Vector x(n);
    for (std::size_t i = 0; i < n; ++i) {
      double s = b[perm_[i]];
      for (std::size_t j = 0; j < i; ++j) s -= lu_(i, j) * x[j];
      x[i] = s;
    }
    for (std::size_t i = n; i-- > 0;) {
      double s = x[i];
      for (std::size_t j = i + 1; j < n; ++j) s -= lu_(i, j) * x[j];
      x[i] = s / lu_(i, i);
    }
    return x;
  }

 private:
  DenseMatrix lu_;
  std::vector<std::size_t> perm_;
};

inline Vector dense_solve(DenseMatrix a, std::span<const double> b) { return DenseLU(std::move(a)).solve(b); }

// ---------------------------------------------------------------------------
// Compressed sparse row storage
// ---------------------------------------------------------------------------

class CsrMatrix {
 public:
  CsrMatrix() : row_offsets_(1, 0) {}

  /// Takes ownership of raw CSR arrays and checks the structural invariants.
  CsrMatrix(std::size_t n_rows, std::size_t n_cols, std::vector<Index> row_offsets,
            std::vector<Index> col_indices, Vector values)
      : n_rows_(n_rows),
        n_cols_(n_cols),
        row_offsets_(std::move(row_offsets)),
        col_indices_(std::move(col_indices)),
        values_(std::move(values)) {
    if (row_offsets_.size() != n_rows_ + 1 || row_offsets_.front() != 0)
      throw InvariantError("csr: row_offsets must have n_rows+1 entries starting at 0");
    if (row_offsets_.back() != col_indices_.size() || col_indices_.size() != values_.size())
      throw InvariantError("csr: last offset must equal nnz");
    for (std::size_t i = 0; i < n_rows_; ++i) {
      if (row_offsets_[i] > row_offsets_[i + 1]) throw InvariantError("csr: row offsets decrease at row " + std::to_string(i));
      for (Index k = row_offsets_[i]; k < row_offsets_[i + 1]; ++k) {
        if (col_indices_[k] >= n_cols_) throw InvariantError("csr: column index out of range in row " + std::to_string(i));
        if (k > row_offsets_[i] && col_indices_[k] <= col_indices_[k - 1])
          throw InvariantError("csr: column indices not strictly increasing in row " + std::to_string(i));
      }
    }
  }

  static CsrMatrix identity(std::size_t n) {
    std::vector<Index> off(n + 1), col(n);
    std::iota(off.begin(), off.end(), Index{0});
    std::iota(col.begin(), col.end(), Index{0});
    return {n, n, std::move(off), std::move(col), Vector(n, 1.0)};
  }

  /// Stores every entry of `a` whose magnitude exceeds `drop`.
  static CsrMatrix from_dense(const DenseMatrix& a, double drop = 0.0) {
    std::vector<Index> off{0}, col;
    Vector val;
    for (std::size_t i = 0; i < a.rows(); ++i) {
      for (std::size_t j = 0; j < a.cols(); ++j) {
        if (std::abs(a(i, j)) > drop) {
          col.push_back(j);
          val.push_back(a(i, j));
        }
      }
      off.push_back(col.size());
    }
    return {a.rows(), a.cols(), std::move(off), std::move(col), std::move(val)};
  }

  std::size_t n_rows() const noexcept { return n_rows_; }
  std::size_t n_cols() const noexcept { return n_cols_; }
  std::size_t nnz() const noexcept { return values_.size(); }
  const std::vector<Index>& row_offsets() const noexcept { return row_offsets_; }
  const std::vector<Index>& col_indices() const noexcept { return col_indices_; }
  const Vector& values() const noexcept { return values_; }

  /// Stored value at (i, j), or 0.
  double at(std::size_t i, std::size_t j) const {
    const auto first = col_indices_.begin() + static_cast<std::ptrdiff_t>(row_offsets_[i]);
    const auto last = col_indices_.begin() + static_cast<std::ptrdiff_t>(row_offsets_[i + 1]);
    const auto it = std::lower_bound(first, last, j);
    return it != last && *it == j ? values_[static_cast<std::size_t>(it - col_indices_.begin())] : 0.0;
  }

  DenseMatrix to_dense() const {
    DenseMatrix d(n_rows_, n_cols_);
    for (std::size_t i = 0; i < n_rows_; ++i)
      for (Index k = row_offsets_[i]; k < row_offsets_[i + 1]; ++k) d(i, col_indices_[k]) = values_[k];
    return d;
  }

 private:
  std::size_t n_rows_ = 0, n_cols_ = 0;
  std::vector<Index> row_offsets_;
  std::vector<Index> col_indices_;
  Vector values_;
};

inline void spmv(const CsrMatrix& a, std::span<const double> x, std::span<double> y) {
  if (x.size() != a.n_cols() || y.size() != a.n_rows()) throw Error("spmv: dimension mismatch");
  const auto& off = a.row_offsets();
  const auto& col = a.col_indices();
  const auto& val = a.values();
  for (std::size_t i = 0; i < a.n_rows(); ++i) {
    double s = 0.0;
    for (Index k = off[i]; k < off[i + 1]; ++k) s += val[k] * x[col[k]];
    y[i] = s;
  }
}

inline Vector spmv(const CsrMatrix& a, std::span<const double> x) {
  Vector y(a.n_rows());
  spmv(a, x, y);
  return y;
}

/// Nonzero percentage 100 * nnz / (rows * cols); 0 for an empty matrix.
inline double density(const CsrMatrix& a) {
  const double cells = static_cast<double>(a.n_rows()) * static_cast<double>(a.n_cols());
  return cells == 0.0 ? 0.0 : 100.0 * static_cast<double>(a.nnz()) / cells;
}

/// diag(d) + s * m for square m, keeping m's pattern plus the diagonal.
inline CsrMatrix add_scaled_to_diagonal(std::span<const double> d, const CsrMatrix& m, double s) {
  const std::size_t n = m.n_rows();
  if (m.n_cols() != n || d.size() != n) throw Error("add_scaled_to_diagonal: dimension mismatch");
  std::vector<Index> off{0}, col;
  Vector val;
  col.reserve(m.nnz() + n);
  val.reserve(m.nnz() + n);
  const auto& mo = m.row_offsets();
  for (std::size_t i = 0; i < n; ++i) {
    bool diag_done = false;
    for (Index k = mo[i]; k < mo[i + 1]; ++k) {
      const Index j = m.col_indices()[k];
      if (!diag_done && j >= i) {
        if (j > i) {
          col.push_back(i);
          val.push_back(d[i]);
        }
        diag_done = true;
      }
      col.push_back(j);
      val.push_back(j == i ? d[i] + s * m.values()[k] : s * m.values()[k]);
    }
    if (!diag_done) {
      col.push_back(i);
      val.push_back(d[i]);
    }
    off.push_back(col.size());
  }
  return {n, n, std::move(off), std::move(col), std::move(val)};
}

// ---------------------------------------------------------------------------
// Bi-CGSTAB
// ---------------------------------------------------------------------------

struct SolveReport {
  std::size_t iterations = 0;
  double final_residual = 0.0;  // ||b - A x||_2 / ||b||_2, recomputed on exit
  bool converged = false;
};

struct SolveResult {
  Vector x;
  SolveReport report;
};

struct BicgstabOptions {
  double tol = 1e-10;
  std::size_t maxit = 100;
  std::size_t true_residual_every = 25;
  double breakdown = 1e-300;
};

namespace detail {

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

inline void residual(const CsrMatrix& a, std::span<const double> b, std::span<const double> x, Vector& r) {
  spmv(a, x, r);
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = b[i] - r[i];
}

}  // namespace detail

/// Unpreconditioned Bi-CGSTAB with shadow residual r^_0 = r_0.
///
/// Stops when the relative residual ||r||/||b|| <= tol, testing after the s
/// update and after the x update. The recurrence residual is replaced by the
/// true residual every `true_residual_every` iterations, and any apparent
/// convergence is confirmed against the true residual (restarting on drift).
/// Breakdown of (r^_0, r) or (r^_0, v) throws ConvergenceError; hitting maxit
/// returns the last iterate with converged = false.
inline SolveResult bicgstab(const CsrMatrix& a, std::span<const double> b, Vector x0,
                            const BicgstabOptions& opt = {}) {
  const std::size_t n = a.n_rows();
  if (a.n_cols() != n) throw Error("bicgstab: matrix must be square");
  if (b.size() != n || x0.size() != n) throw Error("bicgstab: vector length mismatch");
  if (!(opt.tol > 0.0)) throw Error("bicgstab: tolerance must be positive");

  SolveResult out;
  Vector& x = out.x;
  x = std::move(x0);

  const double bnorm = detail::norm2(b);
  if (bnorm == 0.0) {
    std::fill(x.begin(), x.end(), 0.0);
    out.report = {0, 0.0, true};
    return out;
  }

  Vector r(n), r_hat(n), p(n, 0.0), v(n, 0.0), s(n), t(n);
  detail::residual(a, b, x, r);
  double rel = detail::norm2(r) / bnorm;
  if (rel <= opt.tol) {
    out.report = {0, rel, true};
    return out;
  }

  auto restart = [&] {
    r_hat = r;
    std::fill(p.begin(), p.end(), 0.0);
    std::fill(v.begin(), v.end(), 0.0);
  };
  restart();
  double rho_prev = 1.0, alpha = 1.0, omega = 1.0;

  // True-residual confirmation; false means drift, and the recurrence restarts.
  auto confirm = [&](std::size_t it) {
    detail::residual(a, b, x, r);
    rel = detail::norm2(r) / bnorm;
    if (rel <= opt.tol) {
      out.report = {it, rel, true};
      return true;
    }
    restart();
    rho_prev = alpha = omega = 1.0;
    return false;
  };

  for (std::size_t it = 1; it <= opt.maxit; ++it) {
    const double rho = detail::dot(r_hat, r);
    if (std::abs(rho) < opt.breakdown)
      throw ConvergenceError("bicgstab: breakdown (r^0, r) = 0 at iteration " + std::to_string(it), it, rel);
    const double beta = (rho / rho_prev) * (alpha / omega);
    for (std::size_t i = 0; i < n; ++i) p[i] = r[i] + beta * (p[i] - omega * v[i]);

    spmv(a, p, v);
    const double rv = detail::dot(r_hat, v);
    if (std::abs(rv) < opt.breakdown)
      throw ConvergenceError("bicgstab: breakdown (r^0, v) = 0 at iteration " + std::to_string(it), it, rel);
    alpha = rho / rv;
    for (std::size_t i = 0; i < n; ++i) s[i] = r[i] - alpha * v[i];

    if (detail::norm2(s) / bnorm <= opt.tol) {
      for (std::size_t i = 0; i < n; ++i) x[i] += alpha * p[i];
      if (confirm(it)) return out;
      continue;
    }

    spmv(a, s, t);
    const double tt = detail::dot(t, t);
    omega = tt > 0.0 ? detail::dot(t, s) / tt : 0.0;
    for (std::size_t i = 0; i < n; ++i) x[i] += alpha * p[i] + omega * s[i];
    for (std::size_t i = 0; i < n; ++i) r[i] = s[i] - omega * t[i];
    if (opt.true_residual_every > 0 && it % opt.true_residual_every == 0) detail::residual(a, b, x, r);

    rel = detail::norm2(r) / bnorm;
    if (rel <= opt.tol) {
      if (confirm(it)) return out;
      continue;
    }
    if (omega == 0.0)
      throw ConvergenceError("bicgstab: stagnation (omega = 0) at iteration " + std::to_string(it), it, rel);
    rho_prev = rho;
  }

  detail::residual(a, b, x, r);
  out.report = {opt.maxit, detail::norm2(r) / bnorm, false};
  return out;
}

}  // namespace fvfrac
