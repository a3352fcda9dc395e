#ifndef SPDE_TUMOR_LINALG_HPP
#define SPDE_TUMOR_LINALG_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/SparseCore>
#include <Eigen/OrderingMethods>
#include <Eigen/SparseLU>

#include "spde_tumor/sparse.hpp"

namespace spde_tumor {

class NonConvergence : public std::runtime_error {
 public:
  NonConvergence(const std::string& what, std::size_t iterations, double residual)
      : std::runtime_error(what + " (iterations " + std::to_string(iterations) + ", relative residual " +
                           std::to_string(residual) + ")"),
        iterations_(iterations),
        residual_(residual) {}

  std::size_t iterations() const { return iterations_; }
  double residual() const { return residual_; }

 private:
  std::size_t iterations_;
  double residual_;
};

inline double norm2(std::span<const double> v) { return std::sqrt(dot(v, v)); }

inline double residual_norm(const SparseMatrix& a, std::span<const double> x, std::span<const double> b) {
  auto r = spmv(a, x);
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = b[i] - r[i];
  return norm2(r);
}

/// Denominator of the relative residual test.
inline double residual_scale(std::span<const double> b) {
  return std::max(norm2(b), std::numeric_limits<double>::min());
}

struct SolveStats {
  std::size_t iterations = 0;
  double relative_residual = 0.0;
};

/// Restarted GMRES(restart) with right Jacobi preconditioning, so the
/// monitored residual is the true one. Sequential, hence bitwise
/// reproducible.
inline std::vector<double> gmres(const SparseMatrix& a, std::span<const double> b, double tol, std::size_t max_iter,
                                 std::size_t restart = 50, std::span<const double> x0 = {},
                                 SolveStats* stats = nullptr) {
  if (a.nrows != a.ncols) throw DimensionError("gmres: matrix must be square");
  require_size(b.size(), a.nrows, "gmres rhs");
  if (!(tol > 0.0)) throw std::invalid_argument("gmres: tol must be positive");
  const std::size_t n = a.nrows;

  std::vector<double> inv_diag(n, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double d = a.at(i, i);
    if (d != 0.0) inv_diag[i] = 1.0 / d;
  }

  std::vector<double> x(n, 0.0);
  if (!x0.empty()) {
    require_size(x0.size(), n, "gmres initial guess");
    std::copy(x0.begin(), x0.end(), x.begin());
  }
  const double bnorm = residual_scale(b);
  const double target = tol * bnorm;

  const std::size_t m = std::max<std::size_t>(1, std::min(restart, n));
  std::vector<std::vector<double>> v(m + 1, std::vector<double>(n));
  std::vector<double> h((m + 1) * m, 0.0);
  std::vector<double> cs(m), sn(m), g(m + 1), w(n), z(n);

  std::size_t iters = 0;
  double rnorm = residual_norm(a, x, b);
  while (true) {
    if (rnorm <= target) break;
    if (iters >= max_iter) throw NonConvergence("gmres: maximum iterations reached", iters, rnorm / bnorm);

    spmv(a, x, w);
    for (std::size_t i = 0; i < n; ++i) v[0][i] = (b[i] - w[i]) / rnorm;
    std::fill(g.begin(), g.end(), 0.0);
    g[0] = rnorm;
    std::fill(h.begin(), h.end(), 0.0);

    std::size_t k = 0;
    for (; k < m && iters < max_iter; ++k, ++iters) {
      for (std::size_t i = 0; i < n; ++i) z[i] = inv_diag[i] * v[k][i];
      spmv(a, z, w);
      for (std::size_t j = 0; j <= k; ++j) {
        const double hj = dot(w, v[j]);
        h[j * m + k] = hj;
        for (std::size_t i = 0; i < n; ++i) w[i] -= hj * v[j][i];
      }
      const double hn = norm2(w);
      h[(k + 1) * m + k] = hn;
      if (hn > 0.0)
        for (std::size_t i = 0; i < n; ++i) v[k + 1][i] = w[i] / hn;

      for (std::size_t j = 0; j < k; ++j) {
        const double t = cs[j] * h[j * m + k] + sn[j] * h[(j + 1) * m + k];
        h[(j + 1) * m + k] = -sn[j] * h[j * m + k] + cs[j] * h[(j + 1) * m + k];
        h[j * m + k] = t;
      }
      const double hkk = h[k * m + k];
      const double hk1 = h[(k + 1) * m + k];
      const double denom = std::hypot(hkk, hk1);
      cs[k] = denom > 0.0 ? hkk / denom : 1.0;
      sn[k] = denom > 0.0 ? hk1 / denom : 0.0;
      h[k * m + k] = denom;
      h[(k + 1) * m + k] = 0.0;
      g[k + 1] = -sn[k] * g[k];
      g[k] = cs[k] * g[k];
      if (std::abs(g[k + 1]) <= target || hn == 0.0) {
        ++k;
        ++iters;
        break;
      }
    }

    // Back substitution for the Krylov coefficients.
    std::vector<double> y(k, 0.0);
    for (std::size_t ii = k; ii-- > 0;) {
      double s = g[ii];
      for (std::size_t j = ii + 1; j < k; ++j) s -= h[ii * m + j] * y[j];
      y[ii] = h[ii * m + ii] != 0.0 ? s / h[ii * m + ii] : 0.0;
    }
    std::fill(z.begin(), z.end(), 0.0);
    for (std::size_t j = 0; j < k; ++j)
      for (std::size_t i = 0; i < n; ++i) z[i] += y[j] * v[j][i];
    for (std::size_t i = 0; i < n; ++i) x[i] += inv_diag[i] * z[i];

    const double previous = rnorm;
    rnorm = residual_norm(a, x, b);
    // A full cycle without progress means the Krylov space cannot reach b.
    if (k == m && rnorm >= previous * (1.0 - 1e-14) && rnorm > target)
      throw NonConvergence("gmres: stagnation", iters, rnorm / bnorm);
  }
  if (stats != nullptr) *stats = {iters, rnorm / bnorm};
  return x;
}

/// GMRES(50) with Jacobi preconditioning.
inline std::vector<double> solve(const SparseMatrix& a, std::span<const double> b, double tol, std::size_t max_iter) {
  return gmres(a, b, tol, max_iter);
}

/// Dense LU with partial pivoting on a row-major n*n array.
inline std::vector<double> dense_lu_solve(std::vector<double> a, std::vector<double> b) {
  const std::size_t n = b.size();
  require_size(a.size(), n * n, "dense_lu_solve");
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::abs(a[r * n + c]) > std::abs(a[piv * n + c])) piv = r;
    if (a[piv * n + c] == 0.0) throw NonConvergence("dense_lu_solve: singular matrix", c, 0.0);
    if (piv != c) {
      for (std::size_t j = 0; j < n; ++j) std::swap(a[c * n + j], a[piv * n + j]);
      std::swap(b[c], b[piv]);
    }
    for (std::size_t r = c + 1; r < n; ++r) {
      const double f = a[r * n + c] / a[c * n + c];
      if (f == 0.0) continue;
      for (std::size_t j = c; j < n; ++j) a[r * n + j] -= f * a[c * n + j];
      b[r] -= f * b[c];
    }
  }
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t j = i + 1; j < n; ++j) s -= a[i * n + j] * b[j];
    b[i] = s / a[i * n + i];
  }
  return b;
}

enum class SolverKind { SparseLU, Gmres, DenseLU };

inline std::string to_string(SolverKind k) {
  switch (k) {
    case SolverKind::SparseLU: return "sparse_lu";
    case SolverKind::Gmres: return "gmres";
    case SolverKind::DenseLU: return "dense_lu";
  }
  return "sparse_lu";
}

/// Stateful solver for a sequence of systems sharing one sparsity pattern.
/// The sparse LU path analyses the pattern once and refactorises per call;
/// every path checks the residual contract before returning.
class LinearSolver {
 public:
  explicit LinearSolver(SolverKind kind = SolverKind::SparseLU, double tol = 1e-10, std::size_t max_iter = 0)
      : kind_(kind), tol_(tol), max_iter_(max_iter) {}

  SolverKind kind() const { return kind_; }
  double tol() const { return tol_; }
  const SolveStats& last_stats() const { return stats_; }

  /// Elimination position of each grid node. Systems whose size is a multiple
  /// of the node count are treated as field-major blocks and interleaved per
  /// node in this order for the sparse LU path.
  void set_node_ordering(std::vector<std::size_t> positions) { node_positions_ = std::move(positions); }

  std::vector<double> solve(const SparseMatrix& a, std::span<const double> b, std::span<const double> x0 = {}) {
    std::vector<double> x;
    switch (kind_) {
      case SolverKind::Gmres: {
        const std::size_t max_iter = max_iter_ > 0 ? max_iter_ : 10 * a.nrows;
        x = gmres(a, b, tol_, max_iter, 50, x0, &stats_);
        return x;
      }
      case SolverKind::DenseLU:
        x = dense_lu_solve(a.to_dense(), std::vector<double>(b.begin(), b.end()));
        break;
      case SolverKind::SparseLU:
        x = sparse_lu(a, b);
        break;
    }
    const double rel = residual_norm(a, x, b) / residual_scale(b);
    stats_ = {1, rel};
    if (!(rel <= tol_)) throw NonConvergence("linear solve: residual above tolerance", 1, rel);
    return x;
  }

 private:
  using ColMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;

  std::vector<double> sparse_lu(const SparseMatrix& a, std::span<const double> b) {
    if (a.nrows != a.ncols) throw DimensionError("sparse LU: matrix must be square");
    require_size(b.size(), a.nrows, "sparse LU rhs");
    const std::size_t n = a.nrows;
    const bool ordered = !node_positions_.empty() && n % node_positions_.size() == 0;
    std::vector<int> perm(n);
    if (ordered) {
      // Unknown r = field * nodes + node goes to blocks * pos[node] + field.
      const std::size_t nodes = node_positions_.size();
      const std::size_t blocks = n / nodes;
      for (std::size_t r = 0; r < n; ++r)
        perm[r] = static_cast<int>(blocks * node_positions_[r % nodes] + r / nodes);
    } else {
      for (std::size_t r = 0; r < n; ++r) perm[r] = static_cast<int>(r);
    }

    std::vector<Eigen::Triplet<double, int>> triplets;
    triplets.reserve(a.nnz());
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = a.row_offsets[i]; k < a.row_offsets[i + 1]; ++k)
        triplets.emplace_back(perm[i], perm[a.col_indices[k]], a.values[k]);
    ColMatrix mat(static_cast<int>(n), static_cast<int>(n));
    mat.setFromTriplets(triplets.begin(), triplets.end());
    Eigen::VectorXd rhs(static_cast<Eigen::Index>(n));
    for (std::size_t r = 0; r < n; ++r) rhs[perm[r]] = b[r];

    const bool same = analysed_ordered_ == ordered && analysed_rows_ == a.row_offsets &&
                      analysed_cols_ == a.col_indices && (lu_natural_ || lu_colamd_);
    Eigen::VectorXd sol;
    // Threshold pivoting keeps the fill of the chosen ordering; a full
    // partial-pivoting refactorisation is the fallback.
    for (double threshold : {kRelaxedPivot, 1.0}) {
      if (ordered) {
        if (!same || !lu_natural_ || threshold != pivot_) {
          lu_natural_ = std::make_unique<Eigen::SparseLU<ColMatrix, Eigen::NaturalOrdering<int>>>();
          lu_natural_->setPivotThreshold(threshold);
          lu_natural_->analyzePattern(mat);
        }
        lu_natural_->factorize(mat);
        if (lu_natural_->info() != Eigen::Success) continue;
        sol = lu_natural_->solve(rhs);
      } else {
        if (!same || !lu_colamd_ || threshold != pivot_) {
          lu_colamd_ = std::make_unique<Eigen::SparseLU<ColMatrix>>();
          lu_colamd_->setPivotThreshold(threshold);
          lu_colamd_->analyzePattern(mat);
        }
        lu_colamd_->factorize(mat);
        if (lu_colamd_->info() != Eigen::Success) continue;
        sol = lu_colamd_->solve(rhs);
      }
      pivot_ = threshold;
      analysed_ordered_ = ordered;
      analysed_rows_ = a.row_offsets;
      analysed_cols_ = a.col_indices;
      std::vector<double> x(n);
      for (std::size_t r = 0; r < n; ++r) x[r] = sol[perm[r]];
      if (threshold == 1.0 || residual_norm(a, x, b) <= tol_ * residual_scale(b)) return x;
    }
    throw NonConvergence("sparse LU: factorisation failed", 0, 0.0);
  }

  static constexpr double kRelaxedPivot = 0.01;

  SolverKind kind_;
  double tol_;
  std::size_t max_iter_;
  SolveStats stats_{};
  std::vector<std::size_t> node_positions_;
  std::unique_ptr<Eigen::SparseLU<ColMatrix, Eigen::NaturalOrdering<int>>> lu_natural_;
  std::unique_ptr<Eigen::SparseLU<ColMatrix>> lu_colamd_;
  double pivot_ = 0.0;
  bool analysed_ordered_ = false;
  std::vector<std::size_t> analysed_rows_, analysed_cols_;
};

}  // namespace spde_tumor

#endif  // SPDE_TUMOR_LINALG_HPP
