#ifndef SPDE_TUMOR_SPARSE_HPP
#define SPDE_TUMOR_SPARSE_HPP

#include <algorithm>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace spde_tumor {

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline void require_size(std::size_t got, std::size_t want, const char* what) {
  if (got != want)
    throw DimensionError(std::string(what) + ": expected length " + std::to_string(want) +
                         ", got " + std::to_string(got));
}

/// Compressed sparse row matrix. Column indices are strictly increasing
/// within a row.
struct SparseMatrix {
  std::size_t nrows = 0;
  std::size_t ncols = 0;
  std::vector<std::size_t> row_offsets{0};
  std::vector<std::size_t> col_indices;
  std::vector<double> values;

  std::size_t nnz() const { return values.size(); }

  /// Position of (row, col) in values, or npos when not in the pattern.
  std::size_t find(std::size_t row, std::size_t col) const {
    const auto first = col_indices.begin() + static_cast<std::ptrdiff_t>(row_offsets[row]);
    const auto last = col_indices.begin() + static_cast<std::ptrdiff_t>(row_offsets[row + 1]);
    const auto it = std::lower_bound(first, last, col);
    if (it == last || *it != col) return npos;
    return static_cast<std::size_t>(it - col_indices.begin());
  }

  double at(std::size_t row, std::size_t col) const {
    const auto k = find(row, col);
    return k == npos ? 0.0 : values[k];
  }

  bool same_pattern(const SparseMatrix& o) const {
    return nrows == o.nrows && ncols == o.ncols && row_offsets == o.row_offsets &&
           col_indices == o.col_indices;
  }

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  static SparseMatrix identity(std::size_t n) {
    SparseMatrix a;
    a.nrows = a.ncols = n;
    a.row_offsets.resize(n + 1);
    a.col_indices.resize(n);
    a.values.assign(n, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
      a.row_offsets[i + 1] = i + 1;
      a.col_indices[i] = i;
    }
    return a;
  }

  /// Builds from a row-major dense array; exact zeros are dropped.
  static SparseMatrix from_dense(std::size_t nrows, std::size_t ncols, std::span<const double> dense) {
    require_size(dense.size(), nrows * ncols, "SparseMatrix::from_dense");
    SparseMatrix a;
    a.nrows = nrows;
    a.ncols = ncols;
    a.row_offsets.assign(nrows + 1, 0);
    for (std::size_t i = 0; i < nrows; ++i) {
      for (std::size_t j = 0; j < ncols; ++j) {
        const double v = dense[i * ncols + j];
        if (v != 0.0) {
          a.col_indices.push_back(j);
          a.values.push_back(v);
        }
      }
      a.row_offsets[i + 1] = a.values.size();
    }
    return a;
  }

  std::vector<double> to_dense() const {
    std::vector<double> d(nrows * ncols, 0.0);
    for (std::size_t i = 0; i < nrows; ++i)
      for (std::size_t k = row_offsets[i]; k < row_offsets[i + 1]; ++k)
        d[i * ncols + col_indices[k]] = values[k];
    return d;
  }
};

inline void spmv(const SparseMatrix& a, std::span<const double> x, std::span<double> y) {
  require_size(x.size(), a.ncols, "spmv input");
  require_size(y.size(), a.nrows, "spmv output");
  for (std::size_t i = 0; i < a.nrows; ++i) {
    double s = 0.0;
    for (std::size_t k = a.row_offsets[i]; k < a.row_offsets[i + 1]; ++k)
      s += a.values[k] * x[a.col_indices[k]];
    y[i] = s;
  }
}

inline std::vector<double> spmv(const SparseMatrix& a, std::span<const double> x) {
  std::vector<double> y(a.nrows);
  spmv(a, x, y);
  return y;
}

/// y += alpha * A x
inline void spmv_add(const SparseMatrix& a, double alpha, std::span<const double> x, std::span<double> y) {
  require_size(x.size(), a.ncols, "spmv_add input");
  require_size(y.size(), a.nrows, "spmv_add output");
  for (std::size_t i = 0; i < a.nrows; ++i) {
    double s = 0.0;
    for (std::size_t k = a.row_offsets[i]; k < a.row_offsets[i + 1]; ++k)
      s += a.values[k] * x[a.col_indices[k]];
    y[i] += alpha * s;
  }
}

inline SparseMatrix transpose(const SparseMatrix& a) {
  SparseMatrix t;
  t.nrows = a.ncols;
  t.ncols = a.nrows;
  t.row_offsets.assign(t.nrows + 1, 0);
  for (auto c : a.col_indices) ++t.row_offsets[c + 1];
  for (std::size_t i = 0; i < t.nrows; ++i) t.row_offsets[i + 1] += t.row_offsets[i];
  t.col_indices.resize(a.nnz());
  t.values.resize(a.nnz());
  auto next = t.row_offsets;
  for (std::size_t i = 0; i < a.nrows; ++i)
    for (std::size_t k = a.row_offsets[i]; k < a.row_offsets[i + 1]; ++k) {
      const auto pos = next[a.col_indices[k]]++;
      t.col_indices[pos] = i;
      t.values[pos] = a.values[k];
    }
  return t;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  require_size(b.size(), a.size(), "dot");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

/// Quadratic form x^T A y.
inline double bilinear(const SparseMatrix& a, std::span<const double> x, std::span<const double> y) {
  return dot(x, spmv(a, y));
}

}  // namespace spde_tumor

#endif  // SPDE_TUMOR_SPARSE_HPP
