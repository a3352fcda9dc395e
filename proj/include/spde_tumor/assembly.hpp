#ifndef SPDE_TUMOR_ASSEMBLY_HPP
#define SPDE_TUMOR_ASSEMBLY_HPP

#include <array>
#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "spde_tumor/mesh.hpp"
#include "spde_tumor/sparse.hpp"

namespace spde_tumor {

using NodalField = std::vector<double>;

/// Symbolic phase of Q1 assembly: the shared 9-point CSR pattern plus, for
/// every element, the 16 value slots its local matrix scatters into.
class Q1Pattern {
 public:
  explicit Q1Pattern(const Grid& grid) : grid_(grid) {
    const std::size_t n = grid.num_nodes();
    const std::size_t nx1 = grid.nx() + 1;
    const std::size_t ny1 = grid.ny() + 1;
    proto_.nrows = proto_.ncols = n;
    proto_.row_offsets.assign(n + 1, 0);
    for (std::size_t id = 0; id < n; ++id) {
      const std::size_t i = grid.node_i(id);
      const std::size_t j = grid.node_j(id);
      for (std::size_t jj = (j > 0 ? j - 1 : 0); jj <= std::min(j + 1, ny1 - 1); ++jj)
        for (std::size_t ii = (i > 0 ? i - 1 : 0); ii <= std::min(i + 1, nx1 - 1); ++ii)
          proto_.col_indices.push_back(grid.node_id(ii, jj));
      proto_.row_offsets[id + 1] = proto_.col_indices.size();
    }
    proto_.values.assign(proto_.col_indices.size(), 0.0);

    slots_.resize(grid.num_elements());
    for (std::size_t e = 0; e < grid.num_elements(); ++e) {
      const auto nodes = grid.element_nodes(e);
      for (std::size_t a = 0; a < 4; ++a)
        for (std::size_t b = 0; b < 4; ++b) slots_[e][a * 4 + b] = proto_.find(nodes[a], nodes[b]);
    }
  }

  const Grid& grid() const { return grid_; }
  const SparseMatrix& prototype() const { return proto_; }
  const std::array<std::size_t, 16>& slots(std::size_t e) const { return slots_[e]; }

  SparseMatrix zero_matrix() const { return proto_; }

 private:
  Grid grid_;
  SparseMatrix proto_;
  std::vector<std::array<std::size_t, 16>> slots_;
};

namespace detail {

// Reference quantities at the 2x2 Gauss points, shared by every element of a
// uniform grid.
struct ElementTables {
  std::array<std::array<double, 4>, 4> n{};      // [q][a]
  std::array<std::array<Point2, 4>, 4> grad{};   // [q][a]
  std::array<double, 4> jxw{};                   // [q]

  ElementTables(double hx, double hy) {
    const auto qp = gauss_points_2x2();
    for (std::size_t q = 0; q < 4; ++q) {
      n[q] = shape_values(qp[q].xi, qp[q].eta);
      grad[q] = shape_gradients(qp[q].xi, qp[q].eta, hx, hy);
      jxw[q] = qp[q].weight * 0.25 * hx * hy;
    }
  }
};

enum class Operator { Mass, Stiffness };

inline void assemble_into(const Q1Pattern& pattern, Operator op, const double* weight,
                          SparseMatrix& out) {
  const Grid& g = pattern.grid();
  const ElementTables tab(g.hx(), g.hy());
  std::fill(out.values.begin(), out.values.end(), 0.0);
  for (std::size_t e = 0; e < g.num_elements(); ++e) {
    const auto nodes = g.element_nodes(e);
    std::array<double, 16> local{};
    for (std::size_t q = 0; q < 4; ++q) {
      double w = 1.0;
      if (weight != nullptr) {
        w = 0.0;
        for (std::size_t c = 0; c < 4; ++c) w += tab.n[q][c] * weight[nodes[c]];
      }
      const double s = w * tab.jxw[q];
      for (std::size_t a = 0; a < 4; ++a)
        for (std::size_t b = 0; b < 4; ++b) {
          const double v = op == Operator::Mass
                               ? tab.n[q][a] * tab.n[q][b]
                               : tab.grad[q][a].x * tab.grad[q][b].x + tab.grad[q][a].y * tab.grad[q][b].y;
          local[a * 4 + b] += s * v;
        }
    }
    const auto& slot = pattern.slots(e);
    for (std::size_t k = 0; k < 16; ++k) out.values[slot[k]] += local[k];
  }
}

}  // namespace detail

inline SparseMatrix assemble_mass(const Q1Pattern& pattern) {
  auto m = pattern.zero_matrix();
  detail::assemble_into(pattern, detail::Operator::Mass, nullptr, m);
  return m;
}

inline SparseMatrix assemble_stiffness(const Q1Pattern& pattern) {
  auto k = pattern.zero_matrix();
  detail::assemble_into(pattern, detail::Operator::Stiffness, nullptr, k);
  return k;
}

/// Weight is interpolated bilinearly from its nodal values and evaluated at
/// the Gauss points. `out` must carry the pattern's structure.
inline void assemble_weighted_mass(const Q1Pattern& pattern, std::span<const double> w, SparseMatrix& out) {
  require_size(w.size(), pattern.grid().num_nodes(), "assemble_weighted_mass weight");
  if (!out.same_pattern(pattern.prototype())) out = pattern.zero_matrix();
  detail::assemble_into(pattern, detail::Operator::Mass, w.data(), out);
}

inline void assemble_weighted_stiffness(const Q1Pattern& pattern, std::span<const double> w, SparseMatrix& out) {
  require_size(w.size(), pattern.grid().num_nodes(), "assemble_weighted_stiffness weight");
  if (!out.same_pattern(pattern.prototype())) out = pattern.zero_matrix();
  detail::assemble_into(pattern, detail::Operator::Stiffness, w.data(), out);
}

inline SparseMatrix assemble_weighted_mass(const Q1Pattern& pattern, std::span<const double> w) {
  SparseMatrix out;
  assemble_weighted_mass(pattern, w, out);
  return out;
}

inline SparseMatrix assemble_weighted_stiffness(const Q1Pattern& pattern, std::span<const double> w) {
  SparseMatrix out;
  assemble_weighted_stiffness(pattern, w, out);
  return out;
}

inline SparseMatrix assemble_mass(const Grid& grid) { return assemble_mass(Q1Pattern(grid)); }
inline SparseMatrix assemble_stiffness(const Grid& grid) { return assemble_stiffness(Q1Pattern(grid)); }
inline SparseMatrix assemble_weighted_mass(const Grid& grid, std::span<const double> w) {
  return assemble_weighted_mass(Q1Pattern(grid), w);
}
inline SparseMatrix assemble_weighted_stiffness(const Grid& grid, std::span<const double> w) {
  return assemble_weighted_stiffness(Q1Pattern(grid), w);
}

/// Row sums of M on the diagonal.
inline SparseMatrix lump(const SparseMatrix& m) {
  SparseMatrix d = SparseMatrix::identity(m.nrows);
  for (std::size_t i = 0; i < m.nrows; ++i) {
    double s = 0.0;
    for (std::size_t k = m.row_offsets[i]; k < m.row_offsets[i + 1]; ++k) s += m.values[k];
    d.values[i] = s;
  }
  return d;
}

/// Load vector [(g_h, w_j)] of the Q1 interpolant g_h of nodal values g, i.e.
/// the consistent-mass product M g computed element by element.
inline std::vector<double> load_vector(const Grid& grid, std::span<const double> g) {
  require_size(g.size(), grid.num_nodes(), "load_vector");
  const detail::ElementTables tab(grid.hx(), grid.hy());
  std::vector<double> out(grid.num_nodes(), 0.0);
  for (std::size_t e = 0; e < grid.num_elements(); ++e) {
    const auto nodes = grid.element_nodes(e);
    for (std::size_t q = 0; q < 4; ++q) {
      double gq = 0.0;
      for (std::size_t c = 0; c < 4; ++c) gq += tab.n[q][c] * g[nodes[c]];
      for (std::size_t a = 0; a < 4; ++a) out[nodes[a]] += gq * tab.n[q][a] * tab.jxw[q];
    }
  }
  return out;
}

}  // namespace spde_tumor

#endif  // SPDE_TUMOR_ASSEMBLY_HPP
