#ifndef SPDE_TUMOR_MESH_HPP
#define SPDE_TUMOR_MESH_HPP

#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace spde_tumor {

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

/// Uniform rectangular grid of nx * ny bilinear (Q1) elements on [0,lx]x[0,ly].
///
/// Node (i, j) has id j*(nx+1)+i. Element e = ey*nx+ex lists its corners
/// counterclockwise from the lower-left node; every assembly routine relies on
/// this local order.
class Grid {
 public:
  Grid(std::size_t nx, std::size_t ny, double lx, double ly) : nx_(nx), ny_(ny), lx_(lx), ly_(ly) {
    if (nx == 0 || ny == 0) throw std::invalid_argument("Grid: element counts must be positive");
    if (!(lx > 0.0) || !(ly > 0.0) || !std::isfinite(lx) || !std::isfinite(ly))
      throw std::invalid_argument("Grid: extents must be positive and finite");
    hx_ = lx / static_cast<double>(nx);
    hy_ = ly / static_cast<double>(ny);
  }

  std::size_t nx() const { return nx_; }
  std::size_t ny() const { return ny_; }
  double lx() const { return lx_; }
  double ly() const { return ly_; }
  double hx() const { return hx_; }
  double hy() const { return hy_; }

  std::size_t num_nodes() const { return (nx_ + 1) * (ny_ + 1); }
  std::size_t num_elements() const { return nx_ * ny_; }

  std::size_t node_id(std::size_t i, std::size_t j) const { return j * (nx_ + 1) + i; }
  std::size_t node_i(std::size_t id) const { return id % (nx_ + 1); }
  std::size_t node_j(std::size_t id) const { return id / (nx_ + 1); }

  Point2 node_coord(std::size_t id) const {
    return {static_cast<double>(node_i(id)) * hx_, static_cast<double>(node_j(id)) * hy_};
  }

  bool is_boundary_node(std::size_t id) const {
    const auto i = node_i(id);
    const auto j = node_j(id);
    return i == 0 || j == 0 || i == nx_ || j == ny_;
  }

  std::array<std::size_t, 4> element_nodes(std::size_t e) const {
    const std::size_t ex = e % nx_;
    const std::size_t ey = e / nx_;
    const std::size_t ll = node_id(ex, ey);
    return {ll, ll + 1, ll + 1 + (nx_ + 1), ll + (nx_ + 1)};
  }

  Point2 element_origin(std::size_t e) const {
    return {static_cast<double>(e % nx_) * hx_, static_cast<double>(e / nx_) * hy_};
  }

 private:
  std::size_t nx_, ny_;
  double lx_, ly_;
  double hx_ = 0.0, hy_ = 0.0;
};

/// Geometric nested dissection of the node lattice: returns pos[node], the
/// elimination position of each node. Regions are split across their longer
/// side by a grid line, which is ordered after both halves.
inline std::vector<std::size_t> nested_dissection_positions(const Grid& grid, std::size_t leaf_size = 16) {
  std::vector<std::size_t> order;
  order.reserve(grid.num_nodes());
  struct Box { std::size_t i0, i1, j0, j1; };
  // Explicit stack of (box, separator) work items keeps the recursion shallow
  // for large grids.
  struct Item { Box box; bool emit_separator_of_parent; Box sep; };
  auto emit = [&](const Box& b) {
    for (std::size_t j = b.j0; j <= b.j1; ++j)
      for (std::size_t i = b.i0; i <= b.i1; ++i) order.push_back(grid.node_id(i, j));
  };
  std::vector<Item> stack;
  stack.push_back({{0, grid.nx(), 0, grid.ny()}, false, {}});
  while (!stack.empty()) {
    Item it = stack.back();
    stack.pop_back();
    if (it.emit_separator_of_parent) {
      emit(it.sep);
      continue;
    }
    const Box b = it.box;
    const std::size_t w = b.i1 - b.i0 + 1;
    const std::size_t h = b.j1 - b.j0 + 1;
    if (w * h <= leaf_size || (w < 3 && h < 3)) {
      emit(b);
      continue;
    }
    Box first{}, second{}, sep{};
    bool has_first = true;
    if (w >= h) {
      const std::size_t m = b.i0 + w / 2;
      has_first = m > b.i0;
      first = {b.i0, m - (has_first ? 1 : 0), b.j0, b.j1};
      second = {m + 1, b.i1, b.j0, b.j1};
      sep = {m, m, b.j0, b.j1};
    } else {
      const std::size_t m = b.j0 + h / 2;
      has_first = m > b.j0;
      first = {b.i0, b.i1, b.j0, m - (has_first ? 1 : 0)};
      second = {b.i0, b.i1, m + 1, b.j1};
      sep = {b.i0, b.i1, m, m};
    }
    // LIFO: first half, then second half, then the separator.
    stack.push_back({{}, true, sep});
    const bool has_second = (w >= h) ? (second.i0 <= second.i1) : (second.j0 <= second.j1);
    if (has_second) stack.push_back({second, false, {}});
    if (has_first) stack.push_back({first, false, {}});
  }
  std::vector<std::size_t> pos(grid.num_nodes());
  for (std::size_t k = 0; k < order.size(); ++k) pos[order[k]] = k;
  return pos;
}

inline Grid build_grid(std::size_t nx, std::size_t ny, double lx, double ly) {
  return Grid(nx, ny, lx, ly);
}

// Reference square [-1,1]^2, corners (-1,-1), (1,-1), (1,1), (-1,1).
inline constexpr std::array<double, 4> kCornerXi = {-1.0, 1.0, 1.0, -1.0};
inline constexpr std::array<double, 4> kCornerEta = {-1.0, -1.0, 1.0, 1.0};

inline std::array<double, 4> shape_values(double xi, double eta) {
  std::array<double, 4> n{};
  for (std::size_t a = 0; a < 4; ++a)
    n[a] = 0.25 * (1.0 + kCornerXi[a] * xi) * (1.0 + kCornerEta[a] * eta);
  return n;
}

/// Physical gradients (d/dx, d/dy) on an hx * hy rectangle.
inline std::array<Point2, 4> shape_gradients(double xi, double eta, double hx, double hy) {
  std::array<Point2, 4> g{};
  for (std::size_t a = 0; a < 4; ++a) {
    const double dxi = 0.25 * kCornerXi[a] * (1.0 + kCornerEta[a] * eta);
    const double deta = 0.25 * kCornerEta[a] * (1.0 + kCornerXi[a] * xi);
    g[a] = {dxi * 2.0 / hx, deta * 2.0 / hy};
  }
  return g;
}

struct QuadPoint {
  double xi;
  double eta;
  double weight;
};

inline std::array<QuadPoint, 4> gauss_points_2x2() {
  const double g = 1.0 / std::sqrt(3.0);
  return {QuadPoint{-g, -g, 1.0}, QuadPoint{g, -g, 1.0}, QuadPoint{g, g, 1.0},
          QuadPoint{-g, g, 1.0}};
}

}  // namespace spde_tumor

#endif  // SPDE_TUMOR_MESH_HPP
