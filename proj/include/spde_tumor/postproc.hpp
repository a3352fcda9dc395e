#ifndef SPDE_TUMOR_POSTPROC_HPP
#define SPDE_TUMOR_POSTPROC_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "spde_tumor/assembly.hpp"
#include "spde_tumor/constitutive.hpp"
#include "spde_tumor/mesh.hpp"
#include "spde_tumor/sparse.hpp"
#include "spde_tumor/stepper.hpp"

namespace spde_tumor {

/// 1^T M u: the exact integral of the Q1 interpolant of u.
inline double field_integral(const Grid& grid, const SparseMatrix& mass, std::span<const double> u) {
  require_size(u.size(), grid.num_nodes(), "field_integral");
  const auto mu = spmv(mass, u);
  double s = 0.0;
  for (double v : mu) s += v;
  return s;
}

struct EnergyParts {
  double gradient = 0.0;   // eps^2/2 |grad phi|^2
  double potential = 0.0;  // Psi(phi)
  double nutrient = 0.0;   // 1/2 sigma^2
  double coupling = 0.0;   // -chi phi sigma

  double total() const { return gradient + potential + nutrient + coupling; }
};

/// Ginzburg-Landau energy with nutrient terms, integrated by 2x2 Gauss
/// quadrature of the interpolated fields (same rule as assembly).
inline EnergyParts energy_parts(const Grid& grid, std::span<const double> phi, std::span<const double> sigma,
                                const ModelParams& params) {
  require_size(phi.size(), grid.num_nodes(), "energy phi");
  require_size(sigma.size(), grid.num_nodes(), "energy sigma");
  const detail::ElementTables tab(grid.hx(), grid.hy());
  const double eps2 = params.epsilon * params.epsilon;
  EnergyParts e;
  for (std::size_t el = 0; el < grid.num_elements(); ++el) {
    const auto nodes = grid.element_nodes(el);
    for (std::size_t q = 0; q < 4; ++q) {
      double p = 0.0, s = 0.0, gx = 0.0, gy = 0.0;
      for (std::size_t a = 0; a < 4; ++a) {
        p += tab.n[q][a] * phi[nodes[a]];
        s += tab.n[q][a] * sigma[nodes[a]];
        gx += tab.grad[q][a].x * phi[nodes[a]];
        gy += tab.grad[q][a].y * phi[nodes[a]];
      }
      const double w = tab.jxw[q];
      e.gradient += w * 0.5 * eps2 * (gx * gx + gy * gy);
      e.potential += w * psi(p, params.potential);
      e.nutrient += w * 0.5 * s * s;
      e.coupling -= w * params.chi * p * s;
    }
  }
  return e;
}

inline double energy(const Grid& grid, std::span<const double> phi, std::span<const double> sigma,
                     const ModelParams& params) {
  return energy_parts(grid, phi, sigma, params).total();
}

/// Ginzburg-Landau part only (gradient + potential).
inline double phase_energy(const Grid& grid, std::span<const double> phi, const ModelParams& params) {
  const std::vector<double> zero(phi.size(), 0.0);
  const auto e = energy_parts(grid, phi, zero, params);
  return e.gradient + e.potential;
}

// ---------------------------------------------------------------------------
// Contours

struct Contour {
  std::vector<std::vector<Point2>> polylines;
  double level = 0.0;

  double perimeter() const {
    double len = 0.0;
    for (const auto& pl : polylines)
      for (std::size_t i = 1; i < pl.size(); ++i) len += std::hypot(pl[i].x - pl[i - 1].x, pl[i].y - pl[i - 1].y);
    return len;
  }

  std::size_t num_segments() const {
    std::size_t n = 0;
    for (const auto& pl : polylines) n += pl.empty() ? 0 : pl.size() - 1;
    return n;
  }
};

namespace detail {

// Grid edge ids: horizontal edge from node (i,j) to (i+1,j) is 2*node,
// vertical edge from (i,j) to (i,j+1) is 2*node+1. Vertices are keyed by
// edge so shared endpoints compare exactly.
struct EdgeVertex {
  std::size_t edge;
  Point2 p;
};

}  // namespace detail

/// Marching squares with linear interpolation along cell edges. A node counts
/// as inside when u >= level. Saddle cells are resolved by the cell-centre
/// average: if the average is inside, the two inside corners are connected.
inline Contour extract_contour(const Grid& grid, std::span<const double> u, double level) {
  require_size(u.size(), grid.num_nodes(), "extract_contour");
  if (!std::isfinite(level)) throw std::invalid_argument("extract_contour: level must be finite");
  Contour c;
  c.level = level;

  auto vertex_on = [&](std::size_t a, std::size_t b, std::size_t edge) {
    const auto pa = grid.node_coord(a);
    const auto pb = grid.node_coord(b);
    const double t = (level - u[a]) / (u[b] - u[a]);
    return detail::EdgeVertex{edge, {pa.x + t * (pb.x - pa.x), pa.y + t * (pb.y - pa.y)}};
  };

  std::vector<std::pair<detail::EdgeVertex, detail::EdgeVertex>> segments;
  for (std::size_t e = 0; e < grid.num_elements(); ++e) {
    const auto n = grid.element_nodes(e);  // ll, lr, ur, ul
    unsigned mask = 0;
    for (std::size_t a = 0; a < 4; ++a)
      if (u[n[a]] >= level) mask |= 1u << a;
    if (mask == 0 || mask == 15) continue;
    // Cell edges: 0 bottom (ll-lr), 1 right (lr-ur), 2 top (ul-ur), 3 left (ll-ul).
    const std::array<detail::EdgeVertex, 4> ev = {
        vertex_on(n[0], n[1], 2 * n[0]), vertex_on(n[1], n[2], 2 * n[1] + 1),
        vertex_on(n[3], n[2], 2 * n[3]), vertex_on(n[0], n[3], 2 * n[0] + 1)};
    auto crossed = [&](std::size_t edge) {
      static constexpr std::array<std::array<std::size_t, 2>, 4> ends = {{{0, 1}, {1, 2}, {3, 2}, {0, 3}}};
      const bool ia = (mask >> ends[edge][0]) & 1u;
      const bool ib = (mask >> ends[edge][1]) & 1u;
      return ia != ib;
    };
    if (mask == 5 || mask == 10) {
      const double centre = 0.25 * (u[n[0]] + u[n[1]] + u[n[2]] + u[n[3]]);
      const bool centre_in = centre >= level;
      // mask 5: ll and ur inside. Connected inside corners leave the outside
      // corners lr and ul isolated.
      const bool isolate_lr_ul = (mask == 5) == centre_in;
      if (isolate_lr_ul) {
        segments.push_back({ev[0], ev[1]});  // around lr
        segments.push_back({ev[2], ev[3]});  // around ul
      } else {
        segments.push_back({ev[3], ev[0]});  // around ll
        segments.push_back({ev[1], ev[2]});  // around ur
      }
      continue;
    }
    std::array<std::size_t, 2> hit{};
    std::size_t nh = 0;
    for (std::size_t edge = 0; edge < 4; ++edge)
      if (crossed(edge)) hit[nh++] = edge;
    segments.push_back({ev[hit[0]], ev[hit[1]]});
  }

  // Join segments sharing edge vertices into polylines.
  std::map<std::size_t, std::vector<std::size_t>> by_edge;
  for (std::size_t s = 0; s < segments.size(); ++s) {
    by_edge[segments[s].first.edge].push_back(s);
    by_edge[segments[s].second.edge].push_back(s);
  }
  std::vector<bool> used(segments.size(), false);
  auto other_end = [&](std::size_t s, std::size_t edge) {
    return segments[s].first.edge == edge ? segments[s].second : segments[s].first;
  };
  auto extend = [&](std::vector<detail::EdgeVertex>& chain) {
    while (true) {
      const std::size_t tail = chain.back().edge;
      bool grown = false;
      for (auto s : by_edge[tail]) {
        if (used[s]) continue;
        used[s] = true;
        chain.push_back(other_end(s, tail));
        grown = true;
        break;
      }
      if (!grown || chain.back().edge == chain.front().edge) return;
    }
  };
  for (std::size_t s = 0; s < segments.size(); ++s) {
    if (used[s]) continue;
    used[s] = true;
    std::vector<detail::EdgeVertex> chain = {segments[s].first, segments[s].second};
    extend(chain);
    if (chain.back().edge != chain.front().edge) {
      std::reverse(chain.begin(), chain.end());
      extend(chain);
    }
    std::vector<Point2> pl;
    pl.reserve(chain.size());
    for (const auto& v : chain) pl.push_back(v.p);
    c.polylines.push_back(std::move(pl));
  }
  return c;
}

inline double contour_perimeter(const Grid& grid, std::span<const double> u, double level) {
  return extract_contour(grid, u, level).perimeter();
}

// ---------------------------------------------------------------------------
// Export

class IoError : public std::runtime_error {
 public:
  IoError(const std::string& what, const std::filesystem::path& path)
      : std::runtime_error(what + ": " + path.string()) {}
};

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::ofstream open_output(const std::filesystem::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing", path);
  return out;
}

inline void close_output(std::ofstream& out, const std::filesystem::path& path) {
  out.close();
  if (!out) throw IoError("write failed", path);
}

/// Header `time,<names...>`, values as %.17g, LF line endings.
inline void write_csv_timeseries(const std::filesystem::path& path, std::span<const double> times,
                                 const std::vector<std::pair<std::string, std::vector<double>>>& columns) {
  for (const auto& [name, col] : columns) require_size(col.size(), times.size(), "write_csv_timeseries column");
  auto out = open_output(path);
  out << "time";
  for (const auto& [name, col] : columns) out << ',' << name;
  out << '\n';
  for (std::size_t r = 0; r < times.size(); ++r) {
    out << format_double(times[r]);
    for (const auto& [name, col] : columns) out << ',' << format_double(col[r]);
    out << '\n';
  }
  close_output(out, path);
}

/// Legacy ASCII VTK, STRUCTURED_POINTS with one POINT_DATA scalar per field.
inline void write_vtk_field(const std::filesystem::path& path, const Grid& grid,
                            const std::vector<std::pair<std::string, std::vector<double>>>& fields) {
  for (const auto& [name, f] : fields) require_size(f.size(), grid.num_nodes(), "write_vtk_field");
  auto out = open_output(path);
  out << "# vtk DataFile Version 3.0\n";
  out << "spde_tumor fields\n";
  out << "ASCII\n";
  out << "DATASET STRUCTURED_POINTS\n";
  out << "DIMENSIONS " << grid.nx() + 1 << ' ' << grid.ny() + 1 << " 1\n";
  out << "ORIGIN 0 0 0\n";
  out << "SPACING " << format_double(grid.hx()) << ' ' << format_double(grid.hy()) << " 1\n";
  out << "POINT_DATA " << grid.num_nodes() << '\n';
  for (const auto& [name, f] : fields) {
    out << "SCALARS " << name << " double 1\n";
    out << "LOOKUP_TABLE default\n";
    for (double v : f) out << format_double(v) << '\n';
  }
  close_output(out, path);
}

/// One row per vertex: polyline index, x, y.
inline void write_contour_csv(const std::filesystem::path& path, const Contour& c) {
  auto out = open_output(path);
  out << "polyline,x,y\n";
  for (std::size_t i = 0; i < c.polylines.size(); ++i)
    for (const auto& p : c.polylines[i]) out << i << ',' << format_double(p.x) << ',' << format_double(p.y) << '\n';
  close_output(out, path);
}

}  // namespace spde_tumor

#endif  // SPDE_TUMOR_POSTPROC_HPP
