#ifndef SPDE_TUMOR_NOISE_HPP
#define SPDE_TUMOR_NOISE_HPP

#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

#include "spde_tumor/assembly.hpp"
#include "spde_tumor/constitutive.hpp"
#include "spde_tumor/mesh.hpp"
#include "spde_tumor/sparse.hpp"

namespace spde_tumor {

inline constexpr std::uint64_t kGoldenGamma = 0x9E3779B97F4A7C15ULL;

inline std::uint64_t splitmix64_mix(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Seed of ensemble member `sample_index`.
inline std::uint64_t derive_sample_seed(std::uint64_t base_seed, std::uint64_t sample_index) {
  return splitmix64_mix(base_seed ^ ((sample_index + 1) * kGoldenGamma));
}

/// Inverse of the standard normal CDF, Wichura's AS 241 (PPND16), relative
/// accuracy about 1e-16.
inline double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::domain_error("normal_quantile: p must lie in (0,1)");
  const double q = p - 0.5;
  if (std::abs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    return q *
           (((((((2509.0809287301226727 * r + 33430.575583588128105) * r + 67265.770927008700853) * r +
                45921.953931549871457) * r + 13731.693765509461125) * r + 1971.5909503065514427) * r +
             133.14166789178437745) * r + 3.387132872796366608) /
           (((((((5226.495278852545925 * r + 28729.085735721942674) * r + 39307.89580009271061) * r +
                21213.794301586595867) * r + 5394.1960214247511077) * r + 687.1870074920579083) * r +
             42.313330701600911252) * r + 1.0);
  }
  double r = q < 0.0 ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double val;
  if (r <= 5.0) {
    r -= 1.6;
    val = (((((((7.7454501427834140764e-4 * r + 0.0227238449892691845833) * r + 0.24178072517745061177) * r +
               1.27045825245236838258) * r + 3.64784832476320460504) * r + 5.7694972214606914055) * r +
            4.6303378461565452959) * r + 1.42343711074968357734) /
          (((((((1.05075007164441684324e-9 * r + 5.475938084995344946e-4) * r + 0.0151986665636164571966) * r +
               0.14810397642748007459) * r + 0.68976733498510000455) * r + 1.6763848301838038494) * r +
            2.05319162663775882187) * r + 1.0);
  } else {
    r -= 5.0;
    val = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r + 0.0012426609473880784386) * r +
               0.026532189526576123093) * r + 0.29656057182850489123) * r + 1.7848265399172913358) * r +
            5.4637849111641143699) * r + 6.6579046435011037772) /
          (((((((2.04426310338993978564e-15 * r + 1.4215117583164458887e-7) * r + 1.8463183175100546818e-5) * r +
               7.868691311456132591e-4) * r + 0.0148753612908506148525) * r + 0.13692988092273580531) * r +
            0.59983220655588793769) * r + 1.0);
  }
  return q < 0.0 ? -val : val;
}

/// Counter-based stream: the k-th uniform is splitmix64_mix(seed + (k+1)*gamma)
/// mapped to the open interval (0,1) with 53 bits, and the k-th normal is its
/// AS 241 quantile. Same seed gives the same sequence on any IEEE-754 host.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed = 0) : seed_(seed) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t position() const { return counter_; }

  double uniform() {
    ++counter_;
    const std::uint64_t bits = splitmix64_mix(seed_ + counter_ * kGoldenGamma) >> 11;
    return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
  }

  double normal() { return normal_quantile(uniform()); }

 private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
};

/// n independent N(0, dt) draws; always consumes exactly n normals.
inline std::vector<double> wiener_increment(RngStream& rng, std::size_t n, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("wiener_increment: dt must be positive");
  const double s = std::sqrt(dt);
  std::vector<double> xi(n);
  for (auto& v : xi) v = s * rng.normal();
  return xi;
}

enum class NoiseModes { Nodal, Cosine };

struct NoiseSpec {
  double nu = 0.5;          // tumor noise intensity
  double sigma_amp = 1.0;   // additive nutrient noise amplitude
  std::vector<double> q;    // nodal mode variances; empty means all 1
  bool mass_project = true;
  NoiseModes modes = NoiseModes::Nodal;
  double cosine_decay = 1.0;  // q_{jk} = (1 + j^2 + k^2)^(-decay) for cosine modes

  double q_at(std::size_t k) const { return q.empty() ? 1.0 : q[k]; }
};

/// Nodal values of the truncated Wiener increment sum_k sqrt(q_k) xi_k e_k.
///
/// Nodal modes: e_k is the k-th nodal basis function. Cosine modes: e_{jk} is
/// the L2-normalised Neumann eigenfunction cos(j pi x / lx) cos(k pi y / ly),
/// 0 <= j <= nx, 0 <= k <= ny, with xi indexed as k*(nx+1)+j.
inline std::vector<double> wiener_field(const Grid& grid, const NoiseSpec& spec, std::span<const double> xi) {
  require_size(xi.size(), grid.num_nodes(), "wiener_field");
  const std::size_t nx1 = grid.nx() + 1;
  const std::size_t ny1 = grid.ny() + 1;
  std::vector<double> w(grid.num_nodes(), 0.0);
  if (spec.modes == NoiseModes::Nodal) {
    for (std::size_t k = 0; k < w.size(); ++k) w[k] = std::sqrt(spec.q_at(k)) * xi[k];
    return w;
  }
  auto basis_1d = [](std::size_t n1, double len) {
    // table[mode * n1 + node]
    std::vector<double> t(n1 * n1);
    const double h = len / static_cast<double>(n1 - 1);
    for (std::size_t m = 0; m < n1; ++m) {
      const double scale = m == 0 ? std::sqrt(1.0 / len) : std::sqrt(2.0 / len);
      for (std::size_t i = 0; i < n1; ++i)
        t[m * n1 + i] = scale * std::cos(static_cast<double>(m) * std::numbers::pi * static_cast<double>(i) * h / len);
    }
    return t;
  };
  const auto bx = basis_1d(nx1, grid.lx());
  const auto by = basis_1d(ny1, grid.ly());
  // Coefficients c_{jk} = sqrt(q_jk) xi_jk, then two 1-D synthesis passes.
  std::vector<double> tmp(ny1 * nx1, 0.0);  // [k][i]
  for (std::size_t k = 0; k < ny1; ++k)
    for (std::size_t j = 0; j < nx1; ++j) {
      const double qjk = std::pow(1.0 + static_cast<double>(j * j + k * k), -spec.cosine_decay);
      const double c = std::sqrt(qjk) * xi[k * nx1 + j];
      if (c == 0.0) continue;
      for (std::size_t i = 0; i < nx1; ++i) tmp[k * nx1 + i] += c * bx[j * nx1 + i];
    }
  for (std::size_t k = 0; k < ny1; ++k)
    for (std::size_t jn = 0; jn < ny1; ++jn) {
      const double byk = by[k * ny1 + jn];
      for (std::size_t i = 0; i < nx1; ++i) w[jn * nx1 + i] += byk * tmp[k * nx1 + i];
    }
  return w;
}

inline std::vector<double> project_noise(const SparseMatrix& mass, std::vector<double> v, bool mass_project) {
  if (!mass_project) return v;
  return spmv(mass, v);
}

/// Tumor noise load: nodal nu * phi_+ (1 - phi)_+ times the Wiener field,
/// tested against the basis (M v) when mass_project is set.
inline std::vector<double> noise_load_phi(const Grid& grid, const SparseMatrix& mass, std::span<const double> phi,
                                          const NoiseSpec& spec, std::span<const double> xi) {
  require_size(phi.size(), grid.num_nodes(), "noise_load_phi phi");
  require_size(xi.size(), grid.num_nodes(), "noise_load_phi xi");
  auto v = wiener_field(grid, spec, xi);
  for (std::size_t k = 0; k < v.size(); ++k) {
    const double p = clamp01(phi[k]);
    v[k] *= spec.nu * p * (1.0 - p);
  }
  return project_noise(mass, std::move(v), spec.mass_project);
}

/// Additive nutrient noise load sigma_amp * W.
inline std::vector<double> noise_load_sigma(const Grid& grid, const SparseMatrix& mass, const NoiseSpec& spec,
                                            std::span<const double> xi2) {
  require_size(xi2.size(), grid.num_nodes(), "noise_load_sigma xi");
  auto v = wiener_field(grid, spec, xi2);
  for (auto& x : v) x *= spec.sigma_amp;
  return project_noise(mass, std::move(v), spec.mass_project);
}

}  // namespace spde_tumor

#endif  // SPDE_TUMOR_NOISE_HPP
