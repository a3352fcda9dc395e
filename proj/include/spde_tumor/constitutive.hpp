#ifndef SPDE_TUMOR_CONSTITUTIVE_HPP
#define SPDE_TUMOR_CONSTITUTIVE_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

namespace spde_tumor {

/// Quartic double well 1/4 x^2 (1-x)^2. c_psi is the lower bound constant
/// for Psi'' used to build the monotone part gamma(r) = Psi'(r) + c_psi r.
struct PotentialSpec {
  double c_psi = 0.25;
};

enum class GrowthKind { Logistic, Gompertz };

struct GrowthSpec {
  GrowthKind kind = GrowthKind::Logistic;
};

enum class MobilityKind { Constant, QuarticInterface };

struct MobilitySpec {
  MobilityKind kind = MobilityKind::Constant;
  double value = 1.0;  // Constant: the value. QuarticInterface: the floor m0.

  static MobilitySpec constant(double v) { return {MobilityKind::Constant, v}; }
  static MobilitySpec quartic_interface(double floor) {
    return {MobilityKind::QuarticInterface, floor};
  }

  double lower_bound() const { return value; }
  double upper_bound() const {
    return kind == MobilityKind::Constant ? value : value + 1.0 / 16.0;
  }
};

inline double clamp01(double x) { return std::clamp(x, 0.0, 1.0); }

inline double psi(double x, const PotentialSpec& = {}) {
  const double w = x * (1.0 - x);
  return 0.25 * w * w;
}

inline double psi_prime(double x, const PotentialSpec& = {}) {
  return x * x * x - 1.5 * x * x + 0.5 * x;
}

inline double psi_second(double x, const PotentialSpec& = {}) {
  return 3.0 * x * x - 3.0 * x + 0.5;
}

/// Convex-concave splitting of Psi'. The expansive derivative is taken at the
/// old time level; the contractive part contractive_coeff * x is implicit.
struct PsiSplit {
  double expansive_prime;
  double contractive_coeff;
};

inline constexpr double kContractiveCoeff = 0.75;

inline double psi_expansive_prime(double x) {
  return x * x * x - 1.5 * x * x - 0.25 * x;
}

inline PsiSplit psi_split(double x) {
  return {psi_expansive_prime(x), kContractiveCoeff};
}

/// Evaluated on clamp(x, 0, 1) so the image stays in [0, 1].
inline double growth_f(double x, const GrowthSpec& spec) {
  const double y = clamp01(x);
  switch (spec.kind) {
    case GrowthKind::Logistic:
      return y * (1.0 - y);
    case GrowthKind::Gompertz:
      return y > 0.0 ? -y * std::log(y) : 0.0;
  }
  return 0.0;
}

inline double mobility(double x, const MobilitySpec& spec) {
  switch (spec.kind) {
    case MobilityKind::Constant:
      return spec.value;
    case MobilityKind::QuarticInterface: {
      if (x < 0.0 || x > 1.0) return spec.value;
      const double w = x * (1.0 - x);
      return spec.value + w * w;
    }
  }
  return spec.value;
}

/// Smooth bump of radius 1/4 centred at (1/2, 1/2), extended by zero.
inline double initial_phi0(double x, double y) {
  const double dx = x - 0.5;
  const double dy = y - 0.5;
  const double s = 16.0 * (dx * dx + dy * dy);
  if (s >= 1.0) return 0.0;
  return std::exp(1.0 - 1.0 / (1.0 - s));
}

// ---------------------------------------------------------------------------
// Yosida regularisation of the monotone part gamma(r) = Psi'(r) + c_psi r.

inline double yosida_gamma(double r, const PotentialSpec& spec = {}) {
  return psi_prime(r, spec) + spec.c_psi * r;
}

inline double yosida_gamma_prime(double r, const PotentialSpec& spec = {}) {
  return psi_second(r, spec) + spec.c_psi;
}

class ResolventError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Solves y + lam * gamma(y) = r. Newton steps are accepted only while they
/// stay inside the current sign bracket; otherwise the bracket is bisected.
inline double yosida_resolvent(double r, double lam, const PotentialSpec& spec = {}) {
  if (!(lam > 0.0)) throw std::invalid_argument("yosida_resolvent: lambda must be positive");
  auto residual = [&](double y) { return y + lam * yosida_gamma(y, spec) - r; };

  const double g = std::abs(yosida_gamma(r, spec));
  double lo = r - lam * g - 1.0;
  double hi = r + lam * g + 1.0;
  double flo = residual(lo);
  double fhi = residual(hi);
  // The residual is strictly increasing, so the bracket only needs widening
  // when gamma'(r) is far from the values seen on [lo, hi].
  while (flo > 0.0) { lo -= 2.0 * (hi - lo); flo = residual(lo); }
  while (fhi < 0.0) { hi += 2.0 * (hi - lo); fhi = residual(hi); }

  const double tol = 1e-12 * std::max(1.0, std::abs(r));
  double y = r / (1.0 + lam * std::max(0.0, yosida_gamma_prime(r, spec)));
  if (y <= lo || y >= hi) y = 0.5 * (lo + hi);
  for (int it = 0; it < 400; ++it) {
    const double fy = residual(y);
    if (std::abs(fy) <= 0.25 * tol) return y;
    if (fy < 0.0) lo = y; else hi = y;
    const double dfy = 1.0 + lam * yosida_gamma_prime(y, spec);
    double next = y - fy / dfy;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (next == y) break;
    y = next;
  }
  if (std::abs(residual(y)) <= tol) return y;
  throw ResolventError("yosida_resolvent: no convergence for r=" + std::to_string(r) +
                       " lambda=" + std::to_string(lam));
}

inline double yosida_gamma_lambda(double r, double lam, const PotentialSpec& spec = {}) {
  return (r - yosida_resolvent(r, lam, spec)) / lam;
}

/// Psi_lambda(r) = Psi(0) - c/2 r^2 + int_0^r gamma_lambda, with 64 panels of
/// 4-point Gauss-Legendre.
inline double yosida_psi_lambda(double r, double lam, const PotentialSpec& spec = {}) {
  constexpr int kPanels = 64;
  static constexpr std::array<double, 4> nodes = {-0.8611363115940526, -0.3399810435848563,
                                                  0.3399810435848563, 0.8611363115940526};
  static constexpr std::array<double, 4> weights = {0.3478548451374538, 0.6521451548625461,
                                                    0.6521451548625461, 0.3478548451374538};
  const double h = r / kPanels;
  double integral = 0.0;
  for (int p = 0; p < kPanels; ++p) {
    const double mid = (p + 0.5) * h;
    for (std::size_t q = 0; q < nodes.size(); ++q)
      integral += weights[q] * yosida_gamma_lambda(mid + 0.5 * h * nodes[q], lam, spec);
  }
  integral *= 0.5 * h;
  return psi(0.0, spec) - 0.5 * spec.c_psi * r * r + integral;
}

inline double yosida_psi_lambda_prime(double r, double lam, const PotentialSpec& spec = {}) {
  return yosida_gamma_lambda(r, lam, spec) - spec.c_psi * r;
}

inline std::string to_string(GrowthKind k) {
  return k == GrowthKind::Logistic ? "logistic" : "gompertz";
}

inline std::string to_string(MobilityKind k) {
  return k == MobilityKind::Constant ? "constant" : "quartic_interface";
}

}  // namespace spde_tumor

#endif  // SPDE_TUMOR_CONSTITUTIVE_HPP
