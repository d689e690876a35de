#ifndef ECMI_DIVERGENCE_HPP
#define ECMI_DIVERGENCE_HPP

// Binary KL divergence, its linear lower bound d_gamma, the half-mixture and
// affine inversions, and the optimizer over the feasible set
//   Gamma = { (g1, g2) : g1 (1 - g2) + (e^g1 - 1 - g1)(1 + g2^2) <= 0 }.
// Everything is in nats.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "ecmi/core.hpp"

namespace ecmi {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

namespace detail {

inline void require_prob(double v, const char* what) {
  if (!(v >= 0.0 && v <= 1.0)) {
    throw DomainError(std::string(what) + " must lie in [0,1], got " + std::to_string(v));
  }
}

// y * phi(x / y) with phi(t) = t ln t - t + 1 >= 0; +inf when x > 0 and y == 0.
// The series branch keeps full relative precision when x is close to y.
inline double weighted_phi(double x, double y) {
  if (y == 0.0) return x == 0.0 ? 0.0 : kInf;
  if (x == 0.0) return y;
  const double u = (x - y) / y;
  if (std::abs(u) < 1e-2) {
    double term = u * u, sum = 0.0;
    for (int k = 2; k <= 12; ++k) {
      sum += (k % 2 == 0 ? term : -term) / (k * (k - 1.0));
      term *= u;
    }
    return y * sum;
  }
  return y * ((1.0 + u) * std::log1p(u) - u);
}

}  // namespace detail

/// d(q || p) = q ln(q/p) + (1-q) ln((1-q)/(1-p)).
inline double binary_kl(double q, double p) {
  detail::require_prob(q, "q");
  detail::require_prob(p, "p");
  if (q == p) return 0.0;
  // The linear parts of the two phi terms cancel exactly, so both terms are nonnegative.
  return detail::weighted_phi(q, p) + detail::weighted_phi(1.0 - q, 1.0 - p);
}

/// d_gamma(q || p) = gamma q - ln(1 - p + p e^gamma).
inline double d_gamma(double q, double p, double gamma) {
  detail::require_prob(q, "q");
  detail::require_prob(p, "p");
  if (gamma == 0.0) return 0.0;
  double log_mgf;
  if (gamma > 0.0) {
    // ln(1 - p + p e^g) = g + ln(p + (1-p) e^-g); the second form avoids overflow.
    log_mgf = gamma > 1.0 ? gamma + std::log(p + (1.0 - p) * std::exp(-gamma))
                          : std::log1p(p * std::expm1(gamma));
  } else {
    log_mgf = std::log1p(p * std::expm1(gamma));
  }
  return gamma * q - log_mgf;
}

/// sup over gamma in [lo, hi] of d_gamma(q||p). d_gamma is concave in gamma,
/// so a golden-section search suffices.
inline double sup_d_gamma(double q, double p, double lo = -50.0, double hi = 50.0) {
  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  double a = lo, b = hi;
  double x1 = b - phi * (b - a), x2 = a + phi * (b - a);
  double f1 = d_gamma(q, p, x1), f2 = d_gamma(q, p, x2);
  for (int it = 0; it < 200 && b - a > 1e-12; ++it) {
    if (f1 < f2) {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + phi * (b - a);
      f2 = d_gamma(q, p, x2);
    } else {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - phi * (b - a);
      f1 = d_gamma(q, p, x1);
    }
  }
  return std::max({f1, f2, d_gamma(q, p, lo), d_gamma(q, p, hi), 0.0});
}

/// Absolute tolerance on the argument for every bisection in this header.
inline constexpr double kInversionTolerance = 1e-10;

/// d^-1(q, c) = sup{ p in [0,1] : d(q || (q+p)/2) <= c }.
inline double invert_kl_half(double q, double c) {
  detail::require_prob(q, "q");
  if (!(c >= 0.0)) throw DomainError("invert_kl_half needs c >= 0");
  auto f = [q](double p) { return binary_kl(q, 0.5 * (q + p)); };
  if (f(1.0) <= c) return 1.0;
  double lo = q, hi = 1.0;
  // Bisect well past the contract tolerance; it costs a handful of steps.
  while (hi - lo > 1e-3 * kInversionTolerance) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (f(mid) <= c) lo = mid; else hi = mid;
  }
  return lo;
}

/// Standard inversion sup{ p in [q,1] : d(q || p) <= c }.
inline double invert_kl_standard(double q, double c) {
  detail::require_prob(q, "q");
  if (!(c >= 0.0)) throw DomainError("invert_kl_standard needs c >= 0");
  if (q == 1.0) return 1.0;
  double lo = q, hi = 1.0;
  while (hi - lo > 1e-3 * kInversionTolerance) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (binary_kl(q, mid) <= c) lo = mid; else hi = mid;
  }
  return lo;
}

/// g_ab(x, y) = (a x + b y - min(a, b, a+b, 0)) / (|a| + |b|).
inline double g_ab(double x, double y, double a, double b) {
  if (a == 0.0 && b == 0.0) throw DomainError("g_ab needs (a,b) != (0,0)");
  const double shift = std::min({a, b, a + b, 0.0});
  const double v = (a * x + b * y - shift) / (std::abs(a) + std::abs(b));
  return std::clamp(v, 0.0, 1.0);
}

inline constexpr int kAffineGridPoints = 4096;

/// sup{ p in [0,1] : d(g_ab(q,p) || g_ab(m,m)) <= c }, m = (q+p)/2.
/// Monotonicity in p is not known for general (a,b), so a dense grid locates
/// the last feasible point and bisection refines the boundary after it.
inline double invert_kl_affine(double q, double c, double a, double b) {
  detail::require_prob(q, "q");
  if (!(c >= 0.0)) throw DomainError("invert_kl_affine needs c >= 0");
  if (a == 0.0 && b == 0.0) throw DomainError("invert_kl_affine needs (a,b) != (0,0)");
  auto f = [&](double p) {
    const double m = 0.5 * (q + p);
    return binary_kl(g_ab(q, p, a, b), g_ab(m, m, a, b));
  };
  const int last = kAffineGridPoints - 1;
  double best = q;  // p = q always gives zero divergence
  int best_idx = -1;
  for (int k = last; k >= 0; --k) {
    const double p = static_cast<double>(k) / last;
    if (p <= best) break;
    if (f(p) <= c) {
      best = p;
      best_idx = k;
      break;
    }
  }
  if (best_idx == last) return 1.0;
  double lo = best;
  double hi = best_idx >= 0 ? static_cast<double>(best_idx + 1) / last
                            : std::min(1.0, (std::floor(q * last) + 1.0) / last);
  if (hi <= lo) return lo;
  while (hi - lo > 1e-3 * kInversionTolerance) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (f(mid) <= c) lo = mid; else hi = mid;
  }
  return lo;
}

// ---------------------------------------------------------------------------
// Gamma set

inline constexpr double kGammaSlack = 1e-12;

inline double gamma_constraint(double g1, double g2) {
  const double c = std::expm1(g1) - g1;
  return g1 * (1.0 - g2) + c * (1.0 + g2 * g2);
}

inline bool gamma_feasible(const GammaPair& g) {
  if (!(g.gamma1 > 0.0) || !(g.gamma2 > 0.0)) {
    throw DomainError("gamma_feasible needs gamma1, gamma2 > 0");
  }
  return gamma_constraint(g.gamma1, g.gamma2) <= kGammaSlack;
}

/// h(g) = g^2 - 4 (e^g - 1)(e^g - 1 - g): the discriminant of the constraint
/// viewed as a quadratic in gamma2. Gamma has a point at gamma1 = g iff h(g) >= 0.
inline double interp_discriminant(double g) {
  return g * g - 4.0 * std::expm1(g) * (std::expm1(g) - g);
}

/// Largest gamma1 admitting a feasible gamma2 (bisection on [0.3, 0.4]).
/// Returns the feasible side of the bracket.
inline double optimal_interp_gamma() {
  double lo = 0.3, hi = 0.4;
  while (hi - lo > kInversionTolerance) {
    const double mid = 0.5 * (lo + hi);
    if (interp_discriminant(mid) >= 0.0) lo = mid; else hi = mid;
  }
  return lo;
}

/// Smallest feasible gamma2 for a given gamma1, or NaN when none exists.
inline double min_feasible_gamma2(double g1) {
  const double c = std::expm1(g1) - g1;
  const double vertex = g1 / (2.0 * c);
  if (gamma_constraint(g1, vertex) > kGammaSlack) return std::numeric_limits<double>::quiet_NaN();
  // The constraint is positive at gamma2 = 0 (it equals e^g1 - 1).
  double lo = 0.0, hi = vertex;
  for (int it = 0; it < 200 && hi - lo > 1e-14 * std::max(1.0, hi); ++it) {
    const double mid = 0.5 * (lo + hi);
    if (gamma_constraint(g1, mid) <= kGammaSlack) hi = mid; else lo = mid;
  }
  return hi;
}

struct LinearGammaResult {
  GammaPair gamma;
  double value = 0.0;
};

inline constexpr int kLinearGammaGrid = 2048;
inline constexpr double kLinearGammaMin = 1e-4;

/// The (gamma1, smallest feasible gamma2) pairs on a log grid of `grid`
/// gamma1 values in [1e-4, gamma1_opt]. Infeasible points are dropped.
inline std::vector<GammaPair> linear_gamma_frontier(int grid) {
  if (grid < 2) throw DomainError("linear gamma grid needs at least 2 points");
  const double top = optimal_interp_gamma();
  const double log_lo = std::log(kLinearGammaMin);
  const double log_hi = std::log(top);
  std::vector<GammaPair> out;
  out.reserve(static_cast<std::size_t>(grid));
  for (int k = 0; k < grid; ++k) {
    const double g1 = k == grid - 1 ? top : std::exp(log_lo + (log_hi - log_lo) * k / (grid - 1));
    const double g2 = min_feasible_gamma2(g1);
    if (!std::isnan(g2)) out.push_back({g1, g2});
  }
  return out;
}

/// Minimizes gamma2 * train_loss + info / gamma1 over the frontier.
inline LinearGammaResult optimize_linear_gamma(double train_loss, double info,
                                               int grid = kLinearGammaGrid) {
  detail::require_prob(train_loss, "training loss");
  if (!(info >= 0.0)) throw DomainError("information term must be non-negative");
  static const std::vector<GammaPair> default_frontier = linear_gamma_frontier(kLinearGammaGrid);
  const std::vector<GammaPair> custom =
      grid == kLinearGammaGrid ? std::vector<GammaPair>{} : linear_gamma_frontier(grid);
  const auto& frontier = grid == kLinearGammaGrid ? default_frontier : custom;
  LinearGammaResult best;
  best.value = kInf;
  for (const auto& g : frontier) {
    const double v = g.gamma2 * train_loss + info / g.gamma1;
    if (v < best.value) {
      best.value = v;
      best.gamma = g;
    }
  }
  best.value = std::max(0.0, best.value);
  return best;
}

}  // namespace ecmi

#endif  // ECMI_DIVERGENCE_HPP
