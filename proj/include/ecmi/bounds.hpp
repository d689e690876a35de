#ifndef ECMI_BOUNDS_HPP
#define ECMI_BOUNDS_HPP

// Every bound as a pure function of estimated information terms. Loss-valued
// and gap-valued results are clamped to [0,1] in `value`; `raw_value` keeps
// the unclamped number. The squared bound is reported unclamped.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ecmi/core.hpp"
#include "ecmi/divergence.hpp"

namespace ecmi {

namespace detail {

inline void require_nonneg(std::span<const double> xs, const char* what) {
  for (double x : xs) {
    if (!(x >= 0.0)) throw DomainError(std::string(what) + " must be non-negative");
  }
}

inline BoundReport make_report(BoundKind kind, double raw) {
  BoundReport r;
  r.kind = kind;
  r.raw_value = raw;
  r.value = std::clamp(raw, 0.0, 1.0);
  r.vacuous = raw >= 1.0;
  return r;
}

inline double mean_of(std::span<const double> xs) {
  if (xs.empty()) throw DimensionError("empty list");
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

inline double mean_sqrt2(std::span<const double> xs) {
  double s = 0.0;
  for (double x : xs) s += std::sqrt(2.0 * x);
  return s / static_cast<double>(xs.size());
}

inline double mean_sqrt2_over_rows(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) throw DimensionError("need at least one row of estimates");
  const std::size_t n = rows.front().size();
  if (n == 0) throw DimensionError("rows must be non-empty");
  double total = 0.0;
  for (const auto& r : rows) {
    if (r.size() != n) throw DimensionError("all rows must have the same length");
    require_nonneg(r, "e-CMI");
    for (double x : r) total += std::sqrt(2.0 * x);
  }
  return total / static_cast<double>(n * rows.size());
}

}  // namespace detail

/// (1/n) sum_i sqrt(2 I_i). Bounds |population - training|.
inline BoundReport sqrt_bound_integrated(std::span<const double> per_i) {
  if (per_i.empty()) throw DimensionError("sqrt bound needs at least one index");
  detail::require_nonneg(per_i, "e-CMI");
  auto r = detail::make_report(BoundKind::sqrt_integrated, detail::mean_sqrt2(per_i));
  r.per_index_ecmi.assign(per_i.begin(), per_i.end());
  return r;
}

/// (1/n) sum_i mean over supersample draws of sqrt(2 I_i^z). Input is [draw][i].
inline BoundReport sqrt_bound_disintegrated(const std::vector<std::vector<double>>& per_draw) {
  auto r = detail::make_report(BoundKind::sqrt_disintegrated, detail::mean_sqrt2_over_rows(per_draw));
  r.per_index_ecmi.assign(per_draw.front().size(), 0.0);
  for (const auto& row : per_draw) {
    for (std::size_t i = 0; i < row.size(); ++i) r.per_index_ecmi[i] += row[i] / per_draw.size();
  }
  return r;
}

/// (8/m)(I + 2), bounding the mean squared gap. Not clamped; vacuous when >= 1.
inline BoundReport squared_bound(double info_m, int m) {
  if (m < 1) throw DomainError("squared bound needs m >= 1");
  if (!(info_m >= 0.0)) throw DomainError("information term must be non-negative");
  BoundReport r;
  r.kind = BoundKind::squared;
  r.raw_value = 8.0 / m * (info_m + 2.0);
  r.value = r.raw_value;
  r.vacuous = r.raw_value >= 1.0;
  if (r.vacuous) r.note = "exceeds the largest possible squared gap";
  return r;
}

/// Mean over (z, r) rows of (1/n) sum_i sqrt(2 I_i^{z,r}). Input is [row][i].
inline BoundReport r_conditioned_sqrt_bound(const std::vector<std::vector<double>>& per_row) {
  return detail::make_report(BoundKind::r_conditioned_sqrt, detail::mean_sqrt2_over_rows(per_row));
}

/// min over Gamma of gamma2 * L + B / gamma1.
inline BoundReport linear_bound(double train_loss, double info) {
  const auto opt = optimize_linear_gamma(train_loss, info);
  auto r = detail::make_report(BoundKind::linear, opt.value);
  r.gamma = opt.gamma;
  r.train_loss = train_loss;
  return r;
}

inline constexpr double kInterpolationTolerance = 1e-9;

/// B / ln 2, only for interpolating learners.
inline BoundReport interpolation_bound(double train_loss, double info) {
  if (!(info >= 0.0)) throw DomainError("information term must be non-negative");
  auto r = detail::make_report(BoundKind::interpolation, info / std::log(2.0));
  r.train_loss = train_loss;
  if (std::abs(train_loss) > kInterpolationTolerance) {
    r.applicable = false;
    r.note = "training loss is non-zero; the interpolation bound needs an interpolating learner";
  }
  return r;
}

/// d^-1(L, B).
inline BoundReport binary_kl_bound(double train_loss, double info) {
  auto r = detail::make_report(BoundKind::binary_kl, invert_kl_half(train_loss, info));
  r.train_loss = train_loss;
  return r;
}

/// Mean over supersample draws of d^-1(L_z, B_z).
inline BoundReport binary_kl_bound_disintegrated(std::span<const double> train_losses,
                                                 std::span<const double> infos) {
  if (train_losses.size() != infos.size() || infos.empty()) {
    throw DimensionError("need matching, non-empty per-draw lists");
  }
  double s = 0.0;
  for (std::size_t k = 0; k < infos.size(); ++k) s += invert_kl_half(train_losses[k], infos[k]);
  auto r = detail::make_report(BoundKind::binary_kl_disintegrated, s / infos.size());
  r.train_loss = detail::mean_of(train_losses);
  return r;
}

/// Mean over supersample draws of 2 - 2 e^{-B_z}. The closed form exceeds 1
/// once B_z > ln 2; each term is capped at 1 in `value` (where the inversion
/// over [0,1] saturates) and left uncapped in `raw_value`.
inline BoundReport kl_interp_bound_disintegrated(std::span<const double> infos) {
  if (infos.empty()) throw DimensionError("need at least one draw");
  detail::require_nonneg(infos, "e-CMI");
  double raw = 0.0, capped = 0.0;
  for (double b : infos) {
    const double v = -2.0 * std::expm1(-b);
    raw += v;
    capped += std::min(1.0, v);
  }
  BoundReport r;
  r.kind = BoundKind::kl_interp_disintegrated;
  r.raw_value = raw / infos.size();
  r.value = capped / infos.size();
  r.vacuous = r.value >= 1.0;
  r.train_loss = 0.0;
  return r;
}

/// d_ab^-1(L, B) for one (a, b).
inline BoundReport affine_kl_bound(double train_loss, double info, double a, double b) {
  auto r = detail::make_report(BoundKind::affine_kl, invert_kl_affine(train_loss, info, a, b));
  r.affine_ab = std::make_pair(a, b);
  r.train_loss = train_loss;
  return r;
}

inline constexpr std::array<std::pair<double, double>, 4> kAffineGrid = {
    std::pair{1.0, 0.0}, std::pair{0.0, 1.0}, std::pair{1.0, -1.0}, std::pair{2.0, -1.0}};

/// Smallest affine bound over the fixed (a, b) grid; ties keep the earlier pair.
inline BoundReport affine_kl_bound_grid(double train_loss, double info) {
  BoundReport best;
  bool first = true;
  for (const auto& [a, b] : kAffineGrid) {
    auto r = affine_kl_bound(train_loss, info, a, b);
    if (first || r.raw_value < best.raw_value) {
      best = r;
      first = false;
    }
  }
  return best;
}

/// Standard-setting bound: sup{ p : d(L || p) <= (1/n) sum_i I(W; Z_i) }.
inline BoundReport mi_seeger_bound(double train_loss, std::span<const double> per_i_mi) {
  if (per_i_mi.empty()) throw DimensionError("need at least one index");
  detail::require_nonneg(per_i_mi, "mutual information");
  const double c = detail::mean_of(per_i_mi);
  auto r = detail::make_report(BoundKind::mi_seeger, invert_kl_standard(train_loss, c));
  r.per_index_ecmi.assign(per_i_mi.begin(), per_i_mi.end());
  r.train_loss = train_loss;
  return r;
}

// ---------------------------------------------------------------------------
// High-probability bounds

namespace detail {

inline void require_highprob(long long n, double delta) {
  if (n < 2) throw DomainError("high-probability bounds need n >= 2");
  if (!(delta > 0.0 && delta < 1.0)) throw DomainError("delta must lie in (0,1)");
}

}  // namespace detail

/// sqrt(2/(n-1) (kl + ln(sqrt(n)/delta))): bounds the R-averaged test minus
/// training loss on the drawn (Z, S).
inline double highprob_sqrt_bound(double kl, long long n, double delta) {
  detail::require_highprob(n, delta);
  const double nd = static_cast<double>(n);
  const double bracket = kl + std::log(std::sqrt(nd) / delta);
  return std::sqrt(2.0 / (nd - 1.0) * std::max(0.0, bracket));
}

inline double highprob_kl_rhs(double kl, long long n, double delta) {
  detail::require_highprob(n, delta);
  const double nd = static_cast<double>(n);
  return (kl + std::log(2.0 * std::sqrt(nd) / delta)) / nd;
}

/// d^-1(L_R, (kl + ln(2 sqrt(n)/delta)) / n): bounds the R-averaged test loss.
inline double highprob_kl_bound(double kl, long long n, double delta, double train_loss_r) {
  return invert_kl_half(train_loss_r, std::max(0.0, highprob_kl_rhs(kl, n, delta)));
}

struct SingleDrawBounds {
  double sqrt_value = 0.0;
  double kl_value = 0.0;
  bool floored = false;  // a bracketed sum was negative and clamped to 0
};

/// Same formulas with the information density in place of the KL; they hold
/// with high probability over R as well.
inline SingleDrawBounds single_draw_bounds(double info_density, long long n, double delta,
                                           double train_loss) {
  detail::require_highprob(n, delta);
  const double nd = static_cast<double>(n);
  SingleDrawBounds out;
  const double sq = info_density + std::log(std::sqrt(nd) / delta);
  const double kl = info_density + std::log(2.0 * std::sqrt(nd) / delta);
  out.floored = sq < 0.0 || kl < 0.0;
  out.sqrt_value = std::sqrt(2.0 / (nd - 1.0) * std::max(0.0, sq));
  out.kl_value = invert_kl_half(train_loss, std::max(0.0, kl) / nd);
  return out;
}

// ---------------------------------------------------------------------------
// Natarajan-dimension instantiations

inline double binom2(int labels) { return 0.5 * labels * (labels - 1.0); }

/// d_N ln(C(N,2) 2 e n / d_N).
inline double natarajan_cmi_cap(const NatarajanSpec& s) {
  const double d = s.natarajan_dim();
  return d * std::log(binom2(s.label_count()) * 2.0 * std::exp(1.0) * static_cast<double>(s.n()) / d);
}

inline double natarajan_sqrt_bound(const NatarajanSpec& s) {
  return std::sqrt(2.0 * natarajan_cmi_cap(s) / static_cast<double>(s.n()));
}

inline double natarajan_highprob_kl_rhs(const NatarajanSpec& s, double delta) {
  if (!(delta > 0.0 && delta < 1.0)) throw DomainError("delta must lie in (0,1)");
  const double nd = static_cast<double>(s.n());
  return (natarajan_cmi_cap(s) + std::log(2.0 / delta) + std::log(4.0 * std::sqrt(nd) / delta)) / nd;
}

inline double natarajan_highprob_kl_bound(const NatarajanSpec& s, double delta, double train_loss_r) {
  return invert_kl_half(train_loss_r, natarajan_highprob_kl_rhs(s, delta));
}

struct GrowthCap {
  std::uint64_t exact = 0;
  double upper = 0.0;
};

/// sum_{i <= d} C(m, i) C(N,2)^i and the cap (C(N,2) e m / d)^d, which
/// holds for m >= d + 1. For smaller m the cap is the exact sum.
inline GrowthCap growth_function_cap(int d, int labels, long long m) {
  if (d < 0 || labels < 2 || m < 0) throw DomainError("growth_function_cap: bad arguments");
  using u128 = unsigned __int128;
  const u128 limit = std::numeric_limits<std::uint64_t>::max();
  const u128 pairs = static_cast<u128>(labels) * (labels - 1) / 2;
  u128 choose = 1, power = 1, total = 0;
  for (long long i = 0; i <= d && i <= m; ++i) {
    if (i > 0) {
      choose = choose * static_cast<u128>(m - i + 1) / static_cast<u128>(i);
      power *= pairs;
    }
    if (choose > limit || power > limit) throw DomainError("growth function exceeds 64-bit range");
    total += choose * power;
    if (total > limit) throw DomainError("growth function exceeds 64-bit range");
  }
  GrowthCap out;
  out.exact = static_cast<std::uint64_t>(total);
  if (d == 0) {
    out.upper = 1.0;
  } else if (m >= d + 1) {
    out.upper = std::pow(binom2(labels) * std::exp(1.0) * static_cast<double>(m) / d, d);
  } else {
    out.upper = static_cast<double>(out.exact);
  }
  return out;
}

}  // namespace ecmi

#endif  // ECMI_BOUNDS_HPP
