#ifndef ECMI_ANALYZE_HPP
#define ECMI_ANALYZE_HPP

// Bound comparisons at zero training loss, the (B, L) region map, curves,
// and the bound-versus-true-gap report for a simulated batch. Also plain
// CSV and SVG writers for those outputs.

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "ecmi/bounds.hpp"
#include "ecmi/core.hpp"
#include "ecmi/divergence.hpp"
#include "ecmi/estimators.hpp"
#include "ecmi/simulate.hpp"

namespace ecmi {

// ---------------------------------------------------------------------------
// Ordering at zero training loss with I_i = B for every i

struct NamedValue {
  std::string name;
  double value = 0.0;
};

/// The four bounds at training loss 0, unclamped, sorted ascending.
inline std::vector<NamedValue> ordering_values(double B) {
  if (!(B > 0.0)) throw DomainError("ordering_check needs B > 0");
  return {
      {"interpolation", B / std::log(2.0)},
      {"binary_kl", -2.0 * std::expm1(-B)},
      {"linear", optimize_linear_gamma(0.0, B).value},
      {"sqrt", std::sqrt(2.0 * B)},
  };
}

inline std::vector<NamedValue> ordering_check(double B) {
  auto v = ordering_values(B);
  std::stable_sort(v.begin(), v.end(),
                   [](const NamedValue& a, const NamedValue& b) { return a.value < b.value; });
  return v;
}

// ---------------------------------------------------------------------------
// Region map

enum class RegionLabel { binary_kl, linear, sqrt, trivial };

inline const char* to_string(RegionLabel l) {
  switch (l) {
    case RegionLabel::binary_kl: return "binary_kl";
    case RegionLabel::linear: return "linear";
    case RegionLabel::sqrt: return "sqrt";
    case RegionLabel::trivial: return "trivial";
  }
  return "unknown";
}

struct RegionCell {
  double B = 0.0;
  double L = 0.0;
  double binary_kl = 0.0;
  double linear = 0.0;
  double sqrt = 0.0;  // L + sqrt(2B)
  RegionLabel winner = RegionLabel::trivial;
};

/// Winner at one point. A bound only counts when it is below 1; ties go to
/// the earlier of binary KL, linear, square root.
inline RegionCell region_cell(double B, double L) {
  RegionCell c;
  c.B = B;
  c.L = L;
  c.binary_kl = invert_kl_half(L, B);
  c.linear = optimize_linear_gamma(L, B).value;
  c.sqrt = L + std::sqrt(2.0 * B);
  double best = 1.0;
  const std::pair<RegionLabel, double> candidates[] = {
      {RegionLabel::binary_kl, c.binary_kl}, {RegionLabel::linear, c.linear}, {RegionLabel::sqrt, c.sqrt}};
  for (const auto& [label, v] : candidates) {
    if (v < best) {
      best = v;
      c.winner = label;
    }
  }
  return c;
}

struct RegionGrid {
  std::vector<double> B;  // columns
  std::vector<double> L;  // rows
  std::vector<RegionCell> cells;  // row-major over (L, B)

  const RegionCell& at(std::size_t l_idx, std::size_t b_idx) const { return cells[l_idx * B.size() + b_idx]; }
};

inline std::vector<double> log_grid(double lo, double hi, std::size_t count) {
  if (count < 2 || !(lo > 0.0) || !(hi > lo)) throw DomainError("log_grid needs 0 < lo < hi and count >= 2");
  std::vector<double> out(count);
  for (std::size_t k = 0; k < count; ++k) {
    out[k] = std::exp(std::log(lo) + (std::log(hi) - std::log(lo)) * k / (count - 1));
  }
  out.front() = lo;
  out.back() = hi;
  return out;
}

inline std::vector<double> linear_grid(double lo, double hi, std::size_t count) {
  if (count < 2 || !(hi > lo)) throw DomainError("linear_grid needs lo < hi and count >= 2");
  std::vector<double> out(count);
  for (std::size_t k = 0; k < count; ++k) out[k] = lo + (hi - lo) * k / (count - 1);
  out.back() = hi;
  return out;
}

/// Default axes: B log-spaced on [1e-3, 1], L linear on [0, 0.5].
inline std::vector<double> default_region_B() { return log_grid(1e-3, 1.0, 61); }
inline std::vector<double> default_region_L() { return linear_grid(0.0, 0.5, 51); }

inline RegionGrid region_map(const std::vector<double>& B_grid, const std::vector<double>& L_grid,
                             unsigned threads = 1) {
  RegionGrid g;
  g.B = B_grid;
  g.L = L_grid;
  g.cells.resize(B_grid.size() * L_grid.size());
  parallel_for(g.cells.size(), threads, [&](std::size_t idx) {
    g.cells[idx] = region_cell(B_grid[idx % B_grid.size()], L_grid[idx / B_grid.size()]);
  });
  return g;
}

inline std::map<RegionLabel, std::size_t> region_counts(const RegionGrid& g) {
  std::map<RegionLabel, std::size_t> out;
  for (const auto& c : g.cells) ++out[c.winner];
  return out;
}

// ---------------------------------------------------------------------------
// Curves at zero training loss

struct CurvePoint {
  double B = 0.0;
  double interpolation = 0.0;
  double binary_kl = 0.0;
  double linear = 0.0;
  double sqrt = 0.0;
};

inline std::vector<CurvePoint> curves(const std::vector<double>& B_grid) {
  std::vector<CurvePoint> out;
  for (double B : B_grid) {
    const auto v = ordering_values(B);
    out.push_back({B, v[0].value, v[1].value, v[2].value, v[3].value});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Experiment report

struct ValidityCheck {
  BoundKind kind = BoundKind::sqrt_integrated;
  std::string target;  // what the bound controls
  double bound = 0.0;
  double truth = 0.0;
  double sigma = 0.0;  // combined standard error
  bool pass = false;
};

struct ExperimentReport {
  std::vector<BoundReport> bounds;
  GapStats gap;
  std::vector<ValidityCheck> validity;
  bool interpolating = false;
  double train_loss = 0.0;
  double mean_ecmi = 0.0;
  std::vector<double> per_draw_train_loss;
  std::vector<double> per_draw_ecmi;

  const BoundReport* find(BoundKind k) const {
    for (const auto& b : bounds)
      if (b.kind == k) return &b;
    return nullptr;
  }
};

namespace detail {

/// Everything the average bounds need from one supersample draw.
struct DrawSummary {
  std::vector<double> ecmi;                     // per index
  std::vector<std::vector<double>> r_rows;      // R-conditioned, [r][i]
  double train_loss = 0.0;                      // mean over the k2 draws
  double subset_info = 0.0;                     // for the squared bound
  bool all_zero_train = true;
};

/// Plug-in MI between the first m rows of the loss table and S restricted
/// to those rows, over the draws of one supersample.
inline double subset_table_mi(const TrialBatch& batch, std::size_t k1_idx, std::size_t m, int bins) {
  std::map<std::vector<int>, std::int64_t> tables;
  std::vector<std::int64_t> xs, ys;
  for (const auto& t : batch.supersample_trials(k1_idx)) {
    std::vector<int> key;
    std::int64_t s_code = 0;
    for (std::size_t i = 0; i < m; ++i) {
      key.push_back(discretize_loss(t.losses(i, 0), bins));
      key.push_back(discretize_loss(t.losses(i, 1), bins));
      s_code |= static_cast<std::int64_t>(t.membership[i]) << i;
    }
    xs.push_back(tables.try_emplace(std::move(key), static_cast<std::int64_t>(tables.size())).first->second);
    ys.push_back(s_code);
  }
  return plugin_mi_samples(xs, ys);
}

inline std::vector<BoundReport> average_bounds(const std::vector<DrawSummary>& draws,
                                               const std::vector<std::size_t>& use,
                                               bool randomized, int m) {
  std::vector<std::vector<double>> rows;
  std::vector<std::vector<double>> r_rows;
  std::vector<double> losses, infos;
  bool interp = true;
  double subset = 0.0;
  for (auto k : use) {
    const auto& d = draws[k];
    rows.push_back(d.ecmi);
    for (const auto& r : d.r_rows) r_rows.push_back(r);
    losses.push_back(d.train_loss);
    double b = 0.0;
    for (double x : d.ecmi) b += x;
    infos.push_back(b / static_cast<double>(d.ecmi.size()));
    interp = interp && d.all_zero_train;
    subset += d.subset_info;
  }
  subset /= static_cast<double>(use.size());
  const std::size_t n = rows.front().size();
  std::vector<double> pooled(n, 0.0);
  for (const auto& r : rows)
    for (std::size_t i = 0; i < n; ++i) pooled[i] += r[i] / static_cast<double>(rows.size());
  const double L = mean_of(losses);
  const double B = mean_of(infos);

  std::vector<BoundReport> out;
  out.push_back(sqrt_bound_disintegrated(rows));
  out.push_back(sqrt_bound_integrated(pooled));
  if (randomized) out.push_back(r_conditioned_sqrt_bound(r_rows));
  out.push_back(squared_bound(subset, m));
  out.push_back(linear_bound(L, B));
  out.push_back(interpolation_bound(L, B));
  out.push_back(binary_kl_bound(L, B));
  out.push_back(binary_kl_bound_disintegrated(losses, infos));
  {
    auto r = kl_interp_bound_disintegrated(infos);
    if (!interp) {
      r.applicable = false;
      r.note = "training loss is non-zero on some draw";
    }
    out.push_back(r);
  }
  out.push_back(affine_kl_bound_grid(L, B));
  for (auto& r : out) {
    if (r.per_index_ecmi.empty()) r.per_index_ecmi = pooled;
    if (!r.train_loss) r.train_loss = L;
  }
  return out;
}

}  // namespace detail

/// All average bounds for a batch, with jackknife standard errors over the
/// supersample draws and validity checks against the exact population
/// quantities. Loss-valued bounds are checked as bounds on the population
/// loss, square-root bounds against |gap|, the squared bound against the
/// mean squared gap; each with a 2 sigma allowance.
inline ExperimentReport experiment_report(const TrialBatch& batch, const SimConfig& config,
                                          unsigned threads = 1) {
  const int bins = config.bins;
  const bool randomized = is_randomized(config.learner);
  const std::size_t k1 = batch.k1();
  const std::size_t n = batch.n();
  const int m = std::max(1, static_cast<int>(n) / 2);

  std::vector<detail::DrawSummary> draws(k1);
  parallel_for(k1, threads, [&](std::size_t k) {
    auto& d = draws[k];
    d.ecmi = ecmi_vector(batch, k, bins);
    if (randomized) d.r_rows = ecmi_r_conditioned(batch, k, bins);
    double s = 0.0;
    for (const auto& t : batch.supersample_trials(k)) {
      s += t.train_loss;
      d.all_zero_train = d.all_zero_train && t.train_loss == 0.0;
    }
    d.train_loss = s / static_cast<double>(batch.k2());
    d.subset_info = detail::subset_table_mi(batch, k, static_cast<std::size_t>(m), bins);
  });

  std::vector<std::size_t> all(k1);
  for (std::size_t k = 0; k < k1; ++k) all[k] = k;

  ExperimentReport rep;
  rep.bounds = detail::average_bounds(draws, all, randomized, m);
  rep.gap = gap_stats(batch);
  for (const auto& d : draws) {
    rep.per_draw_train_loss.push_back(d.train_loss);
    double b = 0.0;
    for (double x : d.ecmi) b += x;
    rep.per_draw_ecmi.push_back(b / static_cast<double>(n));
  }
  rep.train_loss = detail::mean_of(rep.per_draw_train_loss);
  rep.mean_ecmi = detail::mean_of(rep.per_draw_ecmi);
  rep.interpolating = std::all_of(draws.begin(), draws.end(), [](const auto& d) { return d.all_zero_train; });

  // Leave-one-supersample-out jackknife.
  if (k1 >= 2) {
    std::vector<std::vector<double>> loo(rep.bounds.size(), std::vector<double>(k1));
    parallel_for(k1, threads, [&](std::size_t drop) {
      std::vector<std::size_t> use;
      for (std::size_t k = 0; k < k1; ++k)
        if (k != drop) use.push_back(k);
      const auto reps = detail::average_bounds(draws, use, randomized, m);
      for (std::size_t b = 0; b < reps.size(); ++b) loo[b][drop] = reps[b].raw_value;
    });
    for (std::size_t b = 0; b < rep.bounds.size(); ++b) {
      double mean = 0.0;
      for (double v : loo[b]) mean += v;
      mean /= static_cast<double>(k1);
      double ss = 0.0;
      for (double v : loo[b]) ss += (v - mean) * (v - mean);
      rep.bounds[b].value_std_error = std::sqrt(ss * (k1 - 1.0) / k1);
    }
  } else {
    for (auto& b : rep.bounds) b.note += b.note.empty() ? "single supersample draw; no standard error" : "";
  }
  for (auto& b : rep.bounds) {
    b.train_loss_std_error = rep.gap.train_loss.std_error;
    b.gap_std_error = rep.gap.gap.std_error;
  }

  for (const auto& b : rep.bounds) {
    if (!b.applicable) continue;
    ValidityCheck v;
    v.kind = b.kind;
    v.bound = b.value;
    const double se_b = b.value_std_error.value_or(0.0);
    if (b.kind == BoundKind::squared) {
      v.target = "mean squared gap";
      v.truth = rep.gap.squared_gap.mean;
      v.sigma = std::hypot(se_b, rep.gap.squared_gap.std_error);
    } else if (bounds_gap(b.kind)) {
      v.target = "|population - training|";
      v.truth = std::abs(rep.gap.gap.mean);
      v.sigma = std::hypot(se_b, rep.gap.gap.std_error);
    } else {
      v.target = "population loss";
      v.truth = rep.gap.population_loss.mean;
      v.sigma = std::hypot(se_b, rep.gap.population_loss.std_error);
    }
    v.pass = v.bound >= v.truth - 2.0 * v.sigma;
    rep.validity.push_back(v);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// CSV and SVG

inline std::string fmt(double v) {
  std::ostringstream os;
  os.precision(10);
  os << v;
  return os.str();
}

inline void write_region_csv(std::ostream& os, const RegionGrid& g) {
  os << "B,L,binary_kl,linear,sqrt,winner\n";
  for (const auto& c : g.cells) {
    os << fmt(c.B) << ',' << fmt(c.L) << ',' << fmt(c.binary_kl) << ',' << fmt(c.linear) << ','
       << fmt(c.sqrt) << ',' << to_string(c.winner) << '\n';
  }
}

inline void write_curves_csv(std::ostream& os, const std::vector<CurvePoint>& pts) {
  os << "B,interpolation,binary_kl,linear,sqrt\n";
  for (const auto& p : pts) {
    os << fmt(p.B) << ',' << fmt(p.interpolation) << ',' << fmt(p.binary_kl) << ',' << fmt(p.linear)
       << ',' << fmt(p.sqrt) << '\n';
  }
}

/// Fixed legend colors, shared by the heat map and the line chart.
inline const char* legend_color(const std::string& name) {
  if (name == "binary_kl") return "#1f77b4";
  if (name == "linear") return "#ff7f0e";
  if (name == "sqrt") return "#2ca02c";
  if (name == "interpolation") return "#9467bd";
  return "#d9d9d9";  // trivial
}

/// Heat map: x is log10(B), y is L, one rect per cell.
inline void write_region_svg(std::ostream& os, const RegionGrid& g) {
  const double W = 640, H = 480, left = 60, top = 20, right = 150, bottom = 50;
  const double pw = W - left - right, ph = H - top - bottom;
  const double cw = pw / g.B.size(), ch = ph / g.L.size();
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
  for (std::size_t l = 0; l < g.L.size(); ++l) {
    for (std::size_t b = 0; b < g.B.size(); ++b) {
      const auto& c = g.at(l, b);
      os << "<rect x=\"" << fmt(left + b * cw) << "\" y=\"" << fmt(top + ph - (l + 1) * ch) << "\" width=\""
         << fmt(cw + 0.5) << "\" height=\"" << fmt(ch + 0.5) << "\" fill=\"" << legend_color(to_string(c.winner))
         << "\"/>\n";
    }
  }
  os << "<text x=\"" << left + pw / 2 << "\" y=\"" << H - 10 << "\" text-anchor=\"middle\">B (nats, log scale "
     << fmt(g.B.front()) << " to " << fmt(g.B.back()) << ")</text>\n";
  os << "<text x=\"15\" y=\"" << top + ph / 2 << "\" transform=\"rotate(-90 15 " << top + ph / 2
     << ")\" text-anchor=\"middle\">training loss</text>\n";
  const char* names[] = {"binary_kl", "linear", "sqrt", "trivial"};
  for (int k = 0; k < 4; ++k) {
    const double y = top + 20 + 25 * k;
    os << "<rect x=\"" << W - right + 15 << "\" y=\"" << y - 12 << "\" width=\"15\" height=\"15\" fill=\""
       << legend_color(names[k]) << "\"/>\n";
    os << "<text x=\"" << W - right + 38 << "\" y=\"" << y << "\">" << names[k] << "</text>\n";
  }
  os << "</svg>\n";
}

/// Line chart of the four zero-training-loss bounds against B.
inline void write_curves_svg(std::ostream& os, const std::vector<CurvePoint>& pts) {
  const double W = 640, H = 480, left = 60, top = 20, right = 150, bottom = 50;
  const double pw = W - left - right, ph = H - top - bottom;
  double ymax = 1.0;
  for (const auto& p : pts) ymax = std::max({ymax, p.sqrt, p.linear, p.interpolation, p.binary_kl});
  const double bmin = pts.front().B, bmax = pts.back().B;
  auto X = [&](double B) { return left + pw * (B - bmin) / (bmax - bmin); };
  auto Y = [&](double v) { return top + ph * (1.0 - v / ymax); };
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
  os << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
     << "\" fill=\"none\" stroke=\"black\"/>\n";
  const char* names[] = {"interpolation", "binary_kl", "linear", "sqrt"};
  for (int k = 0; k < 4; ++k) {
    os << "<polyline fill=\"none\" stroke-width=\"2\" stroke=\"" << legend_color(names[k]) << "\" points=\"";
    for (const auto& p : pts) {
      const double v = k == 0 ? p.interpolation : k == 1 ? p.binary_kl : k == 2 ? p.linear : p.sqrt;
      os << fmt(X(p.B)) << ',' << fmt(Y(v)) << ' ';
    }
    os << "\"/>\n";
    const double y = top + 20 + 25 * k;
    os << "<line x1=\"" << W - right + 10 << "\" y1=\"" << y - 5 << "\" x2=\"" << W - right + 30 << "\" y2=\""
       << y - 5 << "\" stroke-width=\"2\" stroke=\"" << legend_color(names[k]) << "\"/>\n";
    os << "<text x=\"" << W - right + 38 << "\" y=\"" << y << "\">" << names[k] << "</text>\n";
  }
  os << "<text x=\"" << left + pw / 2 << "\" y=\"" << H - 10 << "\" text-anchor=\"middle\">B (nats)</text>\n";
  os << "<text x=\"" << left - 5 << "\" y=\"" << top + 5 << "\" text-anchor=\"end\">" << fmt(ymax) << "</text>\n";
  os << "<text x=\"" << left - 5 << "\" y=\"" << top + ph << "\" text-anchor=\"end\">0</text>\n";
  os << "</svg>\n";
}

}  // namespace ecmi

#endif  // ECMI_ANALYZE_HPP
