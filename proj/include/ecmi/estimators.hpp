#ifndef ECMI_ESTIMATORS_HPP
#define ECMI_ESTIMATORS_HPP

// Plug-in estimators for the information terms in the bounds: samplewise
// e-CMI per supersample draw, its R-conditioned variant, full-table KL and
// information density (exact enumeration over membership vectors, or a
// biased sampled fallback), and samplewise MI for the standard setting.

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "ecmi/core.hpp"

namespace ecmi {

class DiscreteJointHistogram {
 public:
  DiscreteJointHistogram(std::size_t x_size, std::size_t y_size)
      : nx_(x_size), ny_(y_size), counts_(x_size * y_size, 0) {
    if (nx_ == 0 || ny_ == 0) throw DimensionError("histogram support must be non-empty");
  }

  /// Builds from a row-major count matrix.
  static DiscreteJointHistogram from_counts(const std::vector<std::vector<std::uint64_t>>& rows) {
    if (rows.empty() || rows.front().empty()) throw DimensionError("empty count matrix");
    DiscreteJointHistogram h(rows.size(), rows.front().size());
    for (std::size_t x = 0; x < rows.size(); ++x) {
      if (rows[x].size() != h.ny_) throw DimensionError("ragged count matrix");
      for (std::size_t y = 0; y < h.ny_; ++y) h.add(x, y, rows[x][y]);
    }
    return h;
  }

  void add(std::size_t x, std::size_t y, std::uint64_t count = 1) {
    if (x >= nx_ || y >= ny_) throw DimensionError("histogram cell out of range");
    counts_[x * ny_ + y] += count;
    total_ += count;
  }

  std::size_t x_size() const { return nx_; }
  std::size_t y_size() const { return ny_; }
  std::uint64_t count(std::size_t x, std::size_t y) const { return counts_[x * ny_ + y]; }
  std::uint64_t total() const { return total_; }

 private:
  std::size_t nx_;
  std::size_t ny_;
  std::vector<std::uint64_t> counts_;
  std::uint64_t total_ = 0;
};

/// Plug-in MI in nats. With `miller_madow`, the usual (cells - 1)/(2N)
/// entropy correction is applied to each of the three entropies.
inline double plugin_mi(const DiscreteJointHistogram& h, bool miller_madow = false) {
  if (h.total() == 0) throw EstimationError("plugin_mi: empty histogram");
  const double total = static_cast<double>(h.total());
  std::vector<double> px(h.x_size(), 0.0), py(h.y_size(), 0.0);
  for (std::size_t x = 0; x < h.x_size(); ++x) {
    for (std::size_t y = 0; y < h.y_size(); ++y) {
      const double c = static_cast<double>(h.count(x, y));
      px[x] += c;
      py[y] += c;
    }
  }
  double mi = 0.0;
  std::size_t cells = 0;
  for (std::size_t x = 0; x < h.x_size(); ++x) {
    for (std::size_t y = 0; y < h.y_size(); ++y) {
      const double c = static_cast<double>(h.count(x, y));
      if (c == 0.0) continue;
      ++cells;
      mi += (c / total) * std::log(c * total / (px[x] * py[y]));
    }
  }
  if (miller_madow) {
    std::size_t mx = 0, my = 0;
    for (double v : px) mx += v > 0.0;
    for (double v : py) my += v > 0.0;
    const double mx_d = static_cast<double>(mx), my_d = static_cast<double>(my);
    mi += ((mx_d - 1.0) + (my_d - 1.0) - (static_cast<double>(cells) - 1.0)) / (2.0 * total);
  }
  return std::max(0.0, mi);
}

/// Plug-in MI between two paired sequences of arbitrary integer codes.
inline double plugin_mi_samples(std::span<const std::int64_t> xs, std::span<const std::int64_t> ys,
                                bool miller_madow = false) {
  if (xs.size() != ys.size()) throw DimensionError("plugin_mi_samples: length mismatch");
  if (xs.empty()) throw EstimationError("plugin_mi_samples: no samples");
  // Compress codes in order of first appearance.
  std::unordered_map<std::int64_t, std::size_t> xmap, ymap;
  std::vector<std::size_t> xc(xs.size()), yc(ys.size());
  for (std::size_t k = 0; k < xs.size(); ++k) {
    xc[k] = xmap.try_emplace(xs[k], xmap.size()).first->second;
    yc[k] = ymap.try_emplace(ys[k], ymap.size()).first->second;
  }
  DiscreteJointHistogram h(xmap.size(), ymap.size());
  for (std::size_t k = 0; k < xs.size(); ++k) h.add(xc[k], yc[k]);
  return plugin_mi(h, miller_madow);
}

// ---------------------------------------------------------------------------
// Loss discretization

/// Edge-inclusive on the left: [j/bins, (j+1)/bins) maps to j, and 1.0 to bins-1.
inline int discretize_loss(double value, int bins) {
  if (bins < 2) throw DomainError("discretize_loss needs bins >= 2");
  if (!(value >= 0.0 && value <= 1.0)) {
    throw DomainError("loss outside [0,1]: " + std::to_string(value));
  }
  return std::min(static_cast<int>(std::floor(value * bins)), bins - 1);
}

inline std::vector<int> discretize_losses(std::span<const double> values, int bins) {
  std::vector<int> out;
  out.reserve(values.size());
  for (double v : values) out.push_back(discretize_loss(v, bins));
  return out;
}

// ---------------------------------------------------------------------------
// Samplewise e-CMI

namespace detail {

inline void require_estimable(const TrialBatch& batch, std::size_t k1_idx, std::size_t i) {
  if (batch.k2() < 2) {
    throw EstimationError("samplewise e-CMI needs k2 >= 2 draws of S per supersample");
  }
  if (k1_idx >= batch.k1()) throw DimensionError("supersample index out of range");
  if (i >= batch.n()) throw DimensionError("sample index out of range");
}

inline double loss_pair_mi(std::span<const Trial* const> trials, std::size_t i, int bins) {
  const auto nb = static_cast<std::size_t>(bins);
  DiscreteJointHistogram h(nb * nb, 2);
  for (const Trial* t : trials) {
    const auto x = static_cast<std::size_t>(discretize_loss(t->losses(i, 0), bins)) * nb +
                   static_cast<std::size_t>(discretize_loss(t->losses(i, 1), bins));
    h.add(x, static_cast<std::size_t>(t->membership[i]));
  }
  return plugin_mi(h);
}

}  // namespace detail

/// I^{z}(losses of row i; S_i) for supersample draw k1_idx, from its k2 draws.
inline double ecmi_samplewise(const TrialBatch& batch, std::size_t k1_idx, std::size_t i, int bins) {
  detail::require_estimable(batch, k1_idx, i);
  std::vector<const Trial*> ptrs;
  for (const auto& t : batch.supersample_trials(k1_idx)) ptrs.push_back(&t);
  return detail::loss_pair_mi(ptrs, i, bins);
}

/// Per-index estimates for one supersample draw.
inline std::vector<double> ecmi_vector(const TrialBatch& batch, std::size_t k1_idx, int bins) {
  std::vector<double> out(batch.n());
  for (std::size_t i = 0; i < batch.n(); ++i) out[i] = ecmi_samplewise(batch, k1_idx, i, bins);
  return out;
}

/// (1/n) sum_i ecmi_samplewise.
inline double ecmi_average(const TrialBatch& batch, std::size_t k1_idx, int bins) {
  const auto v = ecmi_vector(batch, k1_idx, bins);
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

/// k1 x n matrix of samplewise estimates, computed in parallel over draws.
inline std::vector<std::vector<double>> ecmi_matrix(const TrialBatch& batch, int bins,
                                                    unsigned threads = 1) {
  if (batch.k2() < 2) {
    throw EstimationError("samplewise e-CMI needs k2 >= 2 draws of S per supersample");
  }
  std::vector<std::vector<double>> out(batch.k1());
  parallel_for(batch.k1(), threads, [&](std::size_t k) { out[k] = ecmi_vector(batch, k, bins); });
  return out;
}

/// R-conditioned samplewise estimates for one supersample draw: draws are
/// grouped by r_seed (in order of first appearance) and each group gives
/// I^{z,r}(losses of row i; S_i). Result is [group][i].
inline std::vector<std::vector<double>> ecmi_r_conditioned(const TrialBatch& batch,
                                                           std::size_t k1_idx, int bins) {
  detail::require_estimable(batch, k1_idx, 0);
  std::vector<std::uint64_t> order;
  std::map<std::uint64_t, std::vector<const Trial*>> groups;
  for (const auto& t : batch.supersample_trials(k1_idx)) {
    auto [it, inserted] = groups.try_emplace(t.r_seed);
    if (inserted) order.push_back(t.r_seed);
    it->second.push_back(&t);
  }
  std::vector<std::vector<double>> out;
  for (auto r : order) {
    const auto& g = groups[r];
    if (g.size() < 2) {
      throw EstimationError("R-conditioned e-CMI needs at least 2 S draws per R value");
    }
    std::vector<double> row(batch.n());
    for (std::size_t i = 0; i < batch.n(); ++i) row[i] = detail::loss_pair_mi(g, i, bins);
    out.push_back(std::move(row));
  }
  return out;
}

/// I^{z}((prediction on (i,0), prediction on (i,1)); S_i).
inline double prediction_mi_samplewise(const TrialBatch& batch, std::size_t k1_idx, std::size_t i) {
  detail::require_estimable(batch, k1_idx, i);
  std::vector<std::int64_t> xs, ys;
  for (const auto& t : batch.supersample_trials(k1_idx)) {
    if (t.predictions.empty()) throw EstimationError("batch carries no prediction tables");
    xs.push_back(static_cast<std::int64_t>(t.predictions[i][0]) * 1000003 + t.predictions[i][1]);
    ys.push_back(t.membership[i]);
  }
  return plugin_mi_samples(xs, ys);
}

/// I^{z}(hypothesis id; S_i).
inline double hypothesis_mi_samplewise(const TrialBatch& batch, std::size_t k1_idx, std::size_t i) {
  detail::require_estimable(batch, k1_idx, i);
  std::vector<std::int64_t> xs, ys;
  for (const auto& t : batch.supersample_trials(k1_idx)) {
    if (!t.hypothesis_id) throw EstimationError("batch carries no hypothesis ids");
    xs.push_back(*t.hypothesis_id);
    ys.push_back(t.membership[i]);
  }
  return plugin_mi_samples(xs, ys);
}

/// Standard-setting samplewise MI I(hypothesis; Z_i) from paired samples.
inline double samplewise_mi_standard(std::span<const std::int64_t> hypothesis_ids,
                                     std::span<const std::int64_t> z_ids) {
  return plugin_mi_samples(hypothesis_ids, z_ids);
}

// ---------------------------------------------------------------------------
// Full-table KL and information density

/// Discrete key for a loss table: the 2n bin codes, row-major.
using TableKey = std::vector<int>;

inline TableKey table_key(const LossTable& table, int bins) {
  TableKey key;
  key.reserve(2 * table.size());
  for (const auto& r : table.rows()) {
    key.push_back(discretize_loss(r[0], bins));
    key.push_back(discretize_loss(r[1], bins));
  }
  return key;
}

struct WeightedTable {
  TableKey key;
  double prob = 0.0;
};

/// Exact law of the loss table given a fixed supersample. `law(s)` returns
/// P(table | Z = z, S = s) as a list of weighted outcomes (a single outcome of
/// weight 1 for a deterministic learner). All 2^n membership vectors are
/// enumerated to build the marginal P(table | Z = z).
class ExactTableModel {
 public:
  static constexpr std::size_t kMaxExactN = 14;
  using Law = std::function<std::vector<WeightedTable>(const MembershipVector&)>;

  ExactTableModel(std::size_t n, const Law& law) : n_(n) {
    if (n == 0) throw DimensionError("ExactTableModel needs n >= 1");
    if (n > kMaxExactN) {
      throw EstimationError("exact enumeration supports n <= 14; use the sampled estimator");
    }
    const std::uint64_t count = 1ULL << n;
    conditionals_.resize(count);
    const double w = 1.0 / static_cast<double>(count);
    for (std::uint64_t code = 0; code < count; ++code) {
      auto& cond = conditionals_[code];
      for (auto& wt : law(MembershipVector::from_code(code, n))) {
        if (wt.prob <= 0.0) continue;
        cond[wt.key] += wt.prob;
      }
      for (const auto& [key, p] : cond) marginal_[key] += w * p;
    }
  }

  std::size_t n() const { return n_; }

  static std::uint64_t code_of(const MembershipVector& s) {
    std::uint64_t code = 0;
    for (std::size_t i = 0; i < s.size(); ++i) code |= static_cast<std::uint64_t>(s[i]) << i;
    return code;
  }

  /// D(P_{table | z, s} || P_{table | z}).
  double kl(const MembershipVector& s) const {
    const auto& cond = conditionals_.at(checked_code(s));
    double d = 0.0;
    for (const auto& [key, p] : cond) d += p * std::log(p / marginal_.at(key));
    return std::max(0.0, d);
  }

  /// E_S of kl(S), i.e. the conditional mutual information I^{z}(table; S).
  double mean_kl() const {
    double total = 0.0;
    for (std::uint64_t code = 0; code < conditionals_.size(); ++code) {
      total += kl(MembershipVector::from_code(code, n_));
    }
    return total / static_cast<double>(conditionals_.size());
  }

  /// ln(P(table | z, s) / P(table | z)) at a realized table.
  double information_density(const MembershipVector& s, const TableKey& table) const {
    const auto& cond = conditionals_.at(checked_code(s));
    const auto it = cond.find(table);
    if (it == cond.end()) {
      throw AbsoluteContinuityError("realized loss table has zero probability given S");
    }
    return std::log(it->second / marginal_.at(table));
  }

  const std::map<TableKey, double>& conditional(const MembershipVector& s) const {
    return conditionals_.at(checked_code(s));
  }
  const std::map<TableKey, double>& marginal() const { return marginal_; }

 private:
  std::uint64_t checked_code(const MembershipVector& s) const {
    if (s.size() != n_) throw DimensionError("membership vector length does not match model");
    return code_of(s);
  }

  std::size_t n_;
  std::vector<std::map<TableKey, double>> conditionals_;
  std::map<TableKey, double> marginal_;
};

struct SampledKl {
  double value = 0.0;
  bool biased = true;
  std::string note;
};

/// Sampled fallback for I^{z}(table; S): plug-in MI between the table and S
/// over the k2 draws of one supersample. Each S value is usually seen once,
/// so this tends to the plug-in entropy of the table and overstates the KL.
inline SampledKl full_table_kl_sampled(const TrialBatch& batch, std::size_t k1_idx, int bins) {
  detail::require_estimable(batch, k1_idx, 0);
  if (batch.granularity() == LossGranularity::continuous && bins < 2) {
    throw EstimationError("continuous losses need binning before table KL");
  }
  std::map<TableKey, std::int64_t> tables;
  std::map<std::vector<std::uint8_t>, std::int64_t> memberships;
  std::vector<std::int64_t> xs, ys;
  for (const auto& t : batch.supersample_trials(k1_idx)) {
    auto key = table_key(t.losses, bins);
    xs.push_back(tables.try_emplace(std::move(key), static_cast<std::int64_t>(tables.size())).first->second);
    std::vector<std::uint8_t> bits(t.membership.bits().begin(), t.membership.bits().end());
    ys.push_back(memberships.try_emplace(std::move(bits), static_cast<std::int64_t>(memberships.size())).first->second);
  }
  SampledKl out;
  out.value = plugin_mi_samples(xs, ys);
  out.note = "sampled plug-in estimate over " + std::to_string(batch.k2()) +
             " draws; biased upward when S values rarely repeat";
  return out;
}

}  // namespace ecmi

#endif  // ECMI_ESTIMATORS_HPP
