#ifndef ECMI_SIMULATE_HPP
#define ECMI_SIMULATE_HPP

// Toy CMI-setting experiments on a finite domain. Features are uniform on
// {0..K-1}, the clean label is a threshold of the feature, and labels pass
// through symmetric noise (rate eta) and then full randomization (rate a).
// Population losses are exact sums over the domain.

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ecmi/core.hpp"
#include "ecmi/estimators.hpp"

namespace ecmi {

enum class LearnerKind { memorizer, erm_finite_class, gibbs, constant };

inline const char* to_string(LearnerKind k) {
  switch (k) {
    case LearnerKind::memorizer: return "memorizer";
    case LearnerKind::erm_finite_class: return "erm_finite_class";
    case LearnerKind::gibbs: return "gibbs";
    case LearnerKind::constant: return "constant";
  }
  return "unknown";
}

inline std::optional<LearnerKind> learner_from_string(const std::string& s) {
  for (auto k : {LearnerKind::memorizer, LearnerKind::erm_finite_class, LearnerKind::gibbs,
                 LearnerKind::constant}) {
    if (s == to_string(k)) return k;
  }
  return std::nullopt;
}

inline bool is_randomized(LearnerKind k) { return k == LearnerKind::gibbs; }

struct SimConfig {
  int K = 8;            // feature domain size
  int N = 2;            // label count
  double eta = 0.0;     // label noise
  double corruption = 0.0;
  LearnerKind learner = LearnerKind::memorizer;
  int n = 10;
  std::uint64_t seed = 1;

  int k1 = 20;
  int k2 = 200;
  int bins = 2;
  double beta = 2.0;    // Gibbs inverse temperature (per example)
  int breakpoints = 1;  // finite class: at most this many label changes along x
  int r_draws = 0;      // distinct R seeds per supersample; 0 picks the default

  int effective_r_draws() const {
    if (r_draws > 0) return r_draws;
    return is_randomized(learner) ? 4 : 1;
  }

  void validate() const {
    auto fail = [](const std::string& m) { throw ConfigError(m); };
    if (K < 1) fail("K must be >= 1");
    if (N < 2) fail("N must be >= 2");
    if (!(eta >= 0.0 && eta <= 1.0)) fail("eta must lie in [0,1]");
    if (!(corruption >= 0.0 && corruption <= 1.0)) fail("corruption must lie in [0,1]");
    if (n < 1) fail("n must be >= 1");
    if (k1 < 1) fail("k1 must be >= 1");
    if (k2 < 1) fail("k2 must be >= 1");
    if (bins < 2) fail("bins must be >= 2");
    if (!(beta >= 0.0)) fail("beta must be >= 0");
    if (breakpoints < 0) fail("breakpoints must be >= 0");
    if (r_draws < 0) fail("r_draws must be >= 0");
    if (effective_r_draws() > k2) fail("r_draws cannot exceed k2");
  }
};

// ---------------------------------------------------------------------------
// Hypotheses

struct Hypothesis {
  std::vector<int> labels;  // prediction for each feature value
  std::int64_t id = 0;

  int operator()(int x) const { return labels[static_cast<std::size_t>(x)]; }
  friend bool operator==(const Hypothesis& a, const Hypothesis& b) { return a.labels == b.labels; }
};

/// Mixed-radix code of the label vector, or an FNV-1a hash when N^K does not
/// fit in 62 bits.
inline std::int64_t hypothesis_id(const std::vector<int>& labels, int label_count) {
  const double digits = static_cast<double>(labels.size()) * std::log2(static_cast<double>(label_count));
  if (digits < 62.0) {
    std::int64_t id = 0;
    for (std::size_t x = labels.size(); x-- > 0;) id = id * label_count + labels[x];
    return id;
  }
  std::uint64_t h = 1469598103934665603ULL;
  for (int v : labels) {
    h ^= static_cast<std::uint64_t>(v);
    h *= 1099511628211ULL;
  }
  return static_cast<std::int64_t>(h >> 1);
}

inline Hypothesis make_hypothesis(std::vector<int> labels, int label_count) {
  Hypothesis h;
  h.id = hypothesis_id(labels, label_count);
  h.labels = std::move(labels);
  return h;
}

/// Piecewise-constant labelings of the ordered domain with at most t label
/// changes, adjacent pieces distinct. Enumeration order: number of changes,
/// then change positions (lexicographic), then piece labels (lexicographic).
/// Any d ordered points admit a mixing pattern with d - 1 changes, so the
/// Natarajan dimension is min(t + 1, K).
class FiniteClass {
 public:
  FiniteClass(int K, int N, int t) : K_(K), N_(N), t_(t) {
    if (K < 1 || N < 2 || t < 0) throw DomainError("FiniteClass: bad parameters");
    const int max_changes = std::min(t, K - 1);
    for (int b = 0; b <= max_changes; ++b) {
      std::vector<int> cuts(b);
      for (int j = 0; j < b; ++j) cuts[j] = j + 1;  // change happens before position cuts[j]
      while (true) {
        add_all_labelings(cuts);
        if (!next_combination(cuts, K - 1)) break;
      }
    }
  }

  std::size_t size() const { return members_.size(); }
  const Hypothesis& operator[](std::size_t k) const { return members_[k]; }
  const std::vector<Hypothesis>& members() const { return members_; }
  int natarajan_dim() const { return std::min(t_ + 1, K_); }

 private:
  // Positions are in 1..K-1; advance to the next b-subset in lexicographic order.
  static bool next_combination(std::vector<int>& c, int top) {
    const int b = static_cast<int>(c.size());
    for (int j = b - 1; j >= 0; --j) {
      if (c[j] < top - (b - 1 - j)) {
        ++c[j];
        for (int l = j + 1; l < b; ++l) c[l] = c[l - 1] + 1;
        return true;
      }
    }
    return false;
  }

  void add_all_labelings(const std::vector<int>& cuts) {
    const std::size_t pieces = cuts.size() + 1;
    std::vector<int> piece_labels(pieces, 0);
    auto valid = [&] {
      for (std::size_t j = 1; j < pieces; ++j)
        if (piece_labels[j] == piece_labels[j - 1]) return false;
      return true;
    };
    while (true) {
      if (valid()) {
        std::vector<int> labels(static_cast<std::size_t>(K_));
        std::size_t piece = 0;
        for (int x = 0; x < K_; ++x) {
          while (piece < cuts.size() && x >= cuts[piece]) ++piece;
          labels[static_cast<std::size_t>(x)] = piece_labels[piece];
        }
        members_.push_back(make_hypothesis(std::move(labels), N_));
      }
      std::size_t j = pieces;
      while (j > 0) {
        --j;
        if (++piece_labels[j] < N_) break;
        piece_labels[j] = 0;
        if (j == 0) return;
      }
    }
  }

  int K_, N_, t_;
  std::vector<Hypothesis> members_;
};

// ---------------------------------------------------------------------------
// Data model

inline int target_label(int x, int K) { return x < K / 2 ? 0 : 1; }

inline Hypothesis target_hypothesis(const SimConfig& c) {
  std::vector<int> labels(static_cast<std::size_t>(c.K));
  for (int x = 0; x < c.K; ++x) labels[static_cast<std::size_t>(x)] = target_label(x, c.K);
  return make_hypothesis(std::move(labels), c.N);
}

/// P(y | x) under noise then corruption.
inline double label_probability(int y, int x, const SimConfig& c) {
  const double clean = y == target_label(x, c.K) ? 1.0 - c.eta : c.eta / (c.N - 1);
  return (1.0 - c.corruption) * clean + c.corruption / c.N;
}

inline Example draw_example(const SimConfig& c, RngStream& rng) {
  const int x = static_cast<int>(rng.below(static_cast<std::uint64_t>(c.K)));
  int y = target_label(x, c.K);
  if (rng.bernoulli(c.eta)) {
    const int other = static_cast<int>(rng.below(static_cast<std::uint64_t>(c.N - 1)));
    y = other >= y ? other + 1 : other;
  }
  if (rng.bernoulli(c.corruption)) y = static_cast<int>(rng.below(static_cast<std::uint64_t>(c.N)));
  return {x, y};
}

/// 2n examples, row-major: entry (i, col) at 2*i + col.
inline std::vector<Example> draw_supersample(const SimConfig& c, RngStream& rng) {
  std::vector<Example> z(2 * static_cast<std::size_t>(c.n));
  for (auto& e : z) e = draw_example(c, rng);
  return z;
}

inline MembershipVector draw_membership(std::size_t n, RngStream& rng) {
  std::vector<std::uint8_t> bits(n);
  for (auto& b : bits) b = static_cast<std::uint8_t>(rng.next_u64() >> 63);
  return MembershipVector(std::move(bits));
}

inline std::vector<Example> training_set(const std::vector<Example>& z, const MembershipVector& s) {
  std::vector<Example> out(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) out[i] = z[2 * i + static_cast<std::size_t>(s[i])];
  return out;
}

/// Exact expected 0/1 loss of h on a fresh example.
inline double population_loss(const Hypothesis& h, const SimConfig& c) {
  double acc = 0.0;
  for (int x = 0; x < c.K; ++x) acc += 1.0 - label_probability(h(x), x, c);
  return std::clamp(acc / c.K, 0.0, 1.0);
}

inline double empirical_loss(const Hypothesis& h, const std::vector<Example>& data) {
  std::size_t errors = 0;
  for (const auto& e : data) errors += h(e.feature) != e.label;
  return static_cast<double>(errors) / static_cast<double>(data.size());
}

// ---------------------------------------------------------------------------
// Learners

struct WeightedHypothesis {
  Hypothesis hypothesis;
  double prob = 0.0;
};

class Simulator {
 public:
  explicit Simulator(SimConfig config)
      : config_(std::move(config)),
        class_(config_.K, config_.N, config_.breakpoints) {
    config_.validate();
  }

  const SimConfig& config() const { return config_; }
  const FiniteClass& finite_class() const { return class_; }

  /// Distribution over hypotheses produced from `data` (R integrated out).
  std::vector<WeightedHypothesis> posterior(const std::vector<Example>& data) const {
    switch (config_.learner) {
      case LearnerKind::memorizer: return {{memorize(data), 1.0}};
      case LearnerKind::constant:
        return {{make_hypothesis(std::vector<int>(static_cast<std::size_t>(config_.K), 0), config_.N), 1.0}};
      case LearnerKind::erm_finite_class: return {{class_[erm_index(data)], 1.0}};
      case LearnerKind::gibbs: {
        const auto w = gibbs_weights(data);
        std::vector<WeightedHypothesis> out;
        for (std::size_t k = 0; k < w.size(); ++k) {
          if (w[k] > 0.0) out.push_back({class_[k], w[k]});
        }
        return out;
      }
    }
    throw ConfigError("unknown learner");
  }

  /// The learner as a pure function of (training vector, R seed).
  Hypothesis run(const std::vector<Example>& data, std::uint64_t r_seed) const {
    if (config_.learner != LearnerKind::gibbs) return posterior(data).front().hypothesis;
    const auto w = gibbs_weights(data);
    const double u = rng_stream(r_seed, 0).uniform();
    double cum = 0.0;
    std::size_t last_positive = 0;
    for (std::size_t k = 0; k < w.size(); ++k) {
      if (w[k] <= 0.0) continue;
      last_positive = k;
      cum += w[k];
      if (u < cum) return class_[k];
    }
    return class_[last_positive];
  }

  /// Majority label per seen feature, lowest label on ties, 0 when unseen.
  Hypothesis memorize(const std::vector<Example>& data) const {
    std::vector<int> counts(static_cast<std::size_t>(config_.K * config_.N), 0);
    for (const auto& e : data) ++counts[static_cast<std::size_t>(e.feature * config_.N + e.label)];
    std::vector<int> labels(static_cast<std::size_t>(config_.K), 0);
    for (int x = 0; x < config_.K; ++x) {
      int best = 0;
      for (int y = 1; y < config_.N; ++y) {
        if (counts[static_cast<std::size_t>(x * config_.N + y)] >
            counts[static_cast<std::size_t>(x * config_.N + best)]) {
          best = y;
        }
      }
      labels[static_cast<std::size_t>(x)] = best;
    }
    return make_hypothesis(std::move(labels), config_.N);
  }

  /// Empirical risk minimizer over the class, lowest index on ties.
  std::size_t erm_index(const std::vector<Example>& data) const {
    std::size_t best = 0;
    double best_loss = 2.0;
    for (std::size_t k = 0; k < class_.size(); ++k) {
      const double l = empirical_loss(class_[k], data);
      if (l < best_loss) {
        best_loss = l;
        best = k;
      }
    }
    return best;
  }

  /// Gibbs weights proportional to exp(-beta n L_hat(h)).
  std::vector<double> gibbs_weights(const std::vector<Example>& data) const {
    std::vector<double> losses(class_.size());
    double lo = 2.0;
    for (std::size_t k = 0; k < class_.size(); ++k) {
      losses[k] = empirical_loss(class_[k], data);
      lo = std::min(lo, losses[k]);
    }
    const double scale = config_.beta * static_cast<double>(data.size());
    std::vector<double> w(class_.size());
    double total = 0.0;
    for (std::size_t k = 0; k < w.size(); ++k) {
      w[k] = std::exp(-scale * (losses[k] - lo));
      total += w[k];
    }
    for (auto& v : w) v /= total;
    return w;
  }

  /// n x 2 table of 0/1 losses of h on the supersample.
  LossTable loss_table(const Hypothesis& h, const std::vector<Example>& z) const {
    std::vector<LossTable::Row> rows(z.size() / 2);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      for (int c = 0; c < 2; ++c) {
        const auto& e = z[2 * i + static_cast<std::size_t>(c)];
        rows[i][static_cast<std::size_t>(c)] = h(e.feature) != e.label ? 1.0 : 0.0;
      }
    }
    return LossTable(std::move(rows));
  }

  /// Exact conditional law of the loss table given the supersample.
  ExactTableModel exact_model(const std::vector<Example>& z) const {
    const std::size_t n = z.size() / 2;
    return ExactTableModel(n, [&](const MembershipVector& s) {
      std::vector<WeightedTable> out;
      for (const auto& wh : posterior(training_set(z, s))) {
        out.push_back({table_key(loss_table(wh.hypothesis, z), 2), wh.prob});
      }
      return out;
    });
  }

 private:
  SimConfig config_;
  FiniteClass class_;
};

// ---------------------------------------------------------------------------
// Experiment sweep

/// Seed of R for draw (k1_idx, k2_idx). Deterministic learners ignore R and
/// get 0; randomized learners cycle through r_draws seeds per supersample so
/// each R value is paired with several independent S draws.
inline std::uint64_t r_seed_for(const SimConfig& c, std::size_t k1_idx, std::size_t k2_idx) {
  if (!is_randomized(c.learner)) return 0;
  const auto r = static_cast<std::uint64_t>(c.effective_r_draws());
  return derive_seed(derive_seed(c.seed, 3), k1_idx * r + k2_idx % r);
}

struct GapStats {
  MeanAndError gap;          // population - training
  MeanAndError test_gap;     // test - training
  MeanAndError train_loss;
  MeanAndError test_loss;
  MeanAndError population_loss;
  MeanAndError squared_gap;  // (population - training)^2
};

/// Means over all draws with standard errors clustered by supersample draw
/// (the k1 per-supersample means are treated as the independent units).
inline GapStats gap_stats(const TrialBatch& batch) {
  auto clustered = [&](auto&& value) {
    std::vector<double> per(batch.k1());
    for (std::size_t k = 0; k < batch.k1(); ++k) {
      double s = 0.0;
      for (const auto& t : batch.supersample_trials(k)) s += value(t);
      per[k] = s / static_cast<double>(batch.k2());
    }
    return mean_and_error(per);
  };
  auto pop = [](const Trial& t) {
    if (!t.population_loss) throw EstimationError("batch has no population losses");
    return *t.population_loss;
  };
  GapStats g;
  g.gap = clustered([&](const Trial& t) { return pop(t) - t.train_loss; });
  g.test_gap = clustered([](const Trial& t) { return t.test_loss - t.train_loss; });
  g.train_loss = clustered([](const Trial& t) { return t.train_loss; });
  g.test_loss = clustered([](const Trial& t) { return t.test_loss; });
  g.population_loss = clustered(pop);
  g.squared_gap = clustered([&](const Trial& t) {
    const double d = pop(t) - t.train_loss;
    return d * d;
  });
  return g;
}

struct ExperimentResult {
  TrialBatch batch;
  GapStats gap;
};

inline ExperimentResult run_experiment(const SimConfig& config, unsigned threads = 1) {
  const Simulator sim(config);
  const auto k1 = static_cast<std::size_t>(config.k1);
  const auto k2 = static_cast<std::size_t>(config.k2);
  const std::uint64_t z_seed = derive_seed(config.seed, 1);
  const std::uint64_t s_seed = derive_seed(config.seed, 2);

  std::vector<std::vector<Example>> supersamples(k1);
  for (std::size_t k = 0; k < k1; ++k) {
    auto rng = rng_stream(z_seed, k);
    supersamples[k] = draw_supersample(config, rng);
  }

  std::vector<Trial> trials(k1 * k2);
  parallel_for(k1 * k2, threads, [&](std::size_t idx) {
    const std::size_t a = idx / k2, b = idx % k2;
    const auto& z = supersamples[a];
    auto rng = rng_stream(s_seed, idx);
    Trial t;
    t.membership = draw_membership(static_cast<std::size_t>(config.n), rng);
    t.r_seed = r_seed_for(config, a, b);
    const Hypothesis h = sim.run(training_set(z, t.membership), t.r_seed);
    t.losses = sim.loss_table(h, z);
    const auto split = split_losses(t.losses, t.membership);
    t.train_loss = split.train_loss;
    t.test_loss = split.test_loss;
    t.population_loss = population_loss(h, config);
    t.predictions.resize(static_cast<std::size_t>(config.n));
    for (std::size_t i = 0; i < t.predictions.size(); ++i) {
      t.predictions[i] = {h(z[2 * i].feature), h(z[2 * i + 1].feature)};
    }
    t.hypothesis_id = h.id;
    trials[idx] = std::move(t);
  });

  TrialBatch batch(k1, k2, LossGranularity::binary, std::move(trials), std::move(supersamples));
  GapStats g = gap_stats(batch);
  return {std::move(batch), g};
}

}  // namespace ecmi

#endif  // ECMI_SIMULATE_HPP
