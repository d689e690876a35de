#ifndef ECMI_CORE_HPP
#define ECMI_CORE_HPP

// Domain types shared by every module: loss tables, membership vectors,
// trial batches, bound reports, plus deterministic random streams and a
// small index-ordered parallel loop.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace ecmi {

// ---------------------------------------------------------------------------
// Errors

struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct EstimationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Raised when a realized loss table has zero probability under the
/// conditional law it is being compared against.
struct AbsoluteContinuityError : EstimationError {
  using EstimationError::EstimationError;
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

inline bool in_unit_interval(double v) { return v >= 0.0 && v <= 1.0; }

inline void require_unit(double v, const char* what) {
  if (!in_unit_interval(v)) {
    throw DomainError(std::string(what) + " must lie in [0,1], got " +
                      std::to_string(v));
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Discrete example (feature, label) on a finite domain.

struct Example {
  int feature = 0;
  int label = 0;
  friend bool operator==(const Example&, const Example&) = default;
};

// ---------------------------------------------------------------------------
// LossTable: n rows x 2 columns of losses in [0,1]. Column c holds the loss
// on supersample entry (i, c).

class LossTable {
 public:
  using Row = std::array<double, 2>;

  LossTable() = default;

  explicit LossTable(std::vector<Row> rows) : rows_(std::move(rows)) {
    if (rows_.empty()) throw DimensionError("LossTable needs at least one row");
    for (const auto& r : rows_) {
      detail::require_unit(r[0], "loss");
      detail::require_unit(r[1], "loss");
    }
  }

  std::size_t size() const { return rows_.size(); }
  double operator()(std::size_t i, int column) const { return rows_[i][column]; }
  const Row& row(std::size_t i) const { return rows_[i]; }
  std::span<const Row> rows() const { return rows_; }

  friend bool operator==(const LossTable&, const LossTable&) = default;

 private:
  std::vector<Row> rows_;
};

// ---------------------------------------------------------------------------
// MembershipVector: S in {0,1}^n. Entry i picks the training column of row i;
// the complement is never stored.

class MembershipVector {
 public:
  MembershipVector() = default;

  explicit MembershipVector(std::vector<std::uint8_t> bits) : bits_(std::move(bits)) {
    for (auto b : bits_) {
      if (b > 1) throw DomainError("membership entries must be 0 or 1");
    }
  }

  /// Builds the vector whose bit i is bit i of `code` (n <= 64).
  static MembershipVector from_code(std::uint64_t code, std::size_t n) {
    if (n > 64) throw DimensionError("from_code supports n <= 64");
    std::vector<std::uint8_t> bits(n);
    for (std::size_t i = 0; i < n; ++i) bits[i] = static_cast<std::uint8_t>((code >> i) & 1u);
    return MembershipVector(std::move(bits));
  }

  std::size_t size() const { return bits_.size(); }
  int operator[](std::size_t i) const { return bits_[i]; }
  int complement(std::size_t i) const { return 1 - bits_[i]; }
  std::span<const std::uint8_t> bits() const { return bits_; }

  MembershipVector flipped() const {
    std::vector<std::uint8_t> out(bits_.size());
    for (std::size_t i = 0; i < bits_.size(); ++i) out[i] = static_cast<std::uint8_t>(1 - bits_[i]);
    return MembershipVector(std::move(out));
  }

  friend bool operator==(const MembershipVector&, const MembershipVector&) = default;

 private:
  std::vector<std::uint8_t> bits_;
};

struct SplitLosses {
  double train_loss = 0.0;
  double test_loss = 0.0;
};

/// Training loss (mean of the selected column) and test loss (mean of the
/// complementary column). Rows are summed in order.
inline SplitLosses split_losses(const LossTable& table, const MembershipVector& s) {
  if (table.size() != s.size()) {
    throw DimensionError("split_losses: table has " + std::to_string(table.size()) +
                         " rows but membership vector has " + std::to_string(s.size()));
  }
  double train = 0.0;
  double test = 0.0;
  for (std::size_t i = 0; i < table.size(); ++i) {
    train += table(i, s[i]);
    test += table(i, s.complement(i));
  }
  const auto n = static_cast<double>(table.size());
  return {train / n, test / n};
}

// ---------------------------------------------------------------------------
// TrialBatch: k1 supersample draws x k2 (S, R) draws.

enum class LossGranularity { binary, continuous };

inline const char* to_string(LossGranularity g) {
  return g == LossGranularity::binary ? "binary" : "continuous";
}

struct Trial {
  LossTable losses;
  MembershipVector membership;
  std::uint64_t r_seed = 0;
  double train_loss = 0.0;
  double test_loss = 0.0;
  std::optional<double> population_loss;
  // Optional richer views of the learner output, used for the
  // losses -> predictions -> hypothesis data-processing comparisons.
  std::vector<std::array<int, 2>> predictions;
  std::optional<std::int64_t> hypothesis_id;
};

class TrialBatch {
 public:
  static constexpr double kTrainLossTolerance = 1e-12;

  TrialBatch() = default;

  /// `trials` is row-major: index k1_idx * k2 + k2_idx.
  TrialBatch(std::size_t k1, std::size_t k2, LossGranularity granularity,
             std::vector<Trial> trials,
             std::vector<std::vector<Example>> supersamples = {})
      : k1_(k1), k2_(k2), granularity_(granularity), trials_(std::move(trials)),
        supersamples_(std::move(supersamples)) {
    validate();
  }

  std::size_t k1() const { return k1_; }
  std::size_t k2() const { return k2_; }
  std::size_t n() const { return trials_.empty() ? 0 : trials_.front().losses.size(); }
  LossGranularity granularity() const { return granularity_; }

  const Trial& at(std::size_t k1_idx, std::size_t k2_idx) const {
    if (k1_idx >= k1_ || k2_idx >= k2_) throw DimensionError("TrialBatch index out of range");
    return trials_[k1_idx * k2_ + k2_idx];
  }
  std::span<const Trial> trials() const { return trials_; }
  std::span<const Trial> supersample_trials(std::size_t k1_idx) const {
    if (k1_idx >= k1_) throw DimensionError("supersample index out of range");
    return std::span<const Trial>(trials_).subspan(k1_idx * k2_, k2_);
  }

  /// Flattened 2n examples of supersample draw k1_idx (row i, column c at
  /// 2*i + c), when the producer recorded them.
  const std::vector<std::vector<Example>>& supersamples() const { return supersamples_; }

 private:
  void validate() const {
    if (k1_ == 0 || k2_ == 0) throw DimensionError("TrialBatch needs k1, k2 >= 1");
    if (trials_.size() != k1_ * k2_) {
      throw DimensionError("TrialBatch expects k1*k2 = " + std::to_string(k1_ * k2_) +
                           " trials, got " + std::to_string(trials_.size()));
    }
    const std::size_t rows = trials_.front().losses.size();
    for (const auto& t : trials_) {
      if (t.losses.size() != rows || t.membership.size() != rows) {
        throw DimensionError("all loss tables in a batch must share n");
      }
      const auto split = split_losses(t.losses, t.membership);
      if (std::abs(split.train_loss - t.train_loss) > kTrainLossTolerance ||
          std::abs(split.test_loss - t.test_loss) > kTrainLossTolerance) {
        throw DimensionError("stored train/test loss disagrees with (LossTable, S)");
      }
      if (t.population_loss) detail::require_unit(*t.population_loss, "population loss");
      if (!t.predictions.empty() && t.predictions.size() != rows) {
        throw DimensionError("prediction table must have n rows");
      }
      if (granularity_ == LossGranularity::binary) {
        for (const auto& r : t.losses.rows()) {
          if ((r[0] != 0.0 && r[0] != 1.0) || (r[1] != 0.0 && r[1] != 1.0)) {
            throw DomainError("binary batch contains a non 0/1 loss");
          }
        }
      }
    }
    if (!supersamples_.empty()) {
      if (supersamples_.size() != k1_) throw DimensionError("need one supersample per k1 draw");
      for (const auto& z : supersamples_) {
        if (z.size() != 2 * rows) throw DimensionError("supersample must hold 2n examples");
      }
    }
  }

  std::size_t k1_ = 0;
  std::size_t k2_ = 0;
  LossGranularity granularity_ = LossGranularity::binary;
  std::vector<Trial> trials_;
  std::vector<std::vector<Example>> supersamples_;
};

// ---------------------------------------------------------------------------
// Bound reports

enum class BoundKind {
  sqrt_integrated,
  sqrt_disintegrated,
  squared,
  r_conditioned_sqrt,
  linear,
  interpolation,
  binary_kl,
  binary_kl_disintegrated,
  kl_interp_disintegrated,
  affine_kl,
  mi_seeger,
  highprob_sqrt,
  highprob_kl,
};

inline constexpr std::array<BoundKind, 13> kAllBoundKinds = {
    BoundKind::sqrt_integrated,     BoundKind::sqrt_disintegrated,
    BoundKind::squared,             BoundKind::r_conditioned_sqrt,
    BoundKind::linear,              BoundKind::interpolation,
    BoundKind::binary_kl,           BoundKind::binary_kl_disintegrated,
    BoundKind::kl_interp_disintegrated, BoundKind::affine_kl,
    BoundKind::mi_seeger,           BoundKind::highprob_sqrt,
    BoundKind::highprob_kl,
};

inline const char* to_string(BoundKind k) {
  switch (k) {
    case BoundKind::sqrt_integrated: return "sqrt_integrated";
    case BoundKind::sqrt_disintegrated: return "sqrt_disintegrated";
    case BoundKind::squared: return "squared";
    case BoundKind::r_conditioned_sqrt: return "r_conditioned_sqrt";
    case BoundKind::linear: return "linear";
    case BoundKind::interpolation: return "interpolation";
    case BoundKind::binary_kl: return "binary_kl";
    case BoundKind::binary_kl_disintegrated: return "binary_kl_disintegrated";
    case BoundKind::kl_interp_disintegrated: return "kl_interp_disintegrated";
    case BoundKind::affine_kl: return "affine_kl";
    case BoundKind::mi_seeger: return "mi_seeger";
    case BoundKind::highprob_sqrt: return "highprob_sqrt";
    case BoundKind::highprob_kl: return "highprob_kl";
  }
  return "unknown";
}

inline std::optional<BoundKind> bound_kind_from_string(const std::string& name) {
  for (auto k : kAllBoundKinds) {
    if (name == to_string(k)) return k;
  }
  return std::nullopt;
}

/// True when the bound controls |population - training| rather than the
/// population loss itself.
inline bool bounds_gap(BoundKind k) {
  return k == BoundKind::sqrt_integrated || k == BoundKind::sqrt_disintegrated ||
         k == BoundKind::r_conditioned_sqrt || k == BoundKind::highprob_sqrt;
}

struct GammaPair {
  double gamma1 = 0.0;
  double gamma2 = 0.0;
};

struct BoundReport {
  BoundKind kind = BoundKind::sqrt_integrated;
  double value = 0.0;      // clamped to the bound's range
  double raw_value = 0.0;  // before clamping
  bool applicable = true;
  bool vacuous = false;
  std::string note;

  std::vector<double> per_index_ecmi;  // nats
  std::optional<double> train_loss;
  std::optional<GammaPair> gamma;
  std::optional<std::pair<double, double>> affine_ab;
  std::optional<double> value_std_error;
  std::optional<double> train_loss_std_error;
  std::optional<double> gap_std_error;
};

// ---------------------------------------------------------------------------
// NatarajanSpec

class NatarajanSpec {
 public:
  NatarajanSpec(int natarajan_dim, int label_count, long long n)
      : d_(natarajan_dim), labels_(label_count), n_(n) {
    if (d_ < 1) throw DomainError("Natarajan dimension must be positive");
    if (labels_ < 2) throw DomainError("label count must be at least 2");
    if (n_ < 1) throw DomainError("training-set size must be positive");
    if (2 * n_ < static_cast<long long>(d_) + 1) {
      throw DomainError("Natarajan bounds need 2n >= d_N + 1");
    }
  }

  int natarajan_dim() const { return d_; }
  int label_count() const { return labels_; }
  long long n() const { return n_; }

 private:
  int d_;
  int labels_;
  long long n_;
};

// ---------------------------------------------------------------------------
// Random streams

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace detail

/// Derives an independent master seed for a named sub-experiment.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t tag) {
  return detail::splitmix64(detail::splitmix64(master) ^ (tag * 0xd1b54a32d192ed03ULL));
}

/// A deterministic stream keyed by (master_seed, trial_index). Uniform draws
/// are built from raw engine output so the sequence does not depend on the
/// standard library's distribution implementations.
class RngStream {
 public:
  RngStream(std::uint64_t master_seed, std::uint64_t trial_index) {
    std::seed_seq seq{static_cast<std::uint32_t>(master_seed),
                      static_cast<std::uint32_t>(master_seed >> 32),
                      static_cast<std::uint32_t>(trial_index),
                      static_cast<std::uint32_t>(trial_index >> 32),
                      0x65636d69u};
    engine_.seed(seq);
  }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1) with 53 bits of resolution.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, bound).
  std::uint64_t below(std::uint64_t bound) {
    if (bound == 0) throw DomainError("RngStream::below needs a positive bound");
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % bound;
  }

  bool bernoulli(double p) { return uniform() < p; }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

inline RngStream rng_stream(std::uint64_t master_seed, std::uint64_t trial_index) {
  return RngStream(master_seed, trial_index);
}

// ---------------------------------------------------------------------------
// Parallelism

/// Worker count: explicit request, else ECMI_THREADS, else hardware.
inline unsigned resolve_threads(std::optional<unsigned> requested = std::nullopt) {
  if (requested && *requested > 0) return *requested;
  if (const char* env = std::getenv("ECMI_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && v > 0) return static_cast<unsigned>(v);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1u : hw;
}

/// Calls fn(i) for i in [0, count) on up to `threads` workers. Each index is
/// handled exactly once; callers write results into slot i so that output
/// order never depends on scheduling.
template <typename Fn>
void parallel_for(std::size_t count, unsigned threads, Fn&& fn) {
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(count, 1))));
  if (threads == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(threads);
  {
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (unsigned t = 0; t < threads; ++t) {
      pool.emplace_back([&, t] {
        try {
          for (std::size_t i = t; i < count; i += threads) fn(i);
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

// ---------------------------------------------------------------------------
// Small statistics helpers

struct MeanAndError {
  double mean = 0.0;
  double std_error = 0.0;
};

/// Sample mean and standard error (sd / sqrt(count)); fixed summation order.
inline MeanAndError mean_and_error(std::span<const double> xs) {
  MeanAndError out;
  if (xs.empty()) return out;
  double sum = 0.0;
  for (double x : xs) sum += x;
  out.mean = sum / static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - out.mean) * (x - out.mean);
    out.std_error = std::sqrt(ss / static_cast<double>(xs.size() - 1) /
                              static_cast<double>(xs.size()));
  }
  return out;
}

}  // namespace ecmi

#endif  // ECMI_CORE_HPP
