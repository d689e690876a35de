#ifndef ECMI_VERIFY_HPP
#define ECMI_VERIFY_HPP

// Numerical checks of the concentration inequalities behind the bounds, by
// exact enumeration where the outcome space is small and Monte Carlo
// otherwise, plus coverage tests for the high-probability bounds.

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "ecmi/bounds.hpp"
#include "ecmi/core.hpp"
#include "ecmi/divergence.hpp"
#include "ecmi/simulate.hpp"

namespace ecmi {

inline constexpr double kExactSlack = 1e-12;

struct CheckResult {
  std::string name;
  std::vector<std::pair<std::string, double>> inputs;
  double statistic = 0.0;
  double threshold = 0.0;
  bool pass = false;
  std::string note;
};

// ---------------------------------------------------------------------------
// E[exp(n d_gamma(mean || mean of means))] <= 1 for independent X_i in [0,1]

/// Exact value for Bernoulli coordinates by enumerating all 2^n outcomes.
inline CheckResult check_mcallester_exact(const std::vector<double>& means, double gamma) {
  const std::size_t n = means.size();
  if (n == 0 || n > 20) throw DomainError("exact McAllester check needs 1 <= n <= 20");
  if (!(gamma > 0.0)) throw DomainError("gamma must be positive");
  double mu_bar = 0.0;
  for (double m : means) {
    detail::require_unit(m, "mean");
    mu_bar += m;
  }
  mu_bar /= static_cast<double>(n);
  const double nd = static_cast<double>(n);
  double total = 0.0;
  for (std::uint64_t code = 0; code < (1ULL << n); ++code) {
    double w = 1.0;
    int ones = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const bool one = (code >> i) & 1u;
      w *= one ? means[i] : 1.0 - means[i];
      ones += one;
    }
    if (w == 0.0) continue;
    total += w * std::exp(nd * d_gamma(ones / nd, mu_bar, gamma));
  }
  CheckResult r;
  r.name = "mcallester_exact";
  r.inputs = {{"n", nd}, {"gamma", gamma}};
  r.statistic = total;
  r.threshold = 1.0 + kExactSlack;
  r.pass = total <= r.threshold;
  return r;
}

/// Closed form of the exact statistic: prod_i (1 - mu_i + mu_i e^g) / (1 - mu + mu e^g)^n.
inline double mcallester_closed_form(const std::vector<double>& means, double gamma) {
  double mu_bar = 0.0;
  for (double m : means) mu_bar += m;
  mu_bar /= static_cast<double>(means.size());
  double log_num = 0.0;
  for (double m : means) log_num += std::log1p(m * std::expm1(gamma));
  return std::exp(log_num - static_cast<double>(means.size()) * std::log1p(mu_bar * std::expm1(gamma)));
}

/// One coordinate of the Monte Carlo check: Bernoulli(mean) when beta_a <= 0,
/// otherwise Beta(beta_a, beta_b) whose mean is beta_a / (beta_a + beta_b).
struct BoundedVariable {
  double bernoulli_mean = 0.5;
  double beta_a = 0.0;
  double beta_b = 0.0;

  double mean() const { return beta_a > 0.0 ? beta_a / (beta_a + beta_b) : bernoulli_mean; }
};

inline CheckResult check_mcallester_mc(const std::vector<BoundedVariable>& vars, double gamma,
                                       std::uint64_t seed, std::size_t draws = 1000000,
                                       unsigned threads = 1) {
  if (vars.empty()) throw DomainError("need at least one variable");
  if (!(gamma > 0.0)) throw DomainError("gamma must be positive");
  const std::size_t n = vars.size();
  const double nd = static_cast<double>(n);
  double mu_bar = 0.0;
  for (const auto& v : vars) mu_bar += v.mean();
  mu_bar /= nd;

  constexpr std::size_t kChunks = 64;
  std::vector<double> sums(kChunks, 0.0), squares(kChunks, 0.0);
  parallel_for(kChunks, threads, [&](std::size_t chunk) {
    auto rng = rng_stream(seed, chunk);
    const std::size_t begin = draws * chunk / kChunks, end = draws * (chunk + 1) / kChunks;
    for (std::size_t d = begin; d < end; ++d) {
      double s = 0.0;
      for (const auto& v : vars) {
        if (v.beta_a > 0.0) {
          std::gamma_distribution<double> ga(v.beta_a, 1.0), gb(v.beta_b, 1.0);
          const double x = ga(rng.engine()), y = gb(rng.engine());
          s += x / (x + y);
        } else {
          s += rng.bernoulli(v.bernoulli_mean) ? 1.0 : 0.0;
        }
      }
      const double val = std::exp(nd * d_gamma(std::clamp(s / nd, 0.0, 1.0), mu_bar, gamma));
      sums[chunk] += val;
      squares[chunk] += val * val;
    }
  });
  double sum = 0.0, sq = 0.0;
  for (std::size_t c = 0; c < kChunks; ++c) {
    sum += sums[c];
    sq += squares[c];
  }
  const double dd = static_cast<double>(draws);
  const double mean = sum / dd;
  const double se = std::sqrt(std::max(0.0, sq / dd - mean * mean) / dd);
  CheckResult r;
  r.name = "mcallester_mc";
  r.inputs = {{"n", nd}, {"gamma", gamma}, {"draws", dd}};
  r.statistic = mean;
  r.threshold = 1.0 + 3.0 * se;
  r.pass = mean <= r.threshold;
  r.note = "standard error " + std::to_string(se);
  return r;
}

// ---------------------------------------------------------------------------
// E[exp(n d(mean || 1/2))] >= sqrt(n) for fair coins

inline double maurer_statistic(int n) {
  if (n < 1 || n > 30) throw DomainError("Maurer check supports 1 <= n <= 30");
  const double nd = n;
  double total = 0.0;
  double choose = 1.0;
  for (int k = 0; k <= n; ++k) {
    if (k > 0) choose = choose * (n - k + 1) / k;
    total += choose * std::exp(-nd * std::log(2.0) + nd * binary_kl(k / nd, 0.5));
  }
  return total;
}

inline CheckResult check_maurer_lower(int n) {
  CheckResult r;
  r.name = "maurer_lower";
  r.inputs = {{"n", static_cast<double>(n)}};
  r.statistic = maurer_statistic(n);
  r.threshold = std::sqrt(static_cast<double>(n));
  r.pass = r.statistic >= r.threshold;
  return r;
}

// ---------------------------------------------------------------------------
// Two-point moment generating functions

/// (e^{g1 (a - g2 b)} + e^{g1 (b - g2 a)}) / 2.
inline double steinke_mgf(double a, double b, const GammaPair& g) {
  return 0.5 * (std::exp(g.gamma1 * (a - g.gamma2 * b)) + std::exp(g.gamma1 * (b - g.gamma2 * a)));
}

inline CheckResult check_steinke_mgf(double a, double b, const GammaPair& g) {
  detail::require_unit(a, "a");
  detail::require_unit(b, "b");
  CheckResult r;
  r.name = "steinke_mgf";
  r.inputs = {{"a", a}, {"b", b}, {"gamma1", g.gamma1}, {"gamma2", g.gamma2}};
  r.statistic = steinke_mgf(a, b, g);
  r.threshold = 1.0 + kExactSlack;
  r.pass = !gamma_feasible(g) || r.statistic <= r.threshold;
  if (!gamma_feasible(g)) r.note = "gamma outside the feasible set; no claim";
  return r;
}

/// (e^{b ln 2} + e^{-b g ln 2}) / 2 with a = 0.
inline CheckResult check_interp_mgf(double b, double gamma_large = 1e6) {
  detail::require_unit(b, "b");
  const double ln2 = std::log(2.0);
  CheckResult r;
  r.name = "interp_mgf";
  r.inputs = {{"b", b}, {"gamma", gamma_large}};
  r.statistic = 0.5 * (std::exp(b * ln2) + std::exp(-b * gamma_large * ln2));
  r.threshold = 1.0 + 1e-9;
  r.pass = r.statistic <= r.threshold;
  return r;
}

/// E[e^{g D}] <= e^{g^2 / (2m)} for D = (1/m) sum_j eps_j (u_j - v_j) with
/// independent fair signs, by enumerating all 2^m sign patterns.
inline CheckResult check_subgauss_mgf(const std::vector<std::pair<double, double>>& values, double gamma) {
  const std::size_t m = values.size();
  if (m == 0 || m > 16) throw DomainError("sub-Gaussian check needs 1 <= m <= 16");
  const double md = static_cast<double>(m);
  double total = 0.0;
  for (std::uint64_t code = 0; code < (1ULL << m); ++code) {
    double delta = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      detail::require_unit(values[j].first, "u");
      detail::require_unit(values[j].second, "v");
      const double diff = values[j].first - values[j].second;
      delta += ((code >> j) & 1u) ? diff : -diff;
    }
    total += std::exp(gamma * delta / md);
  }
  total /= static_cast<double>(1ULL << m);
  CheckResult r;
  r.name = "subgauss_mgf";
  r.inputs = {{"m", md}, {"gamma", gamma}};
  r.statistic = total;
  r.threshold = std::exp(gamma * gamma / (2.0 * md)) * (1.0 + kExactSlack);
  r.pass = total <= r.threshold;
  return r;
}

/// Twenty points of Gamma spread along its gamma1 range, each at the middle
/// of the feasible gamma2 interval.
inline std::vector<GammaPair> feasible_gamma_pairs(int count = 20) {
  const double top = optimal_interp_gamma();
  std::vector<GammaPair> out;
  for (int j = 0; j < count; ++j) {
    const double g1 = top * (j + 1) / (count + 1);
    const double c = std::expm1(g1) - g1;
    const double disc = g1 * g1 - 4.0 * c * std::expm1(g1);
    const double lo = (g1 - std::sqrt(std::max(0.0, disc))) / (2.0 * c);
    const double hi = (g1 + std::sqrt(std::max(0.0, disc))) / (2.0 * c);
    out.push_back({g1, 0.5 * (lo + hi)});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Coverage of the high-probability bounds

enum class HighProbVariant { sqrt, kl, single_draw_sqrt, single_draw_kl, natarajan_kl };

inline const char* to_string(HighProbVariant v) {
  switch (v) {
    case HighProbVariant::sqrt: return "highprob_sqrt";
    case HighProbVariant::kl: return "highprob_kl";
    case HighProbVariant::single_draw_sqrt: return "single_draw_sqrt";
    case HighProbVariant::single_draw_kl: return "single_draw_kl";
    case HighProbVariant::natarajan_kl: return "natarajan_kl";
  }
  return "unknown";
}

/// Everything one (Z, S, R) draw contributes to every coverage variant.
struct CoverageDraw {
  double kl = 0.0;            // D(P_{table|z,s} || P_{table|z}), exact
  double density = 0.0;       // information density at the realized table
  double train_r = 0.0;       // E_R training loss
  double test_r = 0.0;        // E_R test loss
  double train_single = 0.0;  // losses of the realized R draw
  double test_single = 0.0;
};

inline std::vector<CoverageDraw> coverage_draws(const SimConfig& config, std::size_t trials,
                                                unsigned threads = 1) {
  const Simulator sim(config);
  const std::uint64_t base = derive_seed(config.seed, 11);
  std::vector<CoverageDraw> out(trials);
  parallel_for(trials, threads, [&](std::size_t t) {
    auto rng = rng_stream(base, t);
    const auto z = draw_supersample(config, rng);
    const auto s = draw_membership(static_cast<std::size_t>(config.n), rng);
    const std::uint64_t r_seed = rng.next_u64();
    const auto model = sim.exact_model(z);
    const auto train = training_set(z, s);
    CoverageDraw d;
    d.kl = model.kl(s);
    for (const auto& wh : sim.posterior(train)) {
      const auto split = split_losses(sim.loss_table(wh.hypothesis, z), s);
      d.train_r += wh.prob * split.train_loss;
      d.test_r += wh.prob * split.test_loss;
    }
    const auto h = sim.run(train, r_seed);
    const auto table = sim.loss_table(h, z);
    const auto split = split_losses(table, s);
    d.train_single = split.train_loss;
    d.test_single = split.test_loss;
    d.density = model.information_density(s, table_key(table, 2));
    out[t] = d;
  });
  return out;
}

struct CoverageResult {
  HighProbVariant variant = HighProbVariant::sqrt;
  double delta = 0.0;
  std::size_t trials = 0;
  std::size_t violations = 0;
  double rate = 0.0;
  double threshold = 0.0;  // delta + 3 sqrt(delta (1 - delta) / trials)
  bool pass = false;
};

/// Counts draws where the theorem's left side exceeds its right side.
inline CoverageResult coverage_rate(const std::vector<CoverageDraw>& draws, HighProbVariant v,
                                    double delta, const SimConfig& config) {
  if (draws.empty()) throw DomainError("coverage needs at least one draw");
  const long long n = config.n;
  std::optional<NatarajanSpec> spec;
  if (v == HighProbVariant::natarajan_kl) {
    if (config.learner != LearnerKind::erm_finite_class && config.learner != LearnerKind::gibbs) {
      throw ConfigError("the Natarajan bound needs a learner that outputs a member of the finite class");
    }
    const FiniteClass fc(config.K, config.N, config.breakpoints);
    spec.emplace(fc.natarajan_dim(), config.N, n);
  }
  constexpr double tol = 1e-12;
  CoverageResult r;
  r.variant = v;
  r.delta = delta;
  r.trials = draws.size();
  for (const auto& d : draws) {
    bool violated = false;
    switch (v) {
      case HighProbVariant::sqrt:
        violated = d.test_r - d.train_r > highprob_sqrt_bound(d.kl, n, delta) + tol;
        break;
      case HighProbVariant::kl:
        violated = binary_kl(d.train_r, 0.5 * (d.train_r + d.test_r)) > highprob_kl_rhs(d.kl, n, delta) + tol;
        break;
      case HighProbVariant::single_draw_sqrt: {
        const auto b = single_draw_bounds(d.density, n, delta, d.train_single);
        violated = d.test_single - d.train_single > b.sqrt_value + tol;
        break;
      }
      case HighProbVariant::single_draw_kl: {
        const double rhs = std::max(0.0, highprob_kl_rhs(d.density, n, delta));
        violated = binary_kl(d.train_single, 0.5 * (d.train_single + d.test_single)) > rhs + tol;
        break;
      }
      case HighProbVariant::natarajan_kl:
        violated = binary_kl(d.train_r, 0.5 * (d.train_r + d.test_r)) >
                   natarajan_highprob_kl_rhs(*spec, delta) + tol;
        break;
    }
    r.violations += violated;
  }
  const double t = static_cast<double>(r.trials);
  r.rate = static_cast<double>(r.violations) / t;
  r.threshold = delta + 3.0 * std::sqrt(delta * (1.0 - delta) / t);
  r.pass = r.rate <= r.threshold;
  return r;
}

inline CoverageResult coverage_test(HighProbVariant v, const SimConfig& config, double delta,
                                    std::size_t trials, unsigned threads = 1) {
  return coverage_rate(coverage_draws(config, trials, threads), v, delta, config);
}

// ---------------------------------------------------------------------------
// Default suite

/// The full deterministic concentration suite. Random inputs come from
/// streams keyed by `seed`.
inline std::vector<CheckResult> default_suite(std::uint64_t seed = 2024, bool include_mc = false,
                                              unsigned threads = 1) {
  std::vector<CheckResult> out;
  for (int n = 1; n <= 30; ++n) out.push_back(check_maurer_lower(n));

  auto rng = rng_stream(seed, 0);
  for (int v = 0; v < 100; ++v) {
    const std::size_t n = 1 + rng.below(12);
    std::vector<double> means(n);
    for (auto& m : means) m = rng.uniform();
    for (double g : {0.5, 1.0, 2.0, 4.0}) out.push_back(check_mcallester_exact(means, g));
  }

  for (const auto& g : feasible_gamma_pairs()) {
    CheckResult worst;
    bool first = true;
    bool all = true;
    for (int i = 0; i < 50; ++i) {
      for (int j = 0; j < 50; ++j) {
        auto r = check_steinke_mgf(i / 49.0, j / 49.0, g);
        all = all && r.pass;
        if (first || r.statistic > worst.statistic) {
          worst = r;
          first = false;
        }
      }
    }
    worst.name = "steinke_mgf_grid";
    worst.pass = all;
    worst.note = "largest value over the 50x50 (a,b) grid";
    out.push_back(worst);
  }

  for (int k = 0; k <= 100; ++k) out.push_back(check_interp_mgf(k / 100.0));

  auto trng = rng_stream(seed, 1);
  for (int m : {1, 2, 4, 8}) {
    for (int table = 0; table < 100; ++table) {
      std::vector<std::pair<double, double>> values(static_cast<std::size_t>(m));
      for (auto& [u, v] : values) {
        u = trng.uniform();
        v = trng.uniform();
      }
      for (int g = -4; g <= 4; ++g) out.push_back(check_subgauss_mgf(values, g));
    }
  }

  if (include_mc) {
    std::vector<BoundedVariable> vars;
    for (int i = 0; i < 10; ++i) {
      if (i % 2 == 0) vars.push_back({0.0, 0.5 + 0.3 * i, 1.0 + 0.2 * i});
      else vars.push_back({0.1 * i, 0.0, 0.0});
    }
    out.push_back(check_mcallester_mc(vars, 2.0, derive_seed(seed, 5), 1000000, threads));
  }
  return out;
}

}  // namespace ecmi

#endif  // ECMI_VERIFY_HPP
