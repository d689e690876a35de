// Acceptance run: one PASS/FAIL line per criterion, with the measured
// quantities and wall time. Exit status is non-zero when any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "ecmi/analyze.hpp"
#include "ecmi/bounds.hpp"
#include "ecmi/estimators.hpp"
#include "ecmi/simulate.hpp"
#include "ecmi/verify.hpp"

using namespace ecmi;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

const unsigned kThreads = resolve_threads();

std::string num(double v, int prec = 6) {
  std::ostringstream os;
  os.precision(prec);
  os << v;
  return os.str();
}

SimConfig sweep_config(LearnerKind learner, double eta, double a) {
  SimConfig c;
  c.K = 64;
  c.N = 2;
  c.eta = eta;
  c.corruption = a;
  c.learner = learner;
  c.n = 10;
  c.k1 = 20;
  c.k2 = 200;
  c.seed = 2024;
  return c;
}

struct SweepEntry {
  SimConfig config;
  ExperimentReport report;
};

const std::vector<SweepEntry>& sweep() {
  static const std::vector<SweepEntry> entries = [] {
    std::vector<SweepEntry> out;
    for (auto learner : {LearnerKind::memorizer, LearnerKind::erm_finite_class, LearnerKind::gibbs}) {
      for (double eta : {0.0, 0.1}) {
        for (double a : {0.0, 1.0}) {
          const auto c = sweep_config(learner, eta, a);
          const auto r = run_experiment(c, kThreads);
          out.push_back({c, experiment_report(r.batch, c, kThreads)});
        }
      }
    }
    return out;
  }();
  return entries;
}

std::string label(const SimConfig& c) {
  return std::string(to_string(c.learner)) + "/eta=" + num(c.eta) + "/a=" + num(c.corruption);
}

// ---------------------------------------------------------------------------

Outcome c1_closed_form_inversion() {
  // The closed form 2 - 2e^{-c} exceeds 1 once c > ln 2, while the inversion is
  // a supremum over p in [0,1]; the comparison uses min(1, closed form).
  double worst = 0.0;
  int above_ln2 = 0;
  for (int k = 0; k < 1000; ++k) {
    const double c = 5.0 * k / 999.0;
    const double closed = 2.0 - 2.0 * std::exp(-c);
    above_ln2 += closed > 1.0;
    worst = std::max(worst, std::abs(invert_kl_half(0.0, c) - std::min(1.0, closed)));
  }
  return {worst <= 1e-9, "max |d^-1(0,c) - min(1, 2-2e^-c)| = " + num(worst, 3) + " over 1000 c in [0,5]; " +
                             std::to_string(above_ln2) + " points have c > ln 2 where the inversion saturates at 1"};
}

Outcome c2_ordering() {
  bool ok = true;
  int bad_low = 0, bad_high = 0;
  for (int k = 0; k < 200; ++k) {
    const double B = std::exp(std::log(1e-4) + (std::log(0.26) - std::log(1e-4)) * (k + 1) / 200.0);
    const auto v = ordering_values(B);
    if (!(v[0].value < v[1].value && v[1].value < v[2].value && v[2].value < v[3].value)) ++bad_low;
  }
  for (int k = 0; k < 50; ++k) {
    const double B = 0.28 + (1.0 - 0.28) * k / 49.0;
    const auto v = ordering_values(B);
    if (!(v[3].value < v[2].value)) ++bad_high;
  }
  const auto a = ordering_values(0.1);
  const bool anchor = std::abs(a[0].value - 0.14427) <= 1e-5 && std::abs(a[1].value - 0.190325) <= 1e-5 &&
                      std::abs(a[2].value - 0.27360) <= 1e-3 && std::abs(a[3].value - 0.44721) <= 1e-5;
  ok = bad_low == 0 && bad_high == 0 && anchor;
  return {ok, "low-B order violations " + std::to_string(bad_low) + "/200, high-B inversion violations " +
                  std::to_string(bad_high) + "/50, B=0.1 -> (" + num(a[0].value) + ", " + num(a[1].value) + ", " +
                  num(a[2].value) + ", " + num(a[3].value) + ")"};
}

Outcome c3_gamma() {
  const double g = optimal_interp_gamma();
  const double v = 2 * g * g;
  return {v >= 0.262 && v <= 0.272, "gamma1_opt = " + num(g, 10) + ", 2 gamma1^2 = " + num(v, 6)};
}

Outcome c4_concentration() {
  bool maurer = true;
  for (int n = 2; n <= 30; ++n) maurer = maurer && check_maurer_lower(n).pass;
  const double m4 = maurer_statistic(4);
  maurer = maurer && std::abs(m4 - 3.21875) <= 1e-12;

  std::size_t mc_count = 0, st_count = 0, sg_count = 0, failures = 0;
  for (const auto& r : default_suite(2024, false, kThreads)) {
    if (r.name == "mcallester_exact") ++mc_count;
    if (r.name == "steinke_mgf_grid") ++st_count;
    if (r.name == "subgauss_mgf") ++sg_count;
    failures += !r.pass;
  }
  const bool counts = mc_count == 400 && st_count == 20 && sg_count == 4 * 100 * 9;
  return {maurer && counts && failures == 0,
          "Maurer n=4 statistic " + num(m4, 12) + "; exact McAllester " + std::to_string(mc_count) +
              ", Steinke grids " + std::to_string(st_count) + ", sub-Gaussian " + std::to_string(sg_count) +
              " checks; failures " + std::to_string(failures)};
}

Outcome c5_validity() {
  std::size_t checks = 0, failed = 0;
  std::string failures;
  std::string corrupted;
  bool corrupted_ok = true;
  for (const auto& e : sweep()) {
    for (const auto& v : e.report.validity) {
      ++checks;
      if (!v.pass) {
        ++failed;
        failures += " " + label(e.config) + ":" + to_string(v.kind);
      }
    }
    if (e.config.learner == LearnerKind::memorizer && e.config.corruption == 1.0) {
      const double gap = e.report.gap.gap.mean;
      const auto* kl = e.report.find(BoundKind::binary_kl);
      const auto* kld = e.report.find(BoundKind::binary_kl_disintegrated);
      const auto* interp = e.report.find(BoundKind::interpolation);
      const bool interp_ok = !interp->applicable || interp->raw_value < 1.0;
      const bool ok = gap >= 0.4 && kl->raw_value < 1.0 && kld->raw_value < 1.0 && interp_ok;
      corrupted_ok = corrupted_ok && ok;
      corrupted += " [eta=" + num(e.config.eta) + ": gap " + num(gap, 4) + ", binary_kl " + num(kl->raw_value, 4) +
                   ", binary_kl_disintegrated " + num(kld->raw_value, 4) + ", interpolation " +
                   (interp->applicable ? num(interp->raw_value, 4) : std::string("n/a (L>0)")) + "]";
    }
  }
  return {failed == 0 && corrupted_ok, std::to_string(checks) + " bound-vs-truth checks over 12 configs, " +
                                           std::to_string(failed) + " failed" + failures +
                                           "; corrupted memorizer:" + corrupted};
}

Outcome c6_jensen() {
  std::size_t bad = 0;
  double worst_kl = -kInf;
  for (const auto& e : sweep()) {
    const auto* dis = e.report.find(BoundKind::sqrt_disintegrated);
    const auto* integ = e.report.find(BoundKind::sqrt_integrated);
    const auto* kld = e.report.find(BoundKind::binary_kl_disintegrated);
    const auto* kl = e.report.find(BoundKind::binary_kl);
    if (dis->raw_value > integ->raw_value + 1e-12) ++bad;
    const double sigma = std::hypot(kld->value_std_error.value_or(0.0), kl->value_std_error.value_or(0.0));
    if (kld->raw_value > kl->raw_value + 2 * sigma) ++bad;
    worst_kl = std::max(worst_kl, kld->raw_value - kl->raw_value);
  }
  return {bad == 0, std::to_string(bad) + " violations over 12 configs; largest disintegrated - pooled KL = " +
                        num(worst_kl, 4)};
}

Outcome c7_data_processing() {
  SimConfig c;
  c.K = 16;
  c.N = 3;
  c.eta = 0.1;
  c.learner = LearnerKind::erm_finite_class;
  c.breakpoints = 2;
  c.n = 10;
  c.k1 = 20;
  c.k2 = 200;
  c.seed = 5;
  const auto r = run_experiment(c, kThreads);
  const auto& b = r.batch;
  bool ok = true;
  std::size_t exact_violations = 0;
  double worst = -kInf;
  for (std::size_t i = 0; i < b.n(); ++i) {
    std::vector<double> loss(b.k1()), pred(b.k1()), hyp(b.k1());
    for (std::size_t k = 0; k < b.k1(); ++k) {
      loss[k] = ecmi_samplewise(b, k, i, c.bins);
      pred[k] = prediction_mi_samplewise(b, k, i);
      hyp[k] = hypothesis_mi_samplewise(b, k, i);
      exact_violations += loss[k] > pred[k] + 1e-12 || pred[k] > hyp[k] + 1e-12;
    }
    const auto ml = mean_and_error(loss), mp = mean_and_error(pred), mh = mean_and_error(hyp);
    const double s1 = std::hypot(ml.std_error, mp.std_error), s2 = std::hypot(mp.std_error, mh.std_error);
    ok = ok && ml.mean <= mp.mean + 2 * s1 && mp.mean <= mh.mean + 2 * s2;
    worst = std::max({worst, ml.mean - mp.mean, mp.mean - mh.mean});
  }
  return {ok, "N=3 erm, 10 indices: largest mean step violation " + num(worst, 4) +
                  " (negative means ordered); per-draw inversions " + std::to_string(exact_violations)};
}

Outcome c8_coverage() {
  std::string detail;
  bool ok = true;
  for (auto learner : {LearnerKind::memorizer, LearnerKind::gibbs}) {
    SimConfig c;
    c.K = 64;
    c.N = 2;
    c.eta = 0.1;
    c.learner = learner;
    c.n = 10;
    c.seed = 31;
    const auto draws = coverage_draws(c, 2000, kThreads);
    detail += std::string(" ") + to_string(learner) + ":";
    for (double delta : {0.05, 0.2}) {
      for (auto v : {HighProbVariant::sqrt, HighProbVariant::kl, HighProbVariant::single_draw_sqrt,
                     HighProbVariant::single_draw_kl}) {
        const auto r = coverage_rate(draws, v, delta, c);
        ok = ok && r.pass;
        detail += " " + std::string(to_string(v)) + "@" + num(delta) + "=" + num(r.rate, 4) + (r.pass ? "" : "!");
      }
    }
  }
  return {ok, "violation rates vs delta + 3 sigma, 2000 trials, n=10, exact KL;" + detail};
}

Outcome c9_natarajan() {
  const double sq = natarajan_sqrt_bound({1, 2, 1000});
  const double cap = natarajan_cmi_cap({2, 3, 100});
  const auto g = growth_function_cap(2, 3, 10);
  bool grid = true;
  for (int d = 0; d <= 6; ++d)
    for (int N = 2; N <= 6; ++N)
      for (long long m = 0; m <= 60; ++m) {
        const auto c = growth_function_cap(d, N, m);
        grid = grid && static_cast<double>(c.exact) <= c.upper * (1 + 1e-12);
      }
  const bool anchors = std::abs(sq - 0.13115) <= 1e-4 && std::abs(cap - 13.408) <= 1e-3 && g.exact == 436 &&
                       std::abs(g.upper - 1662.5) <= 0.5;

  std::string emp;
  bool emp_ok = true;
  for (int N : {2, 3}) {
    SimConfig c;
    c.K = 32;
    c.N = N;
    c.eta = 0.1;
    c.learner = LearnerKind::erm_finite_class;
    c.breakpoints = 1;
    c.n = 10;
    c.seed = 41;
    const FiniteClass fc(c.K, c.N, c.breakpoints);
    const auto r = coverage_test(HighProbVariant::natarajan_kl, c, 0.05, 2000, kThreads);
    emp_ok = emp_ok && r.rate <= 0.05;
    emp += " N=" + std::to_string(N) + " d_N=" + std::to_string(fc.natarajan_dim()) + " rate " + num(r.rate, 4);
  }
  return {anchors && grid && emp_ok, "sqrt bound " + num(sq, 6) + ", CMI cap " + num(cap, 6) + ", growth (" +
                                         std::to_string(g.exact) + ", " + num(g.upper, 6) + "), grid " +
                                         (grid ? "ok" : "violated") + "; erm at delta=0.05:" + emp};
}

Outcome c10_regions() {
  const auto B = default_region_B();
  const auto L = default_region_L();
  const auto g = region_map(B, L, kThreads);
  const auto counts = region_counts(g);
  std::set<RegionLabel> present;
  for (const auto& [l, n] : counts) present.insert(l);
  const bool four = present.size() == 4;
  const bool low = g.at(0, 0).winner == RegionLabel::binary_kl;
  const bool high = g.at(L.size() - 1, B.size() - 1).winner == RegionLabel::trivial;
  std::string d = "labels present:";
  for (auto l : {RegionLabel::binary_kl, RegionLabel::linear, RegionLabel::sqrt, RegionLabel::trivial}) {
    const auto it = counts.find(l);
    d += std::string(" ") + to_string(l) + "=" + std::to_string(it == counts.end() ? 0 : it->second);
  }
  d += std::string("; low corner ") + to_string(g.at(0, 0).winner) + ", high corner " +
       to_string(g.at(L.size() - 1, B.size() - 1).winner);
  if (!counts.count(RegionLabel::sqrt)) {
    d += "; L + sqrt(2B) is never below the binary KL inversion (Pinsker), so no cell can be won by sqrt";
  }
  return {four && low && high, d};
}

Outcome c11_anchor() {
  const double v = highprob_sqrt_bound(1.0, 1000, 0.01);
  return {std::abs(v - 0.1346) <= 1e-3, "highprob_sqrt_bound(1, 1000, 0.01) = " + num(v, 6)};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"closed-form inversion", c1_closed_form_inversion},
      {"ordering at zero training loss", c2_ordering},
      {"optimal gamma1", c3_gamma},
      {"concentration suite", c4_concentration},
      {"bound validity vs truth", c5_validity},
      {"disintegration ordering", c6_jensen},
      {"data-processing chain", c7_data_processing},
      {"high-probability coverage", c8_coverage},
      {"Natarajan anchors and coverage", c9_natarajan},
      {"region map", c10_regions},
      {"high-probability sqrt anchor", c11_anchor},
  };
  int failed = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failed += !o.pass;
    std::printf("criterion %2zu %s  %s (%.2fs): %s\n", k + 1, o.pass ? "PASS" : "FAIL", criteria[k].first, secs,
                o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria failed\n", failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
