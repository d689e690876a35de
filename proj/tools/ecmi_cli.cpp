// ecmi: simulate, estimate, bounds, verify, compare, plot.
//
// Exit codes: 0 success, 1 a check failed, 2 usage or config error.

#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"

#include "ecmi/analyze.hpp"
#include "ecmi/bounds.hpp"
#include "ecmi/estimators.hpp"
#include "ecmi/serialize.hpp"
#include "ecmi/simulate.hpp"
#include "ecmi/verify.hpp"

namespace {

using ecmi::json;

constexpr int kOk = 0;
constexpr int kCheckFailed = 1;
constexpr int kUsage = 2;

const char* kLegendHelp =
    "SVG legend colors: binary_kl #1f77b4, linear #ff7f0e, sqrt #2ca02c, "
    "interpolation #9467bd, trivial #d9d9d9";

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ecmi::ConfigError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ecmi::ConfigError(path + ": " + e.what());
  }
}

/// Writes to `path`, or stdout when it is empty or "-".
void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ecmi::ConfigError("cannot write " + path);
  out << text;
}

std::string replace_extension(const std::string& path, const std::string& ext) {
  const auto dot = path.find_last_of('.');
  const auto slash = path.find_last_of('/');
  if (dot == std::string::npos || (slash != std::string::npos && dot < slash)) return path + ext;
  return path.substr(0, dot) + ext;
}

struct Common {
  std::string out;
  std::optional<unsigned> threads;
  std::string format = "json";
};

void add_common(CLI::App* app, Common& c, std::initializer_list<const char*> formats) {
  app->add_option("--out", c.out, "Output file (stdout when omitted)");
  app->add_option("--threads", c.threads, "Worker cap (falls back to ECMI_THREADS)")->check(CLI::PositiveNumber);
  app->add_option("--format", c.format, "Output format")->check(CLI::IsMember(std::vector<std::string>(formats.begin(), formats.end())));
}

// ---------------------------------------------------------------------------

int cmd_simulate(const std::string& config_path, std::optional<std::uint64_t> seed, const Common& c) {
  auto cfg_json = read_json_file(config_path);
  auto config = ecmi::sim_config_from_json(cfg_json);
  if (seed) config.seed = *seed;
  if (config.k2 < 2) {
    throw ecmi::ConfigError("k2 = " + std::to_string(config.k2) +
                            ": samplewise e-CMI estimation needs at least 2 draws of S per supersample (k2 >= 2)");
  }
  const auto result = ecmi::run_experiment(config, ecmi::resolve_threads(c.threads));
  if (c.format == "csv") {
    std::ostringstream os;
    ecmi::write_batch_csv(os, result.batch);
    emit(c.out, os.str());
  } else {
    emit(c.out, ecmi::to_json(result.batch, config).dump(1) + "\n");
  }
  std::cerr << "simulated " << config.k1 << "x" << config.k2 << " draws, mean gap "
            << result.gap.gap.mean << " +- " << result.gap.gap.std_error << "\n";
  return kOk;
}

int cmd_estimate(const std::string& batch_path, std::optional<int> bins, const Common& c) {
  const auto loaded = ecmi::batch_from_json(read_json_file(batch_path));
  const int b = bins.value_or(loaded.config.bins);
  const auto m = ecmi::ecmi_matrix(loaded.batch, b, ecmi::resolve_threads(c.threads));
  if (c.format == "csv") {
    std::ostringstream os;
    os << "k1_idx,i,ecmi\n";
    for (std::size_t k = 0; k < m.size(); ++k)
      for (std::size_t i = 0; i < m[k].size(); ++i) os << k << ',' << i << ',' << ecmi::fmt(m[k][i]) << '\n';
    emit(c.out, os.str());
    return kOk;
  }
  json rows = json::array();
  for (const auto& r : m) rows.push_back(r);
  auto cfg = loaded.config;
  cfg.bins = b;
  emit(c.out, json{{"schema", ecmi::kSchemaVersion}, {"config", ecmi::to_json(cfg)}, {"bins", b},
                   {"ecmi", rows}}.dump(1) + "\n");
  return kOk;
}

void print_table(std::ostream& os, const ecmi::ExperimentReport& rep) {
  os << std::left << std::setw(26) << "bound" << std::setw(12) << "value" << std::setw(12) << "raw"
     << std::setw(12) << "std_err" << "flags\n";
  for (const auto& b : rep.bounds) {
    os << std::setw(26) << ecmi::to_string(b.kind) << std::setw(12) << ecmi::fmt(b.value).substr(0, 10)
       << std::setw(12) << ecmi::fmt(b.raw_value).substr(0, 10) << std::setw(12)
       << ecmi::fmt(b.value_std_error.value_or(0.0)).substr(0, 10);
    if (!b.applicable) os << "inapplicable ";
    if (b.vacuous) os << "vacuous ";
    if (!b.note.empty()) os << "(" << b.note << ")";
    os << "\n";
  }
  os << "training loss " << rep.train_loss << ", population loss " << rep.gap.population_loss.mean
     << ", gap " << rep.gap.gap.mean << " +- " << rep.gap.gap.std_error << "\n";
}

int cmd_bounds(const std::string& batch_path, const std::string& which, std::optional<int> bins,
               double delta, const Common& c) {
  auto loaded = ecmi::batch_from_json(read_json_file(batch_path));
  if (bins) loaded.config.bins = *bins;
  const unsigned threads = ecmi::resolve_threads(c.threads);
  auto rep = ecmi::experiment_report(loaded.batch, loaded.config, threads);

  if (which == "highprob_sqrt" || which == "highprob_kl" || which == "mi_seeger") {
    ecmi::BoundReport r;
    r.kind = *ecmi::bound_kind_from_string(which);
    if (which == "mi_seeger") {
      r.applicable = false;
      r.note = "needs I(W; Z_i) from the standard setting; a CMI batch does not provide it";
    } else {
      // Per-draw bound with the sampled table KL, averaged over supersamples.
      double kl = 0.0;
      for (std::size_t k = 0; k < loaded.batch.k1(); ++k) {
        kl += ecmi::full_table_kl_sampled(loaded.batch, k, loaded.config.bins).value;
      }
      kl /= static_cast<double>(loaded.batch.k1());
      const auto n = static_cast<long long>(loaded.batch.n());
      r.raw_value = which == "highprob_sqrt" ? ecmi::highprob_sqrt_bound(kl, n, delta)
                                             : ecmi::highprob_kl_bound(kl, n, delta, rep.train_loss);
      r.value = std::clamp(r.raw_value, 0.0, 1.0);
      r.vacuous = r.raw_value >= 1.0;
      r.train_loss = rep.train_loss;
      r.note = "table KL from the sampled plug-in estimator (biased upward), delta = " + ecmi::fmt(delta);
    }
    rep.bounds = {r};
    rep.validity.clear();
  } else if (which != "all") {
    const auto kind = ecmi::bound_kind_from_string(which);
    if (!kind) throw ecmi::ConfigError("unknown bound '" + which + "'");
    std::vector<ecmi::BoundReport> keep;
    for (const auto& b : rep.bounds)
      if (b.kind == *kind) keep.push_back(b);
    if (keep.empty()) {
      ecmi::BoundReport r;
      r.kind = *kind;
      r.applicable = false;
      r.note = "not produced for this batch (deterministic learner or unsupported setting)";
      keep.push_back(r);
    }
    std::vector<ecmi::ValidityCheck> v;
    for (const auto& x : rep.validity)
      if (x.kind == *kind) v.push_back(x);
    rep.bounds = keep;
    rep.validity = v;
  }

  print_table(std::cerr, rep);
  if (c.format == "csv") {
    std::ostringstream os;
    os << "bound,value,raw_value,applicable,vacuous,value_std_error\n";
    for (const auto& b : rep.bounds) {
      os << ecmi::to_string(b.kind) << ',' << ecmi::fmt(b.value) << ',' << ecmi::fmt(b.raw_value) << ','
         << b.applicable << ',' << b.vacuous << ',' << ecmi::fmt(b.value_std_error.value_or(0.0)) << '\n';
    }
    emit(c.out, os.str());
  } else {
    auto j = ecmi::to_json(rep, loaded.config);
    j["delta"] = delta;
    emit(c.out, j.dump(1) + "\n");
  }
  return kOk;
}

int cmd_verify(std::optional<int> maurer_n, bool mc, const std::string& coverage_config,
               std::optional<std::uint64_t> seed, double delta,
               std::size_t trials, const Common& c) {
  const unsigned threads = ecmi::resolve_threads(c.threads);
  json records = json::array();
  bool all = true;
  if (maurer_n) {
    const auto r = ecmi::check_maurer_lower(*maurer_n);
    std::cout << std::setprecision(12) << r.statistic << "\n";
    records.push_back(ecmi::to_json(r));
    all = r.pass;
  } else if (!coverage_config.empty()) {
    auto config = ecmi::sim_config_from_json(read_json_file(coverage_config));
    if (seed) config.seed = *seed;
    const auto draws = ecmi::coverage_draws(config, trials, threads);
    for (auto v : {ecmi::HighProbVariant::sqrt, ecmi::HighProbVariant::kl, ecmi::HighProbVariant::single_draw_sqrt,
                   ecmi::HighProbVariant::single_draw_kl}) {
      const auto r = ecmi::coverage_rate(draws, v, delta, config);
      records.push_back(ecmi::to_json(r));
      all = all && r.pass;
    }
  } else {
    for (const auto& r : ecmi::default_suite(2024, mc, threads)) {
      records.push_back(ecmi::to_json(r));
      all = all && r.pass;
    }
  }
  std::size_t failed = 0;
  for (const auto& r : records) failed += !r.at("pass").get<bool>();
  std::cerr << records.size() << " checks, " << failed << " failed\n";
  if (!c.out.empty() || !maurer_n) {
    emit(c.out, json{{"schema", ecmi::kSchemaVersion}, {"checks", records}}.dump(1) + "\n");
  }
  return all ? kOk : kCheckFailed;
}

struct GridFlags {
  double b_min = 1e-3, b_max = 1.0, l_min = 0.0, l_max = 0.5;
  std::size_t b_count = 61, l_count = 51;
};

int cmd_compare(const std::string& mode, double B, const GridFlags& g, const Common& c) {
  const unsigned threads = ecmi::resolve_threads(c.threads);
  std::ostringstream csv, svg;
  json doc{{"schema", ecmi::kSchemaVersion}, {"mode", mode}};
  if (mode == "ordering") {
    const auto order = ecmi::ordering_check(B);
    csv << "rank,bound,value\n";
    json items = json::array();
    for (std::size_t k = 0; k < order.size(); ++k) {
      csv << k + 1 << ',' << order[k].name << ',' << ecmi::fmt(order[k].value) << '\n';
      std::cerr << order[k].name << " " << ecmi::fmt(order[k].value) << "\n";
      items.push_back({{"bound", order[k].name}, {"value", order[k].value}});
    }
    doc["B"] = B;
    doc["ordering"] = items;
  } else if (mode == "regions") {
    const auto grid = ecmi::region_map(ecmi::log_grid(g.b_min, g.b_max, g.b_count),
                                       ecmi::linear_grid(g.l_min, g.l_max, g.l_count), threads);
    ecmi::write_region_csv(csv, grid);
    ecmi::write_region_svg(svg, grid);
    json counts = json::object();
    for (const auto& [label, n] : ecmi::region_counts(grid)) counts[ecmi::to_string(label)] = n;
    for (const auto& [label, n] : counts.items()) std::cerr << label << ": " << n << " cells\n";
    doc["grid"] = {{"B", {{"min", g.b_min}, {"max", g.b_max}, {"count", g.b_count}, {"spacing", "log"}}},
                   {"L", {{"min", g.l_min}, {"max", g.l_max}, {"count", g.l_count}, {"spacing", "linear"}}}};
    doc["counts"] = counts;
  } else {
    const auto pts = ecmi::curves(ecmi::linear_grid(std::max(g.b_min, 1e-6), g.b_max, g.b_count));
    ecmi::write_curves_csv(csv, pts);
    ecmi::write_curves_svg(svg, pts);
    doc["grid"] = {{"B", {{"min", g.b_min}, {"max", g.b_max}, {"count", g.b_count}, {"spacing", "linear"}}}};
  }

  if (c.format == "json") {
    doc["csv"] = csv.str();
    emit(c.out, doc.dump(1) + "\n");
  } else if (c.format == "svg") {
    if (mode == "ordering") throw ecmi::ConfigError("ordering mode has no SVG output");
    emit(c.out, svg.str());
    // The CSV always goes alongside so the data can be re-plotted.
    if (!c.out.empty() && c.out != "-") emit(replace_extension(c.out, ".csv"), csv.str());
  } else {
    emit(c.out, csv.str());
  }
  return kOk;
}

/// Renders a CSV written by `compare` as SVG.
int cmd_plot(const std::string& input, const Common& c) {
  std::ifstream in(input);
  if (!in) throw ecmi::ConfigError("cannot open " + input);
  std::string header;
  std::getline(in, header);
  std::ostringstream svg;
  std::string line;
  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    return out;
  };
  if (header == "B,L,binary_kl,linear,sqrt,winner") {
    ecmi::RegionGrid g;
    std::vector<double> Bs, Ls;
    while (std::getline(in, line)) {
      const auto f = split(line);
      if (f.size() != 6) throw ecmi::ConfigError("malformed region CSV row: " + line);
      ecmi::RegionCell cell;
      cell.B = std::stod(f[0]);
      cell.L = std::stod(f[1]);
      cell.binary_kl = std::stod(f[2]);
      cell.linear = std::stod(f[3]);
      cell.sqrt = std::stod(f[4]);
      cell.winner = f[5] == "binary_kl" ? ecmi::RegionLabel::binary_kl
                    : f[5] == "linear"  ? ecmi::RegionLabel::linear
                    : f[5] == "sqrt"    ? ecmi::RegionLabel::sqrt
                                        : ecmi::RegionLabel::trivial;
      if (std::find(Bs.begin(), Bs.end(), cell.B) == Bs.end()) Bs.push_back(cell.B);
      if (std::find(Ls.begin(), Ls.end(), cell.L) == Ls.end()) Ls.push_back(cell.L);
      g.cells.push_back(cell);
    }
    if (g.cells.empty() || Bs.size() * Ls.size() != g.cells.size()) throw ecmi::ConfigError("region CSV is not a full grid");
    g.B = Bs;
    g.L = Ls;
    ecmi::write_region_svg(svg, g);
  } else if (header == "B,interpolation,binary_kl,linear,sqrt") {
    std::vector<ecmi::CurvePoint> pts;
    while (std::getline(in, line)) {
      const auto f = split(line);
      if (f.size() != 5) throw ecmi::ConfigError("malformed curve CSV row: " + line);
      pts.push_back({std::stod(f[0]), std::stod(f[1]), std::stod(f[2]), std::stod(f[3]), std::stod(f[4])});
    }
    if (pts.size() < 2) throw ecmi::ConfigError("curve CSV needs at least two rows");
    ecmi::write_curves_svg(svg, pts);
  } else {
    throw ecmi::ConfigError("unrecognized CSV header: " + header);
  }
  emit(c.out, svg.str());
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Evaluated-CMI generalization bounds: simulate, estimate, bound, verify, compare, plot"};
  app.require_subcommand(1);
  app.footer(kLegendHelp);

  Common common;
  std::string config_path, batch_path, which = "all", mode = "ordering", coverage_config, input;
  std::optional<std::uint64_t> seed;
  std::optional<int> bins, maurer_n;
  double delta = 0.05, B = 0.1;
  bool mc = false;
  std::size_t trials = 2000;
  GridFlags grid;

  auto* sim = app.add_subcommand("simulate", "Run a toy experiment and write the trial batch");
  sim->add_option("--config", config_path, "SimConfig JSON")->required();
  sim->add_option("--seed", seed, "Override the master seed");
  add_common(sim, common, {"json", "csv"});

  auto* est = app.add_subcommand("estimate", "Samplewise e-CMI per supersample draw");
  est->add_option("--batch", batch_path, "Trial batch JSON")->required();
  est->add_option("--bins", bins, "Loss bins")->check(CLI::Range(2, 1000));
  add_common(est, common, {"json", "csv"});

  auto* bnd = app.add_subcommand("bounds", "Bound report for a trial batch");
  bnd->add_option("--batch", batch_path, "Trial batch JSON")->required();
  bnd->add_option("--bound", which, "Bound name or 'all'");
  bnd->add_option("--bins", bins, "Loss bins")->check(CLI::Range(2, 1000));
  bnd->add_option("--delta", delta, "Confidence level for high-probability bounds")->check(CLI::Range(1e-12, 1.0 - 1e-12));
  add_common(bnd, common, {"json", "csv"});

  auto* ver = app.add_subcommand("verify", "Concentration-inequality checks");
  ver->add_option("--maurer-n", maurer_n, "Only the fair-coin lower bound at this n")->check(CLI::Range(1, 30));
  ver->add_flag("--mc", mc, "Add the Monte Carlo check with bounded non-Bernoulli variables");
  ver->add_option("--coverage-config", coverage_config, "SimConfig JSON for high-probability coverage");
  ver->add_option("--delta", delta, "Coverage delta")->check(CLI::Range(1e-12, 1.0 - 1e-12));
  ver->add_option("--trials", trials, "Coverage trials")->check(CLI::PositiveNumber);
  ver->add_option("--seed", seed, "Override the coverage config seed");
  add_common(ver, common, {"json"});

  auto* cmp = app.add_subcommand("compare", "Bound comparisons at a common information level");
  cmp->add_option("--mode", mode, "ordering | regions | curves")
      ->check(CLI::IsMember({"ordering", "regions", "curves"}));
  cmp->add_option("--B", B, "Information level for ordering mode")->check(CLI::PositiveNumber);
  cmp->add_option("--b-min", grid.b_min, "Smallest B")->check(CLI::PositiveNumber);
  cmp->add_option("--b-max", grid.b_max, "Largest B")->check(CLI::PositiveNumber);
  cmp->add_option("--b-count", grid.b_count, "B grid size")->check(CLI::Range(2, 100000));
  cmp->add_option("--l-min", grid.l_min, "Smallest training loss")->check(CLI::Range(0.0, 1.0));
  cmp->add_option("--l-max", grid.l_max, "Largest training loss")->check(CLI::Range(0.0, 1.0));
  cmp->add_option("--l-count", grid.l_count, "Training-loss grid size")->check(CLI::Range(2, 100000));
  add_common(cmp, common, {"csv", "svg", "json"});
  cmp->get_option("--format")->default_str("csv");

  auto* plt = app.add_subcommand("plot", "Render a compare CSV as SVG");
  plt->add_option("--input", input, "CSV written by compare")->required();
  add_common(plt, common, {"svg"});

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (*sim) return cmd_simulate(config_path, seed, common);
    if (*est) return cmd_estimate(batch_path, bins, common);
    if (*bnd) return cmd_bounds(batch_path, which, bins, delta, common);
    if (*ver) return cmd_verify(maurer_n, mc, coverage_config, seed, delta, trials, common);
    if (*cmp) {
      if (common.format == "json" && cmp->count("--format") == 0) common.format = "csv";
      return cmd_compare(mode, B, grid, common);
    }
    if (*plt) return cmd_plot(input, common);
  } catch (const ecmi::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kUsage;
  } catch (const ecmi::DomainError& e) {
    std::cerr << "invalid argument: " << e.what() << "\n";
    return kUsage;
  } catch (const ecmi::DimensionError& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return kUsage;
  } catch (const ecmi::EstimationError& e) {
    std::cerr << "estimation error: " << e.what() << "\n";
    return kUsage;
  }
  return kUsage;
}
