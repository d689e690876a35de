#ifndef ECMI_SERIALIZE_HPP
#define ECMI_SERIALIZE_HPP

// JSON and CSV layouts for configs, batches, reports, and check results.
// Every top-level document carries "schema": 1.

#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"

#include "ecmi/analyze.hpp"
#include "ecmi/core.hpp"
#include "ecmi/simulate.hpp"
#include "ecmi/verify.hpp"

namespace ecmi {

using json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

// ---------------------------------------------------------------------------
// SimConfig

inline json to_json(const SimConfig& c) {
  return json{{"K", c.K},
              {"N", c.N},
              {"eta", c.eta},
              {"corruption", c.corruption},
              {"learner", to_string(c.learner)},
              {"n", c.n},
              {"seed", c.seed},
              {"k1", c.k1},
              {"k2", c.k2},
              {"bins", c.bins},
              {"beta", c.beta},
              {"breakpoints", c.breakpoints},
              {"r_draws", c.effective_r_draws()}};
}

inline SimConfig sim_config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  auto required = [&](const char* key) -> const json& {
    if (!j.contains(key)) throw ConfigError(std::string("config is missing required field '") + key + "'");
    return j.at(key);
  };
  SimConfig c;
  try {
    c.K = required("K").get<int>();
    c.N = required("N").get<int>();
    c.eta = required("eta").get<double>();
    c.corruption = required("corruption").get<double>();
    const auto learner = required("learner").get<std::string>();
    const auto kind = learner_from_string(learner);
    if (!kind) throw ConfigError("unknown learner '" + learner + "'");
    c.learner = *kind;
    c.n = required("n").get<int>();
    c.seed = required("seed").get<std::uint64_t>();
    c.k1 = j.value("k1", c.k1);
    c.k2 = j.value("k2", c.k2);
    c.bins = j.value("bins", c.bins);
    c.beta = j.value("beta", c.beta);
    c.breakpoints = j.value("breakpoints", c.breakpoints);
    c.r_draws = j.value("r_draws", c.r_draws);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config field has the wrong type: ") + e.what());
  }
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------
// TrialBatch

inline json to_json(const TrialBatch& b, const SimConfig& config) {
  json trials = json::array();
  for (std::size_t a = 0; a < b.k1(); ++a) {
    for (std::size_t k = 0; k < b.k2(); ++k) {
      const Trial& t = b.at(a, k);
      json losses = json::array();
      for (const auto& r : t.losses.rows()) losses.push_back({r[0], r[1]});
      json s = json::array();
      for (auto bit : t.membership.bits()) s.push_back(static_cast<int>(bit));
      json jt{{"k1_idx", a}, {"k2_idx", k}, {"losses", losses}, {"s", s}, {"r_seed", t.r_seed},
              {"train_loss", t.train_loss}, {"test_loss", t.test_loss}};
      if (t.population_loss) jt["population_loss"] = *t.population_loss;
      if (!t.predictions.empty()) {
        json p = json::array();
        for (const auto& row : t.predictions) p.push_back({row[0], row[1]});
        jt["predictions"] = p;
      }
      if (t.hypothesis_id) jt["hypothesis_id"] = *t.hypothesis_id;
      trials.push_back(std::move(jt));
    }
  }
  json out{{"schema", kSchemaVersion},
           {"config", to_json(config)},
           {"k1", b.k1()},
           {"k2", b.k2()},
           {"n", b.n()},
           {"granularity", to_string(b.granularity())},
           {"trials", std::move(trials)}};
  if (!b.supersamples().empty()) {
    json zs = json::array();
    for (const auto& z : b.supersamples()) {
      json row = json::array();
      for (const auto& e : z) row.push_back({e.feature, e.label});
      zs.push_back(std::move(row));
    }
    out["supersamples"] = std::move(zs);
  }
  return out;
}

struct LoadedBatch {
  TrialBatch batch;
  SimConfig config;
};

inline LoadedBatch batch_from_json(const json& j) {
  try {
    if (j.value("schema", 0) != kSchemaVersion) throw ConfigError("unsupported batch schema");
    LoadedBatch out;
    out.config = sim_config_from_json(j.at("config"));
    const auto k1 = j.at("k1").get<std::size_t>();
    const auto k2 = j.at("k2").get<std::size_t>();
    const auto gran = j.at("granularity").get<std::string>() == "binary" ? LossGranularity::binary
                                                                         : LossGranularity::continuous;
    std::vector<Trial> trials(k1 * k2);
    for (const auto& jt : j.at("trials")) {
      const auto a = jt.at("k1_idx").get<std::size_t>();
      const auto k = jt.at("k2_idx").get<std::size_t>();
      if (a >= k1 || k >= k2) throw DimensionError("trial index out of range");
      Trial t;
      std::vector<LossTable::Row> rows;
      for (const auto& r : jt.at("losses")) rows.push_back({r.at(0).get<double>(), r.at(1).get<double>()});
      t.losses = LossTable(std::move(rows));
      t.membership = MembershipVector(jt.at("s").get<std::vector<std::uint8_t>>());
      t.r_seed = jt.at("r_seed").get<std::uint64_t>();
      t.train_loss = jt.at("train_loss").get<double>();
      t.test_loss = jt.at("test_loss").get<double>();
      if (jt.contains("population_loss")) t.population_loss = jt.at("population_loss").get<double>();
      if (jt.contains("predictions")) {
        for (const auto& p : jt.at("predictions")) t.predictions.push_back({p.at(0).get<int>(), p.at(1).get<int>()});
      }
      if (jt.contains("hypothesis_id")) t.hypothesis_id = jt.at("hypothesis_id").get<std::int64_t>();
      trials[a * k2 + k] = std::move(t);
    }
    std::vector<std::vector<Example>> zs;
    if (j.contains("supersamples")) {
      for (const auto& row : j.at("supersamples")) {
        std::vector<Example> z;
        for (const auto& e : row) z.push_back({e.at(0).get<int>(), e.at(1).get<int>()});
        zs.push_back(std::move(z));
      }
    }
    out.batch = TrialBatch(k1, k2, gran, std::move(trials), std::move(zs));
    return out;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed batch file: ") + e.what());
  }
}

/// One row per (draw, index): k1_idx,k2_idx,i,loss0,loss1,s_i,r_seed.
inline void write_batch_csv(std::ostream& os, const TrialBatch& b) {
  os << "k1_idx,k2_idx,i,loss0,loss1,s_i,r_seed\n";
  for (std::size_t a = 0; a < b.k1(); ++a) {
    for (std::size_t k = 0; k < b.k2(); ++k) {
      const Trial& t = b.at(a, k);
      for (std::size_t i = 0; i < t.losses.size(); ++i) {
        os << a << ',' << k << ',' << i << ',' << fmt(t.losses(i, 0)) << ',' << fmt(t.losses(i, 1)) << ','
           << t.membership[i] << ',' << t.r_seed << '\n';
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Reports

inline json to_json(const BoundReport& r) {
  json j{{"bound", to_string(r.kind)},
         {"value", r.value},
         {"raw_value", r.raw_value},
         {"applicable", r.applicable},
         {"vacuous", r.vacuous},
         {"per_index_ecmi", r.per_index_ecmi}};
  if (!r.note.empty()) j["note"] = r.note;
  if (r.train_loss) j["train_loss"] = *r.train_loss;
  if (r.gamma) j["gamma"] = {r.gamma->gamma1, r.gamma->gamma2};
  if (r.affine_ab) j["affine_ab"] = {r.affine_ab->first, r.affine_ab->second};
  if (r.value_std_error) j["value_std_error"] = *r.value_std_error;
  if (r.train_loss_std_error) j["train_loss_std_error"] = *r.train_loss_std_error;
  if (r.gap_std_error) j["gap_std_error"] = *r.gap_std_error;
  return j;
}

inline json to_json(const MeanAndError& m) { return json{{"mean", m.mean}, {"std_error", m.std_error}}; }

inline json to_json(const GapStats& g) {
  return json{{"gap", to_json(g.gap)},
              {"test_gap", to_json(g.test_gap)},
              {"train_loss", to_json(g.train_loss)},
              {"test_loss", to_json(g.test_loss)},
              {"population_loss", to_json(g.population_loss)},
              {"squared_gap", to_json(g.squared_gap)}};
}

inline json to_json(const ExperimentReport& rep, const SimConfig& config) {
  json bounds = json::array();
  for (const auto& b : rep.bounds) bounds.push_back(to_json(b));
  json validity = json::array();
  for (const auto& v : rep.validity) {
    validity.push_back({{"bound", to_string(v.kind)}, {"target", v.target}, {"bound_value", v.bound},
                        {"truth", v.truth}, {"sigma", v.sigma}, {"pass", v.pass}});
  }
  return json{{"schema", kSchemaVersion},
              {"config", to_json(config)},
              {"interpolating", rep.interpolating},
              {"train_loss", rep.train_loss},
              {"mean_ecmi", rep.mean_ecmi},
              {"true_gap", to_json(rep.gap)},
              {"bounds", bounds},
              {"validity", validity}};
}

inline json to_json(const CheckResult& r) {
  json inputs = json::object();
  for (const auto& [k, v] : r.inputs) inputs[k] = v;
  json j{{"check", r.name}, {"inputs", inputs}, {"statistic", r.statistic}, {"threshold", r.threshold},
         {"pass", r.pass}};
  if (!r.note.empty()) j["note"] = r.note;
  return j;
}

inline json to_json(const CoverageResult& r) {
  return json{{"check", std::string("coverage_") + to_string(r.variant)},
              {"inputs", {{"delta", r.delta}, {"trials", r.trials}}},
              {"statistic", r.rate},
              {"violations", r.violations},
              {"threshold", r.threshold},
              {"pass", r.pass}};
}

}  // namespace ecmi

#endif  // ECMI_SERIALIZE_HPP
