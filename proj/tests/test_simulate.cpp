#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "ecmi/estimators.hpp"
#include "ecmi/simulate.hpp"

using namespace ecmi;

namespace {

SimConfig base_config() {
  SimConfig c;
  c.K = 8;
  c.N = 2;
  c.n = 10;
  c.seed = 1;
  c.k1 = 20;
  c.k2 = 200;
  c.learner = LearnerKind::memorizer;
  return c;
}

}  // namespace

TEST(SimConfig, Validation) {
  auto c = base_config();
  EXPECT_NO_THROW(c.validate());
  c.N = 1;
  EXPECT_THROW(c.validate(), ConfigError);
  c = base_config();
  c.eta = 1.5;
  EXPECT_THROW(c.validate(), ConfigError);
  c = base_config();
  c.learner = LearnerKind::gibbs;
  c.k2 = 3;
  EXPECT_THROW(c.validate(), ConfigError);  // default 4 R draws do not fit
  EXPECT_EQ(learner_from_string("erm_finite_class"), LearnerKind::erm_finite_class);
  EXPECT_FALSE(learner_from_string("svm").has_value());
}

TEST(DataModel, CleanLabelsFollowTarget) {
  auto c = base_config();
  c.K = 4;
  auto rng = rng_stream(5, 0);
  for (int k = 0; k < 500; ++k) {
    const auto e = draw_example(c, rng);
    EXPECT_EQ(e.label, target_label(e.feature, c.K));
  }
}

TEST(DataModel, FullCorruptionIsUniform) {
  auto c = base_config();
  c.N = 3;
  c.corruption = 1.0;
  for (int x = 0; x < c.K; ++x) {
    for (int y = 0; y < c.N; ++y) EXPECT_NEAR(label_probability(y, x, c), 1.0 / 3.0, 1e-15);
  }
  auto rng = rng_stream(6, 0);
  std::map<std::pair<bool, int>, int> counts;
  const int draws = 60000;
  for (int k = 0; k < draws; ++k) {
    const auto e = draw_example(c, rng);
    ++counts[{e.feature < c.K / 2, e.label}];
  }
  for (const auto& [key, v] : counts) EXPECT_NEAR(v / (draws / 6.0), 1.0, 0.05);
}

TEST(DataModel, LabelProbabilitiesSumToOne) {
  auto c = base_config();
  c.N = 4;
  c.eta = 0.3;
  c.corruption = 0.2;
  for (int x = 0; x < c.K; ++x) {
    double s = 0.0;
    for (int y = 0; y < c.N; ++y) s += label_probability(y, x, c);
    EXPECT_NEAR(s, 1.0, 1e-15);
  }
}

TEST(PopulationLoss, Examples) {
  auto c = base_config();
  EXPECT_EQ(population_loss(target_hypothesis(c), c), 0.0);
  c.corruption = 1.0;
  c.N = 3;
  EXPECT_NEAR(population_loss(make_hypothesis(std::vector<int>(8, 2), 3), c), 2.0 / 3.0, 1e-15);
  auto k2 = base_config();
  k2.K = 2;
  // target is (0, 1); h = (0, 0) agrees on one x
  EXPECT_NEAR(population_loss(make_hypothesis({0, 0}, 2), k2), 0.5, 1e-15);
}

TEST(FiniteClass, SizeAndDimension) {
  const FiniteClass fc(4, 2, 1);
  EXPECT_EQ(fc.size(), 8u);  // 2 constants + 3 cut positions x 2 labelings
  EXPECT_EQ(fc.natarajan_dim(), 2);
  const FiniteClass f3(5, 3, 2);
  // 3 + 4*3*2 + 6*3*2*2
  EXPECT_EQ(f3.size(), 3u + 24u + 72u);
  EXPECT_EQ(f3.natarajan_dim(), 3);
  EXPECT_EQ(FiniteClass(2, 2, 5).natarajan_dim(), 2);
}

TEST(FiniteClass, MembersHaveBoundedChangesAndAreDistinct) {
  const FiniteClass fc(6, 3, 2);
  std::map<std::vector<int>, int> seen;
  for (std::size_t k = 0; k < fc.size(); ++k) {
    const auto& h = fc[k];
    int changes = 0;
    for (std::size_t x = 1; x < h.labels.size(); ++x) changes += h.labels[x] != h.labels[x - 1];
    EXPECT_LE(changes, 2);
    EXPECT_EQ(++seen[h.labels], 1);
  }
}

TEST(Learners, MemorizerInterpolatesConsistentData) {
  const Simulator sim(base_config());
  auto rng = rng_stream(9, 0);
  const auto z = draw_supersample(sim.config(), rng);
  const auto train = training_set(z, draw_membership(10, rng));
  EXPECT_EQ(empirical_loss(sim.run(train, 0), train), 0.0);
}

TEST(Learners, ErmRecoversTargetWhenSampleCoversDomain) {
  for (int K : {2, 4, 6}) {
    auto c = base_config();
    c.K = K;
    c.learner = LearnerKind::erm_finite_class;
    const Simulator sim(c);
    std::vector<Example> data;
    for (int x = 0; x < K; ++x) data.push_back({x, target_label(x, K)});
    const auto h = sim.run(data, 0);
    EXPECT_EQ(empirical_loss(h, data), 0.0);
    EXPECT_EQ(h, target_hypothesis(c)) << K;
  }
}

TEST(Learners, GibbsAtLargeBetaStaysInErmArgminSet) {
  auto c = base_config();
  c.K = 16;
  c.eta = 0.2;
  c.learner = LearnerKind::gibbs;
  c.beta = 1e4;
  const Simulator sim(c);
  for (int t = 0; t < 100; ++t) {
    auto rng = rng_stream(31, static_cast<std::uint64_t>(t));
    const auto z = draw_supersample(c, rng);
    const auto train = training_set(z, draw_membership(10, rng));
    double best = 2.0;
    for (std::size_t k = 0; k < sim.finite_class().size(); ++k)
      best = std::min(best, empirical_loss(sim.finite_class()[k], train));
    const auto h = sim.run(train, rng.next_u64());
    EXPECT_EQ(empirical_loss(h, train), best);
  }
}

TEST(Learners, GibbsWeightsNormalized) {
  auto c = base_config();
  c.learner = LearnerKind::gibbs;
  const Simulator sim(c);
  const std::vector<Example> data{{0, 0}, {7, 1}, {3, 1}};
  double s = 0.0;
  for (const auto& wh : sim.posterior(data)) s += wh.prob;
  EXPECT_NEAR(s, 1.0, 1e-12);
}

TEST(Experiment, ConstantLearnerHasZeroGapAndInformation) {
  auto c = base_config();
  c.learner = LearnerKind::constant;
  c.k1 = 5;
  c.k2 = 50;
  const auto r = run_experiment(c);
  for (std::size_t k = 0; k < r.batch.k1(); ++k) {
    for (double v : ecmi_vector(r.batch, k, 2)) EXPECT_EQ(v, 0.0);
  }
  // The hypothesis ignores the data, so the gap is zero in expectation; the
  // per-supersample training loss still fluctuates around it.
  EXPECT_LE(std::abs(r.gap.gap.mean), 3.0 * r.gap.gap.std_error + 1e-12);
  for (const auto& t : r.batch.trials()) EXPECT_EQ(t.population_loss, r.batch.trials()[0].population_loss);
}

TEST(Experiment, DeterministicAcrossThreadCounts) {
  auto c = base_config();
  c.k1 = 4;
  c.k2 = 30;
  const auto a = run_experiment(c, 1);
  const auto b = run_experiment(c, 4);
  ASSERT_EQ(a.batch.trials().size(), b.batch.trials().size());
  for (std::size_t k = 0; k < a.batch.trials().size(); ++k) {
    EXPECT_EQ(a.batch.trials()[k].losses, b.batch.trials()[k].losses);
    EXPECT_EQ(a.batch.trials()[k].membership, b.batch.trials()[k].membership);
  }
  EXPECT_EQ(a.gap.gap.mean, b.gap.gap.mean);
}

TEST(Experiment, GibbsUsesRepeatedRSeeds) {
  auto c = base_config();
  c.learner = LearnerKind::gibbs;
  c.k1 = 2;
  c.k2 = 40;
  const auto r = run_experiment(c);
  std::map<std::uint64_t, int> per;
  for (const auto& t : r.batch.supersample_trials(0)) ++per[t.r_seed];
  EXPECT_EQ(per.size(), 4u);
  for (const auto& [seed, count] : per) EXPECT_EQ(count, 10);
}

// Independent straight-loop reimplementation of the golden memorizer run.
TEST(Experiment, GoldenMemorizerMatchesStraightLoop) {
  const auto c = base_config();
  const auto r = run_experiment(c);

  const std::uint64_t z_seed = derive_seed(c.seed, 1);
  const std::uint64_t s_seed = derive_seed(c.seed, 2);
  double gap_sum = 0.0;
  for (int a = 0; a < c.k1; ++a) {
    auto zr = rng_stream(z_seed, static_cast<std::uint64_t>(a));
    int xs[20], ys[20];
    for (int e = 0; e < 20; ++e) {
      xs[e] = static_cast<int>(zr.below(8));
      ys[e] = xs[e] < 4 ? 0 : 1;
      zr.uniform();  // eta draw
      zr.uniform();  // corruption draw
    }
    std::map<std::tuple<int, double, double, int>, int> joint[10];
    for (int b = 0; b < c.k2; ++b) {
      auto sr = rng_stream(s_seed, static_cast<std::uint64_t>(a * c.k2 + b));
      int s[10];
      for (int& v : s) v = static_cast<int>(sr.next_u64() >> 63);
      int labels[8] = {0, 0, 0, 0, 0, 0, 0, 0};
      int votes[8][2] = {};
      for (int i = 0; i < 10; ++i) ++votes[xs[2 * i + s[i]]][ys[2 * i + s[i]]];
      for (int x = 0; x < 8; ++x) labels[x] = votes[x][1] > votes[x][0] ? 1 : 0;
      double train = 0.0, pop = 0.0;
      for (int i = 0; i < 10; ++i) {
        const double l0 = labels[xs[2 * i]] != ys[2 * i];
        const double l1 = labels[xs[2 * i + 1]] != ys[2 * i + 1];
        train += s[i] ? l1 : l0;
        joint[i][{0, l0, l1, s[i]}] += 1;
      }
      for (int x = 0; x < 8; ++x) pop += labels[x] != (x < 4 ? 0 : 1);
      gap_sum += pop / 8.0 - train / 10.0;
      const auto& t = r.batch.at(static_cast<std::size_t>(a), static_cast<std::size_t>(b));
      ASSERT_DOUBLE_EQ(t.train_loss, train / 10.0);
      ASSERT_DOUBLE_EQ(*t.population_loss, pop / 8.0);
    }
    for (int i = 0; i < 10; ++i) {
      std::map<std::pair<double, double>, double> px;
      std::map<int, double> py;
      for (const auto& [k, v] : joint[i]) {
        px[{std::get<1>(k), std::get<2>(k)}] += static_cast<double>(v) / c.k2;
        py[std::get<3>(k)] += static_cast<double>(v) / c.k2;
      }
      double mi = 0.0;
      for (const auto& [k, v] : joint[i]) {
        const double p = static_cast<double>(v) / c.k2;
        mi += p * std::log(p / (px[{std::get<1>(k), std::get<2>(k)}] * py[std::get<3>(k)]));
      }
      const double got = ecmi_samplewise(r.batch, static_cast<std::size_t>(a), static_cast<std::size_t>(i), 2);
      EXPECT_NEAR(got, std::max(0.0, mi), 1e-12);
    }
  }
  EXPECT_NEAR(r.gap.gap.mean, gap_sum / (c.k1 * c.k2), 1e-12);
}
