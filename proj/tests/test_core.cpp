#include <gtest/gtest.h>

#include <cstdlib>
#include <set>

#include "ecmi/core.hpp"

using namespace ecmi;

namespace {

Trial make_trial(std::vector<LossTable::Row> rows, std::vector<std::uint8_t> s) {
  Trial t;
  t.losses = LossTable(std::move(rows));
  t.membership = MembershipVector(std::move(s));
  const auto split = split_losses(t.losses, t.membership);
  t.train_loss = split.train_loss;
  t.test_loss = split.test_loss;
  return t;
}

}  // namespace

TEST(RngStream, SameKeyGivesSameSequence) {
  auto a = rng_stream(42, 0);
  auto b = rng_stream(42, 0);
  for (int k = 0; k < 100; ++k) EXPECT_EQ(a.next_u64(), b.next_u64());
}

TEST(RngStream, DifferentIndexGivesDifferentFirstDraw) {
  EXPECT_NE(rng_stream(42, 0).next_u64(), rng_stream(42, 1).next_u64());
  EXPECT_NE(rng_stream(42, 0).next_u64(), rng_stream(43, 0).next_u64());
}

TEST(RngStream, GoldenFirstUniform) {
  // Recorded once from the chosen engine and seeding scheme.
  EXPECT_EQ(rng_stream(7, 3).uniform(), 0.27424471763335223);
}

TEST(RngStream, UniformAndBelowStayInRange) {
  auto r = rng_stream(1, 1);
  std::set<std::uint64_t> seen;
  for (int k = 0; k < 10000; ++k) {
    const double u = r.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    const auto v = r.below(5);
    ASSERT_LT(v, 5u);
    seen.insert(v);
  }
  EXPECT_EQ(seen.size(), 5u);
  EXPECT_THROW(r.below(0), DomainError);
}

TEST(RngStream, DerivedSeedsDiffer) {
  EXPECT_NE(derive_seed(1, 1), derive_seed(1, 2));
  EXPECT_NE(derive_seed(1, 1), derive_seed(2, 1));
  EXPECT_EQ(derive_seed(9, 4), derive_seed(9, 4));
}

TEST(SplitLosses, AllColumnZeroIsSymmetric) {
  // Row i trains on column s_i: losses 0 and 1 land on opposite sides.
  const LossTable t({{0, 1}, {1, 0}});
  const auto r = split_losses(t, MembershipVector({0, 0}));
  EXPECT_DOUBLE_EQ(r.train_loss, 0.5);
  EXPECT_DOUBLE_EQ(r.test_loss, 0.5);
}

TEST(SplitLosses, PicksZeroLossColumns) {
  const LossTable t({{0, 1}, {1, 0}});
  const auto r = split_losses(t, MembershipVector({0, 1}));
  EXPECT_DOUBLE_EQ(r.train_loss, 0.0);
  EXPECT_DOUBLE_EQ(r.test_loss, 1.0);
}

TEST(SplitLosses, HandSum) {
  const LossTable t({{0.2, 0.4}, {0.6, 0.8}});
  const auto r = split_losses(t, MembershipVector({1, 0}));
  EXPECT_NEAR(r.train_loss, 0.5, 1e-15);
  EXPECT_NEAR(r.test_loss, 0.5, 1e-15);
}

TEST(SplitLosses, DimensionMismatchThrows) {
  const LossTable t({{0, 1}, {1, 0}});
  EXPECT_THROW(split_losses(t, MembershipVector({0, 1, 1})), DimensionError);
}

TEST(LossTable, RejectsOutOfRangeAndEmpty) {
  EXPECT_THROW(LossTable({{0.0, 1.5}}), DomainError);
  EXPECT_THROW(LossTable({{-0.1, 0.0}}), DomainError);
  EXPECT_THROW(LossTable(std::vector<LossTable::Row>{}), DimensionError);
}

TEST(MembershipVector, CodeRoundTripAndFlip) {
  const auto s = MembershipVector::from_code(0b101, 4);
  EXPECT_EQ(s[0], 1);
  EXPECT_EQ(s[1], 0);
  EXPECT_EQ(s[2], 1);
  EXPECT_EQ(s[3], 0);
  EXPECT_EQ(s.complement(1), 1);
  EXPECT_EQ(s.flipped(), MembershipVector::from_code(0b1010, 4));
  EXPECT_THROW(MembershipVector({0, 2}), DomainError);
}

TEST(TrialBatch, ValidatesShapeAndStoredLosses) {
  std::vector<Trial> ok{make_trial({{0, 1}}, {0}), make_trial({{0, 1}}, {1})};
  EXPECT_NO_THROW(TrialBatch(1, 2, LossGranularity::binary, ok));
  EXPECT_THROW(TrialBatch(2, 2, LossGranularity::binary, ok), DimensionError);

  auto bad = ok;
  bad[0].train_loss = 0.5;
  EXPECT_THROW(TrialBatch(1, 2, LossGranularity::binary, bad), DimensionError);

  std::vector<Trial> frac{make_trial({{0.5, 1}}, {0})};
  EXPECT_THROW(TrialBatch(1, 1, LossGranularity::binary, frac), DomainError);
  EXPECT_NO_THROW(TrialBatch(1, 1, LossGranularity::continuous, frac));

  std::vector<Trial> mixed{make_trial({{0, 1}}, {0}), make_trial({{0, 1}, {1, 0}}, {0, 1})};
  EXPECT_THROW(TrialBatch(1, 2, LossGranularity::binary, mixed), DimensionError);
}

TEST(TrialBatch, SupersampleTrialsSlice) {
  std::vector<Trial> ts;
  for (int k = 0; k < 6; ++k) ts.push_back(make_trial({{0, 1}}, {static_cast<std::uint8_t>(k % 2)}));
  const TrialBatch b(3, 2, LossGranularity::binary, ts);
  EXPECT_EQ(b.supersample_trials(1).size(), 2u);
  EXPECT_EQ(&b.supersample_trials(2)[1], &b.at(2, 1));
  EXPECT_THROW(b.at(3, 0), DimensionError);
}

TEST(BoundKind, NamesRoundTrip) {
  for (auto k : kAllBoundKinds) {
    const auto back = bound_kind_from_string(to_string(k));
    ASSERT_TRUE(back.has_value());
    EXPECT_EQ(*back, k);
  }
  EXPECT_FALSE(bound_kind_from_string("nope").has_value());
}

TEST(NatarajanSpec, Preconditions) {
  EXPECT_NO_THROW(NatarajanSpec(2, 3, 100));
  EXPECT_THROW(NatarajanSpec(5, 2, 2), DomainError);
  EXPECT_THROW(NatarajanSpec(1, 1, 10), DomainError);
}

TEST(ParallelFor, VisitsEveryIndexOnceAndRethrows) {
  std::vector<int> hits(1000, 0);
  parallel_for(hits.size(), 4, [&](std::size_t i) { hits[i] += 1; });
  for (int h : hits) EXPECT_EQ(h, 1);
  EXPECT_THROW(parallel_for(10, 3, [](std::size_t i) { if (i == 7) throw DomainError("x"); }),
               DomainError);
}

TEST(ResolveThreads, ExplicitThenEnvironment) {
  EXPECT_EQ(resolve_threads(3u), 3u);
  ::setenv("ECMI_THREADS", "5", 1);
  EXPECT_EQ(resolve_threads(), 5u);
  ::unsetenv("ECMI_THREADS");
  EXPECT_GE(resolve_threads(), 1u);
}

TEST(MeanAndError, MatchesHandComputation) {
  const std::vector<double> xs{1, 2, 3, 4};
  const auto m = mean_and_error(xs);
  EXPECT_DOUBLE_EQ(m.mean, 2.5);
  // sample variance 5/3, divided by 4
  EXPECT_NEAR(m.std_error, std::sqrt(5.0 / 3.0 / 4.0), 1e-15);
}
