#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "hlab/stats.hpp"

using namespace hlab;

namespace {

PairedResults from_diffs(const std::vector<double>& diffs) {
  PairedResults pr{"A", "B", {}};
  for (double d : diffs) pr.pairs.emplace_back(0.5 + d, 0.5);
  return pr;
}

// Upper and lower tail of W+ by listing every sign assignment.
std::pair<double, double> oracle_tails(const PairedResults& pr) {
  const auto sr = detail::signed_ranks(pr);
  const double observed = detail::positive_rank_sum(sr);
  const std::size_t n = sr.ranks.size();
  double upper = 0, lower = 0;
  for (std::uint64_t mask = 0; mask < (1ull << n); ++mask) {
    double w = 0;
    for (std::size_t i = 0; i < n; ++i)
      if (mask >> i & 1) w += sr.ranks[i];
    upper += w >= observed - 1e-9;
    lower += w <= observed + 1e-9;
  }
  const double all = std::ldexp(1.0, static_cast<int>(n));
  return {upper / all, lower / all};
}

Dataset xor_clusters(int per_cluster, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 0.25);
  Dataset ds;
  ds.attributes = {{"a", AttributeKind::numeric, {}}, {"b", AttributeKind::numeric, {}}};
  ds.classes = {"n", "p"};
  int id = 0;
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      for (int i = 0; i < per_cluster; ++i)
        ds.instances.push_back({id++, {2.0 * a + noise(rng), 2.0 * b + noise(rng)}, a ^ b});
  return ds;
}

}  // namespace

TEST(Wilcoxon, AllPositiveFive) {
  const auto r = wilcoxon_signed_rank(from_diffs({0.01, 0.02, 0.03, 0.04, 0.05}));
  EXPECT_EQ(r.p_value, 0.03125);
  EXPECT_EQ(r.statistic, 15);
  EXPECT_EQ(r.n_effective, 5);
  EXPECT_EQ(wilcoxon_signed_rank(from_diffs({0.01, 0.02, 0.03, 0.04, 0.05}), Alternative::two_sided).p_value, 0.0625);
}

TEST(Wilcoxon, NoEvidence) {
  const auto r = wilcoxon_signed_rank(from_diffs({0, 0, 0}));
  EXPECT_EQ(r.p_value, 1.0);
  EXPECT_EQ(r.n_effective, 0);
  PairedResults bad{"A", "B", {{1.2, 0.5}}};
  EXPECT_THROW(wilcoxon_signed_rank(bad), Error);
}

TEST(Wilcoxon, MatchesEnumerationOracle) {
  std::mt19937_64 rng(42);
  for (int c = 0; c < 1000; ++c) {
    const int n = 1 + static_cast<int>(rng() % 12);
    std::vector<double> diffs;
    const bool tied = c % 2 == 1;
    for (int i = 0; i < n; ++i) {
      const int magnitude = tied ? 1 + static_cast<int>(rng() % 4) : 1 + static_cast<int>(rng() % 1000);
      const int sign = rng() % 5 == 0 ? 0 : (rng() % 2 ? 1 : -1);
      diffs.push_back(sign * magnitude / 2000.0);
    }
    const auto pr = from_diffs(diffs);
    const auto [upper, lower] = oracle_tails(pr);
    const auto one = wilcoxon_exact(pr);
    const auto two = wilcoxon_exact(pr, Alternative::two_sided);
    EXPECT_NEAR(one.p_value, upper, 1e-12) << c;
    EXPECT_NEAR(two.p_value, std::min(1.0, 2 * std::min(upper, lower)), 1e-12) << c;
    EXPECT_GE(one.p_value, 0.0);
    EXPECT_LE(one.p_value, 1.0);
    // Swapping A and B turns the upper tail into the lower one.
    if (one.n_effective > 0) {
      EXPECT_NEAR(wilcoxon_exact(pr.swapped()).p_value, lower, 1e-12) << c;
    }
  }
}

TEST(Wilcoxon, NormalApproximationAtCrossover) {
  std::mt19937_64 rng(7);
  for (int c = 0; c < 50; ++c) {
    std::vector<double> diffs;
    std::vector<int> used;
    while (diffs.size() < 20) {
      const int m = 1 + static_cast<int>(rng() % 10000);
      if (std::find(used.begin(), used.end(), m) != used.end()) continue;
      used.push_back(m);
      diffs.push_back((rng() % 3 == 0 ? -1 : 1) * m / 40000.0);
    }
    const auto pr = from_diffs(diffs);
    EXPECT_NEAR(wilcoxon_normal(pr).p_value, wilcoxon_exact(pr).p_value, 0.01) << c;
    EXPECT_NEAR(wilcoxon_normal(pr, Alternative::two_sided).p_value,
                wilcoxon_exact(pr, Alternative::two_sided).p_value, 0.01)
        << c;
  }
  std::vector<double> many(25, 0.01);
  EXPECT_EQ(wilcoxon_signed_rank(from_diffs(many)).p_value, wilcoxon_normal(from_diffs(many)).p_value);
}

TEST(WinTieLoss, Examples) {
  const auto pr = from_diffs({0.02, -0.01, 0.0});
  EXPECT_EQ(win_tie_loss(pr), (WinTieLoss{1, 1, 1}));
  EXPECT_EQ(win_tie_loss(pr, 0.05), (WinTieLoss{0, 3, 0}));
  EXPECT_EQ(win_tie_loss(from_diffs({0, 0})), (WinTieLoss{0, 2, 0}));
  EXPECT_EQ(to_string(WinTieLoss{3, 1, 2}), "3-1-2");
  EXPECT_THROW(win_tie_loss(pr, -1), Error);
}

TEST(WinTieLoss, Antisymmetric) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0, 1);
  for (int c = 0; c < 100; ++c) {
    PairedResults pr{"A", "B", {}};
    for (int i = 0; i < 10; ++i) pr.pairs.emplace_back(u(rng), rng() % 3 ? u(rng) : pr.pairs.empty() ? 0.5 : pr.pairs.back().first);
    const auto w = win_tie_loss(pr, 0.01), s = win_tie_loss(pr.swapped(), 0.01);
    EXPECT_EQ(w.greater, s.less);
    EXPECT_EQ(w.equal, s.equal);
    EXPECT_EQ(w.greater + w.equal + w.less, 10);
  }
}

TEST(Convexity, RelativeGap) {
  EXPECT_EQ(*relative_gap(0.8, 0.8), 0.0);
  EXPECT_DOUBLE_EQ(*relative_gap(0.9, 0.6), 0.5);
  EXPECT_FALSE(relative_gap(0.5, 0.0).has_value());
}

TEST(Convexity, SeparableAndXor) {
  const auto sep = synth_gaussians(40, 2, 8.0, 0.0, 1);
  const auto a = convexity_measures(sep, make_cv_plan(sep, 1, 5, 1));
  EXPECT_NEAR(*a.mlp_per, 0.0, 0.05);
  EXPECT_NEAR(*a.rf_lin, 0.0, 0.05);
  const auto x = xor_clusters(25, 2);
  const auto b = convexity_measures(x, make_cv_plan(x, 1, 5, 1));
  EXPECT_LT(b.acc_perceptron, 0.8);
  EXPECT_GT(*b.mlp_per, 0.2);
  EXPECT_GT(*b.rf_lin, 0.2);
}
