#include <gtest/gtest.h>

#include "hlab/metalearn.hpp"

using namespace hlab;

namespace {

CodMatrix matrix(std::vector<std::string> names, std::vector<std::vector<double>> d) {
  return {std::move(names), std::move(d)};
}

CodMatrix abc() {
  return matrix({"A", "B", "C"}, {{0, 0.1, 0.5}, {0.1, 0, 0.5}, {0.5, 0.5, 0}});
}

std::vector<int> bits(unsigned v, int len) {
  std::vector<int> out;
  for (int i = 0; i < len; ++i) out.push_back(static_cast<int>((v >> i) & 1u));
  return out;
}

}  // namespace

TEST(Cod, Examples) {
  const std::vector<int> a{0, 1, 0, 1, 1, 0, 0, 1, 1, 0};
  std::vector<int> b = a;
  EXPECT_EQ(cod_distance(a, b), 0.0);
  b[0] = 1;
  b[4] = 0;
  b[9] = 1;
  EXPECT_DOUBLE_EQ(cod_distance(a, b), 0.3);
  std::vector<int> c;
  for (int v : a) c.push_back(1 - v);
  EXPECT_EQ(cod_distance(a, c), 1.0);
  EXPECT_THROW(cod_distance(a, std::vector<int>{1}), Error);
  EXPECT_THROW(cod_distance(std::vector<int>{}, std::vector<int>{}), Error);
}

TEST(Cod, ExhaustivePseudometric) {
  for (int len = 1; len <= 6; ++len) {
    const unsigned n = 1u << len;
    for (unsigned x = 0; x < n; ++x)
      for (unsigned y = 0; y < n; ++y) {
        const auto a = bits(x, len), b = bits(y, len);
        const double d = cod_distance(a, b);
        EXPECT_DOUBLE_EQ(d, double(__builtin_popcount(x ^ y)) / len);
        EXPECT_EQ(d, cod_distance(b, a));
        if (len <= 4)
          for (unsigned z = 0; z < n; ++z) {
            const auto c = bits(z, len);
            EXPECT_LE(d, cod_distance(a, c) + cod_distance(c, b) + 1e-12);
          }
      }
    for (unsigned x = 0; x < n; ++x) EXPECT_EQ(cod_distance(bits(x, len), bits(x, len)), 0.0);
  }
}

TEST(Cod, MatrixFromPredictions) {
  const auto ds = synth_gaussians(20, 2, 2.0, 0.1, 1);
  const auto plan = make_cv_plan(ds, 2, 4, 3);
  const std::vector<LearnerSpec> set{make_spec("maj", LearnerKind::majority), make_spec("nb", LearnerKind::naive_bayes),
                                     make_spec("1nn", LearnerKind::knn)};
  const auto preds = cv_predictions(ds, set, plan);
  const auto m = cod_matrix(preds);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(m.at(i, i), 0.0);
    for (std::size_t j = 0; j < 3; ++j) {
      EXPECT_EQ(m.at(i, j), m.at(j, i));
      std::size_t diff = 0;
      for (int r = 0; r < 2; ++r)
        for (std::size_t p = 0; p < ds.size(); ++p) diff += preds.at(i, r, p) != preds.at(j, r, p);
      EXPECT_DOUBLE_EQ(m.at(i, j), double(diff) / double(2 * ds.size()));
    }
  }
  EXPECT_EQ(cod_matrix(ds, set, plan, 3).d, m.d);
  const std::vector<LearnerSpec> one{set[0]};
  EXPECT_THROW(cod_matrix(ds, one, plan), Error);
}

TEST(Cluster, TwoLearners) {
  const auto d = cluster(matrix({"x", "y"}, {{0, 0.4}, {0.4, 0}}));
  ASSERT_EQ(d.merges.size(), 1u);
  EXPECT_DOUBLE_EQ(d.merges[0].height, 0.4);
  EXPECT_THROW(cluster(matrix({"x"}, {{0}})), Error);
}

TEST(Cluster, ThreeLearnersAverageLinkage) {
  const auto d = cluster(abc(), Linkage::average);
  ASSERT_EQ(d.merges.size(), 2u);
  EXPECT_EQ(d.merges[0].left, 0);
  EXPECT_EQ(d.merges[0].right, 1);
  EXPECT_DOUBLE_EQ(d.merges[0].height, 0.1);
  EXPECT_EQ(d.merges[1].left, 3);
  EXPECT_EQ(d.merges[1].right, 2);
  EXPECT_DOUBLE_EQ(d.merges[1].height, 0.5);
  EXPECT_EQ(cut(d, 0.18), (std::vector<std::vector<std::string>>{{"A", "B"}, {"C"}}));
  EXPECT_EQ(cut(d, 0.05).size(), 3u);
  EXPECT_EQ(cut(d, 0.5).size(), 1u);
  EXPECT_THROW(cut(d, -0.1), Error);
  EXPECT_EQ(to_newick(d), "((A:0.1,B:0.1):0.4,C:0.5);");
}

TEST(Cluster, LinkageVariants) {
  const auto m = matrix({"a", "b", "c", "d"}, {{0, 0.1, 0.3, 0.9}, {0.1, 0, 0.2, 0.8}, {0.3, 0.2, 0, 0.6}, {0.9, 0.8, 0.6, 0}});
  const auto s = cluster(m, Linkage::single);
  const auto c = cluster(m, Linkage::complete);
  const auto a = cluster(m, Linkage::average);
  EXPECT_DOUBLE_EQ(s.merges[1].height, 0.2);
  EXPECT_DOUBLE_EQ(c.merges[1].height, 0.3);
  EXPECT_DOUBLE_EQ(a.merges[1].height, 0.25);
  EXPECT_DOUBLE_EQ(s.merges[2].height, 0.6);
  EXPECT_DOUBLE_EQ(c.merges[2].height, 0.9);
  EXPECT_NEAR(a.merges[2].height, (0.9 + 0.8 + 0.6) / 3, 1e-12);
  for (const auto* d : {&s, &c, &a})
    for (std::size_t k = 1; k < d->merges.size(); ++k) EXPECT_LE(d->merges[k - 1].height, d->merges[k].height);
  EXPECT_EQ(parse_linkage("single"), Linkage::single);
  EXPECT_THROW(parse_linkage("ward"), Error);
}

TEST(Cluster, TieBreakIsLexicographic) {
  const auto m = matrix({"d", "b", "c", "a"}, {{0, 0.3, 0.3, 0.3}, {0.3, 0, 0.3, 0.3}, {0.3, 0.3, 0, 0.3}, {0.3, 0.3, 0.3, 0}});
  const auto d = cluster(m);
  // (a,b) first, then (a-cluster, c), then d.
  EXPECT_EQ(d.merges[0].left, 3);
  EXPECT_EQ(d.merges[0].right, 1);
  EXPECT_EQ(d.merges[1].left, 4);
  EXPECT_EQ(d.merges[1].right, 2);
  EXPECT_EQ(d.merges[2].left, 5);
  EXPECT_EQ(d.merges[2].right, 0);
}

TEST(Cluster, CutPartitionsAtEveryThreshold) {
  const auto m = matrix({"p", "q", "r", "s", "t"}, {{0, .2, .4, .6, .8}, {.2, 0, .3, .5, .7}, {.4, .3, 0, .1, .9},
                                                    {.6, .5, .1, 0, .45}, {.8, .7, .9, .45, 0}});
  const auto d = cluster(m);
  for (double t = 0; t <= 1.0; t += 0.05) {
    std::vector<std::string> all;
    for (const auto& g : cut(d, t)) all.insert(all.end(), g.begin(), g.end());
    std::sort(all.begin(), all.end());
    EXPECT_EQ(all, (std::vector<std::string>{"p", "q", "r", "s", "t"}));
  }
}

TEST(Cluster, NewickQuotesNames) {
  const auto d = cluster(matrix({"x y", "z"}, {{0, 0.25}, {0.25, 0}}));
  EXPECT_EQ(to_newick(d), "('x y':0.25,z:0.25);");
}

TEST(Representatives, Medoid) {
  const auto m = matrix({"a", "b", "c", "d"}, {{0, 0.1, 0.3, 0.9}, {0.1, 0, 0.2, 0.8}, {0.3, 0.2, 0, 0.6}, {0.9, 0.8, 0.6, 0}});
  EXPECT_EQ(representatives({{"a", "b", "c"}, {"d"}}, m), (std::vector<std::string>{"b", "d"}));
  EXPECT_EQ(representatives({{"a", "b"}}, m), (std::vector<std::string>{"a"}));
  EXPECT_THROW(representatives({}, m), Error);
  EXPECT_THROW(representatives({{"zz"}}, m), Error);
}
