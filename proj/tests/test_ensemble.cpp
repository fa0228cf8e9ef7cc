#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "hlab/ensemble.hpp"

using namespace hlab;

namespace {

HardnessProfile profile_of(const Dataset& ds, std::vector<double> ih) {
  HardnessProfile p;
  p.ids = ds.ids();
  p.ih = std::move(ih);
  return p;
}

Model constant_model(const Dataset& schema, int label) {
  return Model(make_spec("const", LearnerKind::majority), schema, ConstantModel{label});
}

Dataset three_class() {
  Dataset ds;
  ds.attributes = {{"v", AttributeKind::numeric, {}}};
  ds.classes = {"a", "b", "c"};
  return ds;
}

void check_trace(const BoostEnsemble& ens) {
  for (const auto& r : ens.trace) {
    const double total = std::accumulate(r.weights_after.begin(), r.weights_after.end(), 0.0);
    EXPECT_NEAR(total, 1.0, 1e-12);
    if (r.status != RoundStatus::kept || r.restart) continue;
    double err = 0;
    for (std::size_t i = 0; i < r.misclassified.size(); ++i)
      if (r.misclassified[i]) err += r.weights_after[i];
    EXPECT_NEAR(err, 0.5, 1e-9) << "round " << r.round;
    EXPECT_NEAR(r.alpha, std::log((1 - r.epsilon) / r.epsilon), 1e-12);
  }
}

}  // namespace

TEST(Filter, ThresholdSemantics) {
  const auto ds = synth_gaussians(3, 1, 3.0, 0.0, 1);
  auto p = profile_of(ds, {0.0, 0.75, 0.9, 0.1, 0.2, 1.0});
  const auto f = filter_by_ih(ds, p);
  EXPECT_EQ(f.ids(), (std::vector<int>{0, 3, 4}));
  EXPECT_EQ(filter_by_ih(ds, p, {1.0}).ids(), (std::vector<int>{0, 1, 2, 3, 4}));
  const auto all_easy = profile_of(ds, std::vector<double>(6, 0.2));
  EXPECT_EQ(filter_by_ih(ds, all_easy), ds);
  EXPECT_THROW(filter_by_ih(ds, p, {0.0}), Error);
  EXPECT_THROW(filter_by_ih(ds, p, {1.5}), Error);
}

TEST(Filter, SingleClassSurvivorIsAnError) {
  const auto ds = synth_gaussians(3, 1, 3.0, 0.0, 1);
  try {
    filter_by_ih(ds, profile_of(ds, {0, 0, 0, 0.9, 0.9, 0.9}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("'c0'"), std::string::npos);
  }
  EXPECT_THROW(filter_by_ih(ds, profile_of(ds, std::vector<double>(6, 0.9))), Error);
}

TEST(Filter, IdempotentAndKeepsFlips) {
  const auto ds = synth_gaussians(30, 2, 3.0, 0.2, 2);
  std::vector<double> ih(ds.size());
  for (std::size_t i = 0; i < ih.size(); ++i) ih[i] = static_cast<double>(i % 10) / 10.0;
  const auto p = profile_of(ds, ih);
  const auto once = filter_by_ih(ds, p);
  EXPECT_EQ(filter_by_ih(once, p), once);
  for (const auto& f : once.flips) {
    const auto ids = once.ids();
    EXPECT_NE(std::find(ids.begin(), ids.end(), f.instance_id), ids.end());
  }
  EXPECT_LT(once.flips.size(), ds.flips.size());
}

TEST(Boost, HandExample) {
  std::vector<double> w(4, 0.25);
  const double alpha = boost_update(w, {true, false, false, false});
  EXPECT_NEAR(alpha, std::log(3.0), 1e-12);
  EXPECT_NEAR(w[0], 0.5, 1e-12);
  for (int i = 1; i < 4; ++i) EXPECT_NEAR(w[static_cast<std::size_t>(i)], 1.0 / 6, 1e-12);
  std::vector<double> bad(2, 0.5);
  EXPECT_THROW(boost_update(bad, {true, false}), Error);
  EXPECT_THROW(boost_update(bad, {false, false}), Error);
}

TEST(Boost, RestartRounds) {
  EXPECT_EQ(detail::restart_rounds(9), (std::vector<int>{3, 6, 9}));
  EXPECT_EQ(detail::restart_rounds(1), (std::vector<int>{1}));
  EXPECT_EQ(detail::restart_rounds(10), (std::vector<int>{3, 5, 8, 10}));
}

TEST(Boost, ArithmeticIdentitiesOnRandomRuns) {
  for (std::uint64_t seed = 1; seed <= 8; ++seed) {
    const auto ds = synth_gaussians(40, 2, 1.0, 0.1, seed);
    const auto stump = make_spec("stump", LearnerKind::decision_stump);
    const auto ab = adaboost(stump, ds, 12, seed);
    const auto mb = multiboost(stump, ds, 12, seed);
    EXPECT_EQ(ab.completed, 12);
    EXPECT_FALSE(ab.members.empty());
    check_trace(ab);
    check_trace(mb);
    int restarts = 0;
    for (const auto& r : mb.trace) restarts += r.restart;
    EXPECT_EQ(restarts, 4);
    for (const auto& m : ab.members) EXPECT_TRUE(std::isfinite(m.alpha));
  }
}

TEST(Boost, SingleRoundMultiboostEqualsAdaboost) {
  const auto ds = synth_gaussians(30, 2, 1.5, 0.1, 3);
  const auto base = make_spec("c45", LearnerKind::c45_tree);
  const auto ab = adaboost(base, ds, 1, 5);
  const auto mb = multiboost(base, ds, 1, 5);
  ASSERT_EQ(ab.members.size(), mb.members.size());
  for (std::size_t k = 0; k < ab.members.size(); ++k) EXPECT_EQ(ab.members[k].alpha, mb.members[k].alpha);
  const auto probe = synth_gaussians(50, 2, 1.5, 0.0, 9);
  for (const auto& in : probe.instances) EXPECT_EQ(predict_ensemble(ab, in.x), predict_ensemble(mb, in.x));
}

TEST(Boost, PerfectBaseKeepsEveryRound) {
  const auto ds = synth_gaussians(20, 2, 10.0, 0.0, 1);
  const auto base = make_spec("c45", LearnerKind::c45_tree);
  const auto ens = adaboost(base, ds, 5, 2);
  ASSERT_EQ(ens.members.size(), 5u);
  const double e = 1.0 / (2.0 * ds.size());
  for (const auto& m : ens.members) EXPECT_NEAR(m.alpha, std::log((1 - e) / e), 1e-12);
  for (const auto& r : ens.trace) EXPECT_EQ(r.status, RoundStatus::perfect);
  const auto single = train(base, ds, 2);
  for (const auto& in : ds.instances) EXPECT_EQ(predict_ensemble(ens, in.x), single.predict(in.x));
}

TEST(Boost, UselessBaseFallsBack) {
  const auto ds = synth_gaussians(20, 2, 0.0, 0.0, 1);
  const auto ens = adaboost(make_spec("maj", LearnerKind::majority), ds, 3, 1);
  EXPECT_TRUE(ens.fallback);
  EXPECT_EQ(ens.members.size(), 1u);
  for (const auto& r : ens.trace) EXPECT_EQ(r.status, RoundStatus::discarded);
  EXPECT_THROW(adaboost(make_spec("maj", LearnerKind::majority), ds, 0, 1), Error);
}

TEST(Vote, WeightedAndTies) {
  const auto schema = three_class();
  const std::vector<double> x{0.0};
  BoostEnsemble one;
  one.members = {{constant_model(schema, 2), 0.3}};
  EXPECT_EQ(predict_ensemble(one, x), 2);
  BoostEnsemble weighted;
  weighted.members = {{constant_model(schema, 0), 1.0}, {constant_model(schema, 1), 2.0}};
  EXPECT_EQ(predict_ensemble(weighted, x), 1);
  BoostEnsemble tie;
  tie.members = {{constant_model(schema, 2), 1.0}, {constant_model(schema, 1), 1.0}, {constant_model(schema, 2), 1.0},
                 {constant_model(schema, 1), 1.0}};
  EXPECT_EQ(predict_ensemble(tie, x), 1);
  BoostEnsemble unanimous;
  unanimous.members = {{constant_model(schema, 2), 0.1}, {constant_model(schema, 2), 5.0}};
  EXPECT_EQ(predict_ensemble(unanimous, x), 2);
  EXPECT_THROW(predict_ensemble(BoostEnsemble{}, x), Error);
  EXPECT_THROW(predict_ensemble(one, std::vector<double>{1, 2}), Error);
}

TEST(Method, NoOpFilterMatchesUnfiltered) {
  const auto ds = synth_gaussians(30, 2, 2.0, 0.1, 4);
  const auto p = profile_of(ds, std::vector<double>(ds.size(), 0.5));
  MethodSpec plain{"AB", MethodKind::adaboost, make_spec("c45", LearnerKind::c45_tree), std::nullopt, 5, {}, false};
  MethodSpec filtered = plain;
  filtered.name = "AB1";
  filtered.filter_tau = 1.0;
  const auto a = run_method(plain, ds, nullptr, 7);
  const auto b = run_method(filtered, ds, &p, 7);
  const auto probe = synth_gaussians(40, 2, 2.0, 0.0, 8);
  for (const auto& in : probe.instances) EXPECT_EQ(a.predict(in.x), b.predict(in.x));
  EXPECT_THROW(run_method(filtered, ds, nullptr, 7), Error);
}

TEST(Method, Kinds) {
  const auto ds = synth_gaussians(30, 2, 3.0, 0.1, 5);
  std::vector<double> ih(ds.size(), 0.1);
  for (const auto& f : ds.flips) ih[static_cast<std::size_t>(f.instance_id)] = 0.9;
  const auto p = profile_of(ds, ih);
  const auto test = synth_gaussians(100, 2, 3.0, 0.0, 6);
  for (auto kind : {MethodKind::plain, MethodKind::adaboost, MethodKind::multiboost, MethodKind::curriculum}) {
    MethodSpec m{"m", kind, make_spec("c45", LearnerKind::c45_tree), 0.75, 4, {0.5, 0.1, Trigger::convergence, 0}, false};
    EXPECT_GT(accuracy(run_method(m, ds, &p, 1), test), 0.8) << to_string(kind);
    EXPECT_EQ(parse_method_kind(to_string(kind)), kind);
  }
  MethodSpec bad{"cl", MethodKind::curriculum, make_spec("nb", LearnerKind::naive_bayes), std::nullopt, 4, {}, false};
  EXPECT_THROW(run_method(bad, ds, &p, 1), Error);
  EXPECT_THROW(parse_method_kind("bagging"), Error);
}
