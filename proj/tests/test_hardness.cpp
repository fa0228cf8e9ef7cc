#include <gtest/gtest.h>

#include <filesystem>
#include <random>
#include <sstream>

#include "hlab/hardness.hpp"

using namespace hlab;

namespace {

CorrectnessMatrix random_matrix(std::size_t n, std::size_t learners, int repeats, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  CorrectnessMatrix m;
  for (std::size_t i = 0; i < n; ++i) m.ids.push_back(static_cast<int>(i));
  for (std::size_t l = 0; l < learners; ++l) m.learners.push_back("l" + std::to_string(l));
  m.repeats = repeats;
  m.correct.resize(n * learners * static_cast<std::size_t>(repeats));
  for (auto& c : m.correct) c = static_cast<std::uint8_t>(rng() & 1);
  return m;
}

std::vector<LearnerSpec> small_set() {
  return {make_spec("1nn", LearnerKind::knn), make_spec("nb", LearnerKind::naive_bayes),
          make_spec("c45", LearnerKind::c45_tree)};
}

}  // namespace

TEST(Hardness, FormulaOnRandomMatrices) {
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    const auto m = random_matrix(1 + seed % 50, 1 + seed % 7, 5, seed);
    const auto p = instance_hardness(m);
    for (std::size_t i = 0; i < m.size(); ++i) {
      int c = 0;
      for (std::size_t l = 0; l < m.learners.size(); ++l)
        for (int r = 0; r < m.repeats; ++r) c += m.at(i, l, r);
      EXPECT_NEAR(p.ih[i], 1.0 - double(c) / double(m.n_trials()), 1e-12);
      EXPECT_EQ(p.n_correct[i], c);
    }
  }
}

TEST(Hardness, Boundaries) {
  auto m = random_matrix(2, 3, 5, 1);
  std::fill(m.correct.begin(), m.correct.begin() + 15, 1);
  std::fill(m.correct.begin() + 15, m.correct.end(), 0);
  const auto p = instance_hardness(m);
  EXPECT_EQ(p.ih[0], 0.0);
  EXPECT_EQ(p.ih[1], 1.0);
  CorrectnessMatrix empty;
  EXPECT_THROW(instance_hardness(empty), Error);
}

TEST(Hardness, OrderingBreaksTiesById) {
  HardnessProfile p;
  p.ids = {4, 1, 3, 0};
  p.ih = {0.5, 0.5, 0.0, 1.0};
  EXPECT_EQ(hardness_ordering(p), (std::vector<int>{3, 1, 4, 0}));
}

TEST(Hardness, PerLearner) {
  auto m = random_matrix(1, 2, 4, 1);
  m.correct = {1, 1, 1, 0, 0, 0, 0, 0};
  const auto h = per_learner_hardness(m);
  EXPECT_DOUBLE_EQ(h[0][0], 0.25);
  EXPECT_DOUBLE_EQ(h[0][1], 1.0);
}

TEST(Hardness, ComputeIsDeterministicAndParallelSafe) {
  const auto ds = synth_gaussians(30, 2, 2.0, 0.1, 3);
  const auto plan = make_cv_plan(ds, 2, 5, 9);
  const auto set = small_set();
  const auto a = compute_hardness(ds, set, plan, 1);
  const auto b = compute_hardness(ds, set, plan, 4);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.matrix.n_trials(), 6);
  EXPECT_EQ(a.provenance.repeats, 2);
}

TEST(Hardness, LearnerOrderDoesNotMatter) {
  const auto ds = synth_gaussians(30, 2, 2.0, 0.1, 4);
  const auto plan = make_cv_plan(ds, 2, 5, 9);
  auto set = small_set();
  const auto a = compute_hardness(ds, set, plan);
  std::reverse(set.begin(), set.end());
  const auto b = compute_hardness(ds, set, plan);
  EXPECT_EQ(a.ih, b.ih);
  EXPECT_EQ(a.provenance, b.provenance);
}

TEST(Hardness, FlippedInstancesAreHarder) {
  const auto ds = synth_gaussians(60, 2, 3.0, 0.1, 2);
  const auto set = default_learner_set();
  const auto p = compute_hardness(ds, set, make_cv_plan(ds, 2, 5, 1));
  double flipped = 0, clean = 0;
  std::vector<bool> is_flip(ds.size(), false);
  for (const auto& f : ds.flips) is_flip[static_cast<std::size_t>(f.instance_id)] = true;
  for (std::size_t i = 0; i < ds.size(); ++i) (is_flip[i] ? flipped : clean) += p.ih[i];
  EXPECT_GT(flipped / double(ds.flips.size()), clean / double(ds.size() - ds.flips.size()));
}

TEST(Profile, RoundTrip) {
  const auto ds = synth_gaussians(15, 2, 2.0, 0.1, 5);
  const auto set = small_set();
  const auto p = compute_hardness(ds, set, make_cv_plan(ds, 2, 3, 1));
  std::ostringstream out;
  write_profile(p, out);
  EXPECT_EQ(parse_profile(out.str()), p);

  const auto path = std::filesystem::temp_directory_path() / "hlab_test_profile.tsv";
  save_profile(p, path);
  EXPECT_EQ(load_profile(path), p);
  std::filesystem::remove(path);
}

TEST(Profile, TruncationIsAParseError) {
  const auto ds = synth_gaussians(10, 2, 2.0, 0.1, 5);
  const auto set = small_set();
  const auto p = compute_hardness(ds, set, make_cv_plan(ds, 1, 2, 1));
  std::ostringstream out;
  write_profile(p, out);
  const auto text = out.str();
  for (std::size_t cut : {text.size() - 1, text.size() - 7, text.size() / 2, std::size_t{40}}) {
    try {
      parse_profile(text.substr(0, cut));
      FAIL() << "cut " << cut;
    } catch (const ParseError& e) {
      EXPECT_LE(e.byte_offset(), cut);
    }
  }
  std::string tampered = text;
  tampered[tampered.find("\n0\t") + 3] = '9';
  EXPECT_THROW(parse_profile(tampered), ParseError);
}

TEST(Profile, ProvenanceMismatch) {
  const auto ds = synth_gaussians(15, 2, 2.0, 0.1, 5);
  const auto set = small_set();
  const auto p = compute_hardness(ds, set, make_cv_plan(ds, 1, 3, 1));
  EXPECT_TRUE(check_provenance(p, ds, set, false).empty());
  const auto other = synth_gaussians(15, 2, 2.0, 0.1, 6);
  EXPECT_THROW(check_provenance(p, other, set, false), Error);
  EXPECT_EQ(check_provenance(p, other, set, true).size(), 1u);
  const std::vector<LearnerSpec> fewer(set.begin(), set.begin() + 2);
  EXPECT_THROW(check_provenance(p, ds, fewer, false), Error);
}

TEST(Profile, AlignsById) {
  const auto ds = synth_gaussians(10, 1, 2.0, 0.0, 5);
  HardnessProfile p;
  for (const auto& in : ds.instances) {
    p.ids.push_back(in.id);
    p.ih.push_back(in.id / 100.0);
  }
  const std::vector<std::size_t> pos{5, 2};
  EXPECT_EQ(p.aligned_to(ds.subset(pos)), (std::vector<double>{0.05, 0.02}));
  p.ids.pop_back();
  EXPECT_THROW(p.aligned_to(ds), Error);
}
