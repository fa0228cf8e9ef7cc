#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "hlab/harness.hpp"

using namespace hlab;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("hlab_harness_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

fs::path write_synth(const fs::path& dir, const std::string& name, int per_class, std::uint64_t seed) {
  const auto p = dir / (name + ".csv");
  save_table(synth_gaussians(per_class, 2, 2.5, 0.1, seed), p);
  return p;
}

ExperimentConfig small_config(const fs::path& dir, int n_datasets) {
  ExperimentConfig cfg;
  for (int d = 0; d < n_datasets; ++d) {
    const std::string name = "s" + std::to_string(d);
    cfg.datasets.push_back({name, write_synth(dir, name, 15, 10 + static_cast<std::uint64_t>(d)), {}});
  }
  cfg.learners = {make_spec("1nn", LearnerKind::knn), make_spec("nb", LearnerKind::naive_bayes),
                  make_spec("c45", LearnerKind::c45_tree)};
  cfg.repeats = 1;
  cfg.folds = 2;
  cfg.ih_repeats = 1;
  cfg.ih_folds = 3;
  cfg.output = dir / "out";
  return cfg;
}

RunRecord rec(const std::string& d, const std::string& m, double mean) { return {0, d, m, mean, {mean}, 0}; }

}  // namespace

TEST(Config, ParsesStandardGrid) {
  TempDir tmp("cfg");
  write_synth(tmp.path, "a", 5, 1);
  std::istringstream in(
      "[dataset]\nclass_col = class\ndataset.alpha = a.csv\n"
      "[cv]\nrepeats = 2\nfolds = 3\nseed = 11\n"
      "[hardness]\nrepeats = 1\nfolds = 4\n"
      "[methods]\ngrid = standard\nbase = c45\n"
      "[ensemble]\nfilter_tau = 0.8\niterations = 3\n"
      "[curriculum]\ntrigger = epochs:25\ninitial_ih = 0.25\n"
      "[harness]\noutput = res\nworkers = 2\n");
  const auto cfg = parse_config(in, tmp.path);
  ASSERT_EQ(cfg.datasets.size(), 1u);
  EXPECT_EQ(cfg.datasets[0].path, tmp.path / "a.csv");
  EXPECT_EQ(cfg.datasets[0].class_col, "class");
  EXPECT_EQ(cfg.repeats, 2);
  EXPECT_EQ(cfg.seed, 11u);
  EXPECT_EQ(cfg.ih_folds, 4);
  EXPECT_EQ(cfg.workers, 2u);
  EXPECT_EQ(cfg.output, tmp.path / "res");
  std::vector<std::string> names;
  for (const auto& m : cfg.methods) names.push_back(m.name);
  EXPECT_EQ(names, (std::vector<std::string>{"Orig", "IH.8", "AB", "MB", "CL", "AB.8", "MB.8", "CL.8"}));
  EXPECT_EQ(cfg.methods[4].schedule.trigger, Trigger::every_n_epochs);
  EXPECT_EQ(cfg.methods[4].schedule.n, 25);
  EXPECT_EQ(cfg.methods[2].iterations, 3);
  EXPECT_EQ(cfg.methods[0].base.kind, LearnerKind::c45_tree);
  EXPECT_NO_THROW(validate(cfg));
}

TEST(Config, ExplicitMethodsAndLearners) {
  std::istringstream in(
      "[dataset]\ndataset.x = /nonexistent.csv\n"
      "[learners]\nlearner.k3.kind = knn\nlearner.k3.k = 3\nlearner.tree.kind = c45-tree\n"
      "[methods]\nmethod.plain-mlp.kind = plain\nmethod.plain-mlp.base = mlp\n"
      "method.boosted.kind = adaboost\nmethod.boosted.base = tree\nmethod.boosted.filter = 0.6\n"
      "method.boosted.iterations = 7\n");
  const auto cfg = parse_config(in);
  ASSERT_EQ(cfg.learners.size(), 2u);
  EXPECT_EQ(cfg.learners[0].params.at("k"), 3.0);
  ASSERT_EQ(cfg.methods.size(), 2u);
  EXPECT_EQ(cfg.methods[0].base.kind, LearnerKind::mlp);
  EXPECT_FALSE(cfg.methods[0].filter_tau);
  EXPECT_EQ(cfg.methods[1].base.name, "tree");
  EXPECT_EQ(*cfg.methods[1].filter_tau, 0.6);
  EXPECT_EQ(cfg.methods[1].iterations, 7);
  EXPECT_THROW(validate(cfg), Error);  // dataset file missing
}

TEST(Config, Errors) {
  auto parse = [](const std::string& text) {
    std::istringstream in(text);
    return parse_config(in);
  };
  EXPECT_THROW(parse("[bogus]\nx = 1\n"), Error);
  EXPECT_THROW(parse("[cv]\nshuffle = 1\n"), Error);
  EXPECT_THROW(parse("[cv]\nfolds = ten\n"), Error);
  EXPECT_THROW(parse("[methods]\ngrid = everything\n"), Error);
  EXPECT_THROW(parse("[methods]\nmethod.m.kind = plain\n"), Error);
  EXPECT_THROW(parse("[learners]\nlearner.a.k = 1\n"), Error);
  EXPECT_THROW(parse("[cv\nfolds = 2\n"), ParseError);
  TempDir tmp("cfgdup");
  auto cfg = small_config(tmp.path, 1);
  cfg.methods = {MethodSpec{"m", MethodKind::plain, make_spec("nb", LearnerKind::naive_bayes), std::nullopt, 1, {}, false}};
  cfg.methods.push_back(cfg.methods[0]);
  EXPECT_THROW(validate(cfg), Error);
}

TEST(Records, LineRoundTripAndTruncatedTail) {
  TempDir tmp("rec");
  const auto path = tmp.path / "records.tsv";
  {
    RecordLog log(path);
    log.append({0xabcdef, "d1", "AB.75", 0.75, {0.5, 1.0}, 12.5});
    log.append({0xabcdef, "d2", "Orig", 0.25, {0.25}, 3});
  }
  std::ofstream(path, std::ios::app) << "00000000000000ab\td3\tMB";
  const auto r = load_records(path);
  ASSERT_EQ(r.size(), 2u);
  EXPECT_EQ(r[0].config_hash, 0xabcdefu);
  EXPECT_EQ(r[0].method, "AB.75");
  EXPECT_EQ(r[0].fold_accuracies, (std::vector<double>{0.5, 1.0}));
  EXPECT_EQ(r[1].mean, 0.25);
  EXPECT_TRUE(load_records(tmp.path / "none.tsv").empty());
}

TEST(Experiment, OneDatasetTwoFolds) {
  TempDir tmp("one");
  auto cfg = small_config(tmp.path, 1);
  cfg.methods = {MethodSpec{"plain-mlp", MethodKind::plain, make_spec("mlp", LearnerKind::mlp), std::nullopt, 1, {}, false}};
  const auto res = run_experiment(cfg);
  ASSERT_EQ(res.records.size(), 1u);
  EXPECT_TRUE(res.failures.empty());
  const auto& r = res.records[0];
  ASSERT_EQ(r.fold_accuracies.size(), 2u);
  EXPECT_DOUBLE_EQ(r.mean, (r.fold_accuracies[0] + r.fold_accuracies[1]) / 2);
  for (double a : r.fold_accuracies) {
    EXPECT_GE(a, 0.0);
    EXPECT_LE(a, 1.0);
  }
  EXPECT_EQ(res.trained_folds, 2u);
  EXPECT_EQ(res.ih_computed, 0u);
  EXPECT_EQ(r.config_hash, config_hash(cfg));
}

TEST(Experiment, RerunIsServedFromRecords) {
  TempDir tmp("resume");
  auto cfg = small_config(tmp.path, 1);
  cfg.methods = standard_grid(make_spec("c45", LearnerKind::c45_tree), 0.75, 2, {0.5, 0.25, Trigger::convergence, 0});
  const auto first = run_experiment(cfg);
  EXPECT_GT(first.trained_folds, 0u);
  EXPECT_EQ(first.ih_computed, 2u);
  const auto second = run_experiment(cfg);
  EXPECT_EQ(second.trained_folds, 0u);
  EXPECT_EQ(second.ih_computed + second.ih_cache_hits, 0u);
  ASSERT_EQ(second.records.size(), first.records.size());
  for (std::size_t i = 0; i < first.records.size(); ++i) EXPECT_EQ(record_line(second.records[i]), record_line(first.records[i]));

  // Without the record log, training reruns but hardness comes from the cache.
  fs::remove(cfg.output / "records.tsv");
  const auto third = run_experiment(cfg);
  EXPECT_EQ(third.ih_computed, 0u);
  EXPECT_EQ(third.ih_cache_hits, 2u);
  for (std::size_t i = 0; i < first.records.size(); ++i)
    EXPECT_EQ(third.records[i].fold_accuracies, first.records[i].fold_accuracies);

  // A changed config does not reuse the old records.
  cfg.seed = 2;
  EXPECT_GT(run_experiment(cfg).trained_folds, 0u);
}

TEST(Experiment, GridOverTwoDatasets) {
  TempDir tmp("grid");
  auto cfg = small_config(tmp.path, 2);
  cfg.methods = standard_grid(make_spec("c45", LearnerKind::c45_tree), 0.75, 2, {0.5, 0.25, Trigger::convergence, 0});
  cfg.workers = 3;
  const auto res = run_experiment(cfg);
  EXPECT_TRUE(res.failures.empty());
  ASSERT_EQ(res.records.size(), 16u);
  EXPECT_EQ(res.records[0].dataset, "s0");
  EXPECT_EQ(res.records[8].dataset, "s1");
  EXPECT_EQ(res.records[9].method, "IH.75");
  EXPECT_EQ(load_records(cfg.output / "records.tsv").size(), 16u);
}

TEST(Experiment, FailuresAreCollected) {
  TempDir tmp("fail");
  auto cfg = small_config(tmp.path, 1);
  cfg.datasets.push_back({"broken", tmp.path / "broken.csv", {}});
  std::ofstream(tmp.path / "broken.csv") << "a,class\n1,x\n2,x\n";
  cfg.methods = {MethodSpec{"nb", MethodKind::plain, make_spec("nb", LearnerKind::naive_bayes), std::nullopt, 1, {}, false},
                 MethodSpec{"cl-nb", MethodKind::curriculum, make_spec("nb", LearnerKind::naive_bayes), std::nullopt, 1, {}, false}};
  const auto res = run_experiment(cfg);
  ASSERT_EQ(res.records.size(), 1u);
  EXPECT_EQ(res.records[0].method, "nb");
  ASSERT_EQ(res.failures.size(), 3u);
  EXPECT_EQ(res.failures[0].method, "cl-nb");
  EXPECT_EQ(res.failures[1].dataset, "broken");
  write_failures(res.failures, tmp.path / "failures.tsv");
  std::ifstream in(tmp.path / "failures.tsv");
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "dataset\tmethod\terror");
}

TEST(Experiment, TrainingHardnessIgnoresTestInstances) {
  TempDir tmp("leak");
  auto cfg = small_config(tmp.path, 1);
  const auto ds = synth_gaussians(20, 2, 2.0, 0.1, 3);
  const auto plan = make_cv_plan(ds, 1, 4, 5);
  const auto train = ds.subset(plan.train_positions(0, 0));
  bool hit = true;
  const auto a = training_hardness(train, cfg, tmp.path, &hit);
  EXPECT_FALSE(hit);
  auto other = ds;
  for (auto pos : plan.test_positions(0, 0)) other.instances[pos].x[0] += 100;
  const auto b = training_hardness(other.subset(plan.train_positions(0, 0)), cfg, tmp.path, &hit);
  EXPECT_TRUE(hit);
  EXPECT_EQ(a, b);
  fs::remove_all(tmp.path);
  fs::create_directories(tmp.path);
  EXPECT_EQ(training_hardness(other.subset(plan.train_positions(0, 0)), cfg, tmp.path, &hit).ih, a.ih);
  EXPECT_FALSE(hit);
}

TEST(Report, IdenticalMethodsTie) {
  const std::vector<RunRecord> records{rec("d1", "A", 0.8), rec("d1", "B", 0.8), rec("d2", "A", 0.6), rec("d2", "B", 0.6)};
  const auto t = make_report(records);
  for (std::size_t a = 0; a < 2; ++a)
    for (std::size_t b = 0; b < 2; ++b) {
      EXPECT_EQ(t.tests[a][b].p_value, 1.0);
      EXPECT_EQ(t.wtl[a][b], (WinTieLoss{0, 2, 0}));
    }
  std::ostringstream out;
  write_report_tsv(t, out);
  EXPECT_EQ(out.str(),
            "row\tmethod\tA\tB\naverage\t\t70.00\t70.00\n"
            "p-value\tA\t1.0000\t1.0000\n>-=-<\tA\t0-2-0\t0-2-0\n"
            "p-value\tB\t1.0000\t1.0000\n>-=-<\tB\t0-2-0\t0-2-0\n");
}

TEST(Report, EightMethodGrid) {
  std::vector<RunRecord> records;
  for (int d = 0; d < 6; ++d)
    for (int m = 0; m < 8; ++m) records.push_back(rec("d" + std::to_string(d), "m" + std::to_string(m), 0.5 + 0.05 * m - 0.01 * d));
  const auto t = make_report(records);
  ASSERT_EQ(t.tests.size(), 8u);
  for (std::size_t a = 0; a < 8; ++a) {
    ASSERT_EQ(t.tests[a].size(), 8u);
    EXPECT_EQ(t.tests[a][a].p_value, 1.0);
    EXPECT_EQ(t.wtl[a][a], (WinTieLoss{0, 6, 0}));
  }
  EXPECT_DOUBLE_EQ(t.tests[7][0].p_value, 1.0 / 64);
  EXPECT_EQ(t.wtl[7][0], (WinTieLoss{6, 0, 0}));
  std::ostringstream md;
  write_report_markdown(t, md);
  EXPECT_NE(md.str().find("| m7 | p |"), std::string::npos);
  EXPECT_EQ(make_report(records, {"m7", "m0"}).methods, (std::vector<std::string>{"m7", "m0"}));
}

TEST(Report, CoverageMismatchListsPairs) {
  const std::vector<RunRecord> records{rec("d1", "A", 0.8), rec("d1", "B", 0.7), rec("d2", "A", 0.6)};
  try {
    make_report(records);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("d2/B"), std::string::npos);
  }
  EXPECT_EQ(fully_covered(records).size(), 2u);
  EXPECT_THROW(make_report({}), Error);
}

TEST(Report, RegeneratedFromRecordLog) {
  TempDir tmp("report");
  auto cfg = small_config(tmp.path, 2);
  cfg.methods = {MethodSpec{"nb", MethodKind::plain, make_spec("nb", LearnerKind::naive_bayes), std::nullopt, 1, {}, false},
                 MethodSpec{"1nn", MethodKind::plain, make_spec("1nn", LearnerKind::knn), std::nullopt, 1, {}, false}};
  const auto res = run_experiment(cfg);
  const auto direct = make_report(res.records);
  const auto stored = make_report(load_records(cfg.output / "records.tsv"));
  std::ostringstream a, b;
  write_report_tsv(direct, a);
  write_report_tsv(stored, b);
  EXPECT_EQ(a.str(), b.str());
  write_report_files(stored, tmp.path / "rep");
  for (const char* f : {"report.tsv", "report.md", "accuracies.tsv"}) EXPECT_TRUE(fs::exists(tmp.path / "rep" / f)) << f;
}
