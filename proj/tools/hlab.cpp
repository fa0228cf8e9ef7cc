#include <CLI11.hpp>

#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "hlab/hlab.hpp"

namespace {

using namespace hlab;

std::vector<LearnerSpec> learner_set(const std::string& text) {
  return text.empty() ? default_learner_set() : parse_learner_list(text);
}

HardnessProfile profile_for(const Dataset& ds, const std::string& ih_path, const std::string& learners, bool force,
                            int repeats, int folds, std::uint64_t seed, std::size_t workers) {
  if (ih_path.empty()) {
    const auto set = learner_set(learners);
    return compute_hardness(ds, set, make_cv_plan(ds, repeats, folds, seed), workers);
  }
  auto p = load_profile(ih_path);
  std::vector<std::string> warnings;
  if (!learners.empty()) {
    warnings = check_provenance(p, ds, learner_set(learners), force);
  } else if (p.provenance.dataset_hash != dataset_hash(ds)) {
    const std::string msg = "provenance: dataset hash " + hex64(dataset_hash(ds)) + " differs from cached " +
                            hex64(p.provenance.dataset_hash);
    if (!force) throw Error(msg + " (use --force to accept)");
    warnings.push_back(msg);
  }
  for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
  return p;
}

void write_to(const std::string& path, const std::function<void(std::ostream&)>& fn) {
  if (path.empty() || path == "-") {
    fn(std::cout);
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  fn(out);
}

std::vector<RunRecord> records_for(const std::string& path, std::string hash) {
  auto all = load_records(path);
  if (all.empty()) throw Error("no records in " + path);
  if (hash.empty()) hash = hex64(all.back().config_hash);
  std::vector<RunRecord> out;
  for (auto& r : all)
    if (hex64(r.config_hash) == hash) out.push_back(std::move(r));
  if (out.empty()) throw Error("no records with config hash " + hash);
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hlab: instance hardness, curriculum learning, filtering and boosting"};
  app.require_subcommand(1);

  std::uint64_t seed = 1;
  std::size_t workers = 1;
  std::string class_col;
  std::string learners;
  int repeats = 5, folds = 10;
  bool force = false;
  std::string data, ih_path, output, test_path;

  auto add_data = [&](CLI::App* sub) {
    sub->add_option("data", data, "dataset file (.csv or .arff)")->required()->check(CLI::ExistingFile);
    sub->add_option("--class-col", class_col, "class column (default: last)");
  };
  auto add_seed = [&](CLI::App* sub) { sub->add_option("--seed", seed, "master seed")->capture_default_str(); };
  auto add_cv = [&](CLI::App* sub) {
    sub->add_option("--repeats", repeats, "CV repeats")->capture_default_str();
    sub->add_option("--folds", folds, "CV folds")->capture_default_str();
    sub->add_option("--workers", workers, "worker threads")->capture_default_str();
    sub->add_option("--learners", learners, "learner set: name:kind[:key=value...],... (default: 7 diverse learners)");
  };
  auto add_ih = [&](CLI::App* sub) {
    sub->add_option("--ih", ih_path, "IH profile file (computed on the fly when absent)");
    sub->add_flag("--force", force, "accept an IH file whose provenance does not match");
  };

  // synth
  auto* synth = app.add_subcommand("synth", "generate two Gaussian clusters with label noise");
  int n_per_class = 100, dims = 2;
  double separation = 3.0, noise = 0.1;
  synth->add_option("--n-per-class", n_per_class)->capture_default_str();
  synth->add_option("--dims", dims)->capture_default_str();
  synth->add_option("--separation", separation)->capture_default_str();
  synth->add_option("--noise", noise, "label flip rate")->capture_default_str();
  synth->add_option("-o,--output", output, "output .csv or .arff (flips go to <stem>.flips.tsv)")->required();
  add_seed(synth);

  // hardness
  auto* hardness = app.add_subcommand("hardness", "compute instance hardness by repeated cross-validation");
  add_data(hardness);
  add_cv(hardness);
  add_seed(hardness);
  hardness->add_option("-o,--output", output, "IH file (default: stdout)");

  // order
  auto* order = app.add_subcommand("order", "print instances by ascending hardness");
  add_data(order);
  add_ih(order);
  add_cv(order);
  add_seed(order);

  // filter
  auto* filter = app.add_subcommand("filter", "remove instances with IH >= tau");
  double tau = 0.75;
  add_data(filter);
  add_ih(filter);
  add_cv(filter);
  add_seed(filter);
  filter->add_option("--tau", tau)->capture_default_str();
  filter->add_option("-o,--output", output, "filtered dataset file")->required();

  // cluster-cod
  auto* cod = app.add_subcommand("cluster-cod", "cluster learners by classifier output difference");
  std::string linkage = "average", newick_path;
  double cut_at = 0.18;
  add_data(cod);
  add_cv(cod);
  add_seed(cod);
  cod->add_option("--linkage", linkage)->check(CLI::IsMember({"average", "single", "complete"}))->capture_default_str();
  cod->add_option("--cut", cut_at)->capture_default_str();
  cod->add_option("--newick", newick_path, "write the dendrogram in Newick format");

  // train-curriculum
  auto* curr = app.add_subcommand("train-curriculum", "train an MLP or C4.5 tree on a hardness curriculum");
  std::string learner = "mlp", trigger = "convergence", log_path;
  double initial_ih = 0.0, step = 0.1;
  bool prune = false;
  add_data(curr);
  add_ih(curr);
  add_cv(curr);
  add_seed(curr);
  curr->add_option("--learner", learner, "mlp or c45 (or a name from --learners)")->capture_default_str();
  curr->add_option("--trigger", trigger, "convergence or epochs:<n>")->capture_default_str();
  curr->add_option("--initial-ih", initial_ih)->capture_default_str();
  curr->add_option("--step", step)->capture_default_str();
  curr->add_flag("--prune", prune, "prune the tree between stages");
  curr->add_option("--log", log_path, "stage log TSV (default: stdout)");
  curr->add_option("--test", test_path, "evaluate on this dataset")->check(CLI::ExistingFile);

  // boost
  auto* boost = app.add_subcommand("boost", "AdaBoost.M1 or MultiBoost, optionally after IH filtering");
  std::string algo = "adaboost", base = "c45";
  int iters = 10;
  std::optional<double> filter_tau;
  add_data(boost);
  add_ih(boost);
  add_cv(boost);
  add_seed(boost);
  boost->add_option("--algo", algo)->check(CLI::IsMember({"adaboost", "multiboost"}))->capture_default_str();
  boost->add_option("--base", base)->capture_default_str();
  boost->add_option("--iters", iters)->capture_default_str();
  boost->add_option("--filter-tau", filter_tau, "filter IH >= tau before boosting");
  boost->add_option("--test", test_path, "evaluate on this dataset")->check(CLI::ExistingFile);

  // compare
  auto* compare = app.add_subcommand("compare", "Wilcoxon signed-rank and win/tie/loss for two methods");
  std::string records_path, method_a, method_b, hash;
  bool two_sided = false;
  double epsilon = 0.0;
  compare->add_option("records", records_path, "records.tsv")->required()->check(CLI::ExistingFile);
  compare->add_option("a", method_a)->required();
  compare->add_option("b", method_b)->required();
  compare->add_flag("--two-sided", two_sided);
  compare->add_option("--epsilon", epsilon, "tie band for win/tie/loss")->capture_default_str();
  compare->add_option("--config-hash", hash, "records to use (default: last written)");

  // report
  auto* report = app.add_subcommand("report", "report tables from persisted records");
  std::vector<std::string> methods;
  report->add_option("records", records_path, "records.tsv")->required()->check(CLI::ExistingFile);
  report->add_option("-o,--output", output, "output directory")->required();
  report->add_option("--methods", methods, "method order")->delimiter(',');
  report->add_flag("--two-sided", two_sided);
  report->add_option("--config-hash", hash, "records to use (default: last written)");

  // run
  auto* run = app.add_subcommand("run", "run an experiment config (see configs/)");
  std::string config_path;
  std::optional<std::size_t> run_workers;
  std::optional<std::string> run_output;
  run->add_option("config", config_path)->required()->check(CLI::ExistingFile);
  run->add_option("--workers", run_workers, "override [harness] workers");
  run->add_option("-o,--output", run_output, "override [harness] output");
  std::optional<std::uint64_t> run_seed;
  run->add_option("--seed", run_seed, "override [cv] seed");

  CLI11_PARSE(app, argc, argv);

  try {
    auto load = [&] { return load_table(data, TableFormat::automatic, class_col); };

    if (synth->parsed()) {
      auto ds = synth_gaussians(n_per_class, dims, separation, noise, seed);
      save_table(ds, output);
      std::cerr << "wrote " << ds.size() << " instances, " << ds.flips.size() << " flipped labels\n";
    } else if (hardness->parsed()) {
      const auto ds = load();
      const auto set = learner_set(learners);
      const auto p = compute_hardness(ds, set, make_cv_plan(ds, repeats, folds, seed), workers);
      if (output.empty()) write_profile(p, std::cout);
      else save_profile(p, output);
    } else if (order->parsed()) {
      const auto ds = load();
      const auto p = profile_for(ds, ih_path, learners, force, repeats, folds, seed, workers);
      std::unordered_map<int, double> by_id;
      for (std::size_t i = 0; i < p.size(); ++i) by_id[p.ids[i]] = p.ih[i];
      std::cout << "rank\tinstance_id\tih\n";
      int rank = 0;
      for (int id : hardness_ordering(p)) std::cout << rank++ << '\t' << id << '\t' << format_double(by_id[id]) << '\n';
    } else if (filter->parsed()) {
      const auto ds = load();
      const auto p = profile_for(ds, ih_path, learners, force, repeats, folds, seed, workers);
      const auto kept = filter_by_ih(ds, p, {tau});
      save_table(kept, output);
      std::cerr << "kept " << kept.size() << " of " << ds.size() << " instances\n";
    } else if (cod->parsed()) {
      const auto ds = load();
      const auto set = learner_set(learners);
      const auto m = cod_matrix(ds, set, make_cv_plan(ds, repeats, folds, seed), workers);
      std::cout << "learner";
      for (const auto& n : m.names) std::cout << '\t' << n;
      std::cout << '\n';
      for (std::size_t i = 0; i < m.size(); ++i) {
        std::cout << m.names[i];
        for (double v : m.d[i]) std::cout << '\t' << std::fixed << std::setprecision(4) << v;
        std::cout << '\n';
      }
      const auto dend = cluster(m, parse_linkage(linkage));
      const auto nw = to_newick(dend);
      std::cout << "newick\t" << nw << '\n';
      if (!newick_path.empty()) write_to(newick_path, [&](std::ostream& o) { o << nw << '\n'; });
      const auto groups = cut(dend, cut_at);
      const auto reps = representatives(groups, m);
      for (std::size_t g = 0; g < groups.size(); ++g) {
        std::cout << "cluster " << g << "\trepresentative=" << reps[g] << "\tmembers=";
        for (std::size_t k = 0; k < groups[g].size(); ++k) std::cout << (k ? "," : "") << groups[g][k];
        std::cout << '\n';
      }
    } else if (curr->parsed()) {
      const auto ds = load();
      const auto p = profile_for(ds, ih_path, learners, force, repeats, folds, seed, workers);
      Schedule sched;
      sched.initial_ih = initial_ih;
      sched.step = step;
      sched.trigger = parse_trigger(trigger, sched.n);
      const auto spec = resolve_base(learner, learners.empty() ? default_learner_set() : parse_learner_list(learners));
      const auto res = spec.kind == LearnerKind::mlp ? curriculum_train_mlp(ds, p, sched, spec, seed)
                                                     : curriculum_train_dt(ds, p, sched, spec, prune, seed);
      write_to(log_path, [&](std::ostream& o) { write_stage_log(res.log, o); });
      if (const auto* t = res.model.tree()) std::cerr << "tree nodes: " << t->node_count() << '\n';
      else std::cerr << "epochs: " << res.model.meta().epochs << ", final lr: " << res.model.meta().final_learning_rate << '\n';
      if (!test_path.empty()) {
        const auto test = load_table(test_path, TableFormat::automatic, class_col);
        std::cout << "test accuracy\t" << format_double(accuracy(res.model, test)) << '\n';
      }
    } else if (boost->parsed()) {
      const auto ds = load();
      MethodSpec m;
      m.name = algo;
      m.kind = parse_method_kind(algo);
      m.base = resolve_base(base, learners.empty() ? default_learner_set() : parse_learner_list(learners));
      m.iterations = iters;
      m.filter_tau = filter_tau;
      std::optional<HardnessProfile> p;
      if (filter_tau) p = profile_for(ds, ih_path, learners, force, repeats, folds, seed, workers);
      const auto pred = run_method(m, ds, p ? &*p : nullptr, seed);
      const auto& ens = std::get<BoostEnsemble>(pred.impl);
      std::cout << "round\tepsilon\talpha\tstatus\n";
      for (const auto& r : ens.trace) {
        const char* status = r.status == RoundStatus::kept ? "kept" : r.status == RoundStatus::perfect ? "perfect" : "discarded";
        std::cout << r.round << '\t' << format_double(r.epsilon) << '\t' << format_double(r.alpha) << '\t' << status
                  << (r.restart ? "+restart" : "") << '\n';
      }
      std::cerr << "members: " << ens.members.size() << (ens.fallback ? " (fallback)" : "") << '\n';
      if (!test_path.empty()) {
        const auto test = load_table(test_path, TableFormat::automatic, class_col);
        std::cout << "test accuracy\t" << format_double(accuracy(pred, test)) << '\n';
      }
    } else if (compare->parsed()) {
      const auto recs = records_for(records_path, hash);
      const auto t = make_report(recs, {method_a, method_b}, two_sided ? Alternative::two_sided : Alternative::a_greater,
                                 epsilon);
      const auto& r = t.tests[0][1];
      std::cout << "a\t" << method_a << "\nb\t" << method_b << "\ndatasets\t" << t.datasets.size() << "\nmean_a\t"
                << format_double(t.average[0]) << "\nmean_b\t" << format_double(t.average[1]) << "\nW+\t"
                << format_double(r.statistic) << "\nn_effective\t" << r.n_effective << "\np\t" << format_double(r.p_value)
                << "\nalternative\t" << (two_sided ? "two-sided" : "a-greater") << "\n>-=-<\t" << to_string(t.wtl[0][1])
                << '\n';
    } else if (report->parsed()) {
      const auto recs = records_for(records_path, hash);
      const auto t = make_report(recs, methods, two_sided ? Alternative::two_sided : Alternative::a_greater);
      write_report_files(t, output);
      write_report_markdown(t, std::cout);
    } else if (run->parsed()) {
      auto cfg = load_config(config_path);
      if (run_workers) cfg.workers = *run_workers;
      if (run_output) cfg.output = *run_output;
      if (run_seed) cfg.seed = *run_seed;
      const auto res = run_experiment(cfg, &std::cerr);
      write_failures(res.failures, cfg.output / "failures.tsv");
      for (const auto& f : res.failures) std::cerr << "failed: " << f.dataset << " / " << f.method << ": " << f.message << '\n';
      const auto covered = fully_covered(res.records);
      if (!covered.empty()) {
        std::vector<std::string> order_names;
        for (const auto& m : cfg.methods)
          if (std::any_of(covered.begin(), covered.end(), [&](const auto& r) { return r.method == m.name; }))
            order_names.push_back(m.name);
        const auto t = make_report(covered, order_names);
        write_report_files(t, cfg.output);
        write_report_markdown(t, std::cout);
      }
      return res.failures.empty() ? 0 : 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
