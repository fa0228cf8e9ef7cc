#pragma once

// Experiment runner: INI configuration, per-fold IH caching, the method grid,
// an append-only record log for resuming, and report tables.

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "hlab/core.hpp"
#include "hlab/curriculum.hpp"
#include "hlab/dataset.hpp"
#include "hlab/ensemble.hpp"
#include "hlab/hardness.hpp"
#include "hlab/learners.hpp"
#include "hlab/stats.hpp"

namespace hlab {

namespace fs = std::filesystem;

/// Parses "name:kind[:key=value...]" items separated by commas,
/// e.g. "1nn:knn:k=1,c45:c45-tree,nb:naive-bayes".
inline std::vector<LearnerSpec> parse_learner_list(std::string_view text) {
  std::vector<LearnerSpec> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto comma = std::min(text.find(',', pos), text.size());
    const auto item = detail::trim(text.substr(pos, comma - pos));
    pos = comma + 1;
    if (item.empty()) continue;
    std::vector<std::string> parts;
    std::size_t p = 0;
    while (p <= item.size()) {
      const auto colon = std::min(item.find(':', p), item.size());
      parts.emplace_back(item.substr(p, colon - p));
      p = colon + 1;
    }
    if (parts.size() < 2) throw Error("learner '" + std::string(item) + "' must be name:kind[:key=value...]");
    LearnerSpec spec{parts[0], parse_learner_kind(parts[1]), {}};
    for (std::size_t i = 2; i < parts.size(); ++i) {
      const auto eq = parts[i].find('=');
      const auto v = eq == std::string::npos ? std::nullopt : detail::parse_number(std::string_view(parts[i]).substr(eq + 1));
      if (!v) throw Error("bad learner parameter '" + parts[i] + "'");
      spec.params[parts[i].substr(0, eq)] = *v;
    }
    out.push_back(std::move(spec));
  }
  validate(out);
  return out;
}

/// Resolves a learner name from `set`, or else a kind name with default params.
inline LearnerSpec resolve_base(std::string_view name, std::span<const LearnerSpec> set) {
  for (const auto& s : set)
    if (s.name == name) return s;
  const auto kind = parse_learner_kind(name);
  return make_spec(std::string(to_string(kind)), kind);
}

/// "IH", 0.75 -> "IH.75"
inline std::string tau_suffix(double tau) {
  std::string t = format_double(tau);
  if (t.starts_with("0.")) t = t.substr(1);
  return t.starts_with(".") ? t : "." + t;
}

/// Orig, IH.tau, AB, MB, CL, AB.tau, MB.tau, CL.tau over one base learner.
inline std::vector<MethodSpec> standard_grid(const LearnerSpec& base, double tau, int iterations, const Schedule& sched,
                                          bool prune_between = false) {
  const auto sfx = tau_suffix(tau);
  auto m = [&](std::string name, MethodKind kind, bool filtered) {
    MethodSpec s;
    s.name = std::move(name);
    s.kind = kind;
    s.base = base;
    if (filtered) s.filter_tau = tau;
    s.iterations = iterations;
    s.schedule = sched;
    s.prune_between = prune_between;
    return s;
  };
  return {m("Orig", MethodKind::plain, false),     m("IH" + sfx, MethodKind::plain, true),
          m("AB", MethodKind::adaboost, false),    m("MB", MethodKind::multiboost, false),
          m("CL", MethodKind::curriculum, false),  m("AB" + sfx, MethodKind::adaboost, true),
          m("MB" + sfx, MethodKind::multiboost, true), m("CL" + sfx, MethodKind::curriculum, true)};
}

struct DatasetEntry {
  std::string name;
  fs::path path;
  std::string class_col;
};

struct ExperimentConfig {
  std::vector<DatasetEntry> datasets;
  std::vector<LearnerSpec> learners = default_learner_set();
  int repeats = 5;
  int folds = 10;
  std::uint64_t seed = 1;
  int ih_repeats = 5;
  int ih_folds = 10;
  std::vector<MethodSpec> methods;
  fs::path output = "hlab-out";
  fs::path cache_dir;  // empty: $HLAB_CACHE_DIR, else <output>/ih-cache
  std::size_t workers = 1;
};

inline void validate(const ExperimentConfig& cfg) {
  if (cfg.datasets.empty()) throw Error("config lists no datasets");
  if (cfg.methods.empty()) throw Error("config lists no methods");
  std::set<std::string> names;
  for (const auto& d : cfg.datasets) {
    if (!names.insert(d.name).second) throw Error("duplicate dataset name '" + d.name + "'");
    if (!fs::exists(d.path)) throw Error("dataset '" + d.name + "': file not found: " + d.path.string());
  }
  names.clear();
  for (const auto& m : cfg.methods) {
    if (m.name.empty() || m.name.find_first_of("\t\n") != std::string::npos) throw Error("bad method name '" + m.name + "'");
    if (!names.insert(m.name).second) throw Error("duplicate method name '" + m.name + "'");
    validate(m.base);
    validate(m.schedule);
    if (m.iterations < 1) throw Error("method '" + m.name + "': iterations must be >= 1");
    if (m.filter_tau && !(*m.filter_tau > 0 && *m.filter_tau <= 1)) throw Error("method '" + m.name + "': filter must be in (0, 1]");
  }
  validate(std::span<const LearnerSpec>(cfg.learners));
  if (cfg.repeats < 1 || cfg.folds < 2 || cfg.ih_repeats < 1 || cfg.ih_folds < 2) throw Error("bad cross-validation sizes");
  if (cfg.workers < 1) throw Error("workers must be >= 1");
}

namespace detail {

inline double ini_number(const std::string& section, const std::string& key, const std::string& value) {
  auto v = parse_number(value);
  if (!v) throw Error("[" + section + "] " + key + ": not a number: '" + value + "'");
  return *v;
}

inline int ini_int(const std::string& section, const std::string& key, const std::string& value) {
  const double v = ini_number(section, key, value);
  if (v != std::floor(v)) throw Error("[" + section + "] " + key + ": not an integer: '" + value + "'");
  return static_cast<int>(v);
}

inline bool ini_bool(const std::string& section, const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw Error("[" + section + "] " + key + ": not a boolean: '" + value + "'");
}

/// Splits "prefix.<name>.<field>"; the name may itself contain dots.
inline std::pair<std::string, std::string> dotted_key(const std::string& section, const std::string& key,
                                                      std::string_view prefix) {
  const auto last = key.rfind('.');
  if (!key.starts_with(std::string(prefix) + ".") || last <= prefix.size())
    throw Error("[" + section + "] unexpected key '" + key + "'");
  return {key.substr(prefix.size() + 1, last - prefix.size() - 1), key.substr(last + 1)};
}

}  // namespace detail

/// Reads an INI experiment description. Relative paths resolve against the
/// config file's directory.
inline ExperimentConfig parse_config(std::istream& in, const fs::path& base_dir = {}) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ParseError("config: " + e.message(), e.line(), 0);
  }
  ExperimentConfig cfg;
  std::string class_col;
  std::string grid, grid_base;
  double tau = 0.75;
  int iterations = 10;
  Schedule sched{0.5, 0.1, Trigger::convergence, 100};
  bool prune = false;
  std::vector<std::string> method_order;
  std::map<std::string, std::map<std::string, std::string>> method_fields;
  std::vector<std::string> learner_order;
  std::map<std::string, std::map<std::string, std::string>> learner_fields;
  auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() || base_dir.empty() ? fs::path(p) : base_dir / p; };

  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) throw Error("config: key '" + section + "' outside a section");
    for (const auto& [key, node] : body) {
      const std::string value = node.data();
      auto unknown = [&] { return Error("config: unknown key '" + key + "' in [" + section + "]"); };
      if (section == "dataset") {
        if (key == "class_col") class_col = value;
        else if (key.starts_with("dataset.") && key.size() > 8) cfg.datasets.push_back({key.substr(8), resolve(value), {}});
        else throw unknown();
      } else if (section == "learners") {
        auto [name, field] = detail::dotted_key(section, key, "learner");
        if (!learner_fields.count(name)) learner_order.push_back(name);
        learner_fields[name][field] = value;
      } else if (section == "cv") {
        if (key == "repeats") cfg.repeats = detail::ini_int(section, key, value);
        else if (key == "folds") cfg.folds = detail::ini_int(section, key, value);
        else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(std::stoull(value));
        else throw unknown();
      } else if (section == "hardness") {
        if (key == "repeats") cfg.ih_repeats = detail::ini_int(section, key, value);
        else if (key == "folds") cfg.ih_folds = detail::ini_int(section, key, value);
        else throw unknown();
      } else if (section == "methods") {
        if (key == "grid") grid = value;
        else if (key == "base") grid_base = value;
        else {
          auto [name, field] = detail::dotted_key(section, key, "method");
          if (!method_fields.count(name)) method_order.push_back(name);
          method_fields[name][field] = value;
        }
      } else if (section == "ensemble") {
        if (key == "filter_tau") tau = detail::ini_number(section, key, value);
        else if (key == "iterations") iterations = detail::ini_int(section, key, value);
        else throw unknown();
      } else if (section == "curriculum") {
        if (key == "trigger") sched.trigger = parse_trigger(value, sched.n);
        else if (key == "initial_ih") sched.initial_ih = detail::ini_number(section, key, value);
        else if (key == "step") sched.step = detail::ini_number(section, key, value);
        else if (key == "prune") prune = detail::ini_bool(section, key, value);
        else throw unknown();
      } else if (section == "harness") {
        if (key == "output") cfg.output = resolve(value);
        else if (key == "cache_dir") cfg.cache_dir = resolve(value);
        else if (key == "workers") cfg.workers = static_cast<std::size_t>(detail::ini_int(section, key, value));
        else throw unknown();
      } else {
        throw Error("config: unknown section [" + section + "]");
      }
    }
  }
  for (auto& d : cfg.datasets) d.class_col = class_col;

  if (!learner_order.empty()) {
    cfg.learners.clear();
    for (const auto& name : learner_order) {
      auto& f = learner_fields[name];
      if (!f.count("kind")) throw Error("config: learner '" + name + "' has no kind");
      LearnerSpec spec{name, parse_learner_kind(f["kind"]), {}};
      for (const auto& [k, v] : f)
        if (k != "kind") spec.params[k] = detail::ini_number("learners", k, v);
      cfg.learners.push_back(std::move(spec));
    }
  }
  validate(std::span<const LearnerSpec>(cfg.learners));

  if (!grid.empty()) {
    if (grid != "standard") throw Error("config: unknown method grid '" + grid + "'");
    cfg.methods = standard_grid(resolve_base(grid_base.empty() ? "c45-tree" : grid_base, cfg.learners), tau, iterations,
                             sched, prune);
  }
  for (const auto& name : method_order) {
    auto& f = method_fields[name];
    MethodSpec m;
    m.name = name;
    m.kind = f.count("kind") ? parse_method_kind(f["kind"]) : MethodKind::plain;
    if (!f.count("base")) throw Error("config: method '" + name + "' has no base");
    m.base = resolve_base(f["base"], cfg.learners);
    m.iterations = iterations;
    m.schedule = sched;
    m.prune_between = prune;
    for (const auto& [k, v] : f) {
      if (k == "kind" || k == "base") continue;
      if (k == "filter") {
        if (v != "none") m.filter_tau = detail::ini_number("methods", k, v);
      } else if (k == "iterations") m.iterations = detail::ini_int("methods", k, v);
      else if (k == "trigger") m.schedule.trigger = parse_trigger(v, m.schedule.n);
      else if (k == "initial_ih") m.schedule.initial_ih = detail::ini_number("methods", k, v);
      else if (k == "step") m.schedule.step = detail::ini_number("methods", k, v);
      else if (k == "prune") m.prune_between = detail::ini_bool("methods", k, v);
      else throw Error("config: method '" + name + "': unknown field '" + k + "'");
    }
    cfg.methods.push_back(std::move(m));
  }
  return cfg;
}

inline ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config " + path.string());
  auto cfg = parse_config(in, path.parent_path());
  validate(cfg);
  return cfg;
}

inline std::uint64_t file_hash(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return hash_string(ss.str());
}

/// Everything that affects results; output location and worker count excluded.
inline std::uint64_t config_hash(const ExperimentConfig& cfg) {
  Hasher h;
  h.str("hlab-config-v1");
  for (const auto& d : cfg.datasets) {
    h.str(d.name).str(d.class_col);
    h.u64(fs::exists(d.path) ? file_hash(d.path) : 0);
  }
  for (const auto& l : cfg.learners) h.u64(spec_hash(l));
  h.i64(cfg.repeats).i64(cfg.folds).u64(cfg.seed).i64(cfg.ih_repeats).i64(cfg.ih_folds);
  for (const auto& m : cfg.methods) {
    h.str(m.name).str(to_string(m.kind)).u64(spec_hash(m.base)).f64(m.filter_tau.value_or(-1)).i64(m.iterations);
    h.f64(m.schedule.initial_ih).f64(m.schedule.step).str(to_string(m.schedule)).i64(m.prune_between);
  }
  return h.value();
}

// ---------------------------------------------------------------------------
// Records

struct RunRecord {
  std::uint64_t config_hash = 0;
  std::string dataset;
  std::string method;
  double mean = 0;
  std::vector<double> fold_accuracies;
  double wall_ms = 0;
};

inline constexpr std::string_view kRecordHeader = "config_hash\tdataset\tmethod\tmean\tfold_accuracies\twall_ms";

inline std::string record_line(const RunRecord& r) {
  std::string accs;
  for (std::size_t i = 0; i < r.fold_accuracies.size(); ++i) accs += (i ? "," : "") + format_double(r.fold_accuracies[i]);
  char wall[32];
  std::snprintf(wall, sizeof wall, "%.1f", r.wall_ms);
  return hex64(r.config_hash) + "\t" + r.dataset + "\t" + r.method + "\t" + format_double(r.mean) + "\t" + accs + "\t" + wall;
}

/// Reads a record log. An unterminated final line (interrupted write) is ignored.
inline std::vector<RunRecord> load_records(const fs::path& path) {
  std::vector<RunRecord> out;
  std::ifstream in(path, std::ios::binary);
  if (!in) return out;
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  std::size_t pos = 0, line_no = 0;
  while (pos < text.size()) {
    const auto nl = text.find('\n', pos);
    if (nl == std::string::npos) break;
    const std::string line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (line.empty() || line == kRecordHeader) continue;
    std::vector<std::string> f;
    std::size_t p = 0;
    while (true) {
      const auto tab = line.find('\t', p);
      f.push_back(line.substr(p, tab == std::string::npos ? std::string::npos : tab - p));
      if (tab == std::string::npos) break;
      p = tab + 1;
    }
    if (f.size() != 6) throw ParseError(path.string() + ": expected 6 fields", line_no, pos);
    RunRecord r;
    r.config_hash = std::stoull(f[0], nullptr, 16);
    r.dataset = f[1];
    r.method = f[2];
    const auto mean = detail::parse_number(f[3]);
    const auto wall = detail::parse_number(f[5]);
    if (!mean || !wall) throw ParseError(path.string() + ": bad number", line_no, pos);
    r.mean = *mean;
    r.wall_ms = *wall;
    std::size_t q = 0;
    while (q <= f[4].size() && !f[4].empty()) {
      const auto comma = std::min(f[4].find(',', q), f[4].size());
      const auto v = detail::parse_number(std::string_view(f[4]).substr(q, comma - q));
      if (!v || *v < 0 || *v > 1) throw ParseError(path.string() + ": bad fold accuracy", line_no, pos);
      r.fold_accuracies.push_back(*v);
      q = comma + 1;
    }
    out.push_back(std::move(r));
  }
  return out;
}

/// Serialises appends from concurrent workers.
class RecordLog {
 public:
  explicit RecordLog(fs::path path) : path_(std::move(path)) {
    const bool fresh = !fs::exists(path_) || fs::file_size(path_) == 0;
    out_.open(path_, std::ios::app | std::ios::binary);
    if (!out_) throw Error("cannot open " + path_.string());
    if (fresh) out_ << kRecordHeader << '\n' << std::flush;
  }
  void append(const RunRecord& r) {
    std::lock_guard lock(mu_);
    out_ << record_line(r) << '\n' << std::flush;
  }

 private:
  fs::path path_;
  std::ofstream out_;
  std::mutex mu_;
};

struct Failure {
  std::string dataset;
  std::string method;
  std::string message;
};

struct ExperimentResult {
  std::vector<RunRecord> records;  // config order: dataset-major, then method
  std::vector<Failure> failures;
  std::size_t trained_folds = 0;  // method x fold tasks actually run
  std::size_t ih_computed = 0;
  std::size_t ih_cache_hits = 0;
};

inline fs::path cache_directory(const ExperimentConfig& cfg) {
  if (!cfg.cache_dir.empty()) return cfg.cache_dir;
  if (const char* env = std::getenv("HLAB_CACHE_DIR"); env && *env) return env;
  return cfg.output / "ih-cache";
}

/// IH of a training set, cached by the training set's own content so test
/// instances can never influence it.
inline HardnessProfile training_hardness(const Dataset& train, const ExperimentConfig& cfg, const fs::path& cache,
                                         bool* hit = nullptr) {
  const std::uint64_t th = dataset_hash(train);
  const std::uint64_t key =
      Hasher{}.u64(th).u64(learner_set_hash(cfg.learners)).i64(cfg.ih_repeats).i64(cfg.ih_folds).u64(cfg.seed).value();
  const fs::path file = cache / (hex64(key) + ".ih.tsv");
  if (fs::exists(file)) {
    try {
      auto p = load_profile(file);
      if (p.provenance.dataset_hash == th && p.size() == train.size()) {
        if (hit) *hit = true;
        return p;
      }
    } catch (const ParseError&) {
    }
  }
  if (hit) *hit = false;
  const auto plan = make_cv_plan(train, cfg.ih_repeats, cfg.ih_folds, split_seed(cfg.seed, th));
  auto p = compute_hardness(train, cfg.learners, plan, 1);
  save_profile(p, file);
  return p;
}

/// Runs every configured method on every dataset under repeated k-fold CV.
/// Results already in <output>/records.tsv for this config hash are reused;
/// failures are collected, not thrown.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg, std::ostream* log = nullptr) {
  validate(cfg);
  fs::create_directories(cfg.output);
  const fs::path cache = cache_directory(cfg);
  fs::create_directories(cache);
  const std::uint64_t chash = config_hash(cfg);
  const fs::path records_path = cfg.output / "records.tsv";

  std::map<std::pair<std::string, std::string>, RunRecord> done;
  for (auto& r : load_records(records_path))
    if (r.config_hash == chash) done.emplace(std::pair{r.dataset, r.method}, std::move(r));

  const std::size_t nd = cfg.datasets.size(), nm = cfg.methods.size();
  const std::size_t folds_total = static_cast<std::size_t>(cfg.repeats * cfg.folds);
  std::vector<std::optional<Dataset>> data(nd);
  std::vector<std::optional<CvPlan>> plans(nd);
  std::vector<std::string> load_error(nd);
  std::vector<std::vector<bool>> pending(nd, std::vector<bool>(nm, false));
  for (std::size_t d = 0; d < nd; ++d) {
    bool any = false;
    for (std::size_t m = 0; m < nm; ++m)
      any |= pending[d][m] = !done.count({cfg.datasets[d].name, cfg.methods[m].name});
    if (!any) continue;
    try {
      data[d] = load_table(cfg.datasets[d].path, TableFormat::automatic, cfg.datasets[d].class_col);
      data[d]->name = cfg.datasets[d].name;
      plans[d] = make_cv_plan(*data[d], cfg.repeats, cfg.folds, split_seed(cfg.seed, hash_string(cfg.datasets[d].name)));
    } catch (const std::exception& e) {
      load_error[d] = e.what();
      data[d].reset();
    }
  }

  ExperimentResult result;

  // Phase 1: training-fold hardness profiles.
  std::vector<std::optional<HardnessProfile>> ih(nd * folds_total);
  std::vector<std::string> ih_error(nd * folds_total);
  std::vector<char> ih_hit(nd * folds_total, 0);
  std::vector<std::size_t> ih_tasks;
  for (std::size_t d = 0; d < nd; ++d) {
    if (!data[d]) continue;
    bool needs = false;
    for (std::size_t m = 0; m < nm; ++m) needs |= pending[d][m] && cfg.methods[m].needs_hardness();
    if (!needs) continue;
    for (std::size_t k = 0; k < folds_total; ++k) ih_tasks.push_back(d * folds_total + k);
  }
  parallel_for(ih_tasks.size(), cfg.workers, [&](std::size_t t) {
    const std::size_t slot = ih_tasks[t], d = slot / folds_total, k = slot % folds_total;
    const int r = static_cast<int>(k) / cfg.folds, f = static_cast<int>(k) % cfg.folds;
    try {
      bool hit = false;
      ih[slot] = training_hardness(data[d]->subset(plans[d]->train_positions(r, f)), cfg, cache, &hit);
      ih_hit[slot] = hit;
    } catch (const std::exception& e) {
      ih_error[slot] = std::string("hardness (repeat ") + std::to_string(r) + ", fold " + std::to_string(f) + "): " + e.what();
    }
  });
  for (auto slot : ih_tasks) {
    if (!ih[slot]) continue;
    ++(ih_hit[slot] ? result.ih_cache_hits : result.ih_computed);
  }

  // Phase 2: method x fold tasks.
  struct Cell {
    std::vector<double> acc;
    std::vector<std::string> error;
    std::vector<double> ms;
    std::size_t remaining = 0;
  };
  std::vector<Cell> cells(nd * nm);
  std::vector<std::size_t> tasks;
  for (std::size_t d = 0; d < nd; ++d)
    for (std::size_t m = 0; m < nm; ++m) {
      if (!pending[d][m] || !data[d]) continue;
      auto& c = cells[d * nm + m];
      c.acc.assign(folds_total, 0.0);
      c.error.assign(folds_total, "");
      c.ms.assign(folds_total, 0.0);
      c.remaining = folds_total;
      for (std::size_t k = 0; k < folds_total; ++k) tasks.push_back((d * nm + m) * folds_total + k);
    }
  RecordLog record_log(records_path);
  std::mutex cell_mu;
  parallel_for(tasks.size(), cfg.workers, [&](std::size_t t) {
    const std::size_t cell = tasks[t] / folds_total, k = tasks[t] % folds_total;
    const std::size_t d = cell / nm, m = cell % nm;
    const int r = static_cast<int>(k) / cfg.folds, f = static_cast<int>(k) % cfg.folds;
    const auto& spec = cfg.methods[m];
    const auto start = std::chrono::steady_clock::now();
    double acc = 0;
    std::string err;
    try {
      const HardnessProfile* prof = nullptr;
      if (spec.needs_hardness()) {
        const auto& slot = ih[d * folds_total + k];
        if (!slot) throw Error(ih_error[d * folds_total + k]);
        prof = &*slot;
      }
      const Dataset train = data[d]->subset(plans[d]->train_positions(r, f));
      const Dataset test = data[d]->subset(plans[d]->test_positions(r, f));
      const std::uint64_t seed =
          Hasher{}.u64(cfg.seed).str(cfg.datasets[d].name).str(spec.name).i64(r).i64(f).value();
      acc = accuracy(run_method(spec, train, prof, seed), test);
    } catch (const std::exception& e) {
      err = "repeat " + std::to_string(r) + ", fold " + std::to_string(f) + ": " + e.what();
    }
    const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    std::lock_guard lock(cell_mu);
    auto& c = cells[cell];
    c.acc[k] = acc;
    c.error[k] = err;
    c.ms[k] = ms;
    if (--c.remaining == 0) {
      const bool ok = std::all_of(c.error.begin(), c.error.end(), [](const auto& e) { return e.empty(); });
      if (ok) {
        RunRecord rec;
        rec.config_hash = chash;
        rec.dataset = cfg.datasets[d].name;
        rec.method = spec.name;
        rec.fold_accuracies = c.acc;
        double s = 0;
        for (double a : c.acc) s += a;
        rec.mean = s / static_cast<double>(c.acc.size());
        for (double v : c.ms) rec.wall_ms += v;
        record_log.append(rec);
        done.emplace(std::pair{rec.dataset, rec.method}, std::move(rec));
      }
    }
  });
  result.trained_folds = tasks.size();

  for (std::size_t d = 0; d < nd; ++d)
    for (std::size_t m = 0; m < nm; ++m) {
      const auto& dn = cfg.datasets[d].name;
      const auto& mn = cfg.methods[m].name;
      if (auto it = done.find({dn, mn}); it != done.end()) {
        result.records.push_back(it->second);
        continue;
      }
      std::string msg = load_error[d];
      if (msg.empty())
        for (const auto& e : cells[d * nm + m].error)
          if (!e.empty()) {
            msg = e;
            break;
          }
      result.failures.push_back({dn, mn, msg.empty() ? "not run" : msg});
    }
  if (log)
    *log << "records: " << result.records.size() << ", failures: " << result.failures.size()
         << ", trained method-folds: " << result.trained_folds << ", IH computed: " << result.ih_computed
         << ", IH cache hits: " << result.ih_cache_hits << '\n';
  return result;
}

inline void write_failures(const std::vector<Failure>& failures, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << "dataset\tmethod\terror\n";
  for (const auto& f : failures) {
    std::string msg = f.message;
    std::replace(msg.begin(), msg.end(), '\t', ' ');
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    out << f.dataset << '\t' << f.method << '\t' << msg << '\n';
  }
}

// ---------------------------------------------------------------------------
// Reports

struct ReportTable {
  std::vector<std::string> methods;
  std::vector<std::string> datasets;
  std::vector<std::vector<double>> acc;  // [dataset][method]
  std::vector<double> average;           // [method]
  std::vector<std::vector<TestResult>> tests;  // [row method][column method], row greater than column
  std::vector<std::vector<WinTieLoss>> wtl;
  Alternative alternative = Alternative::a_greater;
};

/// Builds the comparison grid. Methods and datasets keep first-appearance
/// order unless `methods` is given. Every method must cover every dataset.
inline ReportTable make_report(const std::vector<RunRecord>& records, std::vector<std::string> methods = {},
                               Alternative alt = Alternative::a_greater, double epsilon = 0.0) {
  if (records.empty()) throw Error("no records to report");
  ReportTable t;
  t.alternative = alt;
  std::map<std::pair<std::string, std::string>, double> mean;
  for (const auto& r : records) {
    if (std::find(t.datasets.begin(), t.datasets.end(), r.dataset) == t.datasets.end()) t.datasets.push_back(r.dataset);
    if (methods.empty() && std::find(t.methods.begin(), t.methods.end(), r.method) == t.methods.end())
      t.methods.push_back(r.method);
    mean.emplace(std::pair{r.dataset, r.method}, r.mean);
  }
  if (!methods.empty()) t.methods = std::move(methods);
  std::string missing;
  for (const auto& d : t.datasets)
    for (const auto& m : t.methods)
      if (!mean.count({d, m})) missing += (missing.empty() ? "" : ", ") + d + "/" + m;
  if (!missing.empty()) throw Error("report: mismatched dataset coverage, missing " + missing);

  const std::size_t nm = t.methods.size();
  t.acc.assign(t.datasets.size(), std::vector<double>(nm, 0.0));
  t.average.assign(nm, 0.0);
  for (std::size_t d = 0; d < t.datasets.size(); ++d)
    for (std::size_t m = 0; m < nm; ++m) {
      t.acc[d][m] = mean.at({t.datasets[d], t.methods[m]});
      t.average[m] += t.acc[d][m];
    }
  for (auto& a : t.average) a /= static_cast<double>(t.datasets.size());
  t.tests.assign(nm, std::vector<TestResult>(nm));
  t.wtl.assign(nm, std::vector<WinTieLoss>(nm));
  for (std::size_t a = 0; a < nm; ++a)
    for (std::size_t b = 0; b < nm; ++b) {
      PairedResults pr{t.methods[a], t.methods[b], {}};
      for (std::size_t d = 0; d < t.datasets.size(); ++d) pr.pairs.emplace_back(t.acc[d][a], t.acc[d][b]);
      t.tests[a][b] = wilcoxon_signed_rank(pr, alt);
      t.wtl[a][b] = win_tie_loss(pr, epsilon);
    }
  return t;
}

namespace detail {

inline std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace detail

/// Average row (x100), then one p-value row and one >-=-< row per method.
inline void write_report_tsv(const ReportTable& t, std::ostream& out) {
  out << "row\tmethod";
  for (const auto& m : t.methods) out << '\t' << m;
  out << "\naverage\t";
  for (double a : t.average) out << '\t' << detail::fixed(100 * a, 2);
  out << '\n';
  for (std::size_t a = 0; a < t.methods.size(); ++a) {
    out << "p-value\t" << t.methods[a];
    for (const auto& r : t.tests[a]) out << '\t' << detail::fixed(r.p_value, 4);
    out << "\n>-=-<\t" << t.methods[a];
    for (const auto& w : t.wtl[a]) out << '\t' << to_string(w);
    out << '\n';
  }
}

inline void write_report_markdown(const ReportTable& t, std::ostream& out) {
  out << "| | |";
  for (const auto& m : t.methods) out << ' ' << m << " |";
  out << "\n|---|---|";
  for (std::size_t i = 0; i < t.methods.size(); ++i) out << "---:|";
  out << "\n| Average | |";
  for (double a : t.average) out << ' ' << detail::fixed(100 * a, 2) << " |";
  out << '\n';
  for (std::size_t a = 0; a < t.methods.size(); ++a) {
    out << "| " << t.methods[a] << " | p |";
    for (const auto& r : t.tests[a]) out << ' ' << detail::fixed(r.p_value, 4) << " |";
    out << "\n| | >-=-< |";
    for (const auto& w : t.wtl[a]) out << ' ' << to_string(w) << " |";
    out << '\n';
  }
  out << "\np: Wilcoxon signed-rank, "
      << (t.alternative == Alternative::two_sided ? "two-sided" : "one-sided, row method greater than column method")
      << ". Datasets: " << t.datasets.size() << ".\n";
}

inline void write_accuracies_tsv(const ReportTable& t, std::ostream& out) {
  out << "dataset";
  for (const auto& m : t.methods) out << '\t' << m;
  out << '\n';
  for (std::size_t d = 0; d < t.datasets.size(); ++d) {
    out << t.datasets[d];
    for (double a : t.acc[d]) out << '\t' << detail::fixed(a, 6);
    out << '\n';
  }
}

/// Writes report.tsv, report.md and accuracies.tsv into `dir`.
inline void write_report_files(const ReportTable& t, const fs::path& dir) {
  fs::create_directories(dir);
  auto emit = [&](const char* name, auto&& fn) {
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) throw Error("cannot write " + (dir / name).string());
    fn(t, out);
  };
  emit("report.tsv", write_report_tsv);
  emit("report.md", write_report_markdown);
  emit("accuracies.tsv", write_accuracies_tsv);
}

/// Records whose dataset is covered by every method that appears anywhere.
inline std::vector<RunRecord> fully_covered(const std::vector<RunRecord>& records) {
  std::vector<std::string> methods;
  std::map<std::string, std::set<std::string>> by_dataset;
  for (const auto& r : records) {
    if (std::find(methods.begin(), methods.end(), r.method) == methods.end()) methods.push_back(r.method);
    by_dataset[r.dataset].insert(r.method);
  }
  std::vector<RunRecord> out;
  for (const auto& r : records)
    if (by_dataset[r.dataset].size() == methods.size()) out.push_back(r);
  return out;
}

}  // namespace hlab
