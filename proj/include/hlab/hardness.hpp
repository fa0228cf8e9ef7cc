#pragma once

// Instance hardness: the fraction of held-out (learner x repeat) predictions
// that misclassify an instance, with learners weighted uniformly.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "hlab/core.hpp"
#include "hlab/dataset.hpp"
#include "hlab/learners.hpp"

namespace hlab {

/// Held-out predictions of every learner for every repeat, indexed by the
/// instance's position in the dataset.
struct CvPredictions {
  std::vector<std::string> learners;
  int repeats = 0;
  std::size_t instances = 0;
  std::vector<int> predicted;  // [learner][repeat][position]

  int at(std::size_t learner, int repeat, std::size_t position) const {
    return predicted[(learner * static_cast<std::size_t>(repeats) + static_cast<std::size_t>(repeat)) * instances +
                     position];
  }

  /// All repeats of one learner, concatenated repeat-major.
  std::vector<int> concatenated(std::size_t learner) const {
    const auto width = static_cast<std::size_t>(repeats) * instances;
    const auto first = predicted.begin() + static_cast<std::ptrdiff_t>(learner * width);
    return {first, first + static_cast<std::ptrdiff_t>(width)};
  }
};

/// Training seed for one grid cell. Depends on the learner's name, not its
/// position in the set.
inline std::uint64_t cell_seed(const CvPlan& plan, int repeat, int fold, const std::string& learner) {
  return split_seed(split_seed(plan.seeds.at(static_cast<std::size_t>(repeat)), static_cast<std::uint64_t>(fold)),
                    hash_string(learner));
}

/// Runs the (repeat x fold x learner) grid: train out-of-fold, predict the fold.
inline CvPredictions cv_predictions(const Dataset& ds, std::span<const LearnerSpec> learners, const CvPlan& plan,
                                    std::size_t workers = 1) {
  validate(learners);
  if (plan.size() != ds.size()) throw Error("cv plan was built for a different dataset size");
  CvPredictions out;
  for (const auto& l : learners) out.learners.push_back(l.name);
  out.repeats = plan.repeats;
  out.instances = ds.size();
  out.predicted.assign(learners.size() * static_cast<std::size_t>(plan.repeats) * ds.size(), -1);

  const auto n_cells = static_cast<std::size_t>(plan.repeats * plan.folds) * learners.size();
  parallel_for(n_cells, workers, [&](std::size_t cell) {
    const auto l = cell % learners.size();
    const auto rf = cell / learners.size();
    const int r = static_cast<int>(rf) / plan.folds;
    const int f = static_cast<int>(rf) % plan.folds;
    const auto& spec = learners[l];
    try {
      const auto test = plan.test_positions(r, f);
      const auto train_pos = plan.train_positions(r, f);
      const Model m = train(spec, ds.subset(train_pos), cell_seed(plan, r, f, spec.name));
      for (auto p : test)
        out.predicted[(l * static_cast<std::size_t>(plan.repeats) + static_cast<std::size_t>(r)) * ds.size() + p] =
            m.predict(ds.instances[p].x);
    } catch (const std::exception& e) {
      throw Error("learner '" + spec.name + "' repeat " + std::to_string(r) + " fold " + std::to_string(f) + ": " +
                  e.what());
    }
  });
  if (std::find(out.predicted.begin(), out.predicted.end(), -1) != out.predicted.end())
    throw Error("internal error: instance never predicted under the cv plan");
  return out;
}

struct CorrectnessMatrix {
  std::vector<int> ids;
  std::vector<std::string> learners;
  int repeats = 0;
  std::vector<std::uint8_t> correct;  // [instance][learner][repeat]

  std::size_t size() const noexcept { return ids.size(); }
  int n_trials() const noexcept { return static_cast<int>(learners.size()) * repeats; }
  bool at(std::size_t instance, std::size_t learner, int repeat) const {
    return correct[(instance * learners.size() + learner) * static_cast<std::size_t>(repeats) +
                   static_cast<std::size_t>(repeat)] != 0;
  }
  int n_correct(std::size_t instance) const {
    const auto w = static_cast<std::size_t>(n_trials());
    return static_cast<int>(std::count(correct.begin() + static_cast<std::ptrdiff_t>(instance * w),
                                       correct.begin() + static_cast<std::ptrdiff_t>((instance + 1) * w), 1));
  }

  bool operator==(const CorrectnessMatrix&) const = default;
};

inline CorrectnessMatrix correctness_from(const Dataset& ds, const CvPredictions& preds) {
  CorrectnessMatrix m;
  m.ids = ds.ids();
  m.learners = preds.learners;
  m.repeats = preds.repeats;
  m.correct.resize(ds.size() * m.learners.size() * static_cast<std::size_t>(m.repeats));
  for (std::size_t i = 0; i < ds.size(); ++i)
    for (std::size_t l = 0; l < m.learners.size(); ++l)
      for (int r = 0; r < m.repeats; ++r)
        m.correct[(i * m.learners.size() + l) * static_cast<std::size_t>(m.repeats) + static_cast<std::size_t>(r)] =
            preds.at(l, r, i) == ds.instances[i].label;
  return m;
}

inline CorrectnessMatrix correctness_matrix(const Dataset& ds, std::span<const LearnerSpec> learners,
                                            const CvPlan& plan, std::size_t workers = 1) {
  return correctness_from(ds, cv_predictions(ds, learners, plan, workers));
}

struct Provenance {
  std::uint64_t dataset_hash = 0;
  std::uint64_t learner_hash = 0;
  std::uint64_t master_seed = 0;
  int repeats = 0;
  int folds = 0;

  std::uint64_t combined() const {
    return Hasher{}.u64(dataset_hash).u64(learner_hash).u64(master_seed).i64(repeats).i64(folds).value();
  }
  bool operator==(const Provenance&) const = default;
};

inline Provenance make_provenance(const Dataset& ds, std::span<const LearnerSpec> learners, const CvPlan& plan) {
  return {dataset_hash(ds), learner_set_hash(learners), plan.master_seed, plan.repeats, plan.folds};
}

struct HardnessProfile {
  std::vector<int> ids;
  std::vector<double> ih;
  std::vector<int> n_correct;
  CorrectnessMatrix matrix;
  Provenance provenance;

  std::size_t size() const noexcept { return ids.size(); }

  /// IH aligned to `ds` positions, matched by instance id.
  std::vector<double> aligned_to(const Dataset& ds) const {
    std::unordered_map<int, double> by_id;
    for (std::size_t i = 0; i < ids.size(); ++i) by_id.emplace(ids[i], ih[i]);
    std::vector<double> out;
    out.reserve(ds.size());
    for (const auto& in : ds.instances) {
      auto it = by_id.find(in.id);
      if (it == by_id.end()) throw Error("hardness profile does not cover instance " + std::to_string(in.id));
      out.push_back(it->second);
    }
    return out;
  }

  bool operator==(const HardnessProfile&) const = default;
};

/// ih_i = 1 - correct_i / trials_i.
inline HardnessProfile instance_hardness(const CorrectnessMatrix& m, Provenance provenance = {}) {
  if (m.n_trials() <= 0) throw Error("correctness matrix has no trials");
  HardnessProfile p;
  p.ids = m.ids;
  p.matrix = m;
  p.provenance = provenance;
  const double trials = m.n_trials();
  for (std::size_t i = 0; i < m.size(); ++i) {
    const int c = m.n_correct(i);
    p.n_correct.push_back(c);
    p.ih.push_back(1.0 - static_cast<double>(c) / trials);
  }
  return p;
}

inline HardnessProfile compute_hardness(const Dataset& ds, std::span<const LearnerSpec> learners, const CvPlan& plan,
                                        std::size_t workers = 1) {
  return instance_hardness(correctness_matrix(ds, learners, plan, workers), make_provenance(ds, learners, plan));
}

/// Instance ids by ascending IH, ties by ascending id.
inline std::vector<int> hardness_ordering(const HardnessProfile& profile) {
  std::vector<std::size_t> idx(profile.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](auto a, auto b) {
    if (profile.ih[a] != profile.ih[b]) return profile.ih[a] < profile.ih[b];
    return profile.ids[a] < profile.ids[b];
  });
  std::vector<int> out;
  for (auto i : idx) out.push_back(profile.ids[i]);
  return out;
}

/// Hardness with respect to each learner alone: [instance][learner].
inline std::vector<std::vector<double>> per_learner_hardness(const CorrectnessMatrix& m) {
  std::vector<std::vector<double>> out(m.size(), std::vector<double>(m.learners.size(), 0.0));
  for (std::size_t i = 0; i < m.size(); ++i)
    for (std::size_t l = 0; l < m.learners.size(); ++l) {
      int c = 0;
      for (int r = 0; r < m.repeats; ++r) c += m.at(i, l, r);
      out[i][l] = 1.0 - static_cast<double>(c) / m.repeats;
    }
  return out;
}

// ---------------------------------------------------------------------------
// IH cache file

inline void write_profile(const HardnessProfile& p, std::ostream& out) {
  const auto& m = p.matrix;
  out << "# hlab-ih provenance=" << hex64(p.provenance.combined()) << " dataset=" << hex64(p.provenance.dataset_hash)
      << " learners=" << hex64(p.provenance.learner_hash) << " master_seed=" << p.provenance.master_seed
      << " repeats=" << m.repeats << " folds=" << p.provenance.folds << " instances=" << p.size()
      << " learner_names=";
  for (std::size_t l = 0; l < m.learners.size(); ++l) out << (l ? "," : "") << m.learners[l];
  out << "\ninstance_id\tih\tn_trials\tn_correct\n";
  for (std::size_t i = 0; i < p.size(); ++i)
    out << p.ids[i] << '\t' << format_double(p.ih[i]) << '\t' << m.n_trials() << '\t' << p.n_correct[i] << '\n';
  out << "instance_id\tlearner\trepeat\tcorrect\n";
  for (std::size_t i = 0; i < p.size(); ++i)
    for (std::size_t l = 0; l < m.learners.size(); ++l)
      for (int r = 0; r < m.repeats; ++r) out << p.ids[i] << '\t' << m.learners[l] << '\t' << r << '\t' << m.at(i, l, r) << '\n';
}

inline void save_profile(const HardnessProfile& p, const std::filesystem::path& path) {
  const auto tmp = path.string() + "." + hex64(std::hash<std::thread::id>{}(std::this_thread::get_id())) + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw Error("cannot write " + tmp);
    write_profile(p, out);
    if (!out) throw Error("write failed: " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

inline HardnessProfile parse_profile(std::string_view text) {
  std::size_t pos = 0, line_no = 0, line_start = 0;
  auto next_line = [&](std::string_view& line) -> bool {
    if (pos >= text.size()) return false;
    line_start = pos;
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) {
      // Every well-formed line is newline-terminated.
      throw ParseError("truncated line at byte " + std::to_string(pos), line_no + 1, pos);
    }
    line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    return true;
  };
  auto fail = [&](const std::string& why) -> ParseError {
    return ParseError(why + " (line " + std::to_string(line_no) + ", byte " + std::to_string(line_start) + ")", line_no,
                      line_start);
  };
  auto split = [](std::string_view s, char d) {
    std::vector<std::string_view> f;
    std::size_t start = 0;
    for (;;) {
      auto e = s.find(d, start);
      f.push_back(s.substr(start, e == std::string_view::npos ? std::string_view::npos : e - start));
      if (e == std::string_view::npos) break;
      start = e + 1;
    }
    return f;
  };
  auto to_u64 = [&](std::string_view s, int base = 10) {
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v, base);
    if (ec != std::errc{} || ptr != s.data() + s.size()) throw fail("bad integer '" + std::string(s) + "'");
    return v;
  };
  auto to_int = [&](std::string_view s) {
    long long v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) throw fail("bad integer '" + std::string(s) + "'");
    return static_cast<int>(v);
  };

  std::string_view line;
  if (!next_line(line) || line.rfind("# hlab-ih ", 0) != 0) throw fail("missing provenance header");
  HardnessProfile p;
  std::uint64_t declared_combined = 0;
  std::size_t n = 0;
  for (auto kv : split(line.substr(10), ' ')) {
    const auto eq = kv.find('=');
    if (eq == std::string_view::npos) throw fail("malformed header field");
    const auto key = kv.substr(0, eq), val = kv.substr(eq + 1);
    if (key == "provenance") declared_combined = to_u64(val, 16);
    else if (key == "dataset") p.provenance.dataset_hash = to_u64(val, 16);
    else if (key == "learners") p.provenance.learner_hash = to_u64(val, 16);
    else if (key == "master_seed") p.provenance.master_seed = to_u64(val);
    else if (key == "repeats") p.provenance.repeats = p.matrix.repeats = to_int(val);
    else if (key == "folds") p.provenance.folds = to_int(val);
    else if (key == "instances") n = to_u64(val);
    else if (key == "learner_names") {
      for (auto name : split(val, ',')) p.matrix.learners.emplace_back(name);
    }
  }
  if (declared_combined != p.provenance.combined()) throw fail("provenance hash does not match header fields");
  if (p.matrix.learners.empty() || p.matrix.repeats <= 0) throw fail("header lacks learners or repeats");
  const int trials = p.matrix.n_trials();

  if (!next_line(line) || line != "instance_id\tih\tn_trials\tn_correct") throw fail("missing summary header");
  for (std::size_t i = 0; i < n; ++i) {
    if (!next_line(line)) throw ParseError("truncated file at byte " + std::to_string(pos), line_no, pos);
    auto f = split(line, '\t');
    if (f.size() != 4) throw fail("summary row needs 4 fields");
    p.ids.push_back(to_int(f[0]));
    auto ih = detail::parse_number(f[1]);
    if (!ih) throw fail("bad ih value");
    p.ih.push_back(*ih);
    if (to_int(f[2]) != trials) throw fail("n_trials disagrees with header");
    p.n_correct.push_back(to_int(f[3]));
    if (p.ih.back() != 1.0 - static_cast<double>(p.n_correct.back()) / trials) throw fail("ih inconsistent with counts");
  }
  if (!next_line(line) || line != "instance_id\tlearner\trepeat\tcorrect")
    throw ParseError("truncated or missing matrix section at byte " + std::to_string(line_start), line_no, line_start);
  p.matrix.ids = p.ids;
  p.matrix.correct.resize(n * static_cast<std::size_t>(trials));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t l = 0; l < p.matrix.learners.size(); ++l)
      for (int r = 0; r < p.matrix.repeats; ++r) {
        if (!next_line(line)) throw ParseError("truncated file at byte " + std::to_string(pos), line_no, pos);
        auto f = split(line, '\t');
        if (f.size() != 4 || to_int(f[0]) != p.ids[i] || f[1] != p.matrix.learners[l] || to_int(f[2]) != r)
          throw fail("matrix row out of order");
        const int c = to_int(f[3]);
        if (c != 0 && c != 1) throw fail("correct must be 0 or 1");
        p.matrix.correct[(i * p.matrix.learners.size() + l) * static_cast<std::size_t>(p.matrix.repeats) +
                         static_cast<std::size_t>(r)] = static_cast<std::uint8_t>(c);
      }
  for (std::size_t i = 0; i < n; ++i)
    if (p.matrix.n_correct(i) != p.n_correct[i]) throw ParseError("matrix disagrees with summary counts", line_no, pos);
  if (pos != text.size()) throw ParseError("trailing data at byte " + std::to_string(pos), line_no, pos);
  return p;
}

inline HardnessProfile load_profile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_profile(ss.str());
}

/// Compares a loaded profile against the current dataset and learner set.
/// A mismatch throws unless `force`, in which case it is returned as warnings.
inline std::vector<std::string> check_provenance(const HardnessProfile& p, const Dataset& ds,
                                                 std::span<const LearnerSpec> learners, bool force) {
  std::vector<std::string> warnings;
  if (p.provenance.dataset_hash != dataset_hash(ds))
    warnings.push_back("provenance: dataset hash " + hex64(dataset_hash(ds)) + " differs from cached " +
                       hex64(p.provenance.dataset_hash));
  if (p.provenance.learner_hash != learner_set_hash(learners))
    warnings.push_back("provenance: learner set hash " + hex64(learner_set_hash(learners)) + " differs from cached " +
                       hex64(p.provenance.learner_hash));
  if (!warnings.empty() && !force) throw Error(warnings.front() + " (use --force to accept)");
  return warnings;
}

}  // namespace hlab
