#pragma once

// Hardness-ordered curriculum training: the active training subset grows by
// IH threshold, one stage at a time.

#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "hlab/core.hpp"
#include "hlab/dataset.hpp"
#include "hlab/hardness.hpp"
#include "hlab/learners.hpp"

namespace hlab {

enum class Trigger { every_n_epochs, convergence };

struct Schedule {
  double initial_ih = 0.0;
  double step = 0.1;
  Trigger trigger = Trigger::convergence;
  int n = 100;

  bool operator==(const Schedule&) const = default;
};

inline void validate(const Schedule& s) {
  if (!(s.initial_ih >= 0.0 && s.initial_ih <= 1.0)) throw Error("initial_ih must be in [0, 1]");
  if (!(s.step > 0.0) || !std::isfinite(s.step)) throw Error("step must be > 0");
  if (s.trigger == Trigger::every_n_epochs && s.n < 1) throw Error("epoch trigger needs n >= 1");
}

/// "convergence" or "epochs:<n>".
inline Trigger parse_trigger(std::string_view text, int& n) {
  if (text == "convergence") return Trigger::convergence;
  if (text.starts_with("epochs:")) {
    auto v = detail::parse_number(text.substr(7));
    if (!v || *v < 1 || *v != std::floor(*v)) throw Error("bad epoch count in trigger '" + std::string(text) + "'");
    n = static_cast<int>(*v);
    return Trigger::every_n_epochs;
  }
  throw Error("unknown trigger '" + std::string(text) + "' (expected convergence or epochs:<n>)");
}

inline std::string to_string(const Schedule& s) {
  return s.trigger == Trigger::convergence ? std::string("convergence") : "epochs:" + std::to_string(s.n);
}

/// [initial, initial+step, ...] with the last element exactly 1.0.
inline std::vector<double> stage_thresholds(const Schedule& s) {
  validate(s);
  std::vector<double> out;
  for (int k = 0;; ++k) {
    const double t = std::round((s.initial_ih + k * s.step) * 1e12) / 1e12;
    if (t >= 1.0 - 1e-9) break;
    out.push_back(t);
  }
  out.push_back(1.0);
  return out;
}

struct StageRecord {
  int stage = 0;
  double threshold = 0;
  std::size_t active = 0;
  std::size_t added = 0;
  std::string action;  // epoch count, "converged", "induced", "expanded" or "skipped"
  int epochs = 0;      // cumulative MLP epochs after the stage
  std::size_t nodes = 0;  // tree node count after the stage (DT only)
};

struct CurriculumResult {
  Model model;
  std::vector<StageRecord> log;
};

inline void write_stage_log(const std::vector<StageRecord>& log, std::ostream& out) {
  out << "stage\tthreshold\tactive\tepochs_or_converged\n";
  for (const auto& r : log)
    out << r.stage << '\t' << format_double(r.threshold) << '\t' << r.active << '\t' << r.action << '\n';
}

namespace detail {

inline bool active_at(double ih, double threshold) { return ih <= threshold + 1e-9; }

/// Positions of instances that become active at each stage.
inline std::vector<std::vector<std::size_t>> stage_increments(const std::vector<double>& ih,
                                                              const std::vector<double>& thresholds) {
  std::vector<std::vector<std::size_t>> out(thresholds.size());
  std::vector<bool> taken(ih.size(), false);
  for (std::size_t s = 0; s < thresholds.size(); ++s)
    for (std::size_t i = 0; i < ih.size(); ++i)
      if (!taken[i] && (active_at(ih[i], thresholds[s]) || s + 1 == thresholds.size())) {
        taken[i] = true;
        out[s].push_back(i);
      }
  return out;
}

}  // namespace detail

/// MLP curriculum. Weights persist across stages; non-final stages run n
/// epochs (epoch trigger) or a full decaying-rate loop from the initial rate
/// (convergence trigger); the final stage always trains to convergence on
/// the full set.
inline CurriculumResult curriculum_train_mlp(const Dataset& ds, const HardnessProfile& profile, const Schedule& sched,
                                             const LearnerSpec& spec, std::uint64_t seed) {
  if (spec.kind != LearnerKind::mlp) throw Error("curriculum_train_mlp needs an mlp learner spec");
  if (ds.size() == 0) throw Error("empty training set");
  const auto ih = profile.aligned_to(ds);
  const auto thresholds = stage_thresholds(sched);
  const auto incr = detail::stage_increments(ih, thresholds);
  const double lr0 = spec.get("learning_rate");

  MlpState st = mlp_init(spec, ds, seed);
  std::vector<StageRecord> log;
  std::vector<std::size_t> active;
  for (std::size_t s = 0; s < thresholds.size(); ++s) {
    active.insert(active.end(), incr[s].begin(), incr[s].end());
    StageRecord rec{static_cast<int>(s), thresholds[s], active.size(), incr[s].size(), "", 0, 0};
    const bool last = s + 1 == thresholds.size();
    if (last) {
      st.learning_rate = lr0;
      st = mlp_converge(std::move(st), ds);
      rec.action = "converged";
    } else if (active.empty()) {
      rec.action = "skipped";
    } else {
      std::vector<std::size_t> sorted = active;
      std::sort(sorted.begin(), sorted.end());
      const Dataset sub = ds.subset(sorted);
      if (sched.trigger == Trigger::every_n_epochs) {
        st = mlp_train_epochs(std::move(st), sub, sched.n);
        rec.action = std::to_string(sched.n);
      } else {
        st.learning_rate = lr0;
        st = mlp_converge(std::move(st), sub);
        rec.action = "converged";
      }
    }
    rec.epochs = st.epochs_run;
    log.push_back(std::move(rec));
  }
  return {model_from_state(st), std::move(log)};
}

/// DT curriculum: induce on the first non-empty stage, then expand the leaves
/// reached by each stage's newly active instances.
inline CurriculumResult curriculum_train_dt(const Dataset& ds, const HardnessProfile& profile, const Schedule& sched,
                                            const LearnerSpec& spec, bool prune_between, std::uint64_t seed) {
  if (spec.kind != LearnerKind::c45_tree) throw Error("curriculum_train_dt needs a c45-tree learner spec");
  if (ds.size() == 0) throw Error("empty training set");
  const auto ih = profile.aligned_to(ds);
  const auto thresholds = stage_thresholds(sched);
  const auto incr = detail::stage_increments(ih, thresholds);

  std::optional<Model> model;
  std::vector<StageRecord> log;
  std::size_t active = 0;
  for (std::size_t s = 0; s < thresholds.size(); ++s) {
    active += incr[s].size();
    StageRecord rec{static_cast<int>(s), thresholds[s], active, incr[s].size(), "", 0, 0};
    const Dataset added = ds.subset(incr[s]);
    if (!model) {
      if (incr[s].empty()) {
        rec.action = "skipped";
      } else {
        model = dt_train(spec, added, seed);
        rec.action = "induced";
      }
    } else if (incr[s].empty() && !prune_between) {
      rec.action = "skipped";
    } else {
      model = dt_expand_leaves(*model, added, prune_between, split_seed(seed, s));
      rec.action = incr[s].empty() ? "pruned" : "expanded";
    }
    if (model) rec.nodes = model->tree()->node_count();
    log.push_back(std::move(rec));
  }
  return {std::move(*model), std::move(log)};
}

}  // namespace hlab
