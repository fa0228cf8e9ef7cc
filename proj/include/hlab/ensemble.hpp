#pragma once

// IH filtering, AdaBoost.M1 and MultiBoost by resampling, and the method
// wrapper that composes filtering with plain, boosted or curriculum training.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "hlab/core.hpp"
#include "hlab/curriculum.hpp"
#include "hlab/dataset.hpp"
#include "hlab/hardness.hpp"
#include "hlab/learners.hpp"

namespace hlab {

struct FilterSpec {
  double tau = 0.75;
};

/// Keeps instances with ih < tau. Ids and the surviving flip records are kept.
inline Dataset filter_by_ih(const Dataset& ds, const HardnessProfile& profile, FilterSpec spec = {}) {
  if (!(spec.tau > 0.0 && spec.tau <= 1.0)) throw Error("filter tau must be in (0, 1]");
  const auto ih = profile.aligned_to(ds);
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < ih.size(); ++i)
    if (ih[i] < spec.tau - 1e-12) keep.push_back(i);
  Dataset out = ds.subset(keep);
  if (out.size() == 0) throw Error("filtering at tau " + format_double(spec.tau) + " removes every instance");
  if (out.distinct_labels() < 2) {
    const auto counts = out.class_counts();
    const auto survivor = static_cast<std::size_t>(std::find_if(counts.begin(), counts.end(), [](auto c) { return c > 0; }) - counts.begin());
    throw Error("filtering at tau " + format_double(spec.tau) + " leaves a single class '" + out.classes[survivor] + "'");
  }
  std::vector<int> ids = out.ids();
  std::sort(ids.begin(), ids.end());
  for (const auto& f : ds.flips)
    if (std::binary_search(ids.begin(), ids.end(), f.instance_id)) out.flips.push_back(f);
  return out;
}

enum class BoostAlgorithm { adaboost, multiboost };

inline std::string_view to_string(BoostAlgorithm a) { return a == BoostAlgorithm::adaboost ? "adaboost" : "multiboost"; }

struct BoostMember {
  Model model;
  double alpha = 1.0;
};

enum class RoundStatus { kept, perfect, discarded };

struct BoostRound {
  int round = 0;
  double epsilon = 0;
  double alpha = 0;
  RoundStatus status = RoundStatus::kept;
  bool restart = false;              // committee restart after this round (MultiBoost)
  std::vector<bool> misclassified;   // over the full training set
  std::vector<double> weights_after; // distribution used by the next round
};

struct BoostEnsemble {
  std::vector<BoostMember> members;
  BoostAlgorithm algorithm = BoostAlgorithm::adaboost;
  int requested = 0;
  int completed = 0;
  bool fallback = false;  // no round survived; single model on the full data
  std::vector<BoostRound> trace;
};

/// Weighted vote; ties go to the lowest class code.
inline int predict_ensemble(const BoostEnsemble& ens, std::span<const double> x) {
  if (ens.members.empty()) throw Error("empty ensemble");
  std::vector<double> votes(ens.members.front().model.classes().size(), 0.0);
  for (const auto& m : ens.members) votes[static_cast<std::size_t>(m.model.predict(x))] += m.alpha;
  return argmax_lowest(votes);
}

/// One multiplicative AdaBoost.M1 step for a round with error epsilon in
/// (0, 0.5): misclassified weights are multiplied by (1-e)/e, then the
/// distribution is renormalised. Returns alpha.
inline double boost_update(std::vector<double>& w, const std::vector<bool>& misclassified) {
  if (w.size() != misclassified.size()) throw Error("boost_update: size mismatch");
  double eps = 0;
  for (std::size_t i = 0; i < w.size(); ++i)
    if (misclassified[i]) eps += w[i];
  if (!(eps > 0.0 && eps < 0.5)) throw Error("boost_update needs 0 < epsilon < 0.5");
  const double alpha = std::log((1.0 - eps) / eps);
  const double factor = std::exp(alpha);
  double total = 0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (misclassified[i]) w[i] *= factor;
    total += w[i];
  }
  for (auto& v : w) v /= total;
  return alpha;
}

namespace detail {

inline std::vector<std::size_t> weighted_bootstrap(const std::vector<double>& w, std::mt19937_64& rng) {
  std::vector<double> cdf(w.size());
  std::partial_sum(w.begin(), w.end(), cdf.begin());
  const double total = cdf.back();
  std::uniform_real_distribution<double> u(0.0, total);
  std::vector<std::size_t> out(w.size());
  for (auto& p : out) {
    const auto it = std::upper_bound(cdf.begin(), cdf.end(), u(rng));
    p = std::min<std::size_t>(static_cast<std::size_t>(it - cdf.begin()), w.size() - 1);
  }
  std::sort(out.begin(), out.end());
  return out;
}

inline std::vector<double> wagging_weights(std::size_t n, std::mt19937_64& rng) {
  std::exponential_distribution<double> ex(1.0);
  std::vector<double> w(n);
  double total = 0;
  for (auto& v : w) total += v = ex(rng);
  for (auto& v : w) v /= total;
  return w;
}

/// Rounds (1-based) after which MultiBoost restarts its committee.
inline std::vector<int> restart_rounds(int m) {
  const int k = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(m))));
  std::vector<int> out;
  for (int i = 1; i <= k; ++i) out.push_back((i * m + k - 1) / k);
  return out;
}

inline BoostEnsemble boost(BoostAlgorithm algo, const LearnerSpec& base, const Dataset& ds, int m, std::uint64_t seed) {
  if (m < 1) throw Error("boosting needs at least 1 iteration");
  validate(base);
  const std::size_t n = ds.size();
  if (n == 0) throw Error("empty training set");
  std::mt19937_64 rng(seed);
  const std::vector<double> uniform(n, 1.0 / static_cast<double>(n));
  std::vector<double> w = uniform;
  const auto restarts = restart_rounds(m);
  auto reset = [&] { return algo == BoostAlgorithm::adaboost ? uniform : wagging_weights(n, rng); };

  BoostEnsemble ens;
  ens.algorithm = algo;
  ens.requested = m;
  for (int t = 0; t < m; ++t) {
    const auto sample = weighted_bootstrap(w, rng);
    std::optional<Model> model;
    try {
      model = train(base, ds.subset(sample), split_seed(seed, static_cast<std::uint64_t>(t)));
    } catch (const std::exception& e) {
      throw Error("boosting round " + std::to_string(t + 1) + ": " + e.what());
    }
    BoostRound r;
    r.round = t + 1;
    r.misclassified.resize(n);
    std::size_t wrong = 0;
    for (std::size_t i = 0; i < n; ++i) {
      r.misclassified[i] = model->predict(ds.instances[i].x) != ds.instances[i].label;
      if (r.misclassified[i]) {
        r.epsilon += w[i];
        ++wrong;
      }
    }
    if (wrong == 0) {
      const double e = 1.0 / (2.0 * static_cast<double>(n));
      r.alpha = std::log((1.0 - e) / e);
      r.status = RoundStatus::perfect;
      ens.members.push_back({*model, r.alpha});
      w = reset();
    } else if (r.epsilon >= 0.5) {
      r.status = RoundStatus::discarded;
      w = reset();
    } else {
      r.alpha = boost_update(w, r.misclassified);
      ens.members.push_back({*model, r.alpha});
    }
    if (algo == BoostAlgorithm::multiboost && std::find(restarts.begin(), restarts.end(), t + 1) != restarts.end()) {
      r.restart = true;
      w = wagging_weights(n, rng);
    }
    r.weights_after = w;
    ens.trace.push_back(std::move(r));
    ++ens.completed;
  }
  if (ens.members.empty()) {
    ens.members.push_back({train(base, ds, seed), 1.0});
    ens.fallback = true;
  }
  return ens;
}

}  // namespace detail

inline BoostEnsemble adaboost(const LearnerSpec& base, const Dataset& ds, int m, std::uint64_t seed) {
  return detail::boost(BoostAlgorithm::adaboost, base, ds, m, seed);
}

inline BoostEnsemble multiboost(const LearnerSpec& base, const Dataset& ds, int m, std::uint64_t seed) {
  return detail::boost(BoostAlgorithm::multiboost, base, ds, m, seed);
}

/// A trained single model or boosted ensemble.
struct Predictor {
  std::variant<Model, BoostEnsemble> impl;

  int predict(std::span<const double> x) const {
    if (const auto* m = std::get_if<Model>(&impl)) return m->predict(x);
    return predict_ensemble(std::get<BoostEnsemble>(impl), x);
  }
};

inline double accuracy(const Predictor& p, const Dataset& test) {
  if (test.size() == 0) return 0.0;
  std::size_t ok = 0;
  for (const auto& in : test.instances) ok += p.predict(in.x) == in.label;
  return static_cast<double>(ok) / static_cast<double>(test.size());
}

enum class MethodKind { plain, adaboost, multiboost, curriculum };

inline std::string_view to_string(MethodKind k) {
  switch (k) {
    case MethodKind::plain: return "plain";
    case MethodKind::adaboost: return "adaboost";
    case MethodKind::multiboost: return "multiboost";
    case MethodKind::curriculum: return "curriculum";
  }
  return "?";
}

inline MethodKind parse_method_kind(std::string_view s) {
  for (auto k : {MethodKind::plain, MethodKind::adaboost, MethodKind::multiboost, MethodKind::curriculum})
    if (to_string(k) == s) return k;
  throw Error("unknown method kind '" + std::string(s) + "'");
}

struct MethodSpec {
  std::string name;
  MethodKind kind = MethodKind::plain;
  LearnerSpec base;
  std::optional<double> filter_tau;
  int iterations = 10;
  Schedule schedule;
  bool prune_between = false;

  bool needs_hardness() const { return filter_tau.has_value() || kind == MethodKind::curriculum; }
};

/// Optionally filters `train` by the training-set IH profile, then runs the
/// wrapped method. The profile must be computed on `train` alone.
inline Predictor run_method(const MethodSpec& spec, const Dataset& train, const HardnessProfile* profile,
                            std::uint64_t seed) {
  if (spec.needs_hardness() && !profile) throw Error("method '" + spec.name + "' needs a hardness profile");
  const Dataset data = spec.filter_tau ? filter_by_ih(train, *profile, {*spec.filter_tau}) : train;
  switch (spec.kind) {
    case MethodKind::plain: return {hlab::train(spec.base, data, seed)};
    case MethodKind::adaboost: return {adaboost(spec.base, data, spec.iterations, seed)};
    case MethodKind::multiboost: return {multiboost(spec.base, data, spec.iterations, seed)};
    case MethodKind::curriculum:
      if (spec.base.kind == LearnerKind::mlp) return {curriculum_train_mlp(data, *profile, spec.schedule, spec.base, seed).model};
      if (spec.base.kind == LearnerKind::c45_tree)
        return {curriculum_train_dt(data, *profile, spec.schedule, spec.base, spec.prune_between, seed).model};
      throw Error("curriculum method '" + spec.name + "' needs an mlp or c45-tree base learner");
  }
  throw Error("unsupported method kind");
}

}  // namespace hlab
