#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hlab/core.hpp"

namespace hlab {

enum class LearnerKind { knn, naive_bayes, c45_tree, perceptron, mlp, random_forest, decision_stump, majority };

inline constexpr std::string_view to_string(LearnerKind k) {
  switch (k) {
    case LearnerKind::knn: return "knn";
    case LearnerKind::naive_bayes: return "naive-bayes";
    case LearnerKind::c45_tree: return "c45-tree";
    case LearnerKind::perceptron: return "perceptron";
    case LearnerKind::mlp: return "mlp";
    case LearnerKind::random_forest: return "random-forest";
    case LearnerKind::decision_stump: return "decision-stump";
    case LearnerKind::majority: return "majority";
  }
  return "?";
}

inline LearnerKind parse_learner_kind(std::string_view s) {
  for (auto k : {LearnerKind::knn, LearnerKind::naive_bayes, LearnerKind::c45_tree, LearnerKind::perceptron,
                 LearnerKind::mlp, LearnerKind::random_forest, LearnerKind::decision_stump, LearnerKind::majority})
    if (to_string(k) == s) return k;
  if (s == "c45") return LearnerKind::c45_tree;
  if (s == "nb") return LearnerKind::naive_bayes;
  if (s == "rf") return LearnerKind::random_forest;
  if (s == "stump") return LearnerKind::decision_stump;
  throw Error("unknown learner kind '" + std::string(s) + "'");
}

namespace detail {

struct ParamRule {
  std::string_view key;
  double fallback;
  double lo;
  double hi;
  bool integer;
  bool lo_open = false;
};

inline std::span<const ParamRule> param_rules(LearnerKind k) {
  static constexpr double inf = 1e300;
  static const ParamRule knn[] = {{"k", 1, 1, inf, true}};
  static const ParamRule c45[] = {
      {"confidence", 0.25, 0.0, 0.5, false, true}, {"min_leaf", 2, 1, inf, true}, {"prune", 1, 0, 1, true}};
  static const ParamRule perceptron[] = {{"epochs", 100, 1, inf, true}, {"averaged", 0, 0, 1, true}};
  static const ParamRule mlp[] = {{"hidden", 0, 0, inf, true},           {"learning_rate", 0.3, 0, inf, false, true},
                                  {"momentum", 0.2, 0, 1, false},
                                  {"decay", 0.3, 0, 1, false, true},      {"min_lr", 0.001, 0, inf, false, true},
                                  {"tolerance", 1e-5, 0, inf, false},     {"max_epochs", 100000, 1, inf, true}};
  static const ParamRule forest[] = {{"trees", 10, 1, inf, true}, {"min_leaf", 1, 1, inf, true}};
  switch (k) {
    case LearnerKind::knn: return knn;
    case LearnerKind::c45_tree: return c45;
    case LearnerKind::perceptron: return perceptron;
    case LearnerKind::mlp: return mlp;
    case LearnerKind::random_forest: return forest;
    default: return {};
  }
}

}  // namespace detail

/// Declarative base-learner configuration. Unset params take per-kind defaults.
struct LearnerSpec {
  std::string name;
  LearnerKind kind = LearnerKind::c45_tree;
  std::map<std::string, double> params;

  double get(std::string_view key) const {
    if (auto it = params.find(std::string(key)); it != params.end()) return it->second;
    for (const auto& r : detail::param_rules(kind))
      if (r.key == key) return r.fallback;
    throw Error("learner '" + name + "': no parameter '" + std::string(key) + "'");
  }
  int get_int(std::string_view key) const { return static_cast<int>(std::lround(get(key))); }

  bool operator==(const LearnerSpec&) const = default;
};

inline void validate(const LearnerSpec& spec) {
  if (spec.name.empty()) throw Error("learner spec needs a name");
  if (spec.name.find_first_of(" \t\n,=") != std::string::npos)
    throw Error("learner name '" + spec.name + "' may not contain whitespace, ',' or '='");
  const auto rules = detail::param_rules(spec.kind);
  for (const auto& [key, value] : spec.params) {
    auto it = std::find_if(rules.begin(), rules.end(), [&](const auto& r) { return r.key == key; });
    if (it == rules.end())
      throw Error("learner '" + spec.name + "': parameter '" + key + "' is not valid for kind " +
                  std::string(to_string(spec.kind)));
    const bool below = it->lo_open ? value <= it->lo : value < it->lo;
    if (!std::isfinite(value) || below || value > it->hi || (it->integer && value != std::floor(value)))
      throw Error("learner '" + spec.name + "': parameter '" + key + "' out of range");
  }
}

inline void validate(std::span<const LearnerSpec> set) {
  if (set.empty()) throw Error("learner set is empty");
  std::vector<std::string> names;
  for (const auto& s : set) {
    validate(s);
    names.push_back(s.name);
  }
  std::sort(names.begin(), names.end());
  if (std::adjacent_find(names.begin(), names.end()) != names.end()) throw Error("duplicate learner name in set");
}

inline LearnerSpec make_spec(std::string name, LearnerKind kind, std::map<std::string, double> params = {}) {
  LearnerSpec s{std::move(name), kind, std::move(params)};
  validate(s);
  return s;
}

/// The default diverse set: instance-based, probabilistic, tree, neural and
/// linear families.
inline std::vector<LearnerSpec> default_learner_set() {
  return {make_spec("1nn", LearnerKind::knn, {{"k", 1}}),
          make_spec("5nn", LearnerKind::knn, {{"k", 5}}),
          make_spec("nb", LearnerKind::naive_bayes),
          make_spec("c45", LearnerKind::c45_tree),
          make_spec("mlp", LearnerKind::mlp),
          make_spec("rf", LearnerKind::random_forest),
          make_spec("perceptron", LearnerKind::perceptron)};
}

inline std::uint64_t spec_hash(const LearnerSpec& s) {
  Hasher h;
  h.str(s.name).str(to_string(s.kind));
  for (const auto& r : detail::param_rules(s.kind)) h.str(r.key).f64(s.get(r.key));
  return h.value();
}

/// Order-independent hash of a learner set.
inline std::uint64_t learner_set_hash(std::span<const LearnerSpec> set) {
  std::vector<std::uint64_t> parts;
  for (const auto& s : set) parts.push_back(spec_hash(s));
  std::sort(parts.begin(), parts.end());
  Hasher h;
  for (auto p : parts) h.u64(p);
  return h.value();
}

}  // namespace hlab
