#pragma once

// Paired method comparison: Wilcoxon signed-rank test, win/tie/loss counts,
// and MLP/perceptron and forest/linear accuracy gaps.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hlab/core.hpp"
#include "hlab/dataset.hpp"
#include "hlab/hardness.hpp"
#include "hlab/learners/spec.hpp"

namespace hlab {

struct PairedResults {
  std::string name_a;
  std::string name_b;
  std::vector<std::pair<double, double>> pairs;  // (acc_a, acc_b) per dataset

  PairedResults swapped() const {
    PairedResults out{name_b, name_a, {}};
    for (const auto& [a, b] : pairs) out.pairs.emplace_back(b, a);
    return out;
  }
};

enum class Alternative { a_greater, two_sided };

struct TestResult {
  double p_value = 1.0;
  double statistic = 0;  // W+: rank sum of positive differences
  int n_effective = 0;
  Alternative direction = Alternative::a_greater;
};

inline constexpr double kDiffTolerance = 1e-12;

namespace detail {

inline void check_pairs(const PairedResults& pr) {
  for (const auto& [a, b] : pr.pairs)
    if (!(a >= 0.0 && a <= 1.0 && b >= 0.0 && b <= 1.0))
      throw Error("paired accuracies must lie in [0, 1]");
}

struct SignedRanks {
  std::vector<double> ranks;  // average ranks of |d|
  std::vector<bool> positive;
  std::vector<int> tie_sizes;
};

/// Drops zero differences and ranks |d| with average ranks for ties.
inline SignedRanks signed_ranks(const PairedResults& pr) {
  std::vector<double> d;
  for (const auto& [a, b] : pr.pairs)
    if (std::abs(a - b) > kDiffTolerance) d.push_back(a - b);
  std::vector<std::size_t> idx(d.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](auto x, auto y) { return std::abs(d[x]) < std::abs(d[y]); });
  SignedRanks sr;
  sr.ranks.assign(d.size(), 0.0);
  sr.positive.resize(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) sr.positive[i] = d[i] > 0;
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i + 1;
    while (j < idx.size() && std::abs(d[idx[j]]) - std::abs(d[idx[i]]) <= kDiffTolerance) ++j;
    const double avg = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) sr.ranks[idx[k]] = avg;
    sr.tie_sizes.push_back(static_cast<int>(j - i));
    i = j;
  }
  return sr;
}

inline double positive_rank_sum(const SignedRanks& sr) {
  double w = 0;
  for (std::size_t i = 0; i < sr.ranks.size(); ++i)
    if (sr.positive[i]) w += sr.ranks[i];
  return w;
}

}  // namespace detail

/// Exact null distribution by dynamic programming over doubled rank sums
/// (equivalent to enumerating all 2^n sign assignments).
inline TestResult wilcoxon_exact(const PairedResults& pr, Alternative alt = Alternative::a_greater) {
  detail::check_pairs(pr);
  const auto sr = detail::signed_ranks(pr);
  TestResult r;
  r.direction = alt;
  r.n_effective = static_cast<int>(sr.ranks.size());
  r.statistic = detail::positive_rank_sum(sr);
  if (r.n_effective == 0) return r;
  std::vector<int> twice;
  int total = 0;
  for (double rk : sr.ranks) {
    twice.push_back(static_cast<int>(std::lround(2 * rk)));
    total += twice.back();
  }
  std::vector<double> count(static_cast<std::size_t>(total) + 1, 0.0);
  count[0] = 1;
  for (int t : twice)
    for (int s = total; s >= t; --s) count[static_cast<std::size_t>(s)] += count[static_cast<std::size_t>(s - t)];
  const int observed = static_cast<int>(std::lround(2 * r.statistic));
  const double all = std::ldexp(1.0, r.n_effective);
  double upper = 0, lower = 0;
  for (int s = 0; s <= total; ++s) {
    if (s >= observed) upper += count[static_cast<std::size_t>(s)];
    if (s <= observed) lower += count[static_cast<std::size_t>(s)];
  }
  r.p_value = alt == Alternative::a_greater ? upper / all : std::min(1.0, 2.0 * std::min(upper, lower) / all);
  return r;
}

/// Normal approximation with tie and continuity correction.
inline TestResult wilcoxon_normal(const PairedResults& pr, Alternative alt = Alternative::a_greater) {
  detail::check_pairs(pr);
  const auto sr = detail::signed_ranks(pr);
  TestResult r;
  r.direction = alt;
  r.n_effective = static_cast<int>(sr.ranks.size());
  r.statistic = detail::positive_rank_sum(sr);
  if (r.n_effective == 0) return r;
  const double n = r.n_effective;
  const double mean = n * (n + 1) / 4.0;
  double var = n * (n + 1) * (2 * n + 1) / 24.0;
  for (int t : sr.tie_sizes) var -= (static_cast<double>(t) * t * t - t) / 48.0;
  if (var <= 0) return r;
  const double sd = std::sqrt(var);
  if (alt == Alternative::a_greater) {
    const double z = (r.statistic - mean - 0.5) / sd;
    r.p_value = 0.5 * std::erfc(z / std::sqrt(2.0));
  } else {
    const double z = std::max(0.0, std::abs(r.statistic - mean) - 0.5) / sd;
    r.p_value = std::erfc(z / std::sqrt(2.0));
  }
  r.p_value = std::clamp(r.p_value, 0.0, 1.0);
  return r;
}

/// Exact for n_effective <= 20, normal approximation above.
inline TestResult wilcoxon_signed_rank(const PairedResults& pr, Alternative alt = Alternative::a_greater) {
  const auto n = detail::signed_ranks(pr).ranks.size();
  return n <= 20 ? wilcoxon_exact(pr, alt) : wilcoxon_normal(pr, alt);
}

struct WinTieLoss {
  int greater = 0;
  int equal = 0;
  int less = 0;
  bool operator==(const WinTieLoss&) const = default;
};

inline WinTieLoss win_tie_loss(const PairedResults& pr, double epsilon = 0.0) {
  if (epsilon < 0) throw Error("epsilon must be >= 0");
  WinTieLoss w;
  for (const auto& [a, b] : pr.pairs) {
    const double d = a - b;
    if (d > epsilon) ++w.greater;
    else if (d < -epsilon) ++w.less;
    else ++w.equal;
  }
  return w;
}

inline std::string to_string(const WinTieLoss& w) {
  return std::to_string(w.greater) + "-" + std::to_string(w.equal) + "-" + std::to_string(w.less);
}

struct ConvexityMeasures {
  std::optional<double> mlp_per;  // (acc_mlp - acc_perceptron) / acc_perceptron
  std::optional<double> rf_lin;   // (acc_rf - acc_linear) / acc_linear
  double acc_mlp = 0, acc_perceptron = 0, acc_rf = 0, acc_linear = 0;
};

inline std::optional<double> relative_gap(double acc, double reference) {
  if (reference == 0.0) return std::nullopt;
  if (acc == reference) return 0.0;
  return (acc - reference) / reference;
}

/// Mean CV accuracies of an MLP, a perceptron, a random forest and an
/// averaged perceptron (the linear reference), and the relative gaps.
inline ConvexityMeasures convexity_measures(const Dataset& ds, const CvPlan& plan, std::size_t workers = 1) {
  const std::vector<LearnerSpec> set{make_spec("mlp", LearnerKind::mlp), make_spec("perceptron", LearnerKind::perceptron),
                                     make_spec("rf", LearnerKind::random_forest),
                                     make_spec("linear", LearnerKind::perceptron, {{"averaged", 1}})};
  const auto m = correctness_matrix(ds, set, plan, workers);
  std::vector<double> acc(set.size(), 0.0);
  for (std::size_t i = 0; i < m.size(); ++i)
    for (std::size_t l = 0; l < set.size(); ++l)
      for (int r = 0; r < m.repeats; ++r) acc[l] += m.at(i, l, r);
  for (auto& a : acc) a /= static_cast<double>(m.size() * static_cast<std::size_t>(m.repeats));
  ConvexityMeasures out;
  out.acc_mlp = acc[0];
  out.acc_perceptron = acc[1];
  out.acc_rf = acc[2];
  out.acc_linear = acc[3];
  out.mlp_per = relative_gap(acc[0], acc[1]);
  out.rf_lin = relative_gap(acc[2], acc[3]);
  return out;
}

}  // namespace hlab
