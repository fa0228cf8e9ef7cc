#pragma once

// C4.5-style decision tree: gain-ratio splits (binary thresholds at midpoints
// for numeric attributes, multiway for categorical ones), pessimistic-error
// subtree replacement, and leaf expansion for incremental training.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include <boost/math/distributions/normal.hpp>

#include "hlab/core.hpp"
#include "hlab/dataset.hpp"

namespace hlab::tree {

inline double entropy(std::span<const double> counts, double total) {
  if (total <= 0) return 0.0;
  double h = 0;
  for (double c : counts)
    if (c > 0) {
      const double p = c / total;
      h -= p * std::log2(p);
    }
  return h;
}

/// Upper-confidence extra errors for a leaf covering `n` instances with `e`
/// errors at confidence `cf`.
inline double added_errors(double n, double e, double cf) {
  if (n <= 0) return 0.0;
  if (cf > 0.5) return 0.0;
  if (e < 1) {
    const double base = n * (1 - std::pow(cf, 1 / n));
    if (e == 0) return base;
    return base + e * (added_errors(n, 1, cf) - base);
  }
  if (e + 0.5 >= n) return std::max(n - e, 0.0);
  static thread_local double cached_cf = -1, z = 0;
  if (cf != cached_cf) {
    z = boost::math::quantile(boost::math::normal_distribution<double>(), 1 - cf);
    cached_cf = cf;
  }
  const double f = (e + 0.5) / n;
  const double r = (f + z * z / (2 * n) + z * std::sqrt(f / n - f * f / n + z * z / (4 * n * n))) / (1 + z * z / n);
  return r * n - e;
}

struct Params {
  double confidence = 0.25;
  int min_leaf = 2;
  bool prune = true;
  int features_per_node = 0;  // 0: consider every attribute

  bool operator==(const Params&) const = default;
};

struct Node {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0;
  std::vector<int> children;
  int label = 0;
  std::vector<int> rows;  // leaf only: indices into the tree's row store

  bool is_leaf() const noexcept { return feature < 0; }
  bool operator==(const Node&) const = default;
};

struct Split {
  int feature = -1;
  double threshold = 0;
  double gain = 0;
  double gain_ratio = 0;
};

class DecisionTree {
 public:
  DecisionTree() = default;

  DecisionTree(const Dataset& train, Params params, std::uint64_t seed)
      : attributes_(train.attributes), num_classes_(train.num_classes()), imputer_(train), params_(params) {
    std::mt19937_64 rng(seed);
    std::vector<int> rows;
    for (const auto& in : train.instances) rows.push_back(add_row(in));
    nodes_.push_back({});
    grow(0, std::move(rows), 0, rng);
    if (params_.prune) prune();
  }

  int predict(std::span<const double> x) const { return nodes_[leaf_of(x)].label; }

  /// Leaf reached by a raw (possibly missing-valued) feature vector.
  int leaf_of(std::span<const double> x) const { return route(imputer_.apply(x)); }

  int leaf_depth(std::span<const double> x) const {
    const auto filled = imputer_.apply(x);
    int node = 0, depth = 0;
    while (!nodes_[node].is_leaf()) {
      node = child_for(nodes_[node], filled);
      ++depth;
    }
    return depth;
  }

  std::size_t node_count() const noexcept { return nodes_.size(); }
  std::size_t leaf_count() const {
    return static_cast<std::size_t>(std::count_if(nodes_.begin(), nodes_.end(), [](const Node& n) { return n.is_leaf(); }));
  }
  const std::vector<Node>& nodes() const noexcept { return nodes_; }
  const std::vector<int>& labels() const noexcept { return labels_; }
  const Params& params() const noexcept { return params_; }

  /// Best gain-ratio split over `rows`; nullopt if no admissible split.
  std::optional<Split> best_split(std::span<const int> rows, std::mt19937_64* rng = nullptr) const {
    std::vector<int> features(attributes_.size());
    std::iota(features.begin(), features.end(), 0);
    std::size_t first_batch = features.size();
    if (params_.features_per_node > 0 && rng) {
      std::shuffle(features.begin(), features.end(), *rng);
      first_batch = std::min<std::size_t>(features.size(), static_cast<std::size_t>(params_.features_per_node));
      std::sort(features.begin(), features.begin() + static_cast<std::ptrdiff_t>(first_batch));
    }
    std::optional<Split> best;
    for (std::size_t i = 0; i < features.size(); ++i) {
      if (i >= first_batch && best) break;  // sampled batch exhausted and found a split
      auto s = evaluate_feature(features[i], rows);
      if (s && (!best || s->gain_ratio > best->gain_ratio + 1e-12)) best = s;
    }
    return best;
  }

  /// Pessimistic-error pruning: a subtree is replaced by a leaf when the
  /// leaf's estimated error does not exceed the subtree's.
  void prune() {
    prune_node(0);
    compact();
  }

  /// Routes `added` to leaves and regrows each leaf that received instances
  /// from its old plus new instances. Internal nodes are never altered.
  void expand(const Dataset& added, std::uint64_t seed) {
    std::map<int, std::vector<int>> incoming;
    for (const auto& in : added.instances) {
      const int row = add_row(in);
      incoming[route(rows_[static_cast<std::size_t>(row)])].push_back(row);
    }
    std::mt19937_64 rng(seed);
    for (auto& [leaf, fresh] : incoming) {
      std::vector<int> rows = nodes_[leaf].rows;
      rows.insert(rows.end(), fresh.begin(), fresh.end());
      grow(leaf, std::move(rows), nodes_[leaf].label, rng);
    }
  }

  bool operator==(const DecisionTree&) const = default;

 private:
  int add_row(const Instance& in) {
    rows_.push_back(imputer_.apply(in.x));
    labels_.push_back(in.label);
    return static_cast<int>(rows_.size() - 1);
  }

  int child_for(const Node& n, std::span<const double> filled) const {
    const double v = filled[static_cast<std::size_t>(n.feature)];
    if (attributes_[static_cast<std::size_t>(n.feature)].kind == AttributeKind::numeric)
      return n.children[v <= n.threshold ? 0 : 1];
    return n.children[static_cast<std::size_t>(v)];
  }

  int route(std::span<const double> filled) const {
    int node = 0;
    while (!nodes_[node].is_leaf()) node = child_for(nodes_[node], filled);
    return node;
  }

  std::vector<double> class_counts(std::span<const int> rows) const {
    std::vector<double> counts(static_cast<std::size_t>(num_classes_), 0.0);
    for (int r : rows) counts[static_cast<std::size_t>(labels_[static_cast<std::size_t>(r)])] += 1;
    return counts;
  }

  std::optional<Split> evaluate_feature(int f, std::span<const int> rows) const {
    const auto fi = static_cast<std::size_t>(f);
    const double n = static_cast<double>(rows.size());
    const auto total = class_counts(rows);
    const double base = entropy(total, n);
    const double min_leaf = params_.min_leaf;
    std::optional<Split> best;

    if (attributes_[fi].kind == AttributeKind::categorical) {
      const auto k = attributes_[fi].categories.size();
      std::vector<std::vector<double>> branch(k, std::vector<double>(static_cast<std::size_t>(num_classes_), 0.0));
      std::vector<double> sizes(k, 0.0);
      for (int r : rows) {
        const auto c = static_cast<std::size_t>(rows_[static_cast<std::size_t>(r)][fi]);
        branch[c][static_cast<std::size_t>(labels_[static_cast<std::size_t>(r)])] += 1;
        sizes[c] += 1;
      }
      if (std::count_if(sizes.begin(), sizes.end(), [&](double s) { return s >= min_leaf; }) < 2) return best;
      double remainder = 0, split_info = 0;
      for (std::size_t c = 0; c < k; ++c) {
        if (sizes[c] == 0) continue;
        remainder += sizes[c] / n * entropy(branch[c], sizes[c]);
        split_info -= sizes[c] / n * std::log2(sizes[c] / n);
      }
      const double gain = base - remainder;
      if (gain > 1e-12 && split_info > 0) best = Split{f, 0, gain, gain / split_info};
      return best;
    }

    std::vector<int> sorted(rows.begin(), rows.end());
    std::stable_sort(sorted.begin(), sorted.end(), [&](int a, int b) {
      return rows_[static_cast<std::size_t>(a)][fi] < rows_[static_cast<std::size_t>(b)][fi];
    });
    std::vector<double> left(static_cast<std::size_t>(num_classes_), 0.0), right = total;
    for (std::size_t i = 0; i + 1 < sorted.size(); ++i) {
      const auto lab = static_cast<std::size_t>(labels_[static_cast<std::size_t>(sorted[i])]);
      left[lab] += 1;
      right[lab] -= 1;
      const double v = rows_[static_cast<std::size_t>(sorted[i])][fi];
      const double w = rows_[static_cast<std::size_t>(sorted[i + 1])][fi];
      if (!(v < w)) continue;
      const double nl = static_cast<double>(i + 1), nr = n - nl;
      if (nl < min_leaf || nr < min_leaf) continue;
      const double gain = base - nl / n * entropy(left, nl) - nr / n * entropy(right, nr);
      const double split_info = -(nl / n) * std::log2(nl / n) - (nr / n) * std::log2(nr / n);
      if (gain <= 1e-12 || split_info <= 0) continue;
      const double ratio = gain / split_info;
      if (!best || ratio > best->gain_ratio + 1e-12) best = Split{f, v + (w - v) / 2, gain, ratio};
    }
    return best;
  }

  void grow(int node, std::vector<int> rows, int fallback_label, std::mt19937_64& rng) {
    const auto counts = class_counts(rows);
    const int label = rows.empty() ? fallback_label : argmax_lowest(counts);
    const bool pure = std::count_if(counts.begin(), counts.end(), [](double c) { return c > 0; }) <= 1;
    std::optional<Split> split;
    if (!pure && rows.size() >= 2 * static_cast<std::size_t>(params_.min_leaf)) split = best_split(rows, &rng);
    if (!split) {
      nodes_[node] = Node{-1, 0, {}, label, std::move(rows)};
      return;
    }
    const auto fi = static_cast<std::size_t>(split->feature);
    const bool numeric = attributes_[fi].kind == AttributeKind::numeric;
    const std::size_t k = numeric ? 2 : attributes_[fi].categories.size();
    std::vector<std::vector<int>> parts(k);
    for (int r : rows) {
      const double v = rows_[static_cast<std::size_t>(r)][fi];
      parts[numeric ? (v <= split->threshold ? 0 : 1) : static_cast<std::size_t>(v)].push_back(r);
    }
    nodes_[node] = Node{split->feature, split->threshold, {}, label, {}};
    for (std::size_t c = 0; c < k; ++c) {
      const int child = static_cast<int>(nodes_.size());
      nodes_.push_back({});
      nodes_[node].children.push_back(child);
      grow(child, std::move(parts[c]), label, rng);
    }
  }

  void collect_rows(int node, std::vector<int>& out) const {
    const auto& n = nodes_[node];
    if (n.is_leaf()) {
      out.insert(out.end(), n.rows.begin(), n.rows.end());
      return;
    }
    for (int c : n.children) collect_rows(c, out);
  }

  // Returns the estimated error count of the (possibly pruned) subtree.
  double prune_node(int node) {
    if (nodes_[node].is_leaf()) {
      const auto& rows = nodes_[node].rows;
      const auto counts = class_counts(rows);
      const double n = static_cast<double>(rows.size());
      const double e = n - (rows.empty() ? 0.0 : counts[static_cast<std::size_t>(nodes_[node].label)]);
      return e + added_errors(n, e, params_.confidence);
    }
    double subtree = 0;
    for (int c : std::vector<int>(nodes_[node].children)) subtree += prune_node(c);
    std::vector<int> rows;
    collect_rows(node, rows);
    std::sort(rows.begin(), rows.end());
    const auto counts = class_counts(rows);
    const double n = static_cast<double>(rows.size());
    const int label = rows.empty() ? nodes_[node].label : argmax_lowest(counts);
    const double e = n - (rows.empty() ? 0.0 : counts[static_cast<std::size_t>(label)]);
    const double as_leaf = e + added_errors(n, e, params_.confidence);
    if (as_leaf <= subtree + 1e-9) {
      nodes_[node] = Node{-1, 0, {}, label, std::move(rows)};
      return as_leaf;
    }
    return subtree;
  }

  // Drops nodes orphaned by pruning; preorder renumbering.
  void compact() {
    std::vector<Node> out;
    out.reserve(nodes_.size());
    auto visit = [&](auto&& self, int node) -> int {
      const int idx = static_cast<int>(out.size());
      out.push_back(nodes_[node]);
      std::vector<int> kids;
      for (int c : nodes_[node].children) kids.push_back(self(self, c));
      out[static_cast<std::size_t>(idx)].children = std::move(kids);
      return idx;
    };
    visit(visit, 0);
    nodes_ = std::move(out);
  }

  std::vector<Attribute> attributes_;
  int num_classes_ = 0;
  Imputer imputer_;
  Params params_;
  std::vector<std::vector<double>> rows_;
  std::vector<int> labels_;
  std::vector<Node> nodes_;
};

/// One-level tree chosen to minimise training errors (not gain ratio).
class DecisionStump {
 public:
  DecisionStump() = default;
  explicit DecisionStump(const Dataset& train) : attributes_(train.attributes), imputer_(train) {
    const int k = train.num_classes();
    std::vector<std::vector<double>> rows;
    std::vector<int> labels;
    for (const auto& in : train.instances) {
      rows.push_back(imputer_.apply(in.x));
      labels.push_back(in.label);
    }
    std::vector<double> total(static_cast<std::size_t>(k), 0.0);
    for (int l : labels) total[static_cast<std::size_t>(l)] += 1;
    const int majority = argmax_lowest(total);
    leaf_labels_ = {majority};
    double best_errors = static_cast<double>(labels.size()) - total[static_cast<std::size_t>(majority)];

    for (std::size_t f = 0; f < attributes_.size(); ++f) {
      if (attributes_[f].kind == AttributeKind::categorical) {
        const auto m = attributes_[f].categories.size();
        std::vector<std::vector<double>> counts(m, std::vector<double>(static_cast<std::size_t>(k), 0.0));
        for (std::size_t i = 0; i < rows.size(); ++i)
          counts[static_cast<std::size_t>(rows[i][f])][static_cast<std::size_t>(labels[i])] += 1;
        double errors = 0;
        std::vector<int> leaves;
        for (const auto& c : counts) {
          const double n = std::accumulate(c.begin(), c.end(), 0.0);
          const int lab = n > 0 ? argmax_lowest(c) : majority;
          leaves.push_back(lab);
          errors += n - c[static_cast<std::size_t>(lab)];
        }
        if (errors < best_errors) {
          best_errors = errors;
          feature_ = static_cast<int>(f);
          leaf_labels_ = leaves;
        }
        continue;
      }
      std::vector<std::size_t> order(rows.size());
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return rows[a][f] < rows[b][f]; });
      std::vector<double> left(static_cast<std::size_t>(k), 0.0), right = total;
      for (std::size_t i = 0; i + 1 < order.size(); ++i) {
        left[static_cast<std::size_t>(labels[order[i]])] += 1;
        right[static_cast<std::size_t>(labels[order[i]])] -= 1;
        const double v = rows[order[i]][f], w = rows[order[i + 1]][f];
        if (!(v < w)) continue;
        const int ll = argmax_lowest(left), rl = argmax_lowest(right);
        const double nl = static_cast<double>(i + 1), nr = static_cast<double>(order.size()) - nl;
        const double errors = (nl - left[static_cast<std::size_t>(ll)]) + (nr - right[static_cast<std::size_t>(rl)]);
        if (errors < best_errors) {
          best_errors = errors;
          feature_ = static_cast<int>(f);
          threshold_ = v + (w - v) / 2;
          leaf_labels_ = {ll, rl};
        }
      }
    }
    training_errors_ = best_errors;
  }

  int predict(std::span<const double> x) const {
    if (feature_ < 0) return leaf_labels_[0];
    const auto f = static_cast<std::size_t>(feature_);
    double v = x[f];
    if (is_missing(v)) v = imputer_.fill_values()[f];
    if (attributes_[f].kind == AttributeKind::numeric) return leaf_labels_[v <= threshold_ ? 0 : 1];
    return leaf_labels_[static_cast<std::size_t>(v)];
  }

  int feature() const noexcept { return feature_; }
  double threshold() const noexcept { return threshold_; }
  double training_errors() const noexcept { return training_errors_; }

 private:
  std::vector<Attribute> attributes_;
  Imputer imputer_;
  int feature_ = -1;
  double threshold_ = 0;
  std::vector<int> leaf_labels_;
  double training_errors_ = 0;
};

}  // namespace hlab::tree
