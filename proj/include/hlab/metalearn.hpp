#pragma once

// Classifier Output Difference between learners, agglomerative clustering of
// learners on COD, threshold cuts, and medoid representatives.

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "hlab/core.hpp"
#include "hlab/dataset.hpp"
#include "hlab/hardness.hpp"

namespace hlab {

/// Fraction of positions where two prediction vectors differ.
inline double cod_distance(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size()) throw Error("cod_distance: length mismatch");
  if (a.empty()) throw Error("cod_distance: empty prediction vectors");
  std::size_t diff = 0;
  for (std::size_t i = 0; i < a.size(); ++i) diff += a[i] != b[i];
  return static_cast<double>(diff) / static_cast<double>(a.size());
}

struct CodMatrix {
  std::vector<std::string> names;
  std::vector<std::vector<double>> d;

  std::size_t size() const noexcept { return names.size(); }
  double at(std::size_t i, std::size_t j) const { return d[i][j]; }
};

inline CodMatrix cod_matrix(const CvPredictions& preds) {
  CodMatrix m;
  m.names = preds.learners;
  const auto n = m.names.size();
  m.d.assign(n, std::vector<double>(n, 0.0));
  std::vector<std::vector<int>> flat;
  for (std::size_t l = 0; l < n; ++l) flat.push_back(preds.concatenated(l));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) m.d[i][j] = m.d[j][i] = cod_distance(flat[i], flat[j]);
  return m;
}

/// COD over the concatenated held-out predictions of all repeats and folds.
inline CodMatrix cod_matrix(const Dataset& ds, std::span<const LearnerSpec> learners, const CvPlan& plan,
                            std::size_t workers = 1) {
  if (learners.size() < 2) throw Error("cod_matrix needs at least 2 learners");
  return cod_matrix(cv_predictions(ds, learners, plan, workers));
}

enum class Linkage { average, single, complete };

inline Linkage parse_linkage(std::string_view s) {
  if (s == "average") return Linkage::average;
  if (s == "single") return Linkage::single;
  if (s == "complete") return Linkage::complete;
  throw Error("unknown linkage '" + std::string(s) + "'");
}

struct Merge {
  int left = 0;  // node ids: leaves 0..n-1, merge k creates node n+k
  int right = 0;
  double height = 0;
};

struct Dendrogram {
  std::vector<std::string> leaves;
  std::vector<Merge> merges;
};

/// Agglomerative clustering. Among pairs whose linkage distance equals the
/// minimum (within 1e-12), the pair with the lexicographically smallest
/// (min-name, max-name) merges first; a cluster's name is its smallest leaf name.
inline Dendrogram cluster(const CodMatrix& codm, Linkage linkage = Linkage::average) {
  const auto n = codm.size();
  if (n < 2) throw Error("clustering needs at least 2 learners");
  Dendrogram dend;
  dend.leaves = codm.names;
  struct Active {
    int node;
    std::vector<std::size_t> members;
    std::string name;
  };
  std::vector<Active> active;
  for (std::size_t i = 0; i < n; ++i) active.push_back({static_cast<int>(i), {i}, codm.names[i]});

  auto distance = [&](const Active& a, const Active& b) {
    double acc = linkage == Linkage::single ? std::numeric_limits<double>::infinity()
                 : linkage == Linkage::complete ? -std::numeric_limits<double>::infinity()
                                                : 0.0;
    for (auto i : a.members)
      for (auto j : b.members) {
        const double v = codm.d[i][j];
        if (linkage == Linkage::single) acc = std::min(acc, v);
        else if (linkage == Linkage::complete) acc = std::max(acc, v);
        else acc += v;
      }
    if (linkage == Linkage::average) acc /= static_cast<double>(a.members.size() * b.members.size());
    return acc;
  };

  int next_node = static_cast<int>(n);
  while (active.size() > 1) {
    std::size_t bi = 0, bj = 1;
    double best = std::numeric_limits<double>::infinity();
    std::pair<std::string, std::string> best_key;
    for (std::size_t i = 0; i < active.size(); ++i)
      for (std::size_t j = i + 1; j < active.size(); ++j) {
        const double dist = distance(active[i], active[j]);
        auto key = std::minmax(active[i].name, active[j].name);
        std::pair<std::string, std::string> k2{key.first, key.second};
        if (dist < best - 1e-12 || (std::abs(dist - best) <= 1e-12 && k2 < best_key)) {
          best = std::min(best, dist);
          best_key = k2;
          bi = i;
          bj = j;
        }
      }
    best = distance(active[bi], active[bj]);
    auto& a = active[bi];
    auto& b = active[bj];
    const bool a_first = a.name < b.name;
    dend.merges.push_back({a_first ? a.node : b.node, a_first ? b.node : a.node, best});
    Active merged{next_node++, a.members, std::min(a.name, b.name)};
    merged.members.insert(merged.members.end(), b.members.begin(), b.members.end());
    active.erase(active.begin() + static_cast<std::ptrdiff_t>(bj));
    active[bi] = std::move(merged);
  }
  return dend;
}

/// Newick string with branch lengths = parent height - child height.
inline std::string to_newick(const Dendrogram& dend) {
  const auto n = dend.leaves.size();
  auto quote = [](const std::string& s) {
    if (s.find_first_of(" ()[]':;,") == std::string::npos) return s;
    std::string out = "'";
    for (char c : s) out += c == '\'' ? std::string("''") : std::string(1, c);
    return out + "'";
  };
  auto height = [&](int node) { return node < static_cast<int>(n) ? 0.0 : dend.merges[static_cast<std::size_t>(node) - n].height; };
  auto fmt = [](double v) {
    std::ostringstream s;
    s << std::setprecision(6) << std::max(v, 0.0);
    return s.str();
  };
  auto render = [&](auto&& self, int node) -> std::string {
    if (node < static_cast<int>(n)) return quote(dend.leaves[static_cast<std::size_t>(node)]);
    const auto& m = dend.merges[static_cast<std::size_t>(node) - n];
    return "(" + self(self, m.left) + ":" + fmt(m.height - height(m.left)) + "," + self(self, m.right) + ":" +
           fmt(m.height - height(m.right)) + ")";
  };
  if (dend.merges.empty()) return n == 1 ? quote(dend.leaves[0]) + ";" : ";";
  return render(render, static_cast<int>(n + dend.merges.size() - 1)) + ";";
}

/// Connected components after discarding merges higher than `threshold`.
/// Each cluster lists leaf names sorted; clusters are sorted by first name.
inline std::vector<std::vector<std::string>> cut(const Dendrogram& dend, double threshold) {
  if (threshold < 0) throw Error("cut threshold must be >= 0");
  const auto n = dend.leaves.size();
  std::vector<std::size_t> parent(n + dend.merges.size());
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (std::size_t k = 0; k < dend.merges.size(); ++k) {
    const auto& m = dend.merges[k];
    if (m.height > threshold) continue;
    parent[find(static_cast<std::size_t>(m.left))] = n + k;
    parent[find(static_cast<std::size_t>(m.right))] = n + k;
  }
  std::vector<std::vector<std::string>> groups;
  std::vector<std::size_t> roots;
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = find(i);
    auto it = std::find(roots.begin(), roots.end(), r);
    if (it == roots.end()) {
      roots.push_back(r);
      groups.push_back({dend.leaves[i]});
    } else {
      groups[static_cast<std::size_t>(it - roots.begin())].push_back(dend.leaves[i]);
    }
  }
  for (auto& g : groups) std::sort(g.begin(), g.end());
  std::sort(groups.begin(), groups.end());
  return groups;
}

/// Medoid of each cluster (minimum summed COD to the other members); ties by name.
inline std::vector<std::string> representatives(const std::vector<std::vector<std::string>>& clusters,
                                                const CodMatrix& codm) {
  if (clusters.empty()) throw Error("no clusters");
  auto index = [&](const std::string& name) {
    auto it = std::find(codm.names.begin(), codm.names.end(), name);
    if (it == codm.names.end()) throw Error("unknown learner '" + name + "'");
    return static_cast<std::size_t>(it - codm.names.begin());
  };
  std::vector<std::string> out;
  for (const auto& c : clusters) {
    std::string best;
    double best_sum = std::numeric_limits<double>::infinity();
    for (const auto& a : c) {
      double s = 0;
      for (const auto& b : c) s += codm.d[index(a)][index(b)];
      if (s < best_sum - 1e-12 || (std::abs(s - best_sum) <= 1e-12 && a < best)) {
        best_sum = std::min(best_sum, s);
        best = a;
      }
    }
    out.push_back(best);
  }
  return out;
}

}  // namespace hlab
