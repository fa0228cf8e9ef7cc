#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "hlab/core.hpp"
#include "hlab/dataset.hpp"
#include "hlab/learners/tree.hpp"

namespace hlab {

/// Bagged unpruned gain-ratio trees with sqrt(d) attributes sampled per node;
/// majority vote, ties to the lowest class code.
class ForestModel {
 public:
  ForestModel() = default;
  ForestModel(const Dataset& train, int trees, int min_leaf, std::uint64_t seed) : num_classes_(train.num_classes()) {
    tree::Params p;
    p.prune = false;
    p.min_leaf = min_leaf;
    p.features_per_node = std::max(1, static_cast<int>(std::floor(std::sqrt(static_cast<double>(train.arity())))));
    std::uniform_int_distribution<std::size_t> pick(0, train.size() - 1);
    for (int t = 0; t < trees; ++t) {
      std::mt19937_64 rng(split_seed(seed, static_cast<std::uint64_t>(t)));
      std::vector<std::size_t> sample(train.size());
      for (auto& s : sample) s = pick(rng);
      trees_.emplace_back(train.subset(sample), p, rng());
    }
  }

  int predict(std::span<const double> x) const {
    std::vector<int> votes(static_cast<std::size_t>(num_classes_), 0);
    for (const auto& t : trees_) ++votes[static_cast<std::size_t>(t.predict(x))];
    return argmax_lowest(votes);
  }

  std::size_t size() const noexcept { return trees_.size(); }

 private:
  int num_classes_ = 0;
  std::vector<tree::DecisionTree> trees_;
};

}  // namespace hlab
