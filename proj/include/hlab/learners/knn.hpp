#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "hlab/core.hpp"
#include "hlab/dataset.hpp"

namespace hlab {

/// k-nearest neighbours on one-hot / min-max encoded features, Euclidean
/// distance. Equal distances keep training order; vote ties go to the lowest
/// class code.
class KnnModel {
 public:
  KnnModel() = default;
  KnnModel(const Dataset& train, int k) : encoder_(train), k_(k), num_classes_(train.num_classes()) {
    for (const auto& in : train.instances) {
      points_.push_back(encoder_.transform(in.x));
      labels_.push_back(in.label);
    }
  }

  int predict(std::span<const double> x) const {
    const auto q = encoder_.transform(x);
    std::vector<std::pair<double, std::size_t>> dist;
    dist.reserve(points_.size());
    for (std::size_t i = 0; i < points_.size(); ++i) {
      double d = 0;
      for (std::size_t j = 0; j < q.size(); ++j) {
        const double t = q[j] - points_[i][j];
        d += t * t;
      }
      dist.emplace_back(d, i);
    }
    const auto k = std::min<std::size_t>(static_cast<std::size_t>(k_), dist.size());
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
    std::vector<int> votes(static_cast<std::size_t>(num_classes_), 0);
    for (std::size_t i = 0; i < k; ++i) ++votes[static_cast<std::size_t>(labels_[dist[i].second])];
    return argmax_lowest(votes);
  }

 private:
  Encoder encoder_;
  int k_ = 1;
  int num_classes_ = 0;
  std::vector<std::vector<double>> points_;
  std::vector<int> labels_;
};

}  // namespace hlab
