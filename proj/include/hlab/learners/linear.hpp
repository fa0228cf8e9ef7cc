#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <vector>

#include "hlab/core.hpp"
#include "hlab/dataset.hpp"

namespace hlab {

/// Multi-class perceptron on encoded features (one weight vector per class,
/// bias last). With `averaged`, predictions use the running average of the
/// weights, which serves as the linear reference classifier.
class PerceptronModel {
 public:
  PerceptronModel() = default;
  PerceptronModel(const Dataset& train, int epochs, bool averaged, std::uint64_t seed)
      : encoder_(train), num_classes_(train.num_classes()) {
    const std::size_t width = encoder_.width() + 1;
    const auto k = static_cast<std::size_t>(num_classes_);
    std::vector<std::vector<double>> xs;
    for (const auto& in : train.instances) {
      auto e = encoder_.transform(in.x);
      e.push_back(1.0);
      xs.push_back(std::move(e));
    }
    std::vector<double> w(k * width, 0.0), sum(k * width, 0.0);
    double steps = 0;
    std::mt19937_64 rng(seed);
    std::vector<std::size_t> order(xs.size());
    std::iota(order.begin(), order.end(), 0);
    for (int ep = 0; ep < epochs; ++ep) {
      std::shuffle(order.begin(), order.end(), rng);
      std::size_t mistakes = 0;
      for (auto i : order) {
        const int y = train.instances[i].label;
        const int p = argmax_lowest(scores(w, width, xs[i]));
        if (p != y) {
          ++mistakes;
          for (std::size_t j = 0; j < width; ++j) {
            w[static_cast<std::size_t>(y) * width + j] += xs[i][j];
            w[static_cast<std::size_t>(p) * width + j] -= xs[i][j];
          }
        }
        if (averaged) {
          for (std::size_t j = 0; j < w.size(); ++j) sum[j] += w[j];
          steps += 1;
        }
      }
      if (mistakes == 0) break;
    }
    if (averaged && steps > 0)
      for (std::size_t j = 0; j < w.size(); ++j) w[j] = sum[j] / steps;
    weights_ = std::move(w);
    width_ = width;
  }

  int predict(std::span<const double> x) const {
    auto e = encoder_.transform(x);
    e.push_back(1.0);
    return argmax_lowest(scores(weights_, width_, e));
  }

 private:
  std::vector<double> scores(const std::vector<double>& w, std::size_t width, const std::vector<double>& x) const {
    std::vector<double> s(static_cast<std::size_t>(num_classes_), 0.0);
    for (std::size_t c = 0; c < s.size(); ++c)
      for (std::size_t j = 0; j < width; ++j) s[c] += w[c * width + j] * x[j];
    return s;
  }

  Encoder encoder_;
  int num_classes_ = 0;
  std::vector<double> weights_;
  std::size_t width_ = 0;
};

}  // namespace hlab
