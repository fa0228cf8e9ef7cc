#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <vector>

#include "hlab/core.hpp"
#include "hlab/dataset.hpp"

namespace hlab {

/// Naive Bayes: Gaussian likelihoods for numeric attributes, Laplace-smoothed
/// frequencies for categorical ones. Missing values are skipped both when
/// fitting and when predicting.
class NaiveBayesModel {
 public:
  static constexpr double kMinVariance = 1e-6;

  NaiveBayesModel() = default;
  explicit NaiveBayesModel(const Dataset& train) : attributes_(train.attributes), num_classes_(train.num_classes()) {
    const auto k = static_cast<std::size_t>(num_classes_);
    const auto d = attributes_.size();
    const auto counts = train.class_counts();
    class_count_.assign(counts.begin(), counts.end());
    const double n = static_cast<double>(train.size());
    for (std::size_t c = 0; c < k; ++c) log_prior_.push_back(std::log((class_count_[c] + 1.0) / (n + static_cast<double>(k))));

    mean_.assign(k, std::vector<double>(d, 0.0));
    var_.assign(k, std::vector<double>(d, kMinVariance));
    freq_.assign(k, std::vector<std::vector<double>>(d));
    for (std::size_t j = 0; j < d; ++j) {
      if (attributes_[j].kind == AttributeKind::categorical) {
        const auto m = attributes_[j].categories.size();
        std::vector<std::vector<double>> cnt(k, std::vector<double>(m, 0.0));
        std::vector<double> tot(k, 0.0);
        for (const auto& in : train.instances)
          if (!is_missing(in.x[j])) {
            cnt[static_cast<std::size_t>(in.label)][static_cast<std::size_t>(in.x[j])] += 1;
            tot[static_cast<std::size_t>(in.label)] += 1;
          }
        for (std::size_t c = 0; c < k; ++c)
          for (std::size_t v = 0; v < m; ++v)
            freq_[c][j].push_back(std::log((cnt[c][v] + 1.0) / (tot[c] + static_cast<double>(m))));
        continue;
      }
      std::vector<double> sum(k, 0.0), sq(k, 0.0), cnt(k, 0.0);
      for (const auto& in : train.instances)
        if (!is_missing(in.x[j])) {
          const auto c = static_cast<std::size_t>(in.label);
          sum[c] += in.x[j];
          cnt[c] += 1;
        }
      for (std::size_t c = 0; c < k; ++c) mean_[c][j] = cnt[c] > 0 ? sum[c] / cnt[c] : 0.0;
      for (const auto& in : train.instances)
        if (!is_missing(in.x[j])) {
          const auto c = static_cast<std::size_t>(in.label);
          sq[c] += (in.x[j] - mean_[c][j]) * (in.x[j] - mean_[c][j]);
        }
      for (std::size_t c = 0; c < k; ++c) var_[c][j] = std::max(kMinVariance, cnt[c] > 0 ? sq[c] / cnt[c] : 0.0);
    }
  }

  /// Unnormalised log posterior per class; classes absent from training get -inf.
  std::vector<double> log_scores(std::span<const double> x) const {
    std::vector<double> s(static_cast<std::size_t>(num_classes_), -std::numeric_limits<double>::infinity());
    for (std::size_t c = 0; c < s.size(); ++c) {
      if (class_count_[c] == 0) continue;
      double v = log_prior_[c];
      for (std::size_t j = 0; j < attributes_.size(); ++j) {
        if (is_missing(x[j])) continue;
        if (attributes_[j].kind == AttributeKind::categorical) {
          v += freq_[c][j][static_cast<std::size_t>(x[j])];
        } else {
          const double diff = x[j] - mean_[c][j];
          v += -0.5 * std::log(2 * std::numbers::pi * var_[c][j]) - diff * diff / (2 * var_[c][j]);
        }
      }
      s[c] = v;
    }
    return s;
  }

  int predict(std::span<const double> x) const { return argmax_lowest(log_scores(x)); }

 private:
  std::vector<Attribute> attributes_;
  int num_classes_ = 0;
  std::vector<double> class_count_;
  std::vector<double> log_prior_;
  std::vector<std::vector<double>> mean_, var_;
  std::vector<std::vector<std::vector<double>>> freq_;
};

}  // namespace hlab
