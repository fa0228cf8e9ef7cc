#pragma once

// One-hidden-layer sigmoid perceptron network trained by online
// backpropagation on squared error, with resumable training state.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <vector>

#include "hlab/core.hpp"
#include "hlab/dataset.hpp"
#include "hlab/learners/spec.hpp"

namespace hlab {

inline double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

/// Weights plus the encoder fit on the data the network was initialised with.
struct MlpNetwork {
  Encoder encoder;
  std::size_t inputs = 0, hidden = 0, outputs = 0;
  std::vector<double> w_hidden;  // hidden x (inputs + 1), bias last
  std::vector<double> w_output;  // outputs x (hidden + 1), bias last

  /// Encoded features mapped from [0, 1] to [-1, 1].
  std::vector<double> input(std::span<const double> x) const {
    auto in = encoder.transform(x);
    for (auto& v : in) v = 2 * v - 1;
    return in;
  }

  void forward(std::span<const double> in, std::vector<double>& h, std::vector<double>& o) const {
    h.assign(hidden, 0.0);
    o.assign(outputs, 0.0);
    for (std::size_t j = 0; j < hidden; ++j) {
      const double* w = &w_hidden[j * (inputs + 1)];
      double s = w[inputs];
      for (std::size_t i = 0; i < inputs; ++i) s += w[i] * in[i];
      h[j] = sigmoid(s);
    }
    for (std::size_t k = 0; k < outputs; ++k) {
      const double* w = &w_output[k * (hidden + 1)];
      double s = w[hidden];
      for (std::size_t j = 0; j < hidden; ++j) s += w[j] * h[j];
      o[k] = sigmoid(s);
    }
  }

  int predict(std::span<const double> x) const {
    const auto in = input(x);
    std::vector<double> h, o;
    forward(in, h, o);
    return argmax_lowest(o);
  }

  bool operator==(const MlpNetwork&) const = default;
};

/// Training state carried across calls: weights, learning rate, last epoch
/// error and the shuffling stream.
struct MlpState {
  LearnerSpec spec;
  Dataset schema;  // attributes + classes, no instances
  MlpNetwork net;
  double learning_rate = 0.3;
  double last_error = std::numeric_limits<double>::infinity();
  std::vector<double> dw_hidden, dw_output;  // previous updates, for momentum
  std::mt19937_64 rng;
  int epochs_run = 0;
  int decay_events = 0;
  bool capped = false;

  bool operator==(const MlpState&) const = default;
};

inline void check_schema(const Dataset& schema, const Dataset& data) {
  if (schema.attributes != data.attributes || schema.classes != data.classes)
    throw Error("dataset schema does not match the model's schema");
}

/// Fresh state: encoder fit on `train`, weights uniform in [-0.5, 0.5].
inline MlpState mlp_init(const LearnerSpec& spec, const Dataset& train, std::uint64_t seed) {
  if (spec.kind != LearnerKind::mlp) throw Error("mlp_init needs an mlp learner spec");
  validate(spec);
  MlpState st;
  st.spec = spec;
  st.schema = train.empty_like();
  st.net.encoder = Encoder(train);
  st.net.inputs = st.net.encoder.width();
  st.net.outputs = static_cast<std::size_t>(train.num_classes());
  const int hidden = spec.get_int("hidden");
  st.net.hidden = hidden > 0 ? static_cast<std::size_t>(hidden)
                             : std::max<std::size_t>(3, (st.net.inputs + st.net.outputs) / 2);
  st.rng.seed(seed);
  std::uniform_real_distribution<double> init(-0.5, 0.5);
  st.net.w_hidden.resize(st.net.hidden * (st.net.inputs + 1));
  st.net.w_output.resize(st.net.outputs * (st.net.hidden + 1));
  for (auto& w : st.net.w_hidden) w = init(st.rng);
  for (auto& w : st.net.w_output) w = init(st.rng);
  // Nguyen-Widrow scaling of the hidden layer.
  const double beta = 0.7 * std::pow(static_cast<double>(st.net.hidden), 1.0 / static_cast<double>(std::max<std::size_t>(st.net.inputs, 1)));
  for (std::size_t j = 0; j < st.net.hidden; ++j) {
    double* row = &st.net.w_hidden[j * (st.net.inputs + 1)];
    double norm = 0;
    for (std::size_t i = 0; i < st.net.inputs; ++i) norm += row[i] * row[i];
    norm = std::sqrt(norm);
    if (norm > 0)
      for (std::size_t i = 0; i < st.net.inputs; ++i) row[i] *= beta / norm;
    row[st.net.inputs] *= 2 * beta;
  }
  st.dw_hidden.assign(st.net.w_hidden.size(), 0.0);
  st.dw_output.assign(st.net.w_output.size(), 0.0);
  st.learning_rate = spec.get("learning_rate");
  return st;
}

namespace detail {

/// One backpropagation epoch in a freshly shuffled order; returns the mean
/// squared output error of the updated network over the training set.
inline double mlp_epoch(MlpState& st, const std::vector<std::vector<double>>& xs, const std::vector<int>& ys) {
  auto& net = st.net;
  std::vector<std::size_t> order(xs.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), st.rng);
  std::vector<double> h, o, delta_out(net.outputs), delta_hidden(net.hidden);
  const double lr = st.learning_rate;
  const double mom = st.spec.get("momentum");
  for (auto i : order) {
    const auto& in = xs[i];
    net.forward(in, h, o);
    for (std::size_t k = 0; k < net.outputs; ++k) {
      const double t = ys[i] == static_cast<int>(k) ? 1.0 : 0.0;
      const double err = t - o[k];
      delta_out[k] = err * o[k] * (1 - o[k]);
    }
    for (std::size_t j = 0; j < net.hidden; ++j) {
      double s = 0;
      for (std::size_t k = 0; k < net.outputs; ++k) s += delta_out[k] * net.w_output[k * (net.hidden + 1) + j];
      delta_hidden[j] = s * h[j] * (1 - h[j]);
    }
    auto step = [&](double& w, double& dw, double grad) {
      dw = lr * grad + mom * dw;
      w += dw;
    };
    for (std::size_t k = 0; k < net.outputs; ++k) {
      const std::size_t base = k * (net.hidden + 1);
      for (std::size_t j = 0; j < net.hidden; ++j) step(net.w_output[base + j], st.dw_output[base + j], delta_out[k] * h[j]);
      step(net.w_output[base + net.hidden], st.dw_output[base + net.hidden], delta_out[k]);
    }
    for (std::size_t j = 0; j < net.hidden; ++j) {
      const std::size_t base = j * (net.inputs + 1);
      for (std::size_t i2 = 0; i2 < net.inputs; ++i2)
        step(net.w_hidden[base + i2], st.dw_hidden[base + i2], delta_hidden[j] * in[i2]);
      step(net.w_hidden[base + net.inputs], st.dw_hidden[base + net.inputs], delta_hidden[j]);
    }
  }
  ++st.epochs_run;
  double total = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    net.forward(xs[i], h, o);
    for (std::size_t k = 0; k < net.outputs; ++k) {
      const double err = (ys[i] == static_cast<int>(k) ? 1.0 : 0.0) - o[k];
      total += err * err;
    }
  }
  const double denom = static_cast<double>(xs.size() * std::max<std::size_t>(net.outputs, 1));
  return denom > 0 ? total / denom : 0.0;
}

inline void encode_all(const MlpState& st, const Dataset& data, std::vector<std::vector<double>>& xs,
                       std::vector<int>& ys) {
  xs.clear();
  ys.clear();
  for (const auto& in : data.instances) {
    xs.push_back(st.net.input(in.x));
    ys.push_back(in.label);
  }
}

}  // namespace detail

/// Exactly `epochs` epochs at the state's current learning rate (no decay).
inline MlpState mlp_train_epochs(MlpState state, const Dataset& train, int epochs) {
  if (epochs < 1) throw Error("epochs must be >= 1");
  check_schema(state.schema, train);
  std::vector<std::vector<double>> xs;
  std::vector<int> ys;
  detail::encode_all(state, train, xs, ys);
  if (xs.empty()) return state;
  for (int e = 0; e < epochs; ++e) state.last_error = detail::mlp_epoch(state, xs, ys);
  return state;
}

/// Decaying-rate loop: after each epoch whose error fails to drop by more than
/// the spec's tolerance, the rate is multiplied by `decay`; training stops once
/// the rate falls below `min_lr` (or `max_epochs` is reached, flagged as capped).
inline MlpState mlp_converge(MlpState state, const Dataset& train) {
  check_schema(state.schema, train);
  const double decay = state.spec.get("decay");
  const double min_lr = state.spec.get("min_lr");
  const double tol = state.spec.get("tolerance");
  const int max_epochs = state.spec.get_int("max_epochs");
  std::vector<std::vector<double>> xs;
  std::vector<int> ys;
  detail::encode_all(state, train, xs, ys);
  if (xs.empty()) return state;
  double prev = std::numeric_limits<double>::infinity();
  int run = 0;
  while (state.learning_rate >= min_lr) {
    if (run >= max_epochs) {
      state.capped = true;
      break;
    }
    const double err = detail::mlp_epoch(state, xs, ys);
    ++run;
    if (!(err < prev - tol)) {
      state.learning_rate *= decay;
      ++state.decay_events;
    }
    prev = err;
    state.last_error = err;
  }
  return state;
}

}  // namespace hlab
