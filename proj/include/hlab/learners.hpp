#pragma once

// The base-learner set: a uniform Model wrapper over every learner kind plus
// the incremental entry points used by curriculum training.

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "hlab/core.hpp"
#include "hlab/dataset.hpp"
#include "hlab/learners/forest.hpp"
#include "hlab/learners/knn.hpp"
#include "hlab/learners/linear.hpp"
#include "hlab/learners/mlp.hpp"
#include "hlab/learners/naive_bayes.hpp"
#include "hlab/learners/spec.hpp"
#include "hlab/learners/tree.hpp"

namespace hlab {

struct ConstantModel {
  int label = 0;
  int predict(std::span<const double>) const { return label; }
};

struct TreeModel {
  tree::DecisionTree tree;
  int predict(std::span<const double> x) const { return tree.predict(x); }
};

struct StumpModel {
  tree::DecisionStump stump;
  int predict(std::span<const double> x) const { return stump.predict(x); }
};

struct MlpModel {
  MlpNetwork net;
  int predict(std::span<const double> x) const { return net.predict(x); }
};

struct TrainMeta {
  int epochs = 0;
  double final_learning_rate = 0;
  int decay_events = 0;
  bool capped = false;
};

/// A trained, immutable model. Copies share the underlying parameters.
class Model {
 public:
  using Impl = std::variant<ConstantModel, KnnModel, NaiveBayesModel, TreeModel, PerceptronModel, MlpModel,
                            ForestModel, StumpModel>;

  Model(LearnerSpec spec, const Dataset& schema, Impl impl, TrainMeta meta = {})
      : spec_(std::move(spec)),
        schema_(std::make_shared<const Dataset>(schema.empty_like())),
        impl_(std::make_shared<const Impl>(std::move(impl))),
        meta_(meta) {}

  /// Predicted class code. Throws on arity mismatch.
  int predict(std::span<const double> x) const {
    check_conforms(*schema_, x);
    return std::visit([&](const auto& m) { return m.predict(x); }, *impl_);
  }

  const LearnerSpec& spec() const noexcept { return spec_; }
  const std::vector<std::string>& classes() const noexcept { return schema_->classes; }
  const Dataset& schema() const noexcept { return *schema_; }
  const TrainMeta& meta() const noexcept { return meta_; }
  const Impl& impl() const noexcept { return *impl_; }

  bool is_constant() const { return std::holds_alternative<ConstantModel>(*impl_); }
  const tree::DecisionTree* tree() const {
    const auto* t = std::get_if<TreeModel>(impl_.get());
    return t ? &t->tree : nullptr;
  }
  const MlpNetwork* network() const {
    const auto* m = std::get_if<MlpModel>(impl_.get());
    return m ? &m->net : nullptr;
  }

 private:
  LearnerSpec spec_;
  std::shared_ptr<const Dataset> schema_;
  std::shared_ptr<const Impl> impl_;
  TrainMeta meta_;
};

inline Model model_from_state(const MlpState& st) {
  return Model(st.spec, st.schema, MlpModel{st.net},
               TrainMeta{st.epochs_run, st.learning_rate, st.decay_events, st.capped});
}

inline tree::Params tree_params(const LearnerSpec& spec) {
  tree::Params p;
  p.confidence = spec.get("confidence");
  p.min_leaf = spec.get_int("min_leaf");
  p.prune = spec.get_int("prune") != 0;
  return p;
}

/// Full decaying-rate training from a fresh state.
inline Model mlp_train_convergence(const LearnerSpec& spec, const Dataset& train, std::uint64_t seed) {
  return model_from_state(mlp_converge(mlp_init(spec, train, seed), train));
}

inline Model dt_train(const LearnerSpec& spec, const Dataset& train, std::uint64_t seed) {
  if (spec.kind != LearnerKind::c45_tree) throw Error("dt_train needs a c45-tree learner spec");
  validate(spec);
  if (train.size() == 0) throw Error("empty training set");
  return Model(spec, train, TreeModel{tree::DecisionTree(train, tree_params(spec), seed)});
}

/// Deterministic in (spec, train, seed). A training set with a single label
/// yields a constant model (except c45, which grows a single leaf).
inline Model train(const LearnerSpec& spec, const Dataset& train, std::uint64_t seed) {
  validate(spec);
  if (train.size() == 0) throw Error("empty training set");
  if (spec.kind == LearnerKind::c45_tree) return dt_train(spec, train, seed);
  const auto counts = train.class_counts();
  const int majority = argmax_lowest(counts);
  if (train.distinct_labels() < 2 || spec.kind == LearnerKind::majority)
    return Model(spec, train, ConstantModel{majority});
  switch (spec.kind) {
    case LearnerKind::knn: return Model(spec, train, KnnModel(train, spec.get_int("k")));
    case LearnerKind::naive_bayes: return Model(spec, train, NaiveBayesModel(train));
    case LearnerKind::perceptron:
      return Model(spec, train, PerceptronModel(train, spec.get_int("epochs"), spec.get_int("averaged") != 0, seed));
    case LearnerKind::mlp: return mlp_train_convergence(spec, train, seed);
    case LearnerKind::random_forest:
      return Model(spec, train, ForestModel(train, spec.get_int("trees"), spec.get_int("min_leaf"), seed));
    case LearnerKind::decision_stump: return Model(spec, train, StumpModel{tree::DecisionStump(train)});
    default: break;
  }
  throw Error("unsupported learner kind");
}

inline int predict(const Model& model, std::span<const double> x) { return model.predict(x); }

/// Optionally prunes, then grows the leaves that receive `added` instances.
/// Returns a new model; the input model is unchanged.
inline Model dt_expand_leaves(const Model& model, const Dataset& added, bool prune_first, std::uint64_t seed = 0) {
  const auto* t = model.tree();
  if (!t) throw Error("dt_expand_leaves needs a c45-tree model");
  check_schema(model.schema(), added);
  tree::DecisionTree grown = *t;
  if (prune_first) grown.prune();
  if (added.size() > 0) grown.expand(added, seed);
  return Model(model.spec(), model.schema(), TreeModel{std::move(grown)}, model.meta());
}

inline double accuracy(const Model& model, const Dataset& test) {
  if (test.size() == 0) return 0.0;
  std::size_t ok = 0;
  for (const auto& in : test.instances) ok += model.predict(in.x) == in.label;
  return static_cast<double>(ok) / static_cast<double>(test.size());
}

}  // namespace hlab
