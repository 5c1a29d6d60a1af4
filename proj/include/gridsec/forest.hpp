// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "gridsec/classifier.hpp"
#include "gridsec/tree.hpp"

namespace gridsec {

namespace detail {
inline std::vector<double> stable_targets(const std::vector<Label>& y) {
  std::vector<double> t(y.size());
  for (std::size_t i = 0; i < y.size(); ++i)
    t[i] = y[i] == Label::Stable ? 1.0 : 0.0;
  return t;
}

inline std::vector<int> all_rows(Eigen::Index n) {
  std::vector<int> rows(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i)
    rows[static_cast<std::size_t>(i)] = static_cast<int>(i);
  return rows;
}
}  // namespace detail

// Single CART-style decision tree on the flattened window.
class DecisionTreeClassifier : public StabilityClassifier {
 public:
  explicit DecisionTreeClassifier(int max_depth = 12, int min_samples_leaf = 2)
      : max_depth_(max_depth), min_samples_leaf_(min_samples_leaf) {}

  std::string kind() const override { return "decision-tree"; }
  bool trained() const override { return !tree_.nodes.empty(); }

  void train(const WindowSet& train_set, const WindowSet& /*val_set*/,
             std::uint64_t seed) override {
    training_seed = seed;
    Rng rng(seed);
    std::vector<double> y = detail::stable_targets(train_set.y);
    ClassificationTreeParams params;
    params.max_depth = max_depth_;
    params.min_samples_leaf = min_samples_leaf_;
    params.features_per_split = 0;
    ClassificationTreeBuilder builder(train_set.x, y, params, rng);
    tree_ = builder.build(detail::all_rows(train_set.x.rows()));
    width_ = static_cast<int>(train_set.x.cols());
  }

  VectorXd predict_proba(const MatrixXd& x) const override {
    require_trained();
    detail::check_window_width(x, width_);
    VectorXd p(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      VectorXd row = x.row(i);
      p[i] = tree_.predict_row(row.data());
    }
    return p;
  }

  nlohmann::json hyperparameters() const override {
    return {{"max_depth", max_depth_}, {"min_samples_leaf", min_samples_leaf_}};
  }

  nlohmann::json save_payload() const override {
    return {{"tree", tree_.to_json()},
            {"width", width_},
            {"max_depth", max_depth_},
            {"min_samples_leaf", min_samples_leaf_}};
  }

  void load_payload(const nlohmann::json& payload) override {
    tree_ = Tree::from_json(payload.at("tree"));
    width_ = payload.at("width").get<int>();
    max_depth_ = payload.at("max_depth").get<int>();
    min_samples_leaf_ = payload.at("min_samples_leaf").get<int>();
  }

 private:
  int max_depth_;
  int min_samples_leaf_;
  int width_ = 0;
  Tree tree_;
};

// Shared machinery for bagged tree ensembles; probability = mean of the
// per-tree stable fractions.
class BaggedTreesClassifier : public StabilityClassifier {
 public:
  BaggedTreesClassifier(std::string kind, bool bootstrap,
                        bool random_thresholds, int n_trees, int max_depth,
                        int features_per_split, int min_samples_leaf)
      : kind_(std::move(kind)),
        bootstrap_(bootstrap),
        random_thresholds_(random_thresholds),
        n_trees_(n_trees),
        max_depth_(max_depth),
        features_per_split_(features_per_split),
        min_samples_leaf_(min_samples_leaf) {}

  std::string kind() const override { return kind_; }
  bool trained() const override { return !trees_.empty(); }

  void train(const WindowSet& train_set, const WindowSet& /*val_set*/,
             std::uint64_t seed) override {
    training_seed = seed;
    trees_.clear();
    width_ = static_cast<int>(train_set.x.cols());
    std::vector<double> y = detail::stable_targets(train_set.y);
    Eigen::Index n = train_set.x.rows();
    for (int t = 0; t < n_trees_; ++t) {
      Rng rng(Rng::derive(seed, static_cast<std::uint64_t>(t)));
      std::vector<int> rows;
      if (bootstrap_) {
        rows.resize(static_cast<std::size_t>(n));
        for (Eigen::Index i = 0; i < n; ++i)
          rows[static_cast<std::size_t>(i)] = static_cast<int>(
              rng.below(static_cast<std::uint64_t>(n)));
      } else {
        rows = detail::all_rows(n);
      }
      ClassificationTreeParams params;
      params.max_depth = max_depth_;
      params.min_samples_leaf = min_samples_leaf_;
      params.features_per_split = features_per_split_;
      params.random_thresholds = random_thresholds_;
      ClassificationTreeBuilder builder(train_set.x, y, params, rng);
      trees_.push_back(builder.build(rows));
    }
  }

  VectorXd predict_proba(const MatrixXd& x) const override {
    require_trained();
    detail::check_window_width(x, width_);
    VectorXd p = VectorXd::Zero(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      VectorXd row = x.row(i);
      double sum = 0.0;
      for (const Tree& t : trees_) sum += t.predict_row(row.data());
      p[i] = sum / static_cast<double>(trees_.size());
    }
    return p;
  }

  nlohmann::json hyperparameters() const override {
    return {{"n_trees", n_trees_},
            {"max_depth", max_depth_},
            {"features_per_split", features_per_split_},
            {"min_samples_leaf", min_samples_leaf_},
            {"bootstrap", bootstrap_},
            {"random_thresholds", random_thresholds_}};
  }

  nlohmann::json save_payload() const override {
    nlohmann::json trees = nlohmann::json::array();
    for (const Tree& t : trees_) trees.push_back(t.to_json());
    nlohmann::json j = hyperparameters();
    j["trees"] = std::move(trees);
    j["width"] = width_;
    return j;
  }

  void load_payload(const nlohmann::json& payload) override {
    trees_.clear();
    for (const auto& tj : payload.at("trees"))
      trees_.push_back(Tree::from_json(tj));
    width_ = payload.at("width").get<int>();
    n_trees_ = payload.at("n_trees").get<int>();
    max_depth_ = payload.at("max_depth").get<int>();
    features_per_split_ = payload.at("features_per_split").get<int>();
    min_samples_leaf_ = payload.at("min_samples_leaf").get<int>();
    bootstrap_ = payload.at("bootstrap").get<bool>();
    random_thresholds_ = payload.at("random_thresholds").get<bool>();
  }

 private:
  std::string kind_;
  bool bootstrap_;
  bool random_thresholds_;
  int n_trees_;
  int max_depth_;
  int features_per_split_;
  int min_samples_leaf_;
  int width_ = 0;
  std::vector<Tree> trees_;
};

class RandomForestClassifier : public BaggedTreesClassifier {
 public:
  explicit RandomForestClassifier(int n_trees = 50, int max_depth = 14,
                                  int features_per_split = 14,
                                  int min_samples_leaf = 1)
      : BaggedTreesClassifier("random-forest", /*bootstrap=*/true,
                              /*random_thresholds=*/false, n_trees, max_depth,
                              features_per_split, min_samples_leaf) {}
};

class ExtraTreesClassifier : public BaggedTreesClassifier {
 public:
  explicit ExtraTreesClassifier(int n_trees = 50, int max_depth = 14,
                                int features_per_split = 14,
                                int min_samples_leaf = 1)
      : BaggedTreesClassifier("extra-trees", /*bootstrap=*/false,
                              /*random_thresholds=*/true, n_trees, max_depth,
                              features_per_split, min_samples_leaf) {}
};

}  // namespace gridsec
