// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "gridsec/classifier.hpp"
#include "gridsec/tree.hpp"

namespace gridsec {

// Gradient-boosted trees on the logistic loss with second-order splits.
// Depth-wise growth gives the XGBoost-style model; leaf-wise (best-first)
// growth with a leaf budget gives the LightGBM-style variant.
class GradientBoostedTreesClassifier : public StabilityClassifier {
 public:
  GradientBoostedTreesClassifier(std::string kind, bool leafwise,
                                 int n_rounds = 20, int max_depth = 3,
                                 int max_leaves = 24,
                                 double learning_rate = 0.3,
                                 double lambda = 1.0,
                                 double colsample_bytree = 0.5)
      : kind_(std::move(kind)),
        leafwise_(leafwise),
        n_rounds_(n_rounds),
        max_depth_(max_depth),
        max_leaves_(max_leaves),
        learning_rate_(learning_rate),
        lambda_(lambda),
        colsample_bytree_(colsample_bytree) {}

  std::string kind() const override { return kind_; }
  bool trained() const override { return !trees_.empty(); }

  void train(const WindowSet& train_set, const WindowSet& /*val_set*/,
             std::uint64_t seed) override {
    training_seed = seed;
    trees_.clear();
    width_ = static_cast<int>(train_set.x.cols());
    Eigen::Index n = train_set.x.rows();

    VectorXd y(n);
    double pos = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      y[i] = train_set.y[static_cast<std::size_t>(i)] == Label::Stable ? 1.0
                                                                       : 0.0;
      pos += y[i];
    }
    double prior = std::min(std::max(pos / static_cast<double>(n), 1e-6),
                            1.0 - 1e-6);
    base_score_ = std::log(prior / (1.0 - prior));

    VectorXd margin = VectorXd::Constant(n, base_score_);
    std::vector<int> rows(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i)
      rows[static_cast<std::size_t>(i)] = static_cast<int>(i);

    int n_features = width_;
    int subset = colsample_bytree_ >= 1.0
                     ? n_features
                     : std::max(1, static_cast<int>(std::floor(
                                       colsample_bytree_ * n_features)));

    VectorXd grad(n), hess(n);
    for (int round = 0; round < n_rounds_; ++round) {
      for (Eigen::Index i = 0; i < n; ++i) {
        double p = sigmoid(margin[i]);
        grad[i] = p - y[i];
        hess[i] = std::max(p * (1.0 - p), 1e-12);
      }
      Rng rng(Rng::derive(seed, static_cast<std::uint64_t>(round)));
      RegressionTreeParams params;
      params.max_depth = leafwise_ ? 64 : max_depth_;
      params.max_leaves = leafwise_ ? max_leaves_ : 0;
      params.min_samples_leaf = 1;
      params.lambda = lambda_;
      params.feature_subset = detail::sample_features(n_features, subset, rng);
      RegressionTreeBuilder builder(train_set.x, grad, hess, params);
      Tree tree = builder.build(rows);
      for (Eigen::Index i = 0; i < n; ++i) {
        VectorXd row = train_set.x.row(i);
        margin[i] += learning_rate_ * tree.predict_row(row.data());
      }
      trees_.push_back(std::move(tree));
    }
  }

  VectorXd predict_proba(const MatrixXd& x) const override {
    require_trained();
    detail::check_window_width(x, width_);
    VectorXd p(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      VectorXd row = x.row(i);
      double margin = base_score_;
      for (const Tree& t : trees_)
        margin += learning_rate_ * t.predict_row(row.data());
      p[i] = sigmoid(margin);
    }
    return p;
  }

  nlohmann::json hyperparameters() const override {
    nlohmann::json j = {{"n_rounds", n_rounds_},
                        {"learning_rate", learning_rate_},
                        {"lambda", lambda_},
                        {"colsample_bytree", colsample_bytree_}};
    if (leafwise_)
      j["max_leaves"] = max_leaves_;
    else
      j["max_depth"] = max_depth_;
    return j;
  }

  nlohmann::json save_payload() const override {
    nlohmann::json trees = nlohmann::json::array();
    for (const Tree& t : trees_) trees.push_back(t.to_json());
    return {{"trees", std::move(trees)},
            {"width", width_},
            {"base_score", base_score_},
            {"leafwise", leafwise_},
            {"n_rounds", n_rounds_},
            {"max_depth", max_depth_},
            {"max_leaves", max_leaves_},
            {"learning_rate", learning_rate_},
            {"lambda", lambda_},
            {"colsample_bytree", colsample_bytree_}};
  }

  void load_payload(const nlohmann::json& payload) override {
    trees_.clear();
    for (const auto& tj : payload.at("trees"))
      trees_.push_back(Tree::from_json(tj));
    width_ = payload.at("width").get<int>();
    base_score_ = payload.at("base_score").get<double>();
    leafwise_ = payload.at("leafwise").get<bool>();
    n_rounds_ = payload.at("n_rounds").get<int>();
    max_depth_ = payload.at("max_depth").get<int>();
    max_leaves_ = payload.at("max_leaves").get<int>();
    learning_rate_ = payload.at("learning_rate").get<double>();
    lambda_ = payload.at("lambda").get<double>();
    colsample_bytree_ = payload.at("colsample_bytree").get<double>();
  }

 private:
  std::string kind_;
  bool leafwise_;
  int n_rounds_;
  int max_depth_;
  int max_leaves_;
  double learning_rate_;
  double lambda_;
  double colsample_bytree_;
  int width_ = 0;
  double base_score_ = 0.0;
  std::vector<Tree> trees_;
};

class GbdtClassifier : public GradientBoostedTreesClassifier {
 public:
  explicit GbdtClassifier(int n_rounds = 20, int max_depth = 3,
                          double learning_rate = 0.3,
                          double colsample_bytree = 0.5)
      : GradientBoostedTreesClassifier("gbdt", /*leafwise=*/false, n_rounds,
                                       max_depth, /*max_leaves=*/0,
                                       learning_rate, /*lambda=*/1.0,
                                       colsample_bytree) {}
};

class LeafwiseGbdtClassifier : public GradientBoostedTreesClassifier {
 public:
  explicit LeafwiseGbdtClassifier(int n_rounds = 20, int max_leaves = 15,
                                  double learning_rate = 0.3,
                                  double colsample_bytree = 0.35)
      : GradientBoostedTreesClassifier("leafwise-gbdt", /*leafwise=*/true,
                                       n_rounds, /*max_depth=*/0, max_leaves,
                                       learning_rate, /*lambda=*/1.0,
                                       colsample_bytree) {}
};

}  // namespace gridsec
