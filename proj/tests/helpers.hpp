// SPDX-License-Identifier: Apache-2.0
//
// Shared test scaffolding: fixture paths, scratch directories, and two
// hand-checkable stand-ins (a linear-logit classifier whose gradients have a
// closed form, and a scriptable prediction oracle).
#pragma once

#include <cstdlib>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "gridsec/classifier.hpp"
#include "gridsec/common.hpp"

namespace testutil {

inline std::string fixture_path(const std::string& name) {
  return std::string(GRIDSEC_FIXTURE_DIR) + "/" + name;
}

inline std::filesystem::path fresh_dir(const std::string& tag) {
  std::filesystem::path p =
      std::filesystem::temp_directory_path() / ("gridsec_test_" + tag);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

// p = sigmoid(x . w + b).  BCE input gradient per window is
// (sigmoid(z) - y) * w, so attack arithmetic can be checked by hand.
class LinearLogit : public gridsec::StabilityClassifier {
 public:
  gridsec::VectorXd w;
  double b = 0.0;

  LinearLogit() = default;
  LinearLogit(gridsec::VectorXd weights, double bias)
      : w(std::move(weights)), b(bias), trained_(true) {}

  std::string kind() const override { return "linear-stub"; }
  void train(const gridsec::WindowSet& train_set, const gridsec::WindowSet&,
             std::uint64_t) override {
    if (w.size() == 0) w = gridsec::VectorXd::Zero(train_set.x.cols());
    trained_ = true;
  }
  bool trained() const override { return trained_; }
  gridsec::VectorXd predict_proba(const gridsec::MatrixXd& x) const override {
    gridsec::VectorXd z = x * w;
    for (Eigen::Index i = 0; i < z.size(); ++i)
      z(i) = gridsec::sigmoid(z(i) + b);
    return z;
  }
  bool differentiable() const override { return true; }
  gridsec::MatrixXd input_gradient(
      const gridsec::MatrixXd& x,
      const std::vector<gridsec::Label>& truth) const override {
    gridsec::MatrixXd grad(x.rows(), x.cols());
    gridsec::VectorXd p = predict_proba(x);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      double y = truth[static_cast<std::size_t>(i)] == gridsec::Label::Stable
                     ? 1.0
                     : 0.0;
      grad.row(i) = (p(i) - y) * w.transpose();
    }
    return grad;
  }
  nlohmann::json hyperparameters() const override { return {{"stub", true}}; }
  nlohmann::json save_payload() const override { return {}; }
  void load_payload(const nlohmann::json&) override { trained_ = true; }

 private:
  bool trained_ = false;
};

// Oracle whose labels come from a lambda; counts every batch it sees.
class ScriptedOracle : public gridsec::PredictionOracle {
 public:
  using Fn = std::function<std::vector<gridsec::Label>(const gridsec::MatrixXd&)>;

  explicit ScriptedOracle(Fn fn) : fn_(std::move(fn)) {}

  static ScriptedOracle constant(gridsec::Label label) {
    return ScriptedOracle([label](const gridsec::MatrixXd& w) {
      return std::vector<gridsec::Label>(static_cast<std::size_t>(w.rows()),
                                         label);
    });
  }

  std::vector<gridsec::Label> predict_windows(
      const gridsec::MatrixXd& windows) override {
    ++calls;
    windows_seen += static_cast<int>(windows.rows());
    batch_rows.push_back(static_cast<int>(windows.rows()));
    return fn_(windows);
  }

  int calls = 0;
  int windows_seen = 0;
  std::vector<int> batch_rows;

 private:
  Fn fn_;
};

}  // namespace testutil
