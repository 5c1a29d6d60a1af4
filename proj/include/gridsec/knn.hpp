// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "gridsec/classifier.hpp"

namespace gridsec {

// k-nearest-neighbours on the flattened window with Euclidean distance.
// Distances are computed as a single GEMM (|a-b|^2 = |a|^2 - 2ab + |b|^2);
// neighbour ties at equal distance resolve by training-row index so the
// prediction is independent of sort internals.
class KnnClassifier : public StabilityClassifier {
 public:
  explicit KnnClassifier(int k = 75) : k_(k) {}

  std::string kind() const override { return "knn"; }
  bool trained() const override { return train_x_.rows() > 0; }

  void train(const WindowSet& train_set, const WindowSet& /*val_set*/,
             std::uint64_t seed) override {
    training_seed = seed;
    train_x_ = train_set.x;
    train_y_.assign(train_set.y.size(), 0.0);
    for (std::size_t i = 0; i < train_set.y.size(); ++i)
      train_y_[i] = train_set.y[i] == Label::Stable ? 1.0 : 0.0;
    norms_ = train_x_.rowwise().squaredNorm();
  }

  VectorXd predict_proba(const MatrixXd& x) const override {
    require_trained();
    detail::check_window_width(x, static_cast<int>(train_x_.cols()));
    int k = std::min<int>(k_, static_cast<int>(train_x_.rows()));
    VectorXd p(x.rows());

    const Eigen::Index chunk = 256;
    for (Eigen::Index start = 0; start < x.rows(); start += chunk) {
      Eigen::Index count = std::min(chunk, x.rows() - start);
      MatrixXd q = x.middleRows(start, count);
      MatrixXd cross = q * train_x_.transpose();  // count x n_train
      VectorXd qn = q.rowwise().squaredNorm();
      std::vector<std::pair<double, int>> order(
          static_cast<std::size_t>(train_x_.rows()));
      for (Eigen::Index i = 0; i < count; ++i) {
        for (Eigen::Index j = 0; j < train_x_.rows(); ++j)
          order[static_cast<std::size_t>(j)] = {
              qn[i] - 2.0 * cross(i, j) + norms_[j], static_cast<int>(j)};
        std::nth_element(order.begin(), order.begin() + (k - 1), order.end());
        std::sort(order.begin(), order.begin() + k);
        double votes = 0.0;
        for (int m = 0; m < k; ++m)
          votes += train_y_[static_cast<std::size_t>(order[static_cast<
              std::size_t>(m)].second)];
        p[start + i] = votes / static_cast<double>(k);
      }
    }
    return p;
  }

  nlohmann::json hyperparameters() const override { return {{"k", k_}}; }

  nlohmann::json save_payload() const override {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < train_x_.rows(); ++i) {
      std::vector<double> row(static_cast<std::size_t>(train_x_.cols()));
      for (Eigen::Index j = 0; j < train_x_.cols(); ++j)
        row[static_cast<std::size_t>(j)] = train_x_(i, j);
      rows.push_back(std::move(row));
    }
    return {{"k", k_}, {"x", std::move(rows)}, {"y", train_y_}};
  }

  void load_payload(const nlohmann::json& payload) override {
    k_ = payload.at("k").get<int>();
    const auto& rows = payload.at("x");
    train_y_ = payload.at("y").get<std::vector<double>>();
    Eigen::Index n = static_cast<Eigen::Index>(rows.size());
    Eigen::Index d = n > 0 ? static_cast<Eigen::Index>(rows[0].size()) : 0;
    train_x_.resize(n, d);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < d; ++j)
        train_x_(i, j) = rows[static_cast<std::size_t>(i)]
                             [static_cast<std::size_t>(j)].get<double>();
    norms_ = train_x_.rowwise().squaredNorm();
  }

 private:
  int k_;
  MatrixXd train_x_;
  std::vector<double> train_y_;
  VectorXd norms_;
};

}  // namespace gridsec
