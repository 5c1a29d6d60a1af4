// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <queue>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gridsec/common.hpp"
#include "gridsec/dataset.hpp"

namespace gridsec {

// Flat binary tree.  Internal nodes route on x[feature] <= threshold; leaves
// carry either a stable-class fraction (classification) or an additive score
// (boosting).
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;
};

struct Tree {
  std::vector<TreeNode> nodes;

  double predict_row(const double* x) const {
    int n = 0;
    while (nodes[static_cast<std::size_t>(n)].feature >= 0) {
      const TreeNode& node = nodes[static_cast<std::size_t>(n)];
      n = x[node.feature] <= node.threshold ? node.left : node.right;
    }
    return nodes[static_cast<std::size_t>(n)].value;
  }

  int depth() const { return depth_from(0); }

  nlohmann::json to_json() const {
    nlohmann::json arr = nlohmann::json::array();
    for (const TreeNode& n : nodes)
      arr.push_back({{"f", n.feature},
                     {"t", n.threshold},
                     {"l", n.left},
                     {"r", n.right},
                     {"v", n.value}});
    return arr;
  }

  static Tree from_json(const nlohmann::json& arr) {
    Tree t;
    for (const auto& j : arr) {
      TreeNode n;
      n.feature = j.at("f").get<int>();
      n.threshold = j.at("t").get<double>();
      n.left = j.at("l").get<int>();
      n.right = j.at("r").get<int>();
      n.value = j.at("v").get<double>();
      t.nodes.push_back(n);
    }
    return t;
  }

 private:
  int depth_from(int n) const {
    const TreeNode& node = nodes[static_cast<std::size_t>(n)];
    if (node.feature < 0) return 0;
    return 1 + std::max(depth_from(node.left), depth_from(node.right));
  }
};

namespace detail {

struct SplitResult {
  bool found = false;
  int feature = -1;
  double threshold = 0.0;
  double gain = 0.0;
};

// Draws `count` distinct feature indices, sorted ascending so candidate
// evaluation order (and therefore tie-breaking) is stable.
inline std::vector<int> sample_features(int total, int count, Rng& rng) {
  std::vector<int> all(static_cast<std::size_t>(total));
  for (int i = 0; i < total; ++i) all[static_cast<std::size_t>(i)] = i;
  if (count >= total || count <= 0) return all;
  for (int i = 0; i < count; ++i) {
    std::size_t j = static_cast<std::size_t>(i) +
                    rng.below(static_cast<std::uint64_t>(total - i));
    std::swap(all[static_cast<std::size_t>(i)], all[j]);
  }
  all.resize(static_cast<std::size_t>(count));
  std::sort(all.begin(), all.end());
  return all;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Classification trees (gini criterion) for the decision-tree, random-forest
// and extra-trees models.
// ---------------------------------------------------------------------------

struct ClassificationTreeParams {
  int max_depth = 10;
  int min_samples_leaf = 1;
  int features_per_split = 0;   // 0 = all features
  bool random_thresholds = false;  // extra-trees style
};

class ClassificationTreeBuilder {
 public:
  ClassificationTreeBuilder(const MatrixXd& x, const std::vector<double>& y,
                            ClassificationTreeParams params, Rng& rng)
      : x_(x), y_(y), params_(params), rng_(rng) {}

  Tree build(const std::vector<int>& rows) {
    Tree tree;
    grow(tree, rows, 0);
    return tree;
  }

 private:
  static double gini(double pos, double total) {
    if (total <= 0.0) return 0.0;
    double p = pos / total;
    return 2.0 * p * (1.0 - p);
  }

  int grow(Tree& tree, const std::vector<int>& rows, int depth) {
    double pos = 0.0;
    for (int r : rows) pos += y_[static_cast<std::size_t>(r)];
    double total = static_cast<double>(rows.size());
    int id = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    tree.nodes[static_cast<std::size_t>(id)].value = pos / total;

    if (depth >= params_.max_depth || pos == 0.0 || pos == total ||
        static_cast<int>(rows.size()) < 2 * params_.min_samples_leaf)
      return id;

    detail::SplitResult best = find_split(rows, pos, total);
    if (!best.found) return id;

    std::vector<int> left_rows, right_rows;
    left_rows.reserve(rows.size());
    right_rows.reserve(rows.size());
    for (int r : rows) {
      if (x_(r, best.feature) <= best.threshold)
        left_rows.push_back(r);
      else
        right_rows.push_back(r);
    }
    if (static_cast<int>(left_rows.size()) < params_.min_samples_leaf ||
        static_cast<int>(right_rows.size()) < params_.min_samples_leaf)
      return id;

    int left = grow(tree, left_rows, depth + 1);
    int right = grow(tree, right_rows, depth + 1);
    TreeNode& node = tree.nodes[static_cast<std::size_t>(id)];
    node.feature = best.feature;
    node.threshold = best.threshold;
    node.left = left;
    node.right = right;
    return id;
  }

  detail::SplitResult find_split(const std::vector<int>& rows, double pos,
                                 double total) {
    detail::SplitResult best;
    double parent = gini(pos, total);
    std::vector<int> feats = detail::sample_features(
        static_cast<int>(x_.cols()), params_.features_per_split, rng_);

    std::vector<std::pair<double, double>> col;  // (value, label)
    for (int f : feats) {
      if (params_.random_thresholds) {
        double lo = std::numeric_limits<double>::infinity();
        double hi = -std::numeric_limits<double>::infinity();
        for (int r : rows) {
          double v = x_(r, f);
          lo = std::min(lo, v);
          hi = std::max(hi, v);
        }
        if (!(hi > lo)) continue;
        double thr = rng_.uniform(lo, hi);
        double lpos = 0.0, ltot = 0.0;
        for (int r : rows) {
          if (x_(r, f) <= thr) {
            lpos += y_[static_cast<std::size_t>(r)];
            ltot += 1.0;
          }
        }
        double rtot = total - ltot;
        if (ltot < params_.min_samples_leaf || rtot < params_.min_samples_leaf)
          continue;
        double gain = parent - (ltot / total) * gini(lpos, ltot) -
                      (rtot / total) * gini(pos - lpos, rtot);
        if (gain > best.gain + 1e-15) {
          best = {true, f, thr, gain};
        }
        continue;
      }

      col.clear();
      col.reserve(rows.size());
      for (int r : rows)
        col.emplace_back(x_(r, f), y_[static_cast<std::size_t>(r)]);
      std::sort(col.begin(), col.end());

      double lpos = 0.0;
      for (std::size_t i = 0; i + 1 < col.size(); ++i) {
        lpos += col[i].second;
        if (col[i].first == col[i + 1].first) continue;
        double ltot = static_cast<double>(i + 1);
        double rtot = total - ltot;
        if (ltot < params_.min_samples_leaf || rtot < params_.min_samples_leaf)
          continue;
        double gain = parent - (ltot / total) * gini(lpos, ltot) -
                      (rtot / total) * gini(pos - lpos, rtot);
        if (gain > best.gain + 1e-15) {
          best = {true, f, 0.5 * (col[i].first + col[i + 1].first), gain};
        }
      }
    }
    return best;
  }

  const MatrixXd& x_;
  const std::vector<double>& y_;
  ClassificationTreeParams params_;
  Rng& rng_;
};

// ---------------------------------------------------------------------------
// Regression trees on gradient/hessian statistics for the boosted ensembles.
// Gain and leaf weights follow the second-order formulation:
//   gain = 1/2 [ GL^2/(HL+lambda) + GR^2/(HR+lambda) - G^2/(H+lambda) ] - gamma
//   leaf = -G / (H + lambda)
// ---------------------------------------------------------------------------

struct RegressionTreeParams {
  int max_depth = 3;       // depth-wise growth limit
  int max_leaves = 0;      // >0 switches to leaf-wise (best-first) growth
  int min_samples_leaf = 1;
  double min_child_weight = 1e-3;
  double lambda = 1.0;
  double gamma = 0.0;
  std::vector<int> feature_subset;  // empty = all features
};

class RegressionTreeBuilder {
 public:
  RegressionTreeBuilder(const MatrixXd& x, const VectorXd& grad,
                        const VectorXd& hess, RegressionTreeParams params)
      : x_(x), grad_(grad), hess_(hess), params_(std::move(params)) {
    if (params_.feature_subset.empty()) {
      params_.feature_subset.resize(static_cast<std::size_t>(x.cols()));
      for (int f = 0; f < x.cols(); ++f)
        params_.feature_subset[static_cast<std::size_t>(f)] = f;
    }
  }

  Tree build(const std::vector<int>& rows) {
    Tree tree;
    if (params_.max_leaves > 0)
      grow_leafwise(tree, rows);
    else
      grow_depthwise(tree, rows, 0);
    return tree;
  }

 private:
  struct NodeStats {
    double g = 0.0, h = 0.0;
  };

  NodeStats stats_of(const std::vector<int>& rows) const {
    NodeStats s;
    for (int r : rows) {
      s.g += grad_[r];
      s.h += hess_[r];
    }
    return s;
  }

  double leaf_weight(const NodeStats& s) const {
    return -s.g / (s.h + params_.lambda);
  }

  double score(double g, double h) const {
    return g * g / (h + params_.lambda);
  }

  detail::SplitResult find_split(const std::vector<int>& rows,
                                 const NodeStats& total) const {
    detail::SplitResult best;
    double parent = score(total.g, total.h);
    std::vector<std::tuple<double, double, double>> col;  // (value, g, h)
    for (int f : params_.feature_subset) {
      col.clear();
      col.reserve(rows.size());
      for (int r : rows) col.emplace_back(x_(r, f), grad_[r], hess_[r]);
      std::sort(col.begin(), col.end(),
                [](const auto& a, const auto& b) {
                  return std::get<0>(a) < std::get<0>(b);
                });
      double gl = 0.0, hl = 0.0;
      for (std::size_t i = 0; i + 1 < col.size(); ++i) {
        gl += std::get<1>(col[i]);
        hl += std::get<2>(col[i]);
        if (std::get<0>(col[i]) == std::get<0>(col[i + 1])) continue;
        double gr = total.g - gl, hr = total.h - hl;
        double ltot = static_cast<double>(i + 1);
        double rtot = static_cast<double>(rows.size()) - ltot;
        if (ltot < params_.min_samples_leaf || rtot < params_.min_samples_leaf)
          continue;
        if (hl < params_.min_child_weight || hr < params_.min_child_weight)
          continue;
        double gain =
            0.5 * (score(gl, hl) + score(gr, hr) - parent) - params_.gamma;
        if (gain > best.gain + 1e-15) {
          best = {true, f,
                  0.5 * (std::get<0>(col[i]) + std::get<0>(col[i + 1])), gain};
        }
      }
    }
    return best;
  }

  int grow_depthwise(Tree& tree, const std::vector<int>& rows, int depth) {
    NodeStats total = stats_of(rows);
    int id = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    tree.nodes[static_cast<std::size_t>(id)].value = leaf_weight(total);
    if (depth >= params_.max_depth ||
        static_cast<int>(rows.size()) < 2 * params_.min_samples_leaf)
      return id;

    detail::SplitResult best = find_split(rows, total);
    if (!best.found) return id;

    std::vector<int> left_rows, right_rows;
    for (int r : rows) {
      if (x_(r, best.feature) <= best.threshold)
        left_rows.push_back(r);
      else
        right_rows.push_back(r);
    }
    int left = grow_depthwise(tree, left_rows, depth + 1);
    int right = grow_depthwise(tree, right_rows, depth + 1);
    TreeNode& node = tree.nodes[static_cast<std::size_t>(id)];
    node.feature = best.feature;
    node.threshold = best.threshold;
    node.left = left;
    node.right = right;
    return id;
  }

  void grow_leafwise(Tree& tree, const std::vector<int>& rows) {
    struct Candidate {
      double gain;
      int order;  // insertion order breaks gain ties deterministically
      int node;
      std::vector<int> rows;
      detail::SplitResult split;
      bool operator<(const Candidate& o) const {
        if (gain != o.gain) return gain < o.gain;
        return order > o.order;
      }
    };

    NodeStats root = stats_of(rows);
    tree.nodes.emplace_back();
    tree.nodes[0].value = leaf_weight(root);

    std::priority_queue<Candidate> heap;
    int order = 0;
    auto enqueue = [&](int node, std::vector<int> node_rows) {
      if (static_cast<int>(node_rows.size()) < 2 * params_.min_samples_leaf)
        return;
      NodeStats s = stats_of(node_rows);
      detail::SplitResult split = find_split(node_rows, s);
      if (!split.found) return;
      heap.push(Candidate{split.gain, order++, node, std::move(node_rows),
                          split});
    };

    enqueue(0, rows);
    int leaves = 1;
    while (!heap.empty() && leaves < params_.max_leaves) {
      Candidate top = heap.top();
      heap.pop();
      std::vector<int> left_rows, right_rows;
      for (int r : top.rows) {
        if (x_(r, top.split.feature) <= top.split.threshold)
          left_rows.push_back(r);
        else
          right_rows.push_back(r);
      }
      int left = static_cast<int>(tree.nodes.size());
      tree.nodes.emplace_back();
      tree.nodes.back().value = leaf_weight(stats_of(left_rows));
      int right = static_cast<int>(tree.nodes.size());
      tree.nodes.emplace_back();
      tree.nodes.back().value = leaf_weight(stats_of(right_rows));
      TreeNode& node = tree.nodes[static_cast<std::size_t>(top.node)];
      node.feature = top.split.feature;
      node.threshold = top.split.threshold;
      node.left = left;
      node.right = right;
      ++leaves;  // split one leaf into two
      enqueue(left, std::move(left_rows));
      enqueue(right, std::move(right_rows));
    }
  }

  const MatrixXd& x_;
  const VectorXd& grad_;
  const VectorXd& hess_;
  RegressionTreeParams params_;
};

}  // namespace gridsec
