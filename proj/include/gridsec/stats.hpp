// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "gridsec/classifier.hpp"
#include "gridsec/common.hpp"
#include "gridsec/dataset.hpp"

namespace gridsec {

// Exact two-sample Kolmogorov-Smirnov statistic.
inline double ks_statistic(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw std::runtime_error("empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double na = static_cast<double>(a.size());
  double nb = static_cast<double>(b.size());
  std::size_t ia = 0, ib = 0;
  double d = 0.0;
  while (ia < a.size() && ib < b.size()) {
    double v = std::min(a[ia], b[ib]);
    while (ia < a.size() && a[ia] <= v) ++ia;
    while (ib < b.size() && b[ib] <= v) ++ib;
    d = std::max(d, std::abs(static_cast<double>(ia) / na -
                             static_cast<double>(ib) / nb));
  }
  return d;
}

inline double median_of(std::vector<double> v) {
  if (v.empty()) throw std::runtime_error("empty sample");
  std::sort(v.begin(), v.end());
  std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

struct FeatureDistribution {
  std::string feature;
  double ks = 0.0;
  double median_real = 0.0;
  double median_generated = 0.0;
  int median_shift_sign = 0;  // -1: generated smaller, +1: larger, 0: equal
  std::vector<double> grid;
  std::vector<double> cdf_real;
  std::vector<double> cdf_generated;
};

struct DistributionReport {
  std::vector<FeatureDistribution> features;
};

// Flattens windows (N x rows*12) back to per-record rows ((N*rows) x 12).
inline MatrixXd windows_to_rows(const MatrixXd& windows) {
  if (windows.cols() % kFeatureCount != 0)
    throw std::runtime_error("window width must be a multiple of " +
                             std::to_string(kFeatureCount));
  Eigen::Index rows_per_window = windows.cols() / kFeatureCount;
  MatrixXd out(windows.rows() * rows_per_window, kFeatureCount);
  for (Eigen::Index w = 0; w < windows.rows(); ++w)
    for (Eigen::Index r = 0; r < rows_per_window; ++r)
      for (int f = 0; f < kFeatureCount; ++f)
        out(w * rows_per_window + r, f) = windows(w, r * kFeatureCount + f);
  return out;
}

// Compares two samples of de-normalized record rows feature by feature.
inline DistributionReport distribution_compare(const MatrixXd& real_rows,
                                               const MatrixXd& generated_rows,
                                               int grid_points = 201) {
  if (real_rows.rows() == 0 || generated_rows.rows() == 0)
    throw std::runtime_error("empty sample");
  if (real_rows.cols() != generated_rows.cols())
    throw std::runtime_error("feature-count mismatch");

  DistributionReport report;
  for (Eigen::Index f = 0; f < real_rows.cols(); ++f) {
    std::vector<double> rv(static_cast<std::size_t>(real_rows.rows()));
    std::vector<double> gv(static_cast<std::size_t>(generated_rows.rows()));
    for (Eigen::Index i = 0; i < real_rows.rows(); ++i)
      rv[static_cast<std::size_t>(i)] = real_rows(i, f);
    for (Eigen::Index i = 0; i < generated_rows.rows(); ++i)
      gv[static_cast<std::size_t>(i)] = generated_rows(i, f);

    FeatureDistribution fd;
    fd.feature = f < kFeatureCount ? kFeatureNames[static_cast<std::size_t>(f)]
                                   : "f" + std::to_string(f);
    fd.ks = ks_statistic(rv, gv);
    fd.median_real = median_of(rv);
    fd.median_generated = median_of(gv);
    double shift = fd.median_generated - fd.median_real;
    fd.median_shift_sign = shift < 0.0 ? -1 : (shift > 0.0 ? 1 : 0);

    std::vector<double> rs = rv, gs = gv;
    std::sort(rs.begin(), rs.end());
    std::sort(gs.begin(), gs.end());
    double lo = std::min(rs.front(), gs.front());
    double hi = std::max(rs.back(), gs.back());
    if (!(hi > lo)) hi = lo + 1.0;
    auto cdf_at = [](const std::vector<double>& sorted, double v) {
      return static_cast<double>(std::upper_bound(sorted.begin(), sorted.end(),
                                                  v) -
                                 sorted.begin()) /
             static_cast<double>(sorted.size());
    };
    for (int g = 0; g < grid_points; ++g) {
      double v = lo + (hi - lo) * static_cast<double>(g) /
                          static_cast<double>(grid_points - 1);
      fd.grid.push_back(v);
      fd.cdf_real.push_back(cdf_at(rs, v));
      fd.cdf_generated.push_back(cdf_at(gs, v));
    }
    report.features.push_back(std::move(fd));
  }
  return report;
}

struct GroupImportance {
  std::string group;
  double mean_accuracy_drop = 0.0;
};

inline const std::vector<std::pair<std::string, int>>& feature_groups() {
  static const std::vector<std::pair<std::string, int>> groups = {
      {"tau", 0}, {"p", 4}, {"g", 8}};
  return groups;
}

// Importance of a feature group = mean accuracy drop when that group's
// columns are permuted jointly across windows.  Returned ranked descending.
inline std::vector<GroupImportance> permutation_importance(
    const StabilityClassifier& model, const WindowSet& test, int repeats,
    std::uint64_t seed) {
  model.require_trained();
  if (repeats < 3) throw ConfigError("repeats must be >= 3");

  double base = model.evaluate(test).accuracy();
  Eigen::Index n = test.x.rows();
  int rows_per_window = test.window_rows;

  std::vector<GroupImportance> out;
  Rng rng(seed);
  std::vector<int> perm(static_cast<std::size_t>(n));
  for (const auto& [name, col_base] : feature_groups()) {
    std::vector<int> cols;
    for (int r = 0; r < rows_per_window; ++r)
      for (int j = 0; j < 4; ++j)
        cols.push_back(r * kFeatureCount + col_base + j);

    double drop_sum = 0.0;
    for (int rep = 0; rep < repeats; ++rep) {
      for (Eigen::Index i = 0; i < n; ++i)
        perm[static_cast<std::size_t>(i)] = static_cast<int>(i);
      rng.shuffle(perm);
      MatrixXd shuffled = test.x;
      for (int c : cols)
        for (Eigen::Index i = 0; i < n; ++i)
          shuffled(i, c) = test.x(perm[static_cast<std::size_t>(i)], c);
      std::vector<Label> pred = model.predict(shuffled);
      std::int64_t hits = 0;
      for (std::size_t i = 0; i < pred.size(); ++i)
        if (pred[i] == test.y[i]) ++hits;
      double acc = static_cast<double>(hits) / static_cast<double>(n);
      drop_sum += base - acc;
    }
    out.push_back({name, drop_sum / static_cast<double>(repeats)});
  }

  std::stable_sort(out.begin(), out.end(),
                   [](const GroupImportance& a, const GroupImportance& b) {
                     return a.mean_accuracy_drop > b.mean_accuracy_drop;
                   });
  return out;
}

}  // namespace gridsec
