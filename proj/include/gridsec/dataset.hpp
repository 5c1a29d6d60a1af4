// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gridsec/common.hpp"
#include "gridsec/csv.hpp"

namespace gridsec {

// One telemetry record in the four-node star topology: reaction times tau,
// nominal powers p (p1 is the producer, p2..p4 consumers), elasticities g,
// plus the stability score and its binarised form.
struct GridRecord {
  std::array<double, 4> tau{};
  std::array<double, 4> p{};
  std::array<double, 4> g{};
  double stab = 0.0;
  Label stabf = Label::Unstable;

  double feature(int i) const {
    return i < 4 ? tau[i] : (i < 8 ? p[i - 4] : g[i - 8]);
  }
  void set_feature(int i, double v) {
    (i < 4 ? tau[i] : (i < 8 ? p[i - 4] : g[i - 8])) = v;
  }
};

inline std::vector<GridRecord> load_records(const std::string& path) {
  CsvTable t = read_csv(path);
  std::array<int, kFeatureCount> fcol{};
  for (int f = 0; f < kFeatureCount; ++f) {
    fcol[f] = t.column(kFeatureNames[f]);
    if (fcol[f] < 0)
      throw std::runtime_error("missing column: " + kFeatureNames[f]);
  }
  int scol = t.column("stab");
  int fcol2 = t.column("stabf");
  if (scol < 0) throw std::runtime_error("missing column: stab");
  if (fcol2 < 0) throw std::runtime_error("missing column: stabf");

  auto numeric = [&](const std::string& cell, std::size_t row,
                     const std::string& col) {
    char* end = nullptr;
    double v = std::strtod(cell.c_str(), &end);
    if (end == cell.c_str() || *end != '\0' || !std::isfinite(v))
      throw std::runtime_error("non-numeric value '" + cell + "' at row " +
                               std::to_string(row + 1) + ", column " + col);
    return v;
  };

  std::vector<GridRecord> out;
  out.reserve(t.rows.size());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& cells = t.rows[r];
    GridRecord rec;
    for (int f = 0; f < kFeatureCount; ++f) {
      if (static_cast<std::size_t>(fcol[f]) >= cells.size())
        throw std::runtime_error("short row " + std::to_string(r + 1));
      rec.set_feature(f, numeric(cells[fcol[f]], r, kFeatureNames[f]));
    }
    rec.stab = numeric(cells[scol], r, "stab");
    rec.stabf = label_from_name(cells[fcol2]);
    out.push_back(rec);
  }
  return out;
}

inline void write_records_csv(const std::string& path,
                              const std::vector<GridRecord>& recs) {
  std::vector<std::string> header(kFeatureNames.begin(), kFeatureNames.end());
  header.push_back("stab");
  header.push_back("stabf");
  std::vector<std::vector<std::string>> rows;
  rows.reserve(recs.size());
  for (const auto& rec : recs) {
    std::vector<std::string> row;
    row.reserve(kFeatureCount + 2);
    for (int f = 0; f < kFeatureCount; ++f)
      row.push_back(csv_number(rec.feature(f)));
    row.push_back(csv_number(rec.stab));
    row.push_back(label_name(rec.stabf));
    rows.push_back(std::move(row));
  }
  write_csv(path, header, rows);
}

// The four-node star is symmetric in its three consumer nodes: permuting
// consumer positions jointly across the tau, p and g families yields an
// equally valid record with the same stability outcome.  Emits all six
// permutations as contiguous blocks, identity first, lexicographic order.
inline std::vector<GridRecord> augment_symmetry(
    const std::vector<GridRecord>& in) {
  static const int perms[6][3] = {{1, 2, 3}, {1, 3, 2}, {2, 1, 3},
                                  {2, 3, 1}, {3, 1, 2}, {3, 2, 1}};
  std::vector<GridRecord> out;
  out.reserve(in.size() * 6);
  for (const auto& pm : perms) {
    for (const auto& rec : in) {
      GridRecord c = rec;
      for (int slot = 0; slot < 3; ++slot) {
        c.tau[1 + slot] = rec.tau[pm[slot]];
        c.p[1 + slot] = rec.p[pm[slot]];
        c.g[1 + slot] = rec.g[pm[slot]];
      }
      out.push_back(c);
    }
  }
  return out;
}

// Per-feature min-max scaling fitted on training data only; application
// clamps so out-of-range values (unseen data, adversarial output) stay in
// [0,1].  A feature constant in the fit data maps to 0.0 and is flagged.
struct Normalizer {
  std::array<double, kFeatureCount> lo{};
  std::array<double, kFeatureCount> hi{};
  std::vector<std::string> warnings;

  static Normalizer fit(const MatrixXd& rows) {
    if (rows.rows() == 0) throw std::runtime_error("cannot fit on empty data");
    Normalizer n;
    for (int f = 0; f < kFeatureCount; ++f) {
      n.lo[f] = rows.col(f).minCoeff();
      n.hi[f] = rows.col(f).maxCoeff();
      if (n.hi[f] <= n.lo[f])
        n.warnings.push_back("feature " + kFeatureNames[f] +
                             " is constant in the fit data; scaled to 0");
    }
    return n;
  }

  double scale_one(int f, double v) const {
    double span = hi[f] - lo[f];
    if (span <= 0.0) return 0.0;
    return clamp01((v - lo[f]) / span);
  }

  double invert_one(int f, double v) const {
    return lo[f] + v * (hi[f] - lo[f]);
  }

  // rows: N x 12 feature matrix.
  MatrixXd apply(const MatrixXd& rows) const {
    MatrixXd out(rows.rows(), rows.cols());
    for (int f = 0; f < kFeatureCount; ++f)
      for (Eigen::Index r = 0; r < rows.rows(); ++r)
        out(r, f) = scale_one(f, rows(r, f));
    return out;
  }

  MatrixXd invert(const MatrixXd& rows) const {
    MatrixXd out(rows.rows(), rows.cols());
    for (int f = 0; f < kFeatureCount; ++f)
      for (Eigen::Index r = 0; r < rows.rows(); ++r)
        out(r, f) = invert_one(f, rows(r, f));
    return out;
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["feature_names"] = kFeatureNames;
    j["min"] = lo;
    j["max"] = hi;
    j["warnings"] = warnings;
    return j;
  }

  static Normalizer from_json(const nlohmann::json& j) {
    Normalizer n;
    for (int f = 0; f < kFeatureCount; ++f) {
      n.lo[f] = j.at("min").at(f).get<double>();
      n.hi[f] = j.at("max").at(f).get<double>();
    }
    if (j.contains("warnings"))
      n.warnings = j.at("warnings").get<std::vector<std::string>>();
    return n;
  }
};

// A set of sliding windows, each flattened row-major: window row r feature f
// lives at column r * 12 + f.
struct WindowSet {
  MatrixXd x;  // N x (window_rows * 12)
  std::vector<Label> y;
  int window_rows = kDefaultWindowRows;

  Eigen::Index size() const { return x.rows(); }
};

// Cuts the record sequence into overlapping windows.  The label of a window
// is the label of its final row (the decision refers to the newest state).
inline WindowSet make_windows(const std::vector<GridRecord>& recs,
                              int window_rows = kDefaultWindowRows,
                              int step = kDefaultWindowStep) {
  if (window_rows <= 0 || step <= 0)
    throw ConfigError("window and step must be positive");
  const std::size_t n = recs.size();
  if (n < static_cast<std::size_t>(window_rows))
    throw std::runtime_error("insufficient rows: need at least " +
                             std::to_string(window_rows) + ", have " +
                             std::to_string(n));
  const std::size_t count = (n - window_rows) / step + 1;
  WindowSet ws;
  ws.window_rows = window_rows;
  ws.x.resize(static_cast<Eigen::Index>(count), window_rows * kFeatureCount);
  ws.y.resize(count);
  for (std::size_t w = 0; w < count; ++w) {
    const std::size_t base = w * step;
    for (int r = 0; r < window_rows; ++r)
      for (int f = 0; f < kFeatureCount; ++f)
        ws.x(static_cast<Eigen::Index>(w), r * kFeatureCount + f) =
            recs[base + r].feature(f);
    ws.y[w] = recs[base + window_rows - 1].stabf;
  }
  return ws;
}

struct SplitIndices {
  std::vector<std::size_t> train, val, test;
};

// Seeded shuffle split with cumulative rounding so subset sizes differ from
// the exact ratios by at most one window.
inline SplitIndices split_windows(std::size_t n, double r_train, double r_val,
                                  double r_test, std::uint64_t seed,
                                  bool allow_empty = false) {
  if (r_train <= 0.0 || r_val <= 0.0 || r_test <= 0.0)
    throw ConfigError("split ratios must be positive");
  if (std::abs(r_train + r_val + r_test - 1.0) > 1e-9)
    throw ConfigError("split ratios must sum to 1");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed);
  rng.shuffle(idx);
  const auto n_train =
      static_cast<std::size_t>(std::llround(r_train * static_cast<double>(n)));
  const auto n_train_val = static_cast<std::size_t>(
      std::llround((r_train + r_val) * static_cast<double>(n)));
  SplitIndices s;
  s.train.assign(idx.begin(), idx.begin() + n_train);
  s.val.assign(idx.begin() + n_train, idx.begin() + n_train_val);
  s.test.assign(idx.begin() + n_train_val, idx.end());
  if (!allow_empty && (s.train.empty() || s.val.empty() || s.test.empty()))
    throw std::runtime_error(
        "a split subset is empty; pass allow_empty to permit this");
  return s;
}

inline WindowSet take_windows(const WindowSet& ws,
                              const std::vector<std::size_t>& idx) {
  WindowSet out;
  out.window_rows = ws.window_rows;
  out.x.resize(static_cast<Eigen::Index>(idx.size()), ws.x.cols());
  out.y.resize(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    out.x.row(static_cast<Eigen::Index>(i)) =
        ws.x.row(static_cast<Eigen::Index>(idx[i]));
    out.y[i] = ws.y[idx[i]];
  }
  return out;
}

// Normalize flattened windows in place using per-feature parameters.
inline MatrixXd normalize_windows(const MatrixXd& x, const Normalizer& nz) {
  MatrixXd out(x.rows(), x.cols());
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    const int f = static_cast<int>(c) % kFeatureCount;
    for (Eigen::Index r = 0; r < x.rows(); ++r)
      out(r, c) = nz.scale_one(f, x(r, c));
  }
  return out;
}

inline MatrixXd denormalize_windows(const MatrixXd& x, const Normalizer& nz) {
  MatrixXd out(x.rows(), x.cols());
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    const int f = static_cast<int>(c) % kFeatureCount;
    for (Eigen::Index r = 0; r < x.rows(); ++r)
      out(r, c) = nz.invert_one(f, x(r, c));
  }
  return out;
}

struct PrepareOptions {
  bool augment = true;
  int window_rows = kDefaultWindowRows;
  int window_step = kDefaultWindowStep;
  double ratio_train = 0.75;
  double ratio_val = 0.05;
  double ratio_test = 0.20;
  std::uint64_t split_seed = 1234;
  bool allow_empty = false;
};

// Fully prepared dataset: normalized train/val/test windows plus the
// parameters needed to reproduce or invert the preparation.
struct Dataset {
  WindowSet train, val, test;
  Normalizer normalizer;
  PrepareOptions options;
  std::size_t total_windows = 0;

  nlohmann::json manifest() const {
    nlohmann::json j;
    j["version"] = 1;
    j["normalization"] = normalizer.to_json();
    j["split"] = {{"seed", options.split_seed},
                  {"ratios", {options.ratio_train, options.ratio_val,
                              options.ratio_test}},
                  {"counts",
                   {{"train", train.size()},
                    {"val", val.size()},
                    {"test", test.size()}}}};
    j["window"] = {{"rows", options.window_rows},
                   {"step", options.window_step}};
    j["augmented"] = options.augment;
    j["total_windows"] = total_windows;
    return j;
  }

  void save_manifest(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    out << manifest().dump(2) << "\n";
  }
};

inline Dataset prepare_dataset(const std::vector<GridRecord>& records,
                               const PrepareOptions& opt = {}) {
  const std::vector<GridRecord>& base = records;
  std::vector<GridRecord> augmented;
  if (opt.augment) augmented = augment_symmetry(base);
  const std::vector<GridRecord>& rows = opt.augment ? augmented : base;

  WindowSet all = make_windows(rows, opt.window_rows, opt.window_step);
  SplitIndices idx =
      split_windows(static_cast<std::size_t>(all.size()), opt.ratio_train,
                    opt.ratio_val, opt.ratio_test, opt.split_seed,
                    opt.allow_empty);

  Dataset ds;
  ds.options = opt;
  ds.total_windows = static_cast<std::size_t>(all.size());
  WindowSet train_raw = take_windows(all, idx.train);

  // Fit scaling on training rows only (each window contributes its rows).
  MatrixXd fit_rows(train_raw.size() * opt.window_rows, kFeatureCount);
  for (Eigen::Index w = 0; w < train_raw.size(); ++w)
    for (int r = 0; r < opt.window_rows; ++r)
      fit_rows.row(w * opt.window_rows + r) =
          train_raw.x.row(w).segment(r * kFeatureCount, kFeatureCount);
  ds.normalizer = Normalizer::fit(fit_rows);

  ds.train = std::move(train_raw);
  ds.train.x = normalize_windows(ds.train.x, ds.normalizer);
  ds.val = take_windows(all, idx.val);
  ds.val.x = normalize_windows(ds.val.x, ds.normalizer);
  ds.test = take_windows(all, idx.test);
  ds.test.x = normalize_windows(ds.test.x, ds.normalizer);
  return ds;
}

}  // namespace gridsec
