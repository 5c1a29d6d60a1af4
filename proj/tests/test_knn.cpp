// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include <algorithm>

#include "gridsec/dataset.hpp"
#include "gridsec/knn.hpp"
#include "gridsec/models.hpp"
#include "helpers.hpp"

using namespace gridsec;
using testutil::fixture_path;
using testutil::fresh_dir;

namespace {
WindowSet tiny_windows(const MatrixXd& x, const std::vector<Label>& y) {
  WindowSet ws;
  ws.x = x;
  ws.y = y;
  ws.window_rows = 1;
  return ws;
}
}  // namespace

TEST_CASE("k=1 recalls a training point exactly", "[knn]") {
  MatrixXd x(4, 2);
  x << 0, 0, 1, 0, 0, 1, 1, 1;
  std::vector<Label> y = {Label::Stable, Label::Unstable, Label::Unstable,
                          Label::Stable};
  KnnClassifier knn(1);
  WindowSet ws = tiny_windows(x, y);
  knn.train(ws, ws, 0);
  std::vector<Label> pred = knn.predict(x);
  REQUIRE(pred == y);
}

TEST_CASE("knn agrees with a brute-force reference", "[knn]") {
  Rng rng(21);
  const int n = 120, d = 8, k = 7;
  MatrixXd x(n, d);
  std::vector<Label> y(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) x(i, j) = rng.uniform(0.0, 1.0);
    y[i] = rng.uniform(0.0, 1.0) < 0.5 ? Label::Stable : Label::Unstable;
  }
  MatrixXd q(25, d);
  for (Eigen::Index i = 0; i < q.rows(); ++i)
    for (int j = 0; j < d; ++j) q(i, j) = rng.uniform(0.0, 1.0);

  KnnClassifier knn(k);
  WindowSet ws = tiny_windows(x, y);
  knn.train(ws, ws, 0);
  VectorXd proba = knn.predict_proba(q);

  for (Eigen::Index i = 0; i < q.rows(); ++i) {
    // Naive O(n) scan with the same deterministic tie-break (distance,
    // then training index).
    std::vector<std::pair<double, int>> dist(n);
    for (int t = 0; t < n; ++t)
      dist[t] = {(x.row(t) - q.row(i)).squaredNorm(), t};
    std::sort(dist.begin(), dist.end());
    double stable = 0;
    for (int t = 0; t < k; ++t)
      stable += y[static_cast<std::size_t>(dist[t].second)] == Label::Stable
                    ? 1.0
                    : 0.0;
    REQUIRE(proba(i) == Catch::Approx(stable / k).margin(1e-12));
  }
}

TEST_CASE("equidistant neighbors break ties by index", "[knn]") {
  // Four training points all at distance 1 from the origin query; k=3 must
  // pick indices 0,1,2 deterministically.
  MatrixXd x(4, 2);
  x << 1, 0, -1, 0, 0, 1, 0, -1;
  std::vector<Label> y = {Label::Stable, Label::Stable, Label::Stable,
                          Label::Unstable};
  KnnClassifier knn(3);
  WindowSet ws = tiny_windows(x, y);
  knn.train(ws, ws, 0);
  MatrixXd q = MatrixXd::Zero(1, 2);
  for (int rep = 0; rep < 5; ++rep)
    REQUIRE(knn.predict_proba(q)(0) == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("knn persistence and fixture accuracy", "[knn]") {
  Dataset ds = prepare_dataset(load_records(fixture_path("grid_fixture.csv")),
                               PrepareOptions{});
  auto m = make_classifier("knn");
  m->train(ds.train, ds.val, 0);
  EvalReport rep = m->evaluate(ds.train);
  REQUIRE(rep.accuracy() >= 0.8);  // neighbors include the point itself

  auto dir = fresh_dir("knn");
  std::string stem = (dir / "knn").string();
  save_model(*m, stem);
  auto back = load_model(stem);
  VectorXd p1 = m->predict_proba(ds.test.x);
  VectorXd p2 = back->predict_proba(ds.test.x);
  REQUIRE((p1 - p2).cwiseAbs().maxCoeff() == 0.0);
}
