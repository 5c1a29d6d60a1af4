// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "gridsec/dataset.hpp"
#include "gridsec/lstm.hpp"
#include "gridsec/models.hpp"
#include "gridsec/simulate.hpp"
#include "helpers.hpp"

using namespace gridsec;
using testutil::fixture_path;
using testutil::fresh_dir;

namespace {
Dataset small_sim_dataset() {
  SimulatorConfig cfg;
  cfg.rows = 1600;
  cfg.seed = 7;
  return prepare_dataset(simulate_telemetry(cfg), PrepareOptions{});
}
}  // namespace

TEST_CASE("input gradient matches finite differences", "[recurrent]") {
  Dataset ds = prepare_dataset(load_records(fixture_path("grid_fixture.csv")),
                               PrepareOptions{});
  BiLstmClassifier net(/*hidden=*/8, /*epochs=*/1, /*batch_size=*/8);
  net.train(ds.train, ds.val, 3);

  MatrixXd x = ds.test.x.topRows(2);
  std::vector<Label> y = {ds.test.y[0], ds.test.y[1]};
  MatrixXd grad = net.input_gradient(x, y);
  REQUIRE(grad.rows() == x.rows());
  REQUIRE(grad.cols() == x.cols());

  // Loss used by the gradient: per-window BCE against the label, summed.
  auto loss_at = [&](const MatrixXd& xe) {
    VectorXd p = net.predict_proba(xe);
    double total = 0.0;
    for (Eigen::Index i = 0; i < p.size(); ++i) {
      double target = y[static_cast<std::size_t>(i)] == Label::Stable ? 1 : 0;
      double pc = std::min(std::max(p(i), 1e-12), 1.0 - 1e-12);
      total += -(target * std::log(pc) + (1 - target) * std::log(1 - pc));
    }
    return total;
  };

  const double h = 1e-5;
  double worst = 0.0;
  // Probe a scattered set of coordinates.
  for (Eigen::Index c = 3; c < x.cols(); c += 37) {
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      MatrixXd xp = x, xm = x;
      xp(r, c) += h;
      xm(r, c) -= h;
      double fd = (loss_at(xp) - loss_at(xm)) / (2 * h);
      double an = grad(r, c);
      double rel = std::abs(fd - an) / std::max(1e-8, std::abs(fd));
      if (std::abs(fd) > 1e-6) worst = std::max(worst, rel);
    }
  }
  REQUIRE(worst < 1e-3);
}

TEST_CASE("training is deterministic per seed", "[recurrent]") {
  Dataset ds = prepare_dataset(load_records(fixture_path("grid_fixture.csv")),
                               PrepareOptions{});
  BiLstmClassifier a(16, 2, 8);
  BiLstmClassifier b(16, 2, 8);
  a.train(ds.train, ds.val, 11);
  b.train(ds.train, ds.val, 11);
  VectorXd pa = a.predict_proba(ds.test.x);
  VectorXd pb = b.predict_proba(ds.test.x);
  REQUIRE((pa - pb).cwiseAbs().maxCoeff() == 0.0);

  BiLstmClassifier c(16, 2, 8);
  c.train(ds.train, ds.val, 12);
  VectorXd pc = c.predict_proba(ds.test.x);
  REQUIRE((pa - pc).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("best-epoch checkpoint is recorded", "[recurrent]") {
  Dataset ds = prepare_dataset(load_records(fixture_path("grid_fixture.csv")),
                               PrepareOptions{});
  BiLstmClassifier net(16, 3, 8);
  net.train(ds.train, ds.val, 5);
  REQUIRE(net.metrics_snapshot.contains("best_epoch"));
  REQUIRE(net.metrics_snapshot.contains("best_val_accuracy"));
  int best_epoch = net.metrics_snapshot.at("best_epoch").get<int>();
  REQUIRE(best_epoch >= 1);
  REQUIRE(best_epoch <= 3);
  double bv = net.metrics_snapshot.at("best_val_accuracy").get<double>();
  REQUIRE(bv >= 0.0);
  REQUIRE(bv <= 1.0);
}

TEST_CASE("persistence round trip preserves predictions", "[recurrent]") {
  Dataset ds = prepare_dataset(load_records(fixture_path("grid_fixture.csv")),
                               PrepareOptions{});
  BiLstmClassifier net(12, 2, 8);
  net.train(ds.train, ds.val, 19);
  auto dir = fresh_dir("lstm_persist");
  std::string stem = (dir / "bilstm").string();
  save_model(net, stem);
  auto back = load_model(stem);
  REQUIRE(back->kind() == "bilstm");
  VectorXd p1 = net.predict_proba(ds.test.x);
  VectorXd p2 = back->predict_proba(ds.test.x);
  REQUIRE((p1 - p2).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("recurrent net learns simulated telemetry", "[recurrent]") {
  Dataset ds = small_sim_dataset();
  BiLstmClassifier net(/*hidden=*/48, /*epochs=*/6, /*batch_size=*/32);
  net.train(ds.train, ds.val, 42);
  EvalReport rep = net.evaluate(ds.test);
  INFO("test accuracy " << rep.accuracy());
  REQUIRE(rep.accuracy() >= 0.80);
}
