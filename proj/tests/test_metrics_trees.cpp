// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "gridsec/dataset.hpp"
#include "gridsec/models.hpp"
#include "gridsec/simulate.hpp"
#include "helpers.hpp"

using namespace gridsec;
using testutil::fixture_path;
using testutil::fresh_dir;

namespace {
Dataset fixture_dataset() {
  static Dataset ds =
      prepare_dataset(load_records(fixture_path("grid_fixture.csv")),
                      PrepareOptions{});
  return ds;
}
}  // namespace

TEST_CASE("evaluation metric identities", "[models]") {
  // TP=3 TN=4 FP=1 FN=2: accuracy 7/10, precision 3/4, recall 3/5, F1 6/9.
  EvalReport r;
  r.tp = 3;
  r.tn = 4;
  r.fp = 1;
  r.fn = 2;
  REQUIRE(r.accuracy() == Catch::Approx(0.7).margin(1e-15));
  REQUIRE(r.precision() == Catch::Approx(0.75).margin(1e-15));
  REQUIRE(r.recall() == Catch::Approx(0.6).margin(1e-15));
  REQUIRE(r.f1() == Catch::Approx(6.0 / 9.0).margin(1e-15));

  EvalReport zero;
  REQUIRE(zero.accuracy() == 0.0);
  REQUIRE(zero.precision() == 0.0);
  REQUIRE(zero.recall() == 0.0);
  REQUIRE(zero.f1() == 0.0);

  // evaluate_labels counts with stable as the positive class.
  std::vector<Label> truth = {Label::Stable, Label::Stable, Label::Unstable,
                              Label::Unstable};
  std::vector<Label> pred = {Label::Stable, Label::Unstable, Label::Stable,
                             Label::Unstable};
  EvalReport e = evaluate_labels(pred, truth);
  REQUIRE(e.tp == 1);
  REQUIRE(e.fn == 1);
  REQUIRE(e.fp == 1);
  REQUIRE(e.tn == 1);
}

TEST_CASE("probability ties resolve to stable", "[models]") {
  testutil::LinearLogit model(VectorXd::Zero(12), 0.0);  // p = 0.5 everywhere
  MatrixXd x = MatrixXd::Random(3, 12);
  for (Label l : model.predict(x)) REQUIRE(l == Label::Stable);
}

TEST_CASE("model registry", "[models]") {
  REQUIRE(kModelKinds.size() == 7);
  for (const auto& kind : kModelKinds) {
    auto m = make_classifier(kind);
    REQUIRE(m->kind() == kind);
    REQUIRE_FALSE(m->trained());
    REQUIRE_THROWS_WITH(m->predict_proba(MatrixXd::Zero(1, 192)),
                        Catch::Matchers::ContainsSubstring(
                            "model not trained: " + kind));
  }
  REQUIRE_THROWS_WITH(make_classifier("perceptron"),
                      Catch::Matchers::ContainsSubstring(
                          "unknown model kind: perceptron"));
}

TEST_CASE("tree models fit and stay deterministic", "[models]") {
  Dataset ds = fixture_dataset();
  for (const std::string kind :
       {"decision-tree", "random-forest", "extra-trees", "gbdt",
        "leafwise-gbdt"}) {
    INFO(kind);
    auto m = make_classifier(kind);
    m->train(ds.train, ds.val, 42);
    REQUIRE(m->trained());
    // Train accuracy should be high on this tiny separable fixture.
    EvalReport rep = m->evaluate(ds.train);
    REQUIRE(rep.accuracy() >= 0.9);

    auto m2 = make_classifier(kind);
    m2->train(ds.train, ds.val, 42);
    VectorXd p1 = m->predict_proba(ds.test.x);
    VectorXd p2 = m2->predict_proba(ds.test.x);
    REQUIRE((p1 - p2).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("tree models refuse gradients", "[models]") {
  Dataset ds = fixture_dataset();
  auto m = make_classifier("gbdt");
  m->train(ds.train, ds.val, 1);
  REQUIRE_FALSE(m->differentiable());
  std::vector<Label> y(ds.test.y.begin(), ds.test.y.end());
  REQUIRE_THROWS_WITH(m->input_gradient(ds.test.x, y),
                      Catch::Matchers::ContainsSubstring(
                          "gradients unavailable for model kind 'gbdt'"));
}

TEST_CASE("model persistence round trip", "[models]") {
  Dataset ds = fixture_dataset();
  auto dir = fresh_dir("persist");
  for (const std::string kind : {"gbdt", "random-forest", "decision-tree"}) {
    INFO(kind);
    auto m = make_classifier(kind);
    m->train(ds.train, ds.val, 7);
    m->normalization = ds.normalizer.to_json();
    std::string stem = (dir / kind).string();
    save_model(*m, stem);
    REQUIRE(std::filesystem::exists(stem + ".json"));
    REQUIRE(std::filesystem::exists(stem + ".gsm"));

    auto back = load_model(stem);
    REQUIRE(back->kind() == kind);
    REQUIRE(back->trained());
    VectorXd p1 = m->predict_proba(ds.test.x);
    VectorXd p2 = back->predict_proba(ds.test.x);
    REQUIRE((p1 - p2).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("weight file validation", "[models]") {
  auto dir = fresh_dir("badweights");
  std::string stem = (dir / "m").string();

  {
    std::ofstream bad(stem + ".gsm", std::ios::binary);
    bad << "XXXXgarbage";
  }
  REQUIRE_THROWS_WITH(read_model_payload(stem),
                      Catch::Matchers::ContainsSubstring(
                          "not a model weight file"));

  {
    std::ofstream out(stem + ".gsm", std::ios::binary);
    out.write(kModelMagic, 4);
    std::uint32_t version = 99;
    out.write(reinterpret_cast<const char*>(&version), sizeof(version));
  }
  REQUIRE_THROWS_WITH(read_model_payload(stem),
                      Catch::Matchers::ContainsSubstring(
                          "unsupported model file version 99"));
}

TEST_CASE("boosted trees separate simulated telemetry", "[models]") {
  SimulatorConfig cfg;
  cfg.rows = 2400;
  cfg.seed = 7;
  Dataset ds = prepare_dataset(simulate_telemetry(cfg), PrepareOptions{});
  auto m = make_classifier("gbdt");
  m->train(ds.train, ds.val, 42);
  REQUIRE(m->evaluate(ds.test).accuracy() >= 0.95);
}
