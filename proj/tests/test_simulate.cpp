// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "gridsec/simulate.hpp"

using namespace gridsec;

TEST_CASE("simulator is deterministic per seed", "[simulate]") {
  SimulatorConfig cfg;
  cfg.rows = 512;
  cfg.seed = 3;
  auto a = simulate_telemetry(cfg);
  auto b = simulate_telemetry(cfg);
  REQUIRE(a.size() == 512);
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (int f = 0; f < kFeatureCount; ++f)
      REQUIRE(a[i].feature(f) == b[i].feature(f));
    REQUIRE(a[i].stab == b[i].stab);
    REQUIRE(a[i].stabf == b[i].stabf);
  }

  cfg.seed = 4;
  auto c = simulate_telemetry(cfg);
  bool differs = false;
  for (std::size_t i = 0; i < a.size() && !differs; ++i)
    differs = a[i].feature(0) != c[i].feature(0);
  REQUIRE(differs);
}

TEST_CASE("simulated telemetry respects physical ranges", "[simulate]") {
  SimulatorConfig cfg;
  cfg.rows = 2000;
  cfg.seed = 7;
  auto recs = simulate_telemetry(cfg);
  for (const auto& r : recs) {
    for (int i = 0; i < 4; ++i) {
      REQUIRE(r.tau[i] > 0.0);
      REQUIRE(r.tau[i] <= 10.0);
      REQUIRE(r.g[i] > 0.0);
      REQUIRE(r.g[i] <= 1.0);
    }
    // Producer balances the three consumers exactly.
    REQUIRE(std::abs(r.p[0] + r.p[1] + r.p[2] + r.p[3]) < 1e-9);
    REQUIRE(r.p[0] > 0.0);        // producer supplies
    for (int i = 1; i < 4; ++i) REQUIRE(r.p[i] < 0.0);  // consumers draw
    // Label convention: positive stab margin means unstable.
    REQUIRE(r.stabf == (r.stab > 0.0 ? Label::Unstable : Label::Stable));
  }
}

TEST_CASE("class balance lands near even", "[simulate]") {
  SimulatorConfig cfg;
  cfg.rows = 10000;
  cfg.seed = 7;
  auto recs = simulate_telemetry(cfg);
  double stable = 0;
  for (const auto& r : recs) stable += r.stabf == Label::Stable ? 1.0 : 0.0;
  double frac = stable / static_cast<double>(recs.size());
  REQUIRE(frac > 0.40);
  REQUIRE(frac < 0.70);
}

TEST_CASE("row count honored and config validated", "[simulate]") {
  SimulatorConfig cfg;
  cfg.rows = 64;
  auto recs = simulate_telemetry(cfg);
  REQUIRE(recs.size() == 64);

  cfg.rows = 0;
  REQUIRE_THROWS_AS(simulate_telemetry(cfg), ConfigError);
}
