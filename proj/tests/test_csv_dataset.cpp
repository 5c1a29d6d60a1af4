// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <fstream>

#include "gridsec/dataset.hpp"
#include "helpers.hpp"

using namespace gridsec;
using testutil::fixture_path;
using testutil::fresh_dir;

TEST_CASE("fixture loads with header-mapped columns", "[dataset]") {
  auto recs = load_records(fixture_path("grid_fixture.csv"));
  REQUIRE(recs.size() == 64);
  int stable = 0;
  for (const auto& r : recs) stable += r.stabf == Label::Stable ? 1 : 0;
  REQUIRE(stable == 32);

  // Same data with columns permuted must load identically: mapping is by
  // header name, not position.
  auto dir = fresh_dir("csv_perm");
  std::string shuffled = (dir / "shuffled.csv").string();
  {
    std::ofstream out(shuffled);
    out << "stabf,g4,tau1,stab,p1,p2,p3,p4,g1,g2,g3,tau2,tau3,tau4\n";
    for (const auto& r : recs) {
      out << label_name(r.stabf) << ',' << csv_number(r.g[3]) << ','
          << csv_number(r.tau[0]) << ',' << csv_number(r.stab) << ','
          << csv_number(r.p[0]) << ',' << csv_number(r.p[1]) << ','
          << csv_number(r.p[2]) << ',' << csv_number(r.p[3]) << ','
          << csv_number(r.g[0]) << ',' << csv_number(r.g[1]) << ','
          << csv_number(r.g[2]) << ',' << csv_number(r.tau[1]) << ','
          << csv_number(r.tau[2]) << ',' << csv_number(r.tau[3]) << "\n";
    }
  }
  auto recs2 = load_records(shuffled);
  REQUIRE(recs2.size() == recs.size());
  for (std::size_t i = 0; i < recs.size(); ++i) {
    for (int f = 0; f < kFeatureCount; ++f)
      REQUIRE(recs2[i].feature(f) == recs[i].feature(f));
    REQUIRE(recs2[i].stabf == recs[i].stabf);
  }
}

TEST_CASE("loader error messages", "[dataset]") {
  REQUIRE_THROWS_WITH(load_records("/nonexistent/data.csv"),
                      Catch::Matchers::ContainsSubstring("cannot open file"));

  auto dir = fresh_dir("csv_err");
  auto write_file = [&](const std::string& name, const std::string& body) {
    std::string p = (dir / name).string();
    std::ofstream out(p);
    out << body;
    return p;
  };

  std::string missing = write_file(
      "missing.csv", "tau1,tau2,tau3,tau4,p1,p2,p3,p4,g1,g3,g4,stab,stabf\n");
  REQUIRE_THROWS_WITH(load_records(missing),
                      Catch::Matchers::ContainsSubstring("missing column: g2"));

  std::string bad = write_file(
      "bad.csv",
      "tau1,tau2,tau3,tau4,p1,p2,p3,p4,g1,g2,g3,g4,stab,stabf\n"
      "1,1,1,1,1,1,1,1,1,1,1,1,0.1,unstable\n"
      "oops,1,1,1,1,1,1,1,1,1,1,1,0.1,unstable\n");
  REQUIRE_THROWS_WITH(
      load_records(bad),
      Catch::Matchers::ContainsSubstring(
          "non-numeric value 'oops' at row 2, column tau1"));

  std::string label = write_file(
      "label.csv",
      "tau1,tau2,tau3,tau4,p1,p2,p3,p4,g1,g2,g3,g4,stab,stabf\n"
      "1,1,1,1,1,1,1,1,1,1,1,1,0.1,wobbly\n");
  REQUIRE_THROWS_WITH(load_records(label), Catch::Matchers::ContainsSubstring(
                                               "unknown label value"));
}

TEST_CASE("write/load round trip preserves records", "[dataset]") {
  auto recs = load_records(fixture_path("grid_fixture.csv"));
  auto dir = fresh_dir("csv_rt");
  std::string p = (dir / "copy.csv").string();
  write_records_csv(p, recs);
  auto back = load_records(p);
  REQUIRE(back.size() == recs.size());
  for (std::size_t i = 0; i < recs.size(); ++i) {
    for (int f = 0; f < kFeatureCount; ++f)
      REQUIRE(back[i].feature(f) == recs[i].feature(f));
    REQUIRE(back[i].stab == recs[i].stab);
    REQUIRE(back[i].stabf == recs[i].stabf);
  }
}

TEST_CASE("consumer symmetry augmentation", "[dataset]") {
  auto recs = load_records(fixture_path("grid_fixture.csv"));
  auto aug = augment_symmetry(recs);
  REQUIRE(aug.size() == recs.size() * 6);

  // Identity copy comes first, block-contiguous.
  for (std::size_t i = 0; i < recs.size(); ++i)
    for (int f = 0; f < kFeatureCount; ++f)
      REQUIRE(aug[i].feature(f) == recs[i].feature(f));

  // Second block applies the (1,3,2) permutation: consumer slots 2 and 3
  // swap across all three families; producer columns stay put.
  const auto& src = recs[5];
  const auto& swapped = aug[recs.size() + 5];
  REQUIRE(swapped.tau[0] == src.tau[0]);
  REQUIRE(swapped.tau[1] == src.tau[1]);
  REQUIRE(swapped.tau[2] == src.tau[3]);
  REQUIRE(swapped.tau[3] == src.tau[2]);
  REQUIRE(swapped.p[2] == src.p[3]);
  REQUIRE(swapped.g[2] == src.g[3]);

  // Labels and stab are invariant under the permutation.
  for (std::size_t i = 0; i < aug.size(); ++i) {
    const auto& orig = recs[i % recs.size()];
    REQUIRE(aug[i].stabf == orig.stabf);
    REQUIRE(aug[i].stab == orig.stab);
    // Multisets of consumer values per family are preserved.
    for (int fam = 0; fam < 3; ++fam) {
      auto vals = [fam](const GridRecord& r, int slot) {
        int f = fam * 4 + slot;
        return r.feature(f);
      };
      double so = vals(orig, 1) + vals(orig, 2) + vals(orig, 3);
      double sa = vals(aug[i], 1) + vals(aug[i], 2) + vals(aug[i], 3);
      REQUIRE(so == Catch::Approx(sa).epsilon(1e-12));
    }
  }
}

TEST_CASE("window count formula and labels", "[dataset]") {
  auto make_recs = [](std::size_t n) {
    std::vector<GridRecord> rs(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (int f = 0; f < kFeatureCount; ++f)
        rs[i].set_feature(f, static_cast<double>(i));
      rs[i].stabf = (i % 2 == 0) ? Label::Stable : Label::Unstable;
    }
    return rs;
  };

  REQUIRE(make_windows(make_recs(16)).size() == 1);
  REQUIRE(make_windows(make_recs(23)).size() == 1);
  REQUIRE(make_windows(make_recs(24)).size() == 2);
  REQUIRE(make_windows(make_recs(384)).size() == 47);
  REQUIRE(make_windows(make_recs(60000)).size() == 7499);

  REQUIRE_THROWS_WITH(make_windows(make_recs(15)),
                      Catch::Matchers::ContainsSubstring("insufficient rows"));

  // Window label is the final row's label; content is row-major.
  auto ws = make_windows(make_recs(24));
  REQUIRE(ws.y[0] == make_recs(24)[15].stabf);
  REQUIRE(ws.y[1] == make_recs(24)[23].stabf);
  REQUIRE(ws.x(0, 0) == 0.0);                       // row 0, tau1
  REQUIRE(ws.x(0, 15 * kFeatureCount + 3) == 15.0); // row 15, tau4
  REQUIRE(ws.x(1, 0) == 8.0);                       // second window starts at 8
}

TEST_CASE("cumulative rounding split", "[dataset]") {
  auto s = split_windows(7499, 0.75, 0.05, 0.20, 1234);
  REQUIRE(s.train.size() == 5624);
  REQUIRE(s.val.size() == 375);
  REQUIRE(s.test.size() == 1500);

  // Partition property: disjoint union of all indices.
  std::vector<char> seen(7499, 0);
  for (auto i : s.train) seen[i]++;
  for (auto i : s.val) seen[i]++;
  for (auto i : s.test) seen[i]++;
  for (char c : seen) REQUIRE(c == 1);

  // Same seed, same permutation; different seed differs.
  auto s2 = split_windows(7499, 0.75, 0.05, 0.20, 1234);
  REQUIRE(s2.train == s.train);
  auto s3 = split_windows(7499, 0.75, 0.05, 0.20, 99);
  REQUIRE(s3.train != s.train);

  REQUIRE_THROWS_AS(split_windows(100, 0.8, 0.1, 0.2, 1), ConfigError);
  REQUIRE_THROWS_AS(split_windows(100, -0.1, 0.9, 0.2, 1), ConfigError);
}

TEST_CASE("normalizer fit, clamp and constant feature", "[dataset]") {
  MatrixXd rows(3, kFeatureCount);
  rows.setZero();
  rows.col(0) << 1.0, 3.0, 2.0;
  rows.col(1) << 5.0, 5.0, 5.0;  // constant
  Normalizer n = Normalizer::fit(rows);
  REQUIRE(n.lo[0] == 1.0);
  REQUIRE(n.hi[0] == 3.0);
  REQUIRE(n.scale_one(0, 2.0) == Catch::Approx(0.5));
  REQUIRE(n.scale_one(0, -10.0) == 0.0);  // clamped
  REQUIRE(n.scale_one(0, 99.0) == 1.0);   // clamped
  REQUIRE(n.scale_one(1, 5.0) == 0.0);    // constant -> 0
  bool warned = false;
  for (const auto& w : n.warnings)
    if (w.find("tau2") != std::string::npos) warned = true;
  REQUIRE(warned);

  // JSON round trip.
  Normalizer back = Normalizer::from_json(n.to_json());
  REQUIRE(back.lo == n.lo);
  REQUIRE(back.hi == n.hi);
}

TEST_CASE("prepared fixture matches the stored manifest", "[dataset]") {
  auto recs = load_records(fixture_path("grid_fixture.csv"));
  Dataset ds = prepare_dataset(recs, PrepareOptions{});
  std::ifstream in(fixture_path("grid_fixture_manifest.json"));
  REQUIRE(in.good());
  nlohmann::json expected = nlohmann::json::parse(in);
  REQUIRE(ds.manifest() == expected);

  // Hand-derived arithmetic: 64 rows x6 = 384; (384-16)/8+1 = 47 windows;
  // llround(47*.75) = 35 train, llround(47*.8)-35 = 3 val, 9 test.
  REQUIRE(ds.total_windows == 47);
  REQUIRE(ds.train.size() == 35);
  REQUIRE(ds.val.size() == 3);
  REQUIRE(ds.test.size() == 9);

  // All normalized values are inside [0,1].
  REQUIRE(ds.train.x.minCoeff() >= 0.0);
  REQUIRE(ds.train.x.maxCoeff() <= 1.0);
  REQUIRE(ds.test.x.minCoeff() >= 0.0);
  REQUIRE(ds.test.x.maxCoeff() <= 1.0);
}

TEST_CASE("normalize/denormalize windows invert each other", "[dataset]") {
  auto recs = load_records(fixture_path("grid_fixture.csv"));
  Dataset ds = prepare_dataset(recs, PrepareOptions{});
  MatrixXd denorm = denormalize_windows(ds.test.x, ds.normalizer);
  MatrixXd renorm = normalize_windows(denorm, ds.normalizer);
  REQUIRE((renorm - ds.test.x).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("prepare is deterministic", "[dataset]") {
  auto recs = load_records(fixture_path("grid_fixture.csv"));
  Dataset a = prepare_dataset(recs, PrepareOptions{});
  Dataset b = prepare_dataset(recs, PrepareOptions{});
  REQUIRE(a.train.x == b.train.x);
  REQUIRE(a.test.x == b.test.x);
  REQUIRE(a.manifest() == b.manifest());
}
