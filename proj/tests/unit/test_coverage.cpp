#include "ridgeci/coverage.hpp"
#include "ridgeci/errors.hpp"
#include "test_support.hpp"

#include <set>

using namespace ridgeci;

namespace {

GridSpec unit_grid(int res) {
  GridSpec g;
  g.lower = Eigen::Vector2d(0, 0);
  g.upper = Eigen::Vector2d(1, 1);
  g.resolution = {res, res};
  return g;
}

RunRecord record(int run, bool covered, double sup, const std::string& error = "") {
  RunRecord r;
  r.run = run;
  r.covered = covered;
  r.connected = covered;
  r.sup_mask_to_truth = sup;
  r.mask_count = 10;
  r.error = error;
  return r;
}

CoverageConfig small_config() {
  CoverageConfig c;
  c.n = 1500;
  c.B = 60;
  c.M = 3;
  c.m_truth = 64;
  c.seed = 5;
  return c;
}

}  // namespace

TEST_CASE("derived seeds") {
  std::set<std::uint64_t> seen;
  for (std::uint64_t s : {0u, 1u})
    for (std::uint64_t run = 0; run < 50; ++run)
      for (std::uint64_t tag = 0; tag < 3; ++tag) seen.insert(derive_seed(s, run, tag));
  CHECK(seen.size() == 300);
  CHECK(derive_seed(7, 3, 1) == derive_seed(7, 3, 1));
}

TEST_CASE("mask cover and connection checks") {
  const GridSpec g = unit_grid(11);  // spacing 0.1
  NodeMask mask(g.node_count(), 0);
  for (int i = 0; i < 11; ++i) {
    const int idx[2] = {i, 5};
    mask[g.flat_index(idx)] = 1;  // the row y = 0.5
  }
  RowMatrix truth(3, 2);
  truth << 0.05, 0.5, 0.5, 0.52, 0.93, 0.45;
  std::size_t missed = 99;
  CHECK(mask_covers(g, mask, truth, &missed));
  CHECK(missed == 0);
  CHECK(mask_connects(g, mask, truth));

  // Break the row in two: still covered, no longer one component.
  const int cut[2] = {5, 5};
  mask[g.flat_index(cut)] = 0;
  const int cut2[2] = {4, 5};
  mask[g.flat_index(cut2)] = 0;
  CHECK(mask_covers(g, mask, truth));
  CHECK_FALSE(mask_connects(g, mask, truth));

  RowMatrix far(2, 2);
  far << 0.05, 0.5, 0.5, 0.9;
  CHECK_FALSE(mask_covers(g, mask, far, &missed));
  CHECK(missed == 1);

  // Brute-force oracle on random masks.
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0, 1);
  for (int t = 0; t < 50; ++t) {
    for (auto& m : mask) m = u(rng) < 0.1;
    RowMatrix pts(5, 2);
    for (Eigen::Index i = 0; i < 5; ++i) pts.row(i) << u(rng), u(rng);
    std::size_t ref = 0;
    for (Eigen::Index i = 0; i < 5; ++i) {
      bool hit = false;
      for (std::size_t k = 0; k < mask.size(); ++k)
        hit = hit || (mask[k] && (g.node(k) - pts.row(i).transpose()).norm() <= g.cell_diagonal() * (1 + 1e-12));
      ref += !hit;
    }
    CHECK(mask_covers(g, mask, pts, &missed) == (ref == 0));
    CHECK(missed == ref);
  }
}

TEST_CASE("summary arithmetic") {
  std::vector<RunRecord> rs{record(0, true, 0.3), record(1, false, 0.1), record(2, true, 0.2),
                            record(3, false, 0.0, "empty candidate set"), record(4, true, 0.5)};
  const CoverageSummary s = summarize(rs);
  CHECK(s.runs == 5);
  CHECK(s.failed == 1);
  CHECK(s.coverage == 3.0 / 5.0);
  CHECK(s.connected_fraction == 3.0 / 5.0);
  CHECK(s.mean_sup_mask_to_truth == doctest::Approx((0.3 + 0.1 + 0.2 + 0.5) / 4));
  CHECK(s.median_sup_mask_to_truth == doctest::Approx(0.25));
  CHECK(s.max_sup_mask_to_truth == 0.5);
  rs.pop_back();
  CHECK(summarize(rs).median_sup_mask_to_truth == doctest::Approx(0.2));
  CHECK(summarize({}).runs == 0);
}

TEST_CASE("run records round trip through JSON") {
  RunRecord r = record(7, true, 0.123456789012345);
  r.threshold = 1.0 / 3.0;
  r.rho = 2.5e-7;
  r.h = 0.31;
  r.candidate_count = 12;
  r.skipped = 3;
  r.truth_missed = 0;
  const RunRecord back = RunRecord::from_json(nlohmann::json::parse(r.to_json().dump()));
  CHECK(back.to_json() == r.to_json());
  CHECK(back.threshold == r.threshold);
  auto bad = r.to_json();
  bad["schema"] = "other/1";
  CHECK_THROWS_AS(RunRecord::from_json(bad), ConfigError);
}

TEST_CASE("coverage experiment") {
  const SyntheticModel model(ModelKind::CircleFlat);
  CoverageConfig c = small_config();

  SUBCASE("M = 1 is a single Bernoulli") {
    c.M = 1;
    const auto res = coverage_experiment(model, c);
    REQUIRE(res.records.size() == 1);
    CHECK((res.summary.coverage == 0.0 || res.summary.coverage == 1.0));
    CHECK(res.records[0].h == default_bandwidth(model.sample(c.n, derive_seed(c.seed, 0, 0)), CaseHint::B).h);
    c.M = 0;
    CHECK_THROWS_AS(coverage_experiment(model, c), ConfigError);
  }
  SUBCASE("smaller alpha covers whenever larger alpha does") {
    CoverageConfig loose = c, tight = c;
    loose.alpha = 0.5;
    tight.alpha = 0.1;
    const auto a = coverage_experiment(model, loose);
    const auto b = coverage_experiment(model, tight);
    CHECK(a.summary.coverage <= b.summary.coverage);
    for (std::size_t i = 0; i < a.records.size(); ++i) {
      CHECK(a.records[i].threshold <= b.records[i].threshold);
      CHECK(a.records[i].mask_count <= b.records[i].mask_count);
      if (a.records[i].covered) CHECK(b.records[i].covered);
    }
  }
  SUBCASE("resume reuses completed records") {
    const auto full = coverage_experiment(model, c);
    std::map<int, RunRecord> done{{0, full.records[0]}, {1, full.records[1]}};
    std::vector<int> fresh;
    const auto resumed = coverage_experiment(model, c, done, [&](const RunRecord& r) { fresh.push_back(r.run); });
    CHECK(fresh == std::vector<int>{2});
    REQUIRE(resumed.records.size() == full.records.size());
    for (std::size_t i = 0; i < full.records.size(); ++i) CHECK(resumed.records[i].to_json() == full.records[i].to_json());
    CHECK(resumed.summary.to_json() == full.summary.to_json());
  }
  SUBCASE("fixed bandwidth and rho are honored") {
    c.M = 1;
    c.h = 0.35;
    c.rho = RhoSpec::Value(0.5);
    const auto res = coverage_experiment(model, c);
    CHECK(res.records[0].h == 0.35);
    CHECK(res.records[0].rho == 0.5);
  }
  SUBCASE("numerical failures are recorded, not thrown") {
    c.M = 1;
    c.rho = RhoSpec::Value(0.0);
    const auto res = coverage_experiment(model, c);
    CHECK(res.records[0].error.find("empty candidate set") != std::string::npos);
    CHECK(res.summary.failed == 1);
    CHECK_FALSE(res.records[0].covered);
  }
}
