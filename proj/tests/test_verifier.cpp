#include <doctest.h>

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "sslab/errors.hpp"
#include "sslab/verifier.hpp"

using namespace sslab;

namespace {

ExperimentPlan small_plan() {
  ExperimentPlan p;
  p.sim.params = {2.0, 1};
  p.sim.beta = 0.5;
  p.sim.scale = 100;
  p.sim.seed = 9;
  p.replicates = 200;
  p.threads = 1;
  return p;
}

const Check* find_check(const EstimatorReport& r, const std::string& name) {
  for (const auto& c : r.checks)
    if (c.name == name) return &c;
  return nullptr;
}

TrajectoryRecord extinct_record(const std::vector<double>& times) {
  TrajectoryRecord rec;
  rec.extinct = true;
  rec.extinction_time = 0.5;
  for (double t : times) rec.rows.push_back(RecordRow{t, 0, 0.0, 0.0, {0.0}, false});
  return rec;
}

}  // namespace

TEST_CASE("sample statistics") {
  const auto s = sample_stats({1.0, 2.0, 3.0, 4.0});
  CHECK(s.count == 4);
  CHECK(s.mean == doctest::Approx(2.5));
  CHECK(s.variance == doctest::Approx(5.0 / 3.0));
  CHECK(s.se == doctest::Approx(std::sqrt(5.0 / 12.0)));
  CHECK(std::isnan(sample_stats({}).mean));
  CHECK(sample_stats({7.0}).variance == 0.0);
}

TEST_CASE("winf proxy on all-extinct records") {
  const std::vector<TrajectoryRecord> recs(5, extinct_record({1.0, 2.0}));
  const auto w = estimate_winf(recs, 2.0, 0.5);
  CHECK(w.mean == 0.0);
  CHECK(w.se == 0.0);
  CHECK(w.survivor_fraction == 0.0);
  CHECK(w.proxies == std::vector<double>(5, 0.0));
  CHECK_THROWS_AS(estimate_winf(recs, 3.0, 0.5), ConfigError);
}

TEST_CASE("proxy time covers count-only times") {
  SimulationConfig c;
  c.horizon = 2.0;
  c.record_times = {1.0, 2.0};
  CHECK(proxy_time(c) == 2.0);
  c.count_times = {30.0};
  CHECK(proxy_time(c) == 30.0);
}

TEST_CASE("variance targets") {
  auto plan = small_plan();
  plan.t_grid = {0.1, 2.0};
  plan.replicates = 400;
  const auto r = variance_test(plan, false);
  REQUIRE(r.rows.size() == 2);
  CHECK(r.rows[0].target == doctest::Approx(0.09754).epsilon(1e-4));
  CHECK(r.rows[1].target == doctest::Approx(1.26424).epsilon(1e-5));
  CHECK(find_check(r, "variance_t2") != nullptr);
  CHECK(find_check(r, "bias_shrinks_with_2n") == nullptr);

  plan.sim.beta = 0.0;
  const auto c = variance_test(plan, false);
  CHECK(c.rows[1].target == doctest::Approx(2.0).epsilon(1e-12));

  plan.replicates = 20;
  const auto few = variance_test(plan, true);
  for (const auto& ch : few.checks) CHECK(ch.verdict == Verdict::indeterminate);
}

TEST_CASE("first moment test on a small plan") {
  auto plan = small_plan();
  plan.test_function = TestFunction::gaussian_bump({0.0});
  plan.replicates = 400;
  const auto r = first_moment_test(plan);
  CHECK(r.experiment == "first_moment");
  CHECK(r.rows.size() == 3);
  CHECK(r.rows[1].target == doctest::Approx(1.0 / 3.0).epsilon(1e-10));
  CHECK(r.passed());

  plan.conditioning = Conditioning::both;
  const auto both = first_moment_test(plan);
  CHECK(both.rows.size() == 6);
  CHECK(both.passed());
}

TEST_CASE("decoupling edge cases and closed form") {
  auto plan = small_plan();
  const auto zero = decoupling_test(plan, {1.0, 2.0, 4.0, 8.0}, 0.0);
  for (const auto& c : zero.checks) CHECK(c.verdict == Verdict::indeterminate);
  CHECK_THROWS_AS(decoupling_test(plan, {2.0, 1.0}, 1.0), ConfigError);

  plan.sim.beta = 1.0;
  plan.sim.scale = 10;
  plan.replicates = 200;
  const auto r = decoupling_test(plan, {1.0, 2.0, 4.0, 8.0}, 1.0);
  REQUIRE(r.rows.size() == 4);
  CHECK(r.rows[3].target / r.rows[0].target == doctest::Approx(std::exp(-7.0)).epsilon(1e-12));
  CHECK(r.rows[0].target == doctest::Approx(std::exp(-1.0) * (1.0 - std::exp(-1.0))).epsilon(1e-12));
  CHECK(find_check(r, "monotone_decrease") != nullptr);
  CHECK(find_check(r, "closed_form_s1") != nullptr);
}

TEST_CASE("kernel limit plan validation") {
  auto plan = small_plan();
  plan.t_grid = {1.0, 2.0};
  CHECK_THROWS_AS(kernel_limit_experiment(plan, MultiIndex{0}), ConfigError);
  plan.t_grid = {4.0, 8.0};
  CHECK_THROWS_AS(kernel_limit_experiment(plan, MultiIndex{0, 0}), ConfigError);
}

TEST_CASE("kernel limit signed constants") {
  auto plan = small_plan();
  plan.sim.scale = 1;
  plan.sim.beta = 0.0;
  plan.sim.max_particles = 1'000'000;
  plan.replicates = 4;
  plan.t_grid = {4.0, 16.0};
  const auto r = kernel_limit_experiment(plan, MultiIndex{0});
  CHECK(r.experiment == "kernel_limit");
  CHECK(r.rows.size() == 4);
  CHECK(r.details["signed_theta"].get<double>() == doctest::Approx(1.0 / std::sqrt(4.0 * M_PI)).epsilon(1e-10));
  const auto r2 = kernel_limit_experiment(plan, MultiIndex{2});
  CHECK(r2.details["signed_theta"].get<double>() == doctest::Approx(-0.1410474).epsilon(1e-6));
  const auto r1 = kernel_limit_experiment(plan, MultiIndex{1});
  CHECK(find_check(r1, "odd_limit_zero") != nullptr);
}

TEST_CASE("theorem residual vanishes on extinct trajectories") {
  auto plan = small_plan();
  plan.t_grid = {1.0, 4.0};
  plan.test_function = TestFunction::gaussian_bump({0.0});
  plan.replicates = 3;
  const std::vector<TrajectoryRecord> recs(3, extinct_record({1.0, 4.0}));
  const auto r = theorem_report(plan, recs);
  for (const auto& row : r.rows) CHECK(row.mean == 0.0);
  CHECK(r.passed());
  CHECK(r.details["prediction_terms"].size() == 2);

  plan.expansion_order = 2;
  const auto r2 = theorem_report(plan, recs);
  CHECK(find_check(r2, "order_improves") != nullptr);
  CHECK(r2.details["prediction_terms"].size() == 4);

  plan.test_function = TestFunction::kernel_snapshot({1.0, 1}, 1.0);
  plan.sim.params = {1.0, 1};
  CHECK_THROWS_AS(theorem_report(plan, recs), DomainError);
  plan.test_function = TestFunction::gaussian_bump({0.0});
  plan.expansion_order = 0;
  plan.t_grid = {1.0, 2.0};
  CHECK_THROWS_AS(theorem_report(plan, recs), ConfigError);
}

TEST_CASE("report serialisation") {
  EstimatorReport r;
  r.experiment = "demo";
  r.rows.push_back(EstimateRow{1.0, "q", 0.5, 0.1, 0.01, 10, Conditioning::all, std::nan("")});
  r.checks.push_back(Check{"c", Verdict::pass, 0.5, 0.4, 0.2, ""});
  r.checks.push_back(Check{"d", Verdict::indeterminate, 0.0, 0.0, 0.0, "why"});
  CHECK(r.passed());
  CHECK_FALSE(r.any_failed());
  const auto j = r.to_json();
  CHECK(j["experiment"] == "demo");
  CHECK(j["rows"][0]["target"].is_null());
  CHECK(j["checks"][1]["verdict"] == "indeterminate");
  std::ostringstream out;
  r.write_csv(out);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "experiment,t,quantity,conditioning,estimate,target,se,count,verdict");
  int n = 0;
  while (std::getline(in, line)) ++n;
  CHECK(n == 3);
  r.checks.push_back(Check{"e", Verdict::fail, 0, 0, 0, ""});
  CHECK(r.any_failed());
  CHECK_FALSE(r.passed());
}

TEST_CASE("enum names round-trip") {
  for (auto c : {Conditioning::all, Conditioning::survivors_only, Conditioning::both})
    CHECK(parse_conditioning(conditioning_name(c)) == c);
  CHECK_THROWS(parse_conditioning("some"));
  CHECK(std::string(verdict_name(Verdict::fail)) == "fail");
}

TEST_CASE("plan validation") {
  auto plan = small_plan();
  plan.t_grid = {};
  CHECK_THROWS_AS(plan.validate(), ConfigError);
  plan = small_plan();
  plan.t_grid = {2.0, 1.0};
  CHECK_THROWS_AS(plan.validate(), ConfigError);
  plan = small_plan();
  plan.replicates = 0;
  CHECK_THROWS_AS(plan.validate(), ConfigError);
}
