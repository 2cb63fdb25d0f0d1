#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <sstream>
#include <vector>

#include "sslab/errors.hpp"
#include "sslab/particle_sim.hpp"
#include "sslab/verifier.hpp"

using namespace sslab;

namespace {

SimulationConfig base_config(double alpha, double beta, std::int64_t n) {
  SimulationConfig c;
  c.params = {alpha, 1};
  c.beta = beta;
  c.scale = n;
  c.horizon = 2.0;
  c.record_times = {1.0, 2.0};
  c.seed = 77;
  return c;
}

ParticleState state_of(const std::vector<double>& xs, double mass) {
  ParticleState s;
  s.mass = mass;
  for (double x : xs) s.add(std::vector<double>{x});
  return s;
}

double quantile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  return v[static_cast<std::size_t>(q * static_cast<double>(v.size() - 1))];
}

}  // namespace

TEST_CASE("Gaussian increments have variance 2 dt") {
  Rng rng(1);
  const StableParams p{2.0, 1};
  std::vector<double> xs;
  for (int i = 0; i < 100000; ++i) xs.push_back(sample_stable_increment(p, 1.0, rng)[0]);
  const auto st = sample_stats(xs);
  CHECK(std::abs(st.variance - 2.0) < 0.05);
  CHECK(std::abs(st.mean) < 4.0 * st.se);
}

TEST_CASE("empirical characteristic function of increments") {
  const int M = 100000;
  for (double alpha : {0.6, 1.0, 1.5, 2.0})
    for (int d : {1, 2}) {
      Rng rng(static_cast<std::uint64_t>(alpha * 100) + static_cast<std::uint64_t>(d));
      const StableParams p{alpha, d};
      std::vector<double> theta(static_cast<std::size_t>(d), 0.0);
      theta[0] = d == 1 ? 1.0 : 0.6;
      if (d == 2) theta[1] = 0.8;
      std::complex<double> acc = 0.0;
      std::vector<double> x(static_cast<std::size_t>(d));
      for (int i = 0; i < M; ++i) {
        sample_stable_increment(p, 1.0, rng, x);
        double dot = 0.0;
        for (int j = 0; j < d; ++j) dot += theta[static_cast<std::size_t>(j)] * x[static_cast<std::size_t>(j)];
        acc += std::polar(1.0, dot);
      }
      acc /= static_cast<double>(M);
      CHECK(std::abs(acc.real() - std::exp(-1.0)) < 3.0 / std::sqrt(M));
      CHECK(std::abs(acc.imag()) < 3.0 / std::sqrt(M));
    }
}

TEST_CASE("stable scaling of increments") {
  const double alpha = 1.5, dt = 8.0;
  const StableParams p{alpha, 1};
  Rng a(3), b(4);
  std::vector<double> x1, xt;
  for (int i = 0; i < 50000; ++i) {
    x1.push_back(std::pow(dt, 1.0 / alpha) * sample_stable_increment(p, 1.0, a)[0]);
    xt.push_back(sample_stable_increment(p, dt, b)[0]);
  }
  // two independent samples of scale 4; quantile SE is about 0.04 in the bulk
  for (double q : {0.1, 0.25, 0.5, 0.75, 0.9}) CHECK(std::abs(quantile(x1, q) - quantile(xt, q)) < 0.2);
}

TEST_CASE("positive stable Laplace transform") {
  Rng rng(5);
  const double alpha = 1.2, dt = 1.0;
  double acc = 0.0;
  const int M = 100000;
  for (int i = 0; i < M; ++i) acc += std::exp(-sample_positive_stable(alpha, dt, rng));
  CHECK(std::abs(acc / M - std::exp(-dt)) < 3.0 / std::sqrt(M));
}

TEST_CASE("offspring law") {
  const auto c = base_config(2.0, 0.5, 100);
  CHECK(c.mean_offspring() == doctest::Approx(1.0 + 0.5 / 100.0).epsilon(1e-15));
  CHECK(c.birth_rate() - c.death_rate() == doctest::Approx(0.5));
  CHECK(c.birth_rate() + c.death_rate() == doctest::Approx(100.0));
}

TEST_CASE("critical mean conservation and supercritical growth") {
  auto c = base_config(1.5, 0.0, 200);
  const auto rec0 = run_replicates(c, {}, 400, 1);
  std::vector<double> w;
  for (const auto& r : rec0) w.push_back(r.row_at(2.0)->w1);
  auto st = sample_stats(w);
  CHECK(std::abs(st.mean - 1.0) < 3.0 * st.se);

  c.beta = 0.5;
  const auto rec = run_replicates(c, {}, 400, 1);
  w.clear();
  std::vector<double> wt;
  for (const auto& r : rec) {
    w.push_back(r.row_at(2.0)->w1);
    wt.push_back(r.row_at(2.0)->wtilde1);
    CHECK(r.row_at(2.0)->wtilde1 == doctest::Approx(std::exp(-1.0) * r.row_at(2.0)->w1).epsilon(1e-14));
  }
  st = sample_stats(w);
  CHECK(std::abs(st.mean - std::exp(1.0)) < 3.0 * st.se);
  const auto vt = sample_stats(wt);
  CHECK(std::abs(vt.variance - 2.0 * (1.0 - std::exp(-1.0))) < 3.0 * vt.variance_se);
}

TEST_CASE("population bookkeeping") {
  auto c = base_config(2.0, 0.3, 50);
  const auto rec = simulate(c, {}, 0);
  for (const auto& row : rec.rows) CHECK(row.w1 == doctest::Approx(static_cast<double>(row.population) / 50.0).epsilon(1e-15));

  c.engine = Engine::event_driven;
  std::int64_t pop = 50;
  bool steps_ok = true;
  const auto ev = simulate(c, {}, 0, [&](double t, int delta) {
    steps_ok = steps_ok && (delta == 1 || delta == -1);
    steps_ok = steps_ok && t >= 0.0 && t <= c.horizon;
    pop += delta;
  });
  CHECK(steps_ok);
  CHECK(static_cast<std::uint64_t>(pop) == ev.rows.back().population);
}

TEST_CASE("evaluate_functional examples") {
  const auto sq = TestFunction::product({TestFunction::tabulated([] {
    Tabulated t;
    t.origin = {-2.0};
    t.spacing = {0.001};
    t.shape = {4001};
    for (std::size_t i = 0; i < 4001; ++i) {
      const double x = -2.0 + 0.001 * static_cast<double>(i);
      t.values.push_back(x * x);
    }
    return t;
  }())});
  CHECK(evaluate_functional(ParticleState{}, TestFunction::constant(1)) == 0.0);
  CHECK(evaluate_functional(state_of({-1.0, 1.0}, 0.5), sq) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(evaluate_functional(state_of({0.1, 0.2, 0.3}, 0.01), TestFunction::constant(1)) == doctest::Approx(0.03));
  const auto g = TestFunction::gaussian_bump({0.0});
  const auto s = state_of({0.0, 0.5, -1.5}, 0.25);
  CHECK(evaluate_functional(s, g) == doctest::Approx(0.25 * (1.0 + std::exp(-0.25) + std::exp(-2.25))).epsilon(1e-13));
  std::uint64_t outside = 0;
  evaluate_functional(state_of({0.0, 9.0}, 1.0), sq, &outside);
  CHECK(outside == 1);
}

TEST_CASE("evaluate_kernel_functional examples") {
  const auto origin = state_of({0.0}, 1.0);
  CHECK(evaluate_kernel_functional(origin, {2.0, 1}, MultiIndex{2}, 1.0) == doctest::Approx(-0.1410474).epsilon(1e-6));
  for (double alpha : {1.5, 2.0}) {
    const StableParams p{alpha, 1};
    const double s = 50.0;
    CHECK(evaluate_kernel_functional(origin, p, MultiIndex{0}, s) ==
          doctest::Approx(std::pow(s, -1.0 / alpha) * density(p, 1.0, std::vector<double>{0.0})).epsilon(1e-7));
    const auto sym = state_of({-0.7, 0.7, -2.0, 2.0}, 0.25);
    CHECK(std::abs(evaluate_kernel_functional(sym, p, MultiIndex{1}, 1.0)) < 1e-12);
    CHECK(evaluate_kernel_functional(sym, p, MultiIndex{2}, 1.0) ==
          doctest::Approx(0.5 * (density_derivative(p, MultiIndex{2}, 1.0, std::vector<double>{0.7}) +
                                 density_derivative(p, MultiIndex{2}, 1.0, std::vector<double>{2.0})))
              .epsilon(1e-6));
  }
}

TEST_CASE("empirical characteristic function of a state") {
  const auto s = state_of({-1.0, 1.0}, 0.5);
  const auto v = empirical_characteristic(s, std::vector<double>{2.0});
  CHECK(v.real() == doctest::Approx(std::cos(2.0)).epsilon(1e-14));
  CHECK(std::abs(v.imag()) < 1e-15);
  CHECK(empirical_characteristic(ParticleState{}, std::vector<double>{1.0}) == std::complex<double>{});
}

TEST_CASE("determinism and replicate seeds") {
  auto c = base_config(1.5, 0.5, 300);
  std::vector<Probe> probes{{"g", TestFunction::gaussian_bump({0.0}), std::nullopt},
                            {"ecf", CharacteristicProbe{{1.0}}, 2.0},
                            {"k2", KernelProbe{MultiIndex{2}, 1.0}, 2.0}};
  std::ostringstream a, b;
  write_trajectory_csv(a, {simulate(c, probes, 3)}, probes);
  write_trajectory_csv(b, {simulate(c, probes, 3)}, probes);
  CHECK(a.str() == b.str());
  CHECK(replicate_seed(7, 0) != replicate_seed(7, 1));
  CHECK(replicate_seed(7, 1) != replicate_seed(8, 1));
  const auto seq = run_replicates(c, probes, 6, 1);
  const auto par = run_replicates(c, probes, 6, 4);
  for (std::size_t i = 0; i < 6; ++i) {
    REQUIRE(seq[i].rows.size() == par[i].rows.size());
    for (std::size_t j = 0; j < seq[i].rows.size(); ++j) {
      CHECK(seq[i].rows[j].population == par[i].rows[j].population);
      for (std::size_t q = 0; q < seq[i].rows[j].values.size(); ++q) {
        const double x = seq[i].rows[j].values[q], y = par[i].rows[j].values[q];
        CHECK(((std::isnan(x) && std::isnan(y)) || x == y));
      }
    }
  }
}

TEST_CASE("trajectory CSV layout") {
  auto c = base_config(2.0, 0.5, 100);
  std::vector<Probe> probes{{"g", TestFunction::gaussian_bump({0.0}), std::nullopt},
                            {"ecf", CharacteristicProbe{{1.0}}, std::nullopt}};
  CHECK(probe_columns(probes) == std::vector<std::string>{"g", "ecf_re", "ecf_im"});
  std::ostringstream out;
  write_trajectory_csv(out, {simulate(c, probes, 0)}, probes);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "replicate,t,population,W1,Wtilde1,g,ecf_re,ecf_im,extinct_flag");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 2);
}

TEST_CASE("extinction zeroes later values") {
  auto c = base_config(2.0, 0.0, 2);
  c.horizon = 50.0;
  c.record_times = {1.0, 10.0, 50.0};
  std::vector<Probe> probes{{"g", TestFunction::gaussian_bump({0.0}), std::nullopt}};
  int extinct = 0;
  for (std::uint64_t r = 0; r < 40; ++r) {
    const auto rec = simulate(c, probes, r);
    if (!rec.extinct) continue;
    ++extinct;
    CHECK(rec.extinction_time > 0.0);
    for (const auto& row : rec.rows)
      if (row.t >= rec.extinction_time) {
        CHECK(row.population == 0);
        CHECK(row.w1 == 0.0);
        CHECK(row.values[0] == 0.0);
      }
  }
  CHECK(extinct > 0);
}

TEST_CASE("engines agree in law") {
  auto c = base_config(1.5, 0.5, 100);
  std::vector<Probe> probes{{"g", TestFunction::gaussian_bump({0.0}), std::nullopt}};
  auto collect = [&](Engine e) {
    c.engine = e;
    std::vector<double> w, g;
    for (const auto& r : run_replicates(c, probes, 400, 1)) {
      w.push_back(r.row_at(2.0)->wtilde1);
      g.push_back(r.row_at(2.0)->values[0]);
    }
    return std::pair{sample_stats(w), sample_stats(g)};
  };
  const auto [wa, ga] = collect(Engine::genealogical);
  const auto [wb, gb] = collect(Engine::event_driven);
  CHECK(std::abs(wa.mean - wb.mean) < 3.5 * std::hypot(wa.se, wb.se));
  CHECK(std::abs(ga.mean - gb.mean) < 3.5 * std::hypot(ga.se, gb.se));
}

TEST_CASE("count-only extension") {
  const FamilyLaw law{0.5 * (100 + 1.0), 0.5 * (100 - 1.0)};
  Rng rng(11);
  std::vector<double> xs;
  for (int i = 0; i < 20000; ++i) xs.push_back(static_cast<double>(evolve_count(law, 100, 2.0, rng)));
  const auto st = sample_stats(xs);
  CHECK(std::abs(st.mean - 100.0 * std::exp(2.0)) < 3.0 * st.se);
  CHECK(evolve_count(law, 0, 2.0, rng) == 0);

  auto c = base_config(2.0, 1.0, 100);
  c.count_times = {6.0};
  std::vector<double> w;
  for (const auto& r : run_replicates(c, {}, 300, 1)) {
    const auto* row = r.row_at(6.0);
    REQUIRE(row != nullptr);
    CHECK(row->count_only);
    w.push_back(row->wtilde1);
  }
  const auto wt = sample_stats(w);
  CHECK(std::abs(wt.mean - 1.0) < 3.0 * wt.se);
}

TEST_CASE("configuration validation") {
  auto c = base_config(2.0, 0.5, 100);
  CHECK_NOTHROW(c.validate());
  auto bad = c;
  bad.beta = 300.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = c;
  bad.record_times = {2.0, 1.0};
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = c;
  bad.record_times = {3.0};
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = c;
  bad.count_times = {1.5};
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = c;
  bad.max_particles = 1000;
  CHECK_THROWS_AS(bad.validate(), CapacityError);
  CHECK_THROWS_AS(simulate(bad, {}), CapacityError);
  bad = c;
  bad.scale = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  CHECK(parse_engine("event_driven") == Engine::event_driven);
  CHECK_THROWS(parse_engine("euler"));
}

TEST_CASE("initial state") {
  auto c = base_config(2.0, 0.0, 10);
  c.initial = FiniteMeasure(1, {{{-1.0}, 0.3}, {{4.0}, 0.2}});
  Rng rng(2);
  const auto s = initial_state(c, rng);
  CHECK(s.population() == 5);
  CHECK(s.mass == doctest::Approx(0.1));
  for (double x : s.coords[0]) CHECK((x == -1.0 || x == 4.0));
}
