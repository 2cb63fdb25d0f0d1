#include <doctest.h>

#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "sslab/errors.hpp"
#include "sslab/semigroup.hpp"
#include "sslab/stable_kernel.hpp"

using namespace sslab;

namespace {

std::vector<double> pt(double x) { return {x}; }

double grid_mass(const GridFunction& g) {
  double s = 0.0;
  for (double v : g.values) s += v;
  return s * g.cell_volume();
}

}  // namespace

TEST_CASE("density closed-form values") {
  CHECK(density({2.0, 1}, 1.0, pt(0.0)) == doctest::Approx(0.2820948).epsilon(1e-7));
  CHECK(density({1.0, 1}, 1.0, pt(0.0)) == doctest::Approx(0.3183099).epsilon(1e-7));
  CHECK(density({2.0, 1}, 1.0, pt(0.0), KernelMethod::quadrature) == doctest::Approx(1.0 / std::sqrt(4.0 * M_PI)).epsilon(1e-10));
  CHECK(density({1.0, 1}, 1.0, pt(0.0), KernelMethod::quadrature) == doctest::Approx(1.0 / M_PI).epsilon(1e-10));
}

TEST_CASE("density_derivative examples") {
  const StableParams g{2.0, 1};
  CHECK(std::abs(density_derivative(g, MultiIndex{1}, 1.0, pt(0.0))) < 1e-15);
  CHECK(std::abs(density_derivative(g, MultiIndex{1}, 1.0, pt(0.0), KernelMethod::quadrature)) < 1e-15);
  CHECK(density_derivative(g, MultiIndex{2}, 1.0, pt(0.0)) == doctest::Approx(-0.1410474).epsilon(1e-6));
  CHECK(density_derivative(g, MultiIndex{2}, 1.0, pt(0.0), KernelMethod::quadrature) ==
        doctest::Approx(-0.5 / std::sqrt(4.0 * M_PI)).epsilon(1e-10));
  for (double x : {-2.0, -0.3, 0.0, 1.7})
    CHECK(density_derivative(g, MultiIndex{0}, 1.3, pt(x)) == doctest::Approx(density(g, 1.3, pt(x))).epsilon(1e-14));
}

TEST_CASE("domain errors") {
  CHECK_THROWS_AS(density({2.0, 1}, 0.0, pt(0.0)), DomainError);
  CHECK_THROWS_AS(density({2.0, 1}, -1.0, pt(0.0)), DomainError);
  CHECK_THROWS_AS(density({1.5, 1}, 1.0, pt(0.0), KernelMethod::closed_form), DomainError);
  CHECK_THROWS_AS(density({2.5, 1}, 1.0, pt(0.0)), DomainError);
  CHECK_THROWS_AS(density_derivative({2.0, 2}, MultiIndex{1}, 1.0, std::vector<double>{0.0, 0.0}), DomainError);
}

TEST_CASE("theta_constant examples") {
  for (double alpha : {0.5, 1.0, 1.5, 2.0}) CHECK(theta_constant({alpha, 1}, MultiIndex{1}) == 0.0);
  CHECK(theta_constant({1.0, 1}, MultiIndex{0}) == doctest::Approx(0.3183099).epsilon(1e-7));
  CHECK(theta_constant({2.0, 1}, MultiIndex{2}) == doctest::Approx(0.1410474).epsilon(1e-6));
  CHECK(theta_constant({1.3, 2}, MultiIndex{3, 1}) == 0.0);
  CHECK(theta_constant({1.3, 2}, MultiIndex{2, 1}) == 0.0);
  // alpha = 2 factorises over axes
  const StableParams g2{2.0, 2}, g1{2.0, 1};
  CHECK(theta_constant(g2, MultiIndex{2, 4}) ==
        doctest::Approx(theta_constant(g1, MultiIndex{2}) * theta_constant(g1, MultiIndex{4})).epsilon(1e-13));
}

TEST_CASE("theta_constant equals p_1(0) for k = 0") {
  for (double alpha : {0.7, 1.2, 1.5, 1.9})
    for (int d : {1, 2}) {
      const StableParams p{alpha, d};
      const std::vector<double> origin(static_cast<std::size_t>(d), 0.0);
      CHECK(theta_constant(p, MultiIndex::zero(d)) == doctest::Approx(density(p, 1.0, origin)).epsilon(1e-8));
    }
}

TEST_CASE("kernel grids integrate to one") {
  for (double alpha : {1.5, 2.0}) {
    const StableParams p1{alpha, 1};
    CHECK(grid_mass(kernel_grid(p1, MultiIndex{0}, 1.0, GridSpec::automatic(p1, 1.0, 512))) ==
          doctest::Approx(1.0).epsilon(alpha == 2.0 ? 1e-9 : 2e-2));
    const StableParams p2{alpha, 2};
    CHECK(grid_mass(kernel_grid(p2, MultiIndex::zero(2), 1.0, GridSpec::automatic(p2, 1.0, 128))) ==
          doctest::Approx(1.0).epsilon(alpha == 2.0 ? 1e-9 : 5e-2));
  }
}

TEST_CASE("scaling identities at alpha = 1.5") {
  const StableParams p{1.5, 1};
  for (double t : {0.5, 2.0, 7.0})
    for (double x : {-1.0, 0.0, 0.4, 3.0}) {
      const double y = std::pow(t, -1.0 / 1.5) * x;
      CHECK(density(p, t, pt(x)) == doctest::Approx(std::pow(t, -1.0 / 1.5) * density(p, 1.0, pt(y))).epsilon(1e-9));
      CHECK(density_derivative(p, MultiIndex{2}, t, pt(x)) ==
            doctest::Approx(std::pow(t, -3.0 / 1.5) * density_derivative(p, MultiIndex{2}, 1.0, pt(y))).epsilon(1e-9));
    }
}

TEST_CASE("derivatives agree with central finite differences") {
  const double h = 1e-3;
  for (double alpha : {1.0, 1.5, 2.0}) {
    const StableParams p1{alpha, 1};
    for (double x : {-1.3, -0.4, 0.6, 2.1}) {
      const double f0 = density(p1, 1.0, pt(x)), fp = density(p1, 1.0, pt(x + h)), fm = density(p1, 1.0, pt(x - h));
      const double d1 = density_derivative(p1, MultiIndex{1}, 1.0, pt(x), KernelMethod::quadrature);
      const double d2 = density_derivative(p1, MultiIndex{2}, 1.0, pt(x), KernelMethod::quadrature);
      CHECK((fp - fm) / (2 * h) == doctest::Approx(d1).epsilon(1e-4));
      CHECK((fp - 2 * f0 + fm) / (h * h) == doctest::Approx(d2).epsilon(1e-4));
    }
    const StableParams p2{alpha, 2};
    const std::vector<double> x{0.7, -0.5};
    auto f = [&](double a, double b) { return density(p2, 1.0, std::vector<double>{a, b}); };
    const double dx = (f(x[0] + h, x[1]) - f(x[0] - h, x[1])) / (2 * h);
    const double dxy = (f(x[0] + h, x[1] + h) - f(x[0] + h, x[1] - h) - f(x[0] - h, x[1] + h) + f(x[0] - h, x[1] - h)) /
                       (4 * h * h);
    CHECK(dx == doctest::Approx(density_derivative(p2, MultiIndex{1, 0}, 1.0, x, KernelMethod::quadrature)).epsilon(1e-4));
    CHECK(dxy == doctest::Approx(density_derivative(p2, MultiIndex{1, 1}, 1.0, x, KernelMethod::quadrature)).epsilon(1e-4));
  }
}

TEST_CASE("quadrature matches closed forms in three dimensions") {
  const std::vector<double> x{0.3, -0.2, 0.5};
  for (double alpha : {1.0, 2.0}) {
    const StableParams p{alpha, 3};
    CHECK(density(p, 1.2, x, KernelMethod::quadrature) == doctest::Approx(density(p, 1.2, x, KernelMethod::closed_form)).epsilon(1e-8));
    const MultiIndex k{1, 0, 1};
    CHECK(density_derivative(p, k, 1.2, x, KernelMethod::quadrature) ==
          doctest::Approx(density_derivative(p, k, 1.2, x, KernelMethod::closed_form)).epsilon(1e-8));
  }
}

TEST_CASE("kernel table interpolation") {
  for (double alpha : {1.5, 2.0}) {
    const StableParams p{alpha, 1};
    const auto table = KernelTable::build_default(p, MultiIndex{0}, 1.0);
    CHECK_FALSE(table.accuracy_warning());
    for (double x : {-3.3, -0.7, 0.0, 0.123, 2.5}) {
      bool inside = false;
      CHECK(table(pt(x), &inside) == doctest::Approx(density(p, 1.0, pt(x))).epsilon(1e-7));
      CHECK(inside);
    }
    bool inside = true;
    CHECK(table(pt(1e9), &inside) == 0.0);
    CHECK_FALSE(inside);
  }
  const StableParams p2{1.5, 2};
  const auto t2 = KernelTable::build_default(p2, MultiIndex{1, 0}, 2.0);
  const std::vector<double> x{0.4, -0.9};
  CHECK(t2(x) == doctest::Approx(density_derivative(p2, MultiIndex{1, 0}, 2.0, x)).epsilon(1e-5));
}

TEST_CASE("semigroup of the kernel is the kernel at t + 1") {
  for (double alpha : {1.5, 2.0}) {
    const StableParams p{alpha, 1};
    const auto f = TestFunction::kernel_snapshot(p, 1.0);
    const GridSpec grid = GridSpec::automatic(p, 0.5, 128);
    const auto out = semigroup_apply(p, f, 0.5, grid);
    const auto want = kernel_grid(p, MultiIndex{0}, 1.5, grid);
    for (std::size_t i = 0; i < out.values.size(); i += 7) CHECK(out.values[i] == doctest::Approx(want.values[i]).epsilon(1e-7));
  }
}

TEST_CASE("Gaussian semigroup matches brute-force convolution") {
  const StableParams p{2.0, 1};
  const auto f = TestFunction::gaussian_bump({0.0});
  const double t = 0.7;
  for (double x : {-2.0, 0.0, 0.9}) {
    // spatial trapezoid over [-20, 20]
    double s = 0.0;
    const int n = 40000;
    const double h = 40.0 / n;
    for (int i = 0; i <= n; ++i) {
      const double y = -20.0 + i * h;
      const double w = (i == 0 || i == n) ? 0.5 : 1.0;
      s += w * std::exp(-y * y) * oracle::gauss_derivative({0}, t, {x - y});
    }
    CHECK(semigroup_value(p, f, t, pt(x)) == doctest::Approx(s * h).epsilon(1e-9));
    CHECK(semigroup_value(p, f, t, pt(x)) == doctest::Approx(oracle::heat_gaussian(1.0, t, x)).epsilon(1e-10));
  }
}

TEST_CASE("semigroup property and strong continuity") {
  const StableParams p{1.5, 1};
  const auto f = TestFunction::gaussian_bump({0.0});
  for (double x : {-1.0, 0.0, 0.5}) {
    const auto once = semigroup_value(p, f, 0.8, pt(x));
    // the table is zero off its grid, so it is applied as a compactly supported function
    Tabulated table = std::get<Tabulated>(semigroup_function(p, f, 0.3).kind());
    table.compact_tail = true;
    const auto inner = TestFunction::tabulated(table);
    CHECK(semigroup_value(p, inner, 0.5, pt(x)) == doctest::Approx(once).epsilon(1e-4));
  }
  double prev = 1e9;
  for (double t : {0.1, 0.01, 0.001}) {
    double sup = 0.0;
    for (double x = -3.0; x <= 3.0; x += 0.25) sup = std::max(sup, std::abs(semigroup_value(p, f, t, pt(x)) - f(pt(x))));
    CHECK(sup < prev);
    prev = sup;
  }
  CHECK(prev < 1e-2);
}

TEST_CASE("semigroup_function closed forms") {
  const StableParams g{2.0, 1};
  const auto f = TestFunction::gaussian_bump({0.5}, 2.0, 3.0);
  const auto tf = semigroup_function(g, f, 0.4);
  CHECK(std::holds_alternative<GaussianBump>(tf.kind()));
  for (double x : {-1.0, 0.5, 2.0}) CHECK(tf(pt(x)) == doctest::Approx(semigroup_value(g, f, 0.4, pt(x))).epsilon(1e-10));
  const StableParams s{1.5, 1};
  const auto snap = semigroup_function(s, TestFunction::kernel_snapshot(s, 1.0), 2.0);
  CHECK(snap(pt(0.3)) == doctest::Approx(density(s, 3.0, pt(0.3))).epsilon(1e-10));
  const auto c = semigroup_function(s, TestFunction::constant(1, 2.5), 4.0);
  CHECK(c(pt(10.0)) == 2.5);
  const auto tab = semigroup_function(s, TestFunction::gaussian_bump({0.0}), 1.0);
  CHECK(std::holds_alternative<Tabulated>(tab.kind()));
  for (double x : {-1.0, 0.0, 1.3}) CHECK(tab(pt(x)) == doctest::Approx(semigroup_value(s, TestFunction::gaussian_bump({0.0}), 1.0, pt(x))).epsilon(1e-4));
}

TEST_CASE("expansion examples") {
  const StableParams g{2.0, 1};
  const auto f = TestFunction::gaussian_bump({0.0});
  const auto grid = GridSpec::automatic(g, 10.0, 256);
  const auto r0 = expansion_approx(g, f, 10.0, 0, grid);
  REQUIRE(r0.per_term.size() == 1);
  CHECK(r0.per_term[0].coefficient == doctest::Approx(1.7724539).epsilon(1e-7));
  const auto r1 = expansion_approx(g, f, 10.0, 1, grid);
  REQUIRE(r1.per_term.size() == 2);
  CHECK(r1.per_term[1].coefficient == 0.0);
  CHECK(r1.scaled_sup_error * std::pow(10.0, -0.5) == doctest::Approx(r0.scaled_sup_error).epsilon(1e-12));
  const auto a = expansion_approx(g, f, 10.0, 2, grid);
  const auto b = expansion_approx(g, f, 40.0, 2, GridSpec::automatic(g, 40.0, 256));
  CHECK(b.scaled_sup_error < a.scaled_sup_error);
  CHECK(a.scaled_sup_error >= 0.0);
  CHECK_THROWS_AS(expansion_approx({1.0, 1}, TestFunction::kernel_snapshot({1.0, 1}, 1.0), 10.0, 2, grid), DomainError);
}

TEST_CASE("local limit for a probability density") {
  const StableParams p{1.5, 1};
  const auto f = TestFunction::kernel_snapshot(p, 1.0);
  double prev = 1e9;
  for (double t : {5.0, 10.0, 20.0, 40.0}) {
    const auto r = expansion_approx(p, f, t, 0, GridSpec::automatic(p, t, 256));
    CHECK(r.per_term[0].coefficient == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r.scaled_sup_error < prev);
    prev = r.scaled_sup_error;
  }
}

TEST_CASE("multiindex enumeration") {
  const auto a = multiindex_enumerate(1, 2);
  REQUIRE(a.size() == 3);
  CHECK(a[0] == MultiIndex{0});
  CHECK(a[1] == MultiIndex{1});
  CHECK(a[2] == MultiIndex{2});
  const auto b = multiindex_enumerate(2, 1);
  REQUIRE(b.size() == 3);
  CHECK(b[0] == MultiIndex{0, 0});
  CHECK(b[1] == MultiIndex{1, 0});
  CHECK(b[2] == MultiIndex{0, 1});
  CHECK(multiindex_enumerate(2, 2).size() == 6);
  CHECK(multiindex_enumerate(3, 4).size() == 35);
  CHECK(MultiIndex{2, 3}.factorial() == 12.0);
  CHECK(MultiIndex{2, 3}.order() == 5);
  CHECK(parse_multiindex("1-0", 2) == MultiIndex{1, 0});
  CHECK(parse_multiindex("2", 1) == MultiIndex{2});
}
