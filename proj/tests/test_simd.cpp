#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <string>
#include <random>
#include <vector>

#include "sslab/simd/kernels.hpp"

using namespace sslab::simd;

namespace {

std::vector<double> uniform(std::size_t n, double lo, double hi, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

}  // namespace

TEST_CASE("scalar exp matches libm") {
  const auto& k = scalar_kernels();
  const auto x = uniform(1000, -700.0, 0.0, 1);
  std::vector<double> y(x.size());
  k.exp_nonpositive(x.data(), x.size(), y.data());
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(y[i] == doctest::Approx(std::exp(x[i])).epsilon(1e-14));
}

TEST_CASE("scalar poly_gauss_sum against direct evaluation") {
  const auto xs = uniform(101, -3.0, 3.0, 2);
  PointsView pv;
  pv.axes[0] = xs.data();
  pv.count = xs.size();
  PolyGaussian g;
  g.center[0] = 0.2;
  g.inverse_width = 0.7;
  g.amplitude = 1.3;
  g.poly[0] = {1.0, -0.5, 2.0};
  double want = 0.0;
  for (double x : xs) {
    const double u = x - 0.2;
    want += 1.3 * (1.0 - 0.5 * u + 2.0 * u * u) * std::exp(-0.7 * u * u);
  }
  CHECK(scalar_kernels().poly_gauss_sum(pv, g) == doctest::Approx(want).epsilon(1e-13));
}

TEST_CASE("AVX2 kernels match the scalar reference") {
  const KernelSet* v = avx2_kernels();
  if (v == nullptr) {
    MESSAGE("AVX2 variant unavailable; equivalence not exercised");
    return;
  }
  const KernelSet& s = scalar_kernels();
  const char* forced = std::getenv("SSLAB_SIMD");
  CHECK(active_kernels().isa == (forced && std::string(forced) == "scalar" ? Isa::scalar : Isa::avx2));

  for (std::size_t n : {0u, 1u, 3u, 4u, 7u, 1000u, 4099u}) {
    const auto x = uniform(n, -745.0, 0.0, 3);
    std::vector<double> a(n), b(n);
    s.exp_nonpositive(x.data(), n, a.data());
    v->exp_nonpositive(x.data(), n, b.data());
    for (std::size_t i = 0; i < n; ++i) CHECK(b[i] == doctest::Approx(a[i]).epsilon(1e-13));

    for (int d = 1; d <= 3; ++d) {
      std::vector<std::vector<double>> axes;
      PointsView pv;
      pv.count = n;
      pv.dim = d;
      PolyGaussian g;
      g.dim = d;
      g.inverse_width = 0.4;
      for (int j = 0; j < d; ++j) {
        axes.push_back(uniform(n, -4.0, 4.0, 10 + static_cast<unsigned>(j)));
        g.center[static_cast<std::size_t>(j)] = 0.1 * j;
        g.poly[static_cast<std::size_t>(j)] = {0.5, 0.0, -1.0, 0.25 * j};
      }
      for (int j = 0; j < d; ++j) pv.axes[static_cast<std::size_t>(j)] = axes[static_cast<std::size_t>(j)].data();
      const double ref = s.poly_gauss_sum(pv, g);
      CHECK(v->poly_gauss_sum(pv, g) == doctest::Approx(ref).epsilon(1e-12).scale(1.0));
    }

    const auto vals = uniform(257, -1.0, 1.0, 4);
    Table1D t{vals.data(), vals.size(), -2.0, 4.0 / 256.0};
    const auto pts = uniform(n, -2.5, 2.5, 5);
    std::size_t oa = 0, ob = 0;
    const double ra = s.table_sum_1d(pts.data(), n, t, &oa);
    const double rb = v->table_sum_1d(pts.data(), n, t, &ob);
    CHECK(rb == doctest::Approx(ra).epsilon(1e-12).scale(1.0));
    CHECK(oa == ob);
  }

  for (std::size_t rows : {1u, 5u, 33u})
    for (std::size_t cols : {1u, 4u, 7u, 129u}) {
      const auto A = uniform(rows * cols, -1.0, 1.0, 6);
      const auto x = uniform(cols, -1.0, 1.0, 7);
      std::vector<double> ya(rows), yb(rows);
      s.matvec(A.data(), rows, cols, x.data(), ya.data());
      v->matvec(A.data(), rows, cols, x.data(), yb.data());
      for (std::size_t i = 0; i < rows; ++i) CHECK(yb[i] == doctest::Approx(ya[i]).epsilon(1e-12).scale(1.0));
    }
}
