#include <cmath>

#include "sslab/simd/kernels.hpp"

namespace sslab::simd {
namespace {

double horner(const std::vector<double>& c, double x) {
  if (c.empty()) return 1.0;
  double acc = c.back();
  for (std::size_t k = c.size() - 1; k-- > 0;) acc = acc * x + c[k];
  return acc;
}

double poly_gauss_sum(const PointsView& p, const PolyGaussian& g) {
  double total = 0.0;
  for (std::size_t i = 0; i < p.count; ++i) {
    double r2 = 0.0;
    double poly = 1.0;
    for (int j = 0; j < p.dim; ++j) {
      const double u = p.axes[static_cast<std::size_t>(j)][i] - g.center[static_cast<std::size_t>(j)];
      r2 += u * u;
      poly *= horner(g.poly[static_cast<std::size_t>(j)], u);
    }
    total += poly * std::exp(-g.inverse_width * r2);
  }
  return g.amplitude * total;
}

double table_sum_1d(const double* x, std::size_t n, const Table1D& t, std::size_t* outside) {
  const double last = static_cast<double>(t.size - 1);
  const double max_start = static_cast<double>(t.size - 4);
  double total = 0.0;
  std::size_t missed = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double s = (x[i] - t.origin) / t.spacing;
    if (!(s >= 0.0 && s <= last)) {
      ++missed;
      continue;
    }
    const double start = std::fmin(std::fmax(std::floor(s) - 1.0, 0.0), max_start);
    const auto j0 = static_cast<std::size_t>(start);
    double w[4];
    detail::lagrange4(s - start, w);
    total += w[0] * t.values[j0] + w[1] * t.values[j0 + 1] + w[2] * t.values[j0 + 2] + w[3] * t.values[j0 + 3];
  }
  if (outside) *outside += missed;
  return total;
}

void matvec(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = a + r * cols;
    double acc = 0.0;
    for (std::size_t c = 0; c < cols; ++c) acc += row[c] * x[c];
    y[r] = acc;
  }
}

void exp_nonpositive(const double* x, std::size_t n, double* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = std::exp(x[i]);
}

}  // namespace

const KernelSet& scalar_kernels() {
  static const KernelSet set{Isa::scalar, &poly_gauss_sum, &table_sum_1d, &matvec, &exp_nonpositive};
  return set;
}

}  // namespace sslab::simd
