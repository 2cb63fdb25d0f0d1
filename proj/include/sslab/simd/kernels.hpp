#pragma once

// Data-parallel inner loops. Every kernel has a scalar reference
// implementation and (on x86-64 builds) an AVX2+FMA variant; the variant is
// picked once at runtime from the CPU features. Setting SSLAB_SIMD=scalar in
// the environment forces the reference path.

#include <array>
#include <cstddef>
#include <vector>

namespace sslab::simd {

enum class Isa { scalar, avx2 };

const char* isa_name(Isa isa);

/// Axis-major coordinates: axes[j][i] is coordinate j of point i.
struct PointsView {
  std::array<const double*, 3> axes{};
  std::size_t count = 0;
  int dim = 1;
};

/// g(x) = amplitude * prod_j P_j(x_j - c_j) * exp(-a |x - c|^2).
/// P_j holds ascending coefficients; an empty P_j means the constant 1.
struct PolyGaussian {
  int dim = 1;
  std::array<double, 3> center{};
  double inverse_width = 1.0;
  double amplitude = 1.0;
  std::array<std::vector<double>, 3> poly{};
};

/// Uniform 1-d table for 4-point Lagrange interpolation.
struct Table1D {
  const double* values = nullptr;
  std::size_t size = 0;
  double origin = 0.0;
  double spacing = 1.0;
};

struct KernelSet {
  Isa isa;
  /// sum_i g(x_i)
  double (*poly_gauss_sum)(const PointsView& points, const PolyGaussian& g);
  /// sum_i table(x_i); points outside the table contribute 0 and are counted.
  double (*table_sum_1d)(const double* x, std::size_t n, const Table1D& table, std::size_t* outside);
  /// y = A x with A row-major rows x cols.
  void (*matvec)(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y);
  /// out_i = exp(x_i) for x_i <= 0.
  void (*exp_nonpositive)(const double* x, std::size_t n, double* out);
};

const KernelSet& scalar_kernels();
/// nullptr when the variant was not compiled in or the CPU lacks AVX2/FMA.
const KernelSet* avx2_kernels();
/// The variant used by the library.
const KernelSet& active_kernels();

namespace detail {
// Lagrange weights on nodes 0,1,2,3 at local coordinate u in [0, 3].
inline void lagrange4(double u, double w[4]) {
  const double a = u, b = u - 1.0, c = u - 2.0, d = u - 3.0;
  w[0] = -b * c * d / 6.0;
  w[1] = a * c * d / 2.0;
  w[2] = -a * b * d / 2.0;
  w[3] = a * b * c / 6.0;
}
}  // namespace detail

}  // namespace sslab::simd
