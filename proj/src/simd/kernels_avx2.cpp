// Compiled with -mavx2 -mfma; only reached after a runtime CPU check.

#include <immintrin.h>

#include <bit>
#include <cmath>
#include <cstdint>

#include "sslab/simd/kernels.hpp"

namespace sslab::simd {
namespace {

// exp on [-708, 0]: round-to-nearest range reduction by ln 2, degree-13
// Taylor polynomial on |r| <= ln2/2, exponent assembled in the bits.
// Inputs below -708 return 0.
inline __m256d exp_pd(__m256d x) {
  const __m256d floor_x = _mm256_set1_pd(-708.0);
  const __m256d underflow = _mm256_cmp_pd(x, floor_x, _CMP_LT_OQ);
  x = _mm256_max_pd(x, floor_x);
  const __m256d n = _mm256_round_pd(_mm256_mul_pd(x, _mm256_set1_pd(1.4426950408889634074)),
                                    _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  __m256d r = _mm256_fnmadd_pd(n, _mm256_set1_pd(6.93147180369123816490e-01), x);
  r = _mm256_fnmadd_pd(n, _mm256_set1_pd(1.90821492927058770002e-10), r);

  static constexpr double kInvFact[14] = {1.0,
                                          1.0,
                                          1.0 / 2.0,
                                          1.0 / 6.0,
                                          1.0 / 24.0,
                                          1.0 / 120.0,
                                          1.0 / 720.0,
                                          1.0 / 5040.0,
                                          1.0 / 40320.0,
                                          1.0 / 362880.0,
                                          1.0 / 3628800.0,
                                          1.0 / 39916800.0,
                                          1.0 / 479001600.0,
                                          1.0 / 6227020800.0};
  __m256d p = _mm256_set1_pd(kInvFact[13]);
  for (int k = 12; k >= 0; --k) p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(kInvFact[k]));

  const __m256i n64 = _mm256_cvtepi32_epi64(_mm256_cvtpd_epi32(n));
  const __m256i bits = _mm256_slli_epi64(_mm256_add_epi64(n64, _mm256_set1_epi64x(1023)), 52);
  const __m256d result = _mm256_mul_pd(p, _mm256_castsi256_pd(bits));
  return _mm256_andnot_pd(underflow, result);
}

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

inline __m256d horner_pd(const std::vector<double>& c, __m256d u) {
  if (c.empty()) return _mm256_set1_pd(1.0);
  __m256d acc = _mm256_set1_pd(c.back());
  for (std::size_t k = c.size() - 1; k-- > 0;) acc = _mm256_fmadd_pd(acc, u, _mm256_set1_pd(c[k]));
  return acc;
}

double poly_gauss_sum(const PointsView& p, const PolyGaussian& g) {
  const __m256d neg_a = _mm256_set1_pd(-g.inverse_width);
  __m256d total = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= p.count; i += 4) {
    __m256d r2 = _mm256_setzero_pd();
    __m256d poly = _mm256_set1_pd(1.0);
    for (int j = 0; j < p.dim; ++j) {
      const auto axis = static_cast<std::size_t>(j);
      const __m256d u = _mm256_sub_pd(_mm256_loadu_pd(p.axes[axis] + i), _mm256_set1_pd(g.center[axis]));
      r2 = _mm256_fmadd_pd(u, u, r2);
      if (!g.poly[axis].empty()) poly = _mm256_mul_pd(poly, horner_pd(g.poly[axis], u));
    }
    total = _mm256_fmadd_pd(poly, exp_pd(_mm256_mul_pd(neg_a, r2)), total);
  }
  double tail = 0.0;
  if (i < p.count) {
    PointsView rest = p;
    for (int j = 0; j < p.dim; ++j) rest.axes[static_cast<std::size_t>(j)] += i;
    rest.count = p.count - i;
    PolyGaussian unit = g;
    unit.amplitude = 1.0;
    tail = scalar_kernels().poly_gauss_sum(rest, unit);
  }
  return g.amplitude * (hsum(total) + tail);
}

double table_sum_1d(const double* x, std::size_t n, const Table1D& t, std::size_t* outside) {
  const __m256d origin = _mm256_set1_pd(t.origin);
  const __m256d inv_h = _mm256_set1_pd(1.0 / t.spacing);
  const __m256d last = _mm256_set1_pd(static_cast<double>(t.size - 1));
  const __m256d max_start = _mm256_set1_pd(static_cast<double>(t.size - 4));
  const __m256d zero = _mm256_setzero_pd();
  const __m256d one = _mm256_set1_pd(1.0), two = _mm256_set1_pd(2.0), three = _mm256_set1_pd(3.0);
  const __m256d sixth = _mm256_set1_pd(1.0 / 6.0), half = _mm256_set1_pd(0.5);
  __m256d total = _mm256_setzero_pd();
  std::size_t missed = 0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d s = _mm256_mul_pd(_mm256_sub_pd(_mm256_loadu_pd(x + i), origin), inv_h);
    const __m256d inside = _mm256_and_pd(_mm256_cmp_pd(s, zero, _CMP_GE_OQ), _mm256_cmp_pd(s, last, _CMP_LE_OQ));
    missed += static_cast<std::size_t>(std::popcount(static_cast<unsigned>(~_mm256_movemask_pd(inside) & 0xF)));
    s = _mm256_blendv_pd(zero, s, inside);
    const __m256d start = _mm256_min_pd(
        _mm256_max_pd(_mm256_sub_pd(_mm256_floor_pd(s), one), zero), max_start);
    const __m128i j0 = _mm256_cvttpd_epi32(start);
    const __m256d a = _mm256_sub_pd(s, start);
    const __m256d b = _mm256_sub_pd(a, one), c = _mm256_sub_pd(a, two), d = _mm256_sub_pd(a, three);
    const __m256d cd = _mm256_mul_pd(c, d);
    const __m256d ab = _mm256_mul_pd(a, b);
    const __m256d w0 = _mm256_mul_pd(_mm256_mul_pd(b, cd), _mm256_set1_pd(-1.0 / 6.0));
    const __m256d w1 = _mm256_mul_pd(_mm256_mul_pd(a, cd), half);
    const __m256d w2 = _mm256_mul_pd(_mm256_mul_pd(ab, d), _mm256_set1_pd(-0.5));
    const __m256d w3 = _mm256_mul_pd(_mm256_mul_pd(ab, c), sixth);
    const __m256d v0 = _mm256_i32gather_pd(t.values, j0, 8);
    const __m256d v1 = _mm256_i32gather_pd(t.values + 1, j0, 8);
    const __m256d v2 = _mm256_i32gather_pd(t.values + 2, j0, 8);
    const __m256d v3 = _mm256_i32gather_pd(t.values + 3, j0, 8);
    __m256d val = _mm256_mul_pd(w0, v0);
    val = _mm256_fmadd_pd(w1, v1, val);
    val = _mm256_fmadd_pd(w2, v2, val);
    val = _mm256_fmadd_pd(w3, v3, val);
    total = _mm256_add_pd(total, _mm256_and_pd(val, inside));
  }
  double tail = 0.0;
  if (i < n) tail = scalar_kernels().table_sum_1d(x + i, n - i, t, &missed);
  if (outside) *outside += missed;
  return hsum(total) + tail;
}

void matvec(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = a + r * cols;
    __m256d acc0 = _mm256_setzero_pd(), acc1 = _mm256_setzero_pd();
    std::size_t c = 0;
    for (; c + 8 <= cols; c += 8) {
      acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(row + c), _mm256_loadu_pd(x + c), acc0);
      acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(row + c + 4), _mm256_loadu_pd(x + c + 4), acc1);
    }
    for (; c + 4 <= cols; c += 4) acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(row + c), _mm256_loadu_pd(x + c), acc0);
    double acc = hsum(_mm256_add_pd(acc0, acc1));
    for (; c < cols; ++c) acc += row[c] * x[c];
    y[r] = acc;
  }
}

void exp_nonpositive(const double* x, std::size_t n, double* out) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) _mm256_storeu_pd(out + i, exp_pd(_mm256_loadu_pd(x + i)));
  for (; i < n; ++i) out[i] = std::exp(x[i]);
}

}  // namespace

const KernelSet& avx2_kernel_set() {
  static const KernelSet set{Isa::avx2, &poly_gauss_sum, &table_sum_1d, &matvec, &exp_nonpositive};
  return set;
}

}  // namespace sslab::simd
