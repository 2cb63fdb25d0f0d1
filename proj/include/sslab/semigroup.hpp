#pragma once

// Semigroup action T_t f and the truncated kernel expansion
//   L_t^N f = sum_{|k| <= N} (-1)^{|k|} lambda^k(f) d^k p_t.

#include <span>
#include <vector>

#include "sslab/measures.hpp"
#include "sslab/stable_kernel.hpp"

namespace sslab {

/// T_t f on the grid. Constants map to themselves; everything else needs an
/// integrable f with a Fourier transform.
GridFunction semigroup_apply(const StableParams& params, const TestFunction& f, double t, const GridSpec& grid);

/// (T_t f)(x) by direct quadrature.
double semigroup_value(const StableParams& params, const TestFunction& f, double t, std::span<const double> x);

/// T_t f as a test function: closed form when the family is preserved,
/// otherwise a tabulation of semigroup_apply on an automatic grid.
TestFunction semigroup_function(const StableParams& params, const TestFunction& f, double t,
                                int points_per_axis = 0);

/// m(T_t f) = sum over atoms of mass * (T_t f)(location).
double measure_semigroup(const StableParams& params, const FiniteMeasure& m, const TestFunction& f, double t);

struct ExpansionTerm {
  MultiIndex k;
  /// (-1)^{|k|} lambda^k(f)
  double coefficient = 0.0;
  GridFunction kernel;
};

struct ExpansionResult {
  int order = 0;
  double t = 0.0;
  std::vector<ExpansionTerm> per_term;
  GridFunction approx;
  GridFunction exact;
  /// t^{(N+d)/alpha} sup_x |T_t f - L_t^N f|
  double scaled_sup_error = 0.0;
  bool accuracy_warning = false;
};

ExpansionResult expansion_approx(const StableParams& params, const TestFunction& f, double t, int N,
                                 const GridSpec& grid);

}  // namespace sslab
