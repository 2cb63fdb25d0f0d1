#pragma once

// Internal Fourier-inversion engine shared by kernels and semigroup action.
//
//   out(x) = (2 pi)^{-d} \int_{R^d} e^{i x.theta} e^{-t |theta|^alpha} g(theta) dtheta
//
// Folding the 2^d orthants onto R_+^d gives
//   out(x) = sum_pi \int_{R_+^d} prod_j c_{pi_j}(x_j theta_j) A_pi(theta) dtheta,
// with c_0 = cos, c_1 = sin, pi ranging over parity patterns and
//   A_pi = pi^{-d} e^{-t|theta|^alpha} Re[i^{#odd(pi)} g_pi(theta)],
//   g_pi = 2^{-d} sum_sigma (prod_{j odd in pi} sigma_j) g(sigma theta).
// Every term is real, so the result carries no imaginary residue.

#include <complex>
#include <functional>
#include <span>
#include <vector>

#include "sslab/params.hpp"
#include "sslab/stable_kernel.hpp"

namespace sslab::spectral {

struct AxisRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// Gauss-Legendre nodes/weights on [-1, 1].
const AxisRule& gauss_legendre(int order);

/// Composite rule on [0, theta_max] resolving e^{i x theta} for |x| <= x_max.
/// Panels are geometrically graded towards 0 when alpha != 2 (the |theta|^alpha
/// cusp), uniform of width <= min(theta_max/8, 6/x_max) elsewhere.
AxisRule frequency_rule(double theta_max, double alpha, double x_max, int dim);

/// Smallest Theta with e^{-t Theta^alpha} Theta^{order+dim} below `level`
/// relative to the integral scale t^{-(order+dim)/alpha}.
double truncation_radius(double alpha, double t, int order, int dim, double level);

/// Real amplitudes Re[i^{#odd(pi)} g_pi(theta)] for every parity pattern pi
/// (bit j of pi set = axis j odd), at a node theta in R_+^d.
using AmplitudeFn = std::function<void(std::span<const double> theta, std::span<double> amplitudes)>;

struct Spectrum {
  int dim = 1;
  /// Bit mask over parity patterns that may be non-zero.
  unsigned active = 0;
  AmplitudeFn amplitudes;
};

/// Spectrum of d^k: g = (i theta)^k.
Spectrum derivative_spectrum(const MultiIndex& k);
/// Spectrum of a general real function from its complex transform.
Spectrum general_spectrum(int dim, std::function<std::complex<double>(std::span<const double>)> transform);

/// Point evaluation with the given truncation radius.
double invert_at(const StableParams& params, double t, std::span<const double> x, const Spectrum& spectrum,
                 double theta_max);

/// Evaluation on the dual spatial grid of `grid`.
GridFunction invert_on_grid(const StableParams& params, double t, const GridSpec& grid, const Spectrum& spectrum);

}  // namespace sslab::spectral
