#pragma once

// Deterministic numerics for the isotropic alpha-stable semigroup:
//   p_t(x)      = (2 pi)^{-d} \int e^{i x.theta} e^{-t |theta|^alpha} dtheta
//   d^k p_t(x)  = (2 pi)^{-d} \int e^{i x.theta} (i theta)^k e^{-t |theta|^alpha} dtheta
//   theta^k     = (2 pi)^{-d} \int e^{-|theta|^alpha} theta^k dtheta
//
// Two independent routes are provided for kernel values: closed forms for
// alpha = 2 (Gauss) and alpha = 1 (Cauchy), and Gauss-Legendre quadrature of
// the Fourier integral for any alpha. Gridded values come from a separable
// parity-matched cosine/sine transform of the same quadrature; wide 1-d..3-d
// interpolation tables come from an FFT.

#include <span>
#include <string>
#include <vector>

#include "sslab/params.hpp"

namespace sslab {

/// Absolute tolerance targeted for kernel values at t >= 1.
inline constexpr double kKernelTolerance = 1e-8;
/// Spectral truncation level: e^{-t Theta^alpha} below this.
inline constexpr double kSpectralTruncation = 1e-12;

enum class KernelMethod { automatic, closed_form, quadrature };

/// Frequency truncation radius plus spatial resolution. The spatial grid is
/// the dual of the frequency box: spacing pi / half_extent, nodes
/// (j - P/2) * spacing for j = 0..P-1 on every axis (so x = 0 is a node).
struct GridSpec {
  double half_extent = 0.0;
  int points_per_axis = 64;

  void validate() const;
  double spacing() const;
  double coordinate(int j) const;
  double max_coordinate() const;
  /// Smallest half_extent with e^{-t Theta^alpha} < kSpectralTruncation.
  static double minimal_half_extent(const StableParams& params, double t);
  static GridSpec automatic(const StableParams& params, double t, int points_per_axis = 64);
};

/// Samples on the tensor spatial grid of a GridSpec, axis 0 slowest.
struct GridFunction {
  int dim = 1;
  GridSpec grid;
  std::vector<double> values;
  bool accuracy_warning = false;
  std::string warning;

  std::size_t size() const { return values.size(); }
  double cell_volume() const;
  double sup_abs() const;
  /// Index of the grid node closest to the origin.
  std::size_t origin_index() const;
  /// Coordinates of flat index `flat`.
  std::vector<double> point(std::size_t flat) const;
};

struct KernelValue {
  double value = 0.0;
  KernelMethod method = KernelMethod::automatic;
  bool accuracy_warning = false;
};

/// p_t(x). Throws DomainError for t <= 0 or a mismatched point dimension.
double density(const StableParams& params, double t, std::span<const double> x,
               KernelMethod method = KernelMethod::automatic);

/// d^k p_t(x), real for every input.
double density_derivative(const StableParams& params, const MultiIndex& k, double t, std::span<const double> x,
                          KernelMethod method = KernelMethod::automatic);

/// Same as density_derivative, with the route taken and accuracy flag.
KernelValue density_derivative_info(const StableParams& params, const MultiIndex& k, double t,
                                    std::span<const double> x, KernelMethod method = KernelMethod::automatic);

/// theta^k_{d,alpha}; exactly 0 whenever some k_i is odd.
double theta_constant(const StableParams& params, const MultiIndex& k);

/// Asymptotic coefficient c with p_1(x) ~ c |x|^{-d-alpha} for alpha < 2.
double stable_tail_constant(const StableParams& params);

/// d^k p_t sampled on the grid.
GridFunction kernel_grid(const StableParams& params, const MultiIndex& k, double t, const GridSpec& grid);

/// Gridded d^k p_t with separable 4-point Lagrange interpolation off-grid.
/// Points outside the table evaluate to 0 and are counted by the caller.
class KernelTable {
 public:
  /// FFT-built table on a uniform grid with the given half width and spacing.
  static KernelTable build(const StableParams& params, const MultiIndex& k, double t, double half_width,
                           double spacing);
  /// Default resolution tied to the kernel scale t^{1/alpha}.
  static KernelTable build_default(const StableParams& params, const MultiIndex& k, double t);

  int dim() const { return dim_; }
  double origin() const { return origin_; }
  double spacing() const { return spacing_; }
  std::size_t points_per_axis() const { return n_; }
  std::span<const double> values() const { return values_; }
  /// Periodic-image error estimate of the FFT build.
  double aliasing_estimate() const { return aliasing_; }
  bool accuracy_warning() const { return aliasing_ > kKernelTolerance; }

  /// Interpolated value; `inside` is cleared for points outside the table.
  double operator()(std::span<const double> x, bool* inside = nullptr) const;

 private:
  int dim_ = 1;
  std::size_t n_ = 0;
  double origin_ = 0.0;
  double spacing_ = 1.0;
  double aliasing_ = 0.0;
  std::vector<double> values_;
};

}  // namespace sslab
