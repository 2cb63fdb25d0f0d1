#include "sslab/stable_kernel.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <shared_mutex>
#include <tuple>

#include "spectral.hpp"
#include "sslab/errors.hpp"
#include "sslab/simd/kernels.hpp"

namespace sslab {
namespace {

constexpr double kPi = std::numbers::pi;
// Relative truncation for pointwise quadrature.
constexpr double kPointTruncation = 1e-16;

void check_time(double t) {
  if (!(t > 0.0) || !std::isfinite(t)) throw DomainError("kernel time t must be positive and finite");
}

void check_point(const StableParams& params, std::span<const double> x) {
  if (static_cast<int>(x.size()) != params.dim) throw DomainError("point dimension does not match params.dim");
}

void check_index(const StableParams& params, const MultiIndex& k) {
  if (k.dim() != params.dim) throw DomainError("multi-index dimension does not match params.dim");
}

// d^k F(|x|^2 + shift) for a radial profile F, given its derivatives F^{(n)}
// at u = |x|^2 + shift. Expands each axis by Faa di Bruno for x_i^2.
template <class Profile>
double radial_derivative(const MultiIndex& k, std::span<const double> x, Profile&& profile_derivative) {
  const int d = k.dim();
  double total = 0.0;
  std::vector<int> j(static_cast<std::size_t>(d), 0);
  while (true) {
    double coef = 1.0;
    int used = 0;
    for (int i = 0; i < d; ++i) {
      const int ki = k[i], ji = j[static_cast<std::size_t>(i)];
      const int rest = ki - 2 * ji;
      coef *= std::tgamma(ki + 1.0) / (std::tgamma(ji + 1.0) * std::tgamma(rest + 1.0));
      coef *= std::pow(2.0 * x[static_cast<std::size_t>(i)], rest);
      used += ki - ji;
    }
    total += coef * profile_derivative(used);
    int i = 0;
    for (; i < d; ++i) {
      auto& ji = j[static_cast<std::size_t>(i)];
      if (2 * (ji + 1) <= k[i]) {
        ++ji;
        break;
      }
      ji = 0;
    }
    if (i == d) break;
  }
  return total;
}

double gaussian_derivative(const MultiIndex& k, double t, std::span<const double> x) {
  const int d = k.dim();
  double u = 0.0;
  for (double v : x) u += v * v;
  const double base = std::pow(4.0 * kPi * t, -0.5 * d) * std::exp(-u / (4.0 * t));
  const double rate = -1.0 / (4.0 * t);
  return radial_derivative(k, x, [&](int n) { return std::pow(rate, n) * base; });
}

double cauchy_derivative(const MultiIndex& k, double t, std::span<const double> x) {
  const int d = k.dim();
  double u = t * t;
  for (double v : x) u += v * v;
  const double s = 0.5 * (d + 1);
  const double c = std::tgamma(s) / std::pow(kPi, s) * t;
  return radial_derivative(k, x, [&](int n) {
    double rising = 1.0;
    for (int i = 0; i < n; ++i) rising *= s + i;
    return c * (n % 2 ? -1.0 : 1.0) * rising * std::pow(u, -s - n);
  });
}

bool has_closed_form(const StableParams& p) { return p.is_gaussian() || p.is_cauchy(); }

KernelValue quadrature_derivative(const StableParams& params, const MultiIndex& k, double t,
                                  std::span<const double> x) {
  const double theta_max = spectral::truncation_radius(params.alpha, t, k.order(), params.dim, kPointTruncation);
  KernelValue out;
  out.method = KernelMethod::quadrature;
  out.value = spectral::invert_at(params, t, x, spectral::derivative_spectrum(k), theta_max);
  return out;
}

}  // namespace

void GridSpec::validate() const {
  if (!(half_extent > 0.0) || !std::isfinite(half_extent)) throw DomainError("grid half_extent must be positive");
  if (points_per_axis < 16 || points_per_axis % 2 != 0)
    throw DomainError("grid points_per_axis must be even and >= 16");
}

double GridSpec::spacing() const { return kPi / half_extent; }

double GridSpec::coordinate(int j) const { return (j - points_per_axis / 2) * spacing(); }

double GridSpec::max_coordinate() const { return 0.5 * points_per_axis * spacing(); }

double GridSpec::minimal_half_extent(const StableParams& params, double t) {
  check_time(t);
  params.validate();
  // e^{-t Theta^alpha} = 1e-12 / 2, leaving margin under the strict bound.
  return std::pow(-std::log(0.5 * kSpectralTruncation) / t, 1.0 / params.alpha);
}

GridSpec GridSpec::automatic(const StableParams& params, double t, int points_per_axis) {
  GridSpec g{minimal_half_extent(params, t), points_per_axis};
  g.validate();
  return g;
}

double GridFunction::cell_volume() const { return std::pow(grid.spacing(), dim); }

double GridFunction::sup_abs() const {
  double m = 0.0;
  for (double v : values) m = std::max(m, std::abs(v));
  return m;
}

std::size_t GridFunction::origin_index() const {
  const auto p = static_cast<std::size_t>(grid.points_per_axis);
  std::size_t flat = 0;
  for (int j = 0; j < dim; ++j) flat = flat * p + p / 2;
  return flat;
}

std::vector<double> GridFunction::point(std::size_t flat) const {
  const auto p = static_cast<std::size_t>(grid.points_per_axis);
  std::vector<double> x(static_cast<std::size_t>(dim));
  for (int j = dim - 1; j >= 0; --j) {
    x[static_cast<std::size_t>(j)] = grid.coordinate(static_cast<int>(flat % p));
    flat /= p;
  }
  return x;
}

KernelValue density_derivative_info(const StableParams& params, const MultiIndex& k, double t,
                                    std::span<const double> x, KernelMethod method) {
  params.validate();
  check_time(t);
  check_point(params, x);
  check_index(params, k);
  if (method == KernelMethod::closed_form && !has_closed_form(params))
    throw DomainError("closed form kernels exist only for alpha = 1 and alpha = 2");
  if (method == KernelMethod::quadrature || !has_closed_form(params)) return quadrature_derivative(params, k, t, x);
  KernelValue out;
  out.method = KernelMethod::closed_form;
  out.value = params.is_gaussian() ? gaussian_derivative(k, t, x) : cauchy_derivative(k, t, x);
  return out;
}

double density_derivative(const StableParams& params, const MultiIndex& k, double t, std::span<const double> x,
                          KernelMethod method) {
  return density_derivative_info(params, k, t, x, method).value;
}

double density(const StableParams& params, double t, std::span<const double> x, KernelMethod method) {
  params.validate();
  const double v = density_derivative(params, MultiIndex::zero(params.dim), t, x, method);
  return std::max(v, 0.0);
}

double theta_constant(const StableParams& params, const MultiIndex& k) {
  params.validate();
  check_index(params, k);
  if (k.has_odd_component()) return 0.0;
  const double d = params.dim, a = params.alpha, m = k.order() + d;
  double log_value = -d * std::log(2.0 * kPi) + std::log(2.0 / a) + std::lgamma(m / a) - std::lgamma(0.5 * m);
  for (int ki : k.entries()) log_value += std::lgamma(0.5 * (ki + 1));
  return std::exp(log_value);
}

double stable_tail_constant(const StableParams& params) {
  params.validate();
  if (params.is_gaussian()) return 0.0;
  const double a = params.alpha, d = params.dim;
  return a * std::pow(2.0, a - 1.0) * std::tgamma(0.5 * (d + a)) * std::sin(0.5 * kPi * a) * std::tgamma(0.5 * a) /
         std::pow(kPi, 0.5 * d + 1.0);
}

GridFunction kernel_grid(const StableParams& params, const MultiIndex& k, double t, const GridSpec& grid) {
  params.validate();
  check_time(t);
  check_index(params, k);
  return spectral::invert_on_grid(params, t, grid, spectral::derivative_spectrum(k));
}

KernelTable KernelTable::build(const StableParams& params, const MultiIndex& k, double t, double half_width,
                               double spacing) {
  params.validate();
  check_time(t);
  check_index(params, k);
  const int d = params.dim;
  if (d < 1 || d > 3) throw DomainError("kernel tables support 1 <= d <= 3");
  if (!(spacing > 0.0) || !(half_width > 4.0 * spacing)) throw DomainError("kernel table extent too small");

  auto n = static_cast<std::size_t>(std::ceil(2.0 * half_width / spacing));
  n += n % 2;
  std::size_t total = 1;
  for (int j = 0; j < d; ++j) total *= n;

  const double dtheta = 2.0 * kPi / (static_cast<double>(n) * spacing);
  const auto plan_size = std::vector<int>(static_cast<std::size_t>(d), static_cast<int>(n));
  auto* buf = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * total));
  if (!buf) throw CapacityError("kernel table allocation failed");
  std::unique_ptr<fftw_complex, decltype(&fftw_free)> guard(buf, &fftw_free);

  // Sample (i theta)^k e^{-t|theta|^alpha} with the (-1)^m centring shift.
  const std::complex<double> ipow[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
  const std::complex<double> phase = ipow[k.order() % 4];
  std::vector<std::size_t> idx(static_cast<std::size_t>(d));
  for (std::size_t flat = 0; flat < total; ++flat) {
    std::size_t rem = flat;
    double r2 = 0.0, mono = 1.0;
    int parity = 0;
    for (int j = d - 1; j >= 0; --j) {
      const std::size_t m = rem % n;
      rem /= n;
      const double th = (static_cast<double>(m) - static_cast<double>(n / 2)) * dtheta;
      r2 += th * th;
      mono *= std::pow(th, k[j]);
      parity += static_cast<int>(m % 2);
    }
    const double decay = std::exp(-t * std::pow(r2, 0.5 * params.alpha));
    const std::complex<double> v = phase * (mono * decay * (parity % 2 ? -1.0 : 1.0));
    buf[flat][0] = v.real();
    buf[flat][1] = v.imag();
  }

  static std::mutex planner_mutex;  // the FFTW planner is not thread-safe
  fftw_plan plan;
  {
    std::lock_guard lock(planner_mutex);
    plan = fftw_plan_dft(d, plan_size.data(), buf, buf, FFTW_BACKWARD, FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  {
    std::lock_guard lock(planner_mutex);
    fftw_destroy_plan(plan);
  }

  KernelTable table;
  table.dim_ = d;
  table.n_ = n;
  table.spacing_ = spacing;
  table.origin_ = -static_cast<double>(n / 2) * spacing;
  table.values_.resize(total);
  const double scale = std::pow(dtheta / (2.0 * kPi), d);
  const int half_parity = static_cast<int>((n / 2) % 2) * d;
  double edge = 0.0;
  for (std::size_t flat = 0; flat < total; ++flat) {
    std::size_t rem = flat;
    int parity = half_parity;
    bool boundary = false;
    for (int j = d - 1; j >= 0; --j) {
      const std::size_t m = rem % n;
      rem /= n;
      parity += static_cast<int>(m % 2);
      boundary = boundary || m == 0 || m == n - 1;
    }
    const double v = scale * buf[flat][0] * (parity % 2 ? -1.0 : 1.0);
    table.values_[flat] = v;
    if (boundary) edge = std::max(edge, std::abs(v));
  }
  const double theta_max = kPi / spacing;
  const double cut = std::exp(-t * std::pow(theta_max, params.alpha)) *
                     std::pow(theta_max, k.order() + d) * std::pow(2.0 * kPi, -d);
  table.aliasing_ = 2.0 * edge + cut;
  return table;
}

KernelTable KernelTable::build_default(const StableParams& params, const MultiIndex& k, double t) {
  params.validate();
  check_time(t);
  const double scale = std::pow(t, 1.0 / params.alpha);
  const bool light = params.is_gaussian();
  switch (params.dim) {
    case 1:
      return build(params, k, t, (light ? 16.0 : 2048.0) * scale, scale / 64.0);
    case 2:
      return build(params, k, t, (light ? 12.0 : 64.0) * scale, scale / 16.0);
    default:
      return build(params, k, t, (light ? 8.0 : 16.0) * scale, scale / 4.0);
  }
}

double KernelTable::operator()(std::span<const double> x, bool* inside) const {
  const double last = static_cast<double>(n_ - 1);
  const double max_start = static_cast<double>(n_ - 4);
  double w[3][4];
  std::size_t start[3];
  for (int j = 0; j < dim_; ++j) {
    const double s = (x[static_cast<std::size_t>(j)] - origin_) / spacing_;
    if (!(s >= 0.0 && s <= last)) {
      if (inside) *inside = false;
      return 0.0;
    }
    const double st = std::fmin(std::fmax(std::floor(s) - 1.0, 0.0), max_start);
    start[j] = static_cast<std::size_t>(st);
    simd::detail::lagrange4(s - st, w[j]);
  }
  if (inside) *inside = true;
  double total = 0.0;
  const int corners = 1 << (2 * dim_);
  for (int c = 0; c < corners; ++c) {
    std::size_t flat = 0;
    double weight = 1.0;
    for (int j = 0; j < dim_; ++j) {
      const int o = (c >> (2 * j)) & 3;
      flat = flat * n_ + start[j] + static_cast<std::size_t>(o);
      weight *= w[j][o];
    }
    total += weight * values_[flat];
  }
  return total;
}

}  // namespace sslab
