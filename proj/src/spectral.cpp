#include "spectral.hpp"

#include <algorithm>
#include <bit>
#include <boost/math/quadrature/gauss.hpp>
#include <cmath>
#include <numbers>

#include "sslab/errors.hpp"
#include "sslab/simd/kernels.hpp"

namespace sslab::spectral {
namespace {

template <unsigned N>
AxisRule make_gauss() {
  using G = boost::math::quadrature::gauss<double, N>;
  AxisRule rule;
  const auto& x = G::abscissa();
  const auto& w = G::weights();
  for (std::size_t i = x.size(); i-- > 0;) {
    if (x[i] == 0.0) continue;
    rule.nodes.push_back(-x[i]);
    rule.weights.push_back(w[i]);
  }
  for (std::size_t i = 0; i < x.size(); ++i) {
    rule.nodes.push_back(x[i]);
    rule.weights.push_back(w[i]);
  }
  return rule;
}

void append_panel(AxisRule& out, const AxisRule& base, double a, double b) {
  const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
  for (std::size_t i = 0; i < base.nodes.size(); ++i) {
    out.nodes.push_back(mid + half * base.nodes[i]);
    out.weights.push_back(half * base.weights[i]);
  }
}

int graded_levels(int dim) {
  switch (dim) {
    case 1:
      return 30;
    case 2:
      return 18;
    default:
      return 12;
  }
}

std::size_t ipow(std::size_t base, int e) {
  std::size_t r = 1;
  for (int i = 0; i < e; ++i) r *= base;
  return r;
}

// Transforms every axis of a row-major cube with `axes` axes of length q into
// length p, axis j using mats[j] (p x q). Returns the p^axes result.
std::vector<double> separable_transform(std::vector<double> data, int axes, std::size_t q, std::size_t p,
                                        const std::vector<const double*>& mats) {
  const auto& k = simd::active_kernels();
  std::size_t len = q;  // current length of the last axis
  std::vector<double> next;
  for (int s = 0; s < axes; ++s) {
    const int axis = axes - 1 - s;
    const std::size_t rows = data.size() / len;
    next.assign(rows * p, 0.0);
    // Transform last axis, writing transposed so the new axis leads.
    std::vector<double> tmp(p);
    for (std::size_t r = 0; r < rows; ++r) {
      k.matvec(mats[static_cast<std::size_t>(axis)], p, q, data.data() + r * len, tmp.data());
      for (std::size_t c = 0; c < p; ++c) next[c * rows + r] = tmp[c];
    }
    data.swap(next);
  }
  (void)len;
  return data;
}

}  // namespace

const AxisRule& gauss_legendre(int order) {
  static const AxisRule g8 = make_gauss<8>();
  static const AxisRule g16 = make_gauss<16>();
  if (order == 8) return g8;
  if (order == 16) return g16;
  throw DomainError("gauss_legendre: supported orders are 8 and 16");
}

AxisRule frequency_rule(double theta_max, double alpha, double x_max, int dim) {
  if (!(theta_max > 0.0)) throw DomainError("frequency_rule: theta_max must be positive");
  double width = theta_max / 8.0;
  if (x_max > 0.0) width = std::min(width, 6.0 / x_max);
  const auto panels = static_cast<std::size_t>(std::ceil(theta_max / width - 1e-9));
  width = theta_max / static_cast<double>(panels);

  AxisRule rule;
  const AxisRule& g8 = gauss_legendre(8);
  const AxisRule& g16 = gauss_legendre(16);
  std::size_t first_uniform = 0;
  if (alpha != 2.0) {
    const int levels = graded_levels(dim);
    double lo = width * std::ldexp(1.0, -levels);
    append_panel(rule, g8, 0.0, lo);
    for (int i = levels; i >= 1; --i) {
      const double hi = width * std::ldexp(1.0, -(i - 1));
      append_panel(rule, g8, lo, hi);
      lo = hi;
    }
    first_uniform = 1;
  }
  for (std::size_t i = first_uniform; i < panels; ++i)
    append_panel(rule, g16, width * static_cast<double>(i), width * static_cast<double>(i + 1));
  return rule;
}

double truncation_radius(double alpha, double t, int order, int dim, double level) {
  const double m = static_cast<double>(order + dim);
  double u = std::max(-std::log(level), 1.0);
  for (int it = 0; it < 50; ++it) {
    const double next = -std::log(level) + std::max(m / alpha - 1.0, 0.0) * std::log(u) - std::log(alpha);
    if (std::abs(next - u) < 1e-10) break;
    u = std::max(next, 1.0);
  }
  u = std::max(u, -std::log(kSpectralTruncation));
  return std::pow(u / t, 1.0 / alpha);
}

Spectrum derivative_spectrum(const MultiIndex& k) {
  Spectrum s;
  s.dim = k.dim();
  unsigned pattern = 0;
  int odd = 0;
  for (int j = 0; j < k.dim(); ++j)
    if (k[j] % 2) {
      pattern |= 1u << j;
      ++odd;
    }
  s.active = 1u << pattern;
  const double sign = ((k.order() + odd) / 2) % 2 ? -1.0 : 1.0;
  std::vector<int> e(k.entries().begin(), k.entries().end());
  s.amplitudes = [e, pattern, sign](std::span<const double> theta, std::span<double> amp) {
    std::fill(amp.begin(), amp.end(), 0.0);
    double v = sign;
    for (std::size_t j = 0; j < e.size(); ++j)
      for (int r = 0; r < e[j]; ++r) v *= theta[j];
    amp[pattern] = v;
  };
  return s;
}

Spectrum general_spectrum(int dim, std::function<std::complex<double>(std::span<const double>)> transform) {
  Spectrum s;
  s.dim = dim;
  const unsigned patterns = 1u << dim;
  s.active = (patterns == 32 ? ~0u : (1u << patterns) - 1u);
  s.amplitudes = [dim, patterns, transform = std::move(transform)](std::span<const double> theta,
                                                                   std::span<double> amp) {
    std::complex<double> values[8];
    double point[3];
    for (unsigned sigma = 0; sigma < patterns; ++sigma) {
      for (int j = 0; j < dim; ++j) point[j] = (sigma >> j) & 1u ? -theta[static_cast<std::size_t>(j)] : theta[static_cast<std::size_t>(j)];
      values[sigma] = transform(std::span<const double>(point, static_cast<std::size_t>(dim)));
    }
    const double scale = 1.0 / static_cast<double>(patterns);
    for (unsigned pi = 0; pi < patterns; ++pi) {
      std::complex<double> g = 0.0;
      for (unsigned sigma = 0; sigma < patterns; ++sigma) {
        const bool flip = std::popcount(pi & sigma) % 2 != 0;
        g += flip ? -values[sigma] : values[sigma];
      }
      g *= scale;
      // multiply by i^{#odd}
      switch (std::popcount(pi) % 4) {
        case 0: amp[pi] = g.real(); break;
        case 1: amp[pi] = -g.imag(); break;
        case 2: amp[pi] = -g.real(); break;
        default: amp[pi] = g.imag(); break;
      }
    }
  };
  return s;
}

double invert_at(const StableParams& params, double t, std::span<const double> x, const Spectrum& spectrum,
                 double theta_max) {
  const int d = spectrum.dim;
  double x_max = 0.0;
  for (double v : x) x_max = std::max(x_max, std::abs(v));
  const AxisRule rule = frequency_rule(theta_max, params.alpha, x_max, d);
  const std::size_t q = rule.nodes.size();
  const unsigned patterns = 1u << d;

  std::vector<double> trig[3][2];
  for (int j = 0; j < d; ++j) {
    trig[j][0].resize(q);
    trig[j][1].resize(q);
    for (std::size_t i = 0; i < q; ++i) {
      const double arg = x[static_cast<std::size_t>(j)] * rule.nodes[i];
      trig[j][0][i] = std::cos(arg);
      trig[j][1][i] = std::sin(arg);
    }
  }

  const std::size_t total = ipow(q, d);
  double theta[3] = {0, 0, 0};
  double amp[8];
  std::size_t idx[3] = {0, 0, 0};
  double sum = 0.0;
  for (std::size_t flat = 0; flat < total; ++flat) {
    std::size_t rem = flat;
    double r2 = 0.0, w = 1.0;
    for (int j = d - 1; j >= 0; --j) {
      idx[j] = rem % q;
      rem /= q;
      theta[j] = rule.nodes[idx[j]];
      r2 += theta[j] * theta[j];
      w *= rule.weights[idx[j]];
    }
    const double decay = params.alpha == 2.0 ? std::exp(-t * r2) : std::exp(-t * std::pow(r2, 0.5 * params.alpha));
    if (decay == 0.0) continue;
    spectrum.amplitudes(std::span<const double>(theta, static_cast<std::size_t>(d)),
                        std::span<double>(amp, patterns));
    double node = 0.0;
    for (unsigned pi = 0; pi < patterns; ++pi) {
      if (!((spectrum.active >> pi) & 1u) || amp[pi] == 0.0) continue;
      double c = amp[pi];
      for (int j = 0; j < d; ++j) c *= trig[j][(pi >> j) & 1u][idx[j]];
      node += c;
    }
    sum += w * decay * node;
  }
  return sum * std::pow(std::numbers::pi, -d);
}

GridFunction invert_on_grid(const StableParams& params, double t, const GridSpec& grid, const Spectrum& spectrum) {
  grid.validate();
  const int d = spectrum.dim;
  if (d < 1 || d > 3) throw DomainError("gridded operations support 1 <= d <= 3");
  const auto p = static_cast<std::size_t>(grid.points_per_axis);
  const AxisRule rule = frequency_rule(grid.half_extent, params.alpha, grid.max_coordinate(), d);
  const std::size_t q = rule.nodes.size();
  const unsigned patterns = 1u << d;

  std::vector<double> cos_m(p * q), sin_m(p * q);
  for (std::size_t i = 0; i < p; ++i) {
    const double xi = grid.coordinate(static_cast<int>(i));
    for (std::size_t j = 0; j < q; ++j) {
      cos_m[i * q + j] = std::cos(xi * rule.nodes[j]);
      sin_m[i * q + j] = std::sin(xi * rule.nodes[j]);
    }
  }

  std::vector<unsigned> active;
  for (unsigned pi = 0; pi < patterns; ++pi)
    if ((spectrum.active >> pi) & 1u) active.push_back(pi);

  const std::size_t inner_q = ipow(q, d - 1);
  const std::size_t inner_p = ipow(p, d - 1);
  // reduced[a][q0 * inner_p + m]: inner axes already transformed
  std::vector<std::vector<double>> reduced(active.size(), std::vector<double>(q * inner_p, 0.0));
  std::vector<std::vector<double>> slab(active.size(), std::vector<double>(inner_q));
  double theta[3], amp[8];
  const double norm = std::pow(std::numbers::pi, -d);

  for (std::size_t q0 = 0; q0 < q; ++q0) {
    theta[0] = rule.nodes[q0];
    for (std::size_t inner = 0; inner < inner_q; ++inner) {
      std::size_t rem = inner;
      double r2 = theta[0] * theta[0], w = rule.weights[q0];
      for (int j = d - 1; j >= 1; --j) {
        const std::size_t ij = rem % q;
        rem /= q;
        theta[j] = rule.nodes[ij];
        r2 += theta[j] * theta[j];
        w *= rule.weights[ij];
      }
      const double decay =
          params.alpha == 2.0 ? std::exp(-t * r2) : std::exp(-t * std::pow(r2, 0.5 * params.alpha));
      if (decay == 0.0) {
        for (auto& s : slab) s[inner] = 0.0;
        continue;
      }
      spectrum.amplitudes(std::span<const double>(theta, static_cast<std::size_t>(d)),
                          std::span<double>(amp, patterns));
      for (std::size_t a = 0; a < active.size(); ++a) slab[a][inner] = norm * w * decay * amp[active[a]];
    }
    for (std::size_t a = 0; a < active.size(); ++a) {
      std::vector<double> out;
      if (d == 1) {
        out = slab[a];
      } else {
        std::vector<const double*> mats(static_cast<std::size_t>(d - 1));
        for (int j = 1; j < d; ++j)
          mats[static_cast<std::size_t>(j - 1)] = ((active[a] >> j) & 1u) ? sin_m.data() : cos_m.data();
        out = separable_transform(slab[a], d - 1, q, p, mats);
      }
      std::copy(out.begin(), out.end(), reduced[a].begin() + static_cast<std::ptrdiff_t>(q0 * inner_p));
    }
  }

  GridFunction result;
  result.dim = d;
  result.grid = grid;
  result.values.assign(p * inner_p, 0.0);
  const auto& k = simd::active_kernels();
  std::vector<double> column(q), tmp(p);
  for (std::size_t a = 0; a < active.size(); ++a) {
    const double* mat = (active[a] & 1u) ? sin_m.data() : cos_m.data();
    for (std::size_t m = 0; m < inner_p; ++m) {
      for (std::size_t q0 = 0; q0 < q; ++q0) column[q0] = reduced[a][q0 * inner_p + m];
      k.matvec(mat, p, q, column.data(), tmp.data());
      for (std::size_t i = 0; i < p; ++i) result.values[i * inner_p + m] += tmp[i];
    }
  }
  const double tail = std::exp(-t * std::pow(grid.half_extent, params.alpha));
  if (tail > kSpectralTruncation) {
    result.accuracy_warning = true;
    result.warning = "frequency truncation e^{-t Theta^alpha} = " + std::to_string(tail) + " exceeds 1e-12";
  }
  return result;
}

}  // namespace sslab::spectral
