#include "sslab/semigroup.hpp"

#include <fmt/format.h>

#include <cmath>

#include "spectral.hpp"
#include "sslab/errors.hpp"

namespace sslab {
namespace {

void require_transformable(const StableParams& params, const TestFunction& f, double t) {
  params.validate();
  if (!(t > 0.0) || !std::isfinite(t)) throw DomainError("semigroup time t must be positive");
  if (f.dim() != params.dim) throw DomainError("test function dimension does not match params.dim");
  const auto integrable = check_integrability(f, 0);
  if (!integrable.ok()) throw DomainError("semigroup_apply needs an integrable f: " + integrable.diagnostic);
}

spectral::Spectrum spectrum_of(const TestFunction& f) {
  return spectral::general_spectrum(f.dim(), [f](std::span<const double> theta) { return fourier_transform(f, theta); });
}

}  // namespace

GridFunction semigroup_apply(const StableParams& params, const TestFunction& f, double t, const GridSpec& grid) {
  if (f.is_constant()) {
    params.validate();
    grid.validate();
    GridFunction out;
    out.dim = params.dim;
    out.grid = grid;
    out.values.assign(static_cast<std::size_t>(std::pow(grid.points_per_axis, params.dim)),
                      f(std::vector<double>(static_cast<std::size_t>(params.dim), 0.0)));
    return out;
  }
  require_transformable(params, f, t);
  return spectral::invert_on_grid(params, t, grid, spectrum_of(f));
}

double semigroup_value(const StableParams& params, const TestFunction& f, double t, std::span<const double> x) {
  if (static_cast<int>(x.size()) != params.dim) throw DomainError("point dimension does not match params.dim");
  if (f.is_constant()) return f(x);
  require_transformable(params, f, t);
  const double theta_max = spectral::truncation_radius(params.alpha, t, 0, params.dim, 1e-16);
  return spectral::invert_at(params, t, x, spectrum_of(f), theta_max);
}

TestFunction semigroup_function(const StableParams& params, const TestFunction& f, double t, int points_per_axis) {
  params.validate();
  if (!(t >= 0.0) || !std::isfinite(t)) throw DomainError("semigroup time t must be non-negative");
  if (f.dim() != params.dim) throw DomainError("test function dimension does not match params.dim");
  if (t == 0.0 || f.is_constant()) return f;
  const auto& kind = f.kind();
  if (const auto* g = std::get_if<GaussianBump>(&kind); g && params.is_gaussian()) {
    const double spread = 1.0 + 4.0 * g->inverse_width * t;
    return TestFunction::gaussian_bump(g->center, g->inverse_width / spread,
                                       g->amplitude * std::pow(spread, -0.5 * params.dim));
  }
  if (const auto* s = std::get_if<KernelSnapshot>(&kind);
      s && s->params.alpha == params.alpha && s->params.dim == params.dim)
    return TestFunction::kernel_snapshot(params, s->t0 + t);
  if (const auto* m = std::get_if<Mixture>(&kind)) {
    std::vector<TestFunction> terms;
    for (const auto& term : m->terms) terms.push_back(semigroup_function(params, term, t, points_per_axis));
    return TestFunction::mixture(m->weights, std::move(terms));
  }
  if (const auto* p = std::get_if<ProductOf1D>(&kind); p && params.is_gaussian()) {
    std::vector<TestFunction> factors;
    for (const auto& factor : p->factors)
      factors.push_back(semigroup_function(StableParams{params.alpha, 1}, factor, t, points_per_axis));
    return TestFunction::product(std::move(factors));
  }

  // 1-d tables are oversampled 4x in space; multilinear lookups need the finer spacing.
  const int oversample = params.dim == 1 ? 4 : 1;
  if (points_per_axis <= 0) points_per_axis = params.dim == 1 ? 4096 : params.dim == 2 ? 128 : 48;
  const GridSpec grid{GridSpec::automatic(params, t).half_extent * oversample, points_per_axis};
  GridFunction values = semigroup_apply(params, f, t, grid);
  Tabulated table;
  table.origin.assign(static_cast<std::size_t>(params.dim), grid.coordinate(0));
  table.spacing.assign(static_cast<std::size_t>(params.dim), grid.spacing());
  table.shape.assign(static_cast<std::size_t>(params.dim), static_cast<std::size_t>(points_per_axis));
  table.values = std::move(values.values);
  table.compact_tail = false;
  return TestFunction::tabulated(std::move(table));
}

double measure_semigroup(const StableParams& params, const FiniteMeasure& m, const TestFunction& f, double t) {
  if (m.dim() != params.dim) throw DomainError("measure dimension does not match params.dim");
  double total = 0.0;
  for (const auto& atom : m.atoms()) total += atom.mass * semigroup_value(params, f, t, atom.location);
  return total;
}

ExpansionResult expansion_approx(const StableParams& params, const TestFunction& f, double t, int N,
                                 const GridSpec& grid) {
  if (N < 0) throw DomainError("expansion order must be non-negative");
  const auto integrable = check_integrability(f, N);
  if (!integrable.ok())
    throw DomainError(fmt::format("integrability check failed at order {}: {}", N, integrable.diagnostic));

  ExpansionResult result;
  result.order = N;
  result.t = t;
  result.exact = semigroup_apply(params, f, t, grid);
  result.approx = result.exact;
  std::fill(result.approx.values.begin(), result.approx.values.end(), 0.0);
  result.approx.accuracy_warning = false;
  result.approx.warning.clear();

  for (const auto& k : multiindex_enumerate(params.dim, N)) {
    ExpansionTerm term;
    term.k = k;
    term.coefficient = (k.order() % 2 ? -1.0 : 1.0) * moment_functional(f, k);
    term.kernel = kernel_grid(params, k, t, grid);
    if (term.coefficient != 0.0)
      for (std::size_t i = 0; i < term.kernel.values.size(); ++i)
        result.approx.values[i] += term.coefficient * term.kernel.values[i];
    result.accuracy_warning = result.accuracy_warning || term.kernel.accuracy_warning;
    result.per_term.push_back(std::move(term));
  }
  result.accuracy_warning = result.accuracy_warning || result.exact.accuracy_warning;

  double sup = 0.0;
  for (std::size_t i = 0; i < result.exact.values.size(); ++i)
    sup = std::max(sup, std::abs(result.exact.values[i] - result.approx.values[i]));
  result.scaled_sup_error = std::pow(t, (N + params.dim) / params.alpha) * sup;
  return result;
}

}  // namespace sslab
