#include "sslab/measures.hpp"

#include <fmt/format.h>
#include <fmt/ranges.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

#include "sslab/errors.hpp"
#include "sslab/stable_kernel.hpp"

namespace sslab {
namespace {

constexpr double kPi = std::numbers::pi;

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

double binomial(int n, int k) { return std::round(std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0))); }

// \int e^{-a (y-c)^2} y^m dy
double gaussian_raw_moment(double a, double c, int m) {
  double total = 0.0;
  for (int j = 0; j <= m; j += 2)
    total += binomial(m, j) * std::pow(c, m - j) * std::tgamma(0.5 * (j + 1)) * std::pow(a, -0.5 * (j + 1));
  return total;
}

double double_factorial(int n) {
  double r = 1.0;
  for (int i = n; i > 1; i -= 2) r *= i;
  return r;
}

std::size_t table_size(const Tabulated& t) {
  std::size_t n = 1;
  for (auto s : t.shape) n *= s;
  return n;
}

void validate_table(const Tabulated& t) {
  const std::size_t d = t.shape.size();
  if (d == 0 || t.origin.size() != d || t.spacing.size() != d)
    throw ConfigError("tabulated function: inconsistent grid description");
  for (std::size_t j = 0; j < d; ++j) {
    if (t.shape[j] < 2) throw ConfigError("tabulated function: need at least two samples per axis");
    if (!(t.spacing[j] > 0.0)) throw ConfigError("tabulated function: spacing must be positive");
  }
  if (table_size(t) != t.values.size()) throw ConfigError("tabulated function: value count does not match shape");
}

// Trapezoid weight of index i on an axis of n samples with spacing h.
double trapezoid_weight(std::size_t i, std::size_t n, double h) { return (i == 0 || i + 1 == n) ? 0.5 * h : h; }

template <class Fn>
void for_each_table_node(const Tabulated& t, Fn&& fn) {
  const std::size_t d = t.shape.size();
  std::vector<double> x(d);
  const std::size_t total = table_size(t);
  for (std::size_t flat = 0; flat < total; ++flat) {
    std::size_t rem = flat;
    double w = 1.0;
    for (std::size_t j = d; j-- > 0;) {
      const std::size_t i = rem % t.shape[j];
      rem /= t.shape[j];
      x[j] = t.origin[j] + static_cast<double>(i) * t.spacing[j];
      w *= trapezoid_weight(i, t.shape[j], t.spacing[j]);
    }
    fn(std::span<const double>(x), w, t.values[flat]);
  }
}

double table_eval(const Tabulated& t, std::span<const double> x, bool* inside) {
  const std::size_t d = t.shape.size();
  std::size_t base[3];
  double frac[3];
  if (d > 3) throw DomainError("tabulated functions support d <= 3");
  for (std::size_t j = 0; j < d; ++j) {
    const double s = (x[j] - t.origin[j]) / t.spacing[j];
    const double last = static_cast<double>(t.shape[j] - 1);
    if (!(s >= 0.0 && s <= last)) {
      if (inside) *inside = false;
      return 0.0;
    }
    const double b = std::min(std::floor(s), last - 1.0);
    base[j] = static_cast<std::size_t>(b);
    frac[j] = s - b;
  }
  if (inside) *inside = true;
  double total = 0.0;
  for (unsigned c = 0; c < (1u << d); ++c) {
    std::size_t flat = 0;
    double w = 1.0;
    for (std::size_t j = 0; j < d; ++j) {
      const unsigned o = (c >> j) & 1u;
      flat = flat * t.shape[j] + base[j] + o;
      w *= o ? frac[j] : 1.0 - frac[j];
    }
    if (w != 0.0) total += w * t.values[flat];
  }
  return total;
}

IntegrabilityResult combine_all(const std::vector<IntegrabilityResult>& parts, const std::string& what) {
  IntegrabilityResult out{Tristate::yes, what + ": all components integrable"};
  for (const auto& p : parts) {
    if (p.verdict == Tristate::no) return {Tristate::no, what + ": " + p.diagnostic};
    if (p.verdict == Tristate::indeterminate) out = {Tristate::indeterminate, what + ": " + p.diagnostic};
  }
  return out;
}

}  // namespace

FiniteMeasure::FiniteMeasure(int dim, std::vector<Atom> atoms, double moment_exponent)
    : dim_(dim), atoms_(std::move(atoms)), moment_exponent_(moment_exponent) {
  if (dim < 1) throw ConfigError("measure dimension must be >= 1");
  if (atoms_.empty()) throw ConfigError("measure needs at least one atom");
  if (!(moment_exponent > 0.0)) throw ConfigError("moment exponent must be positive");
  for (const auto& a : atoms_) {
    if (static_cast<int>(a.location.size()) != dim) throw ConfigError("atom location has wrong dimension");
    if (!(a.mass > 0.0) || !std::isfinite(a.mass)) throw ConfigError("atom masses must be positive");
    total_mass_ += a.mass;
  }
}

FiniteMeasure FiniteMeasure::dirac(int dim, double mass) {
  return FiniteMeasure(dim, {Atom{std::vector<double>(static_cast<std::size_t>(dim), 0.0), mass}});
}

double FiniteMeasure::moment(double a) const {
  double total = 0.0;
  for (const auto& atom : atoms_) {
    double r2 = 0.0;
    for (double v : atom.location) r2 += v * v;
    total += atom.mass * std::pow(std::sqrt(r2), a);
  }
  return total;
}

TestFunction::TestFunction() : TestFunction(Constant{1, 1.0}) {}

TestFunction::TestFunction(Kind kind) {
  dim_ = std::visit(Overloaded{
                        [](const GaussianBump& g) {
                          if (g.center.empty()) throw ConfigError("gaussian_bump needs a center");
                          if (!(g.inverse_width > 0.0)) throw ConfigError("gaussian_bump inverse_width must be positive");
                          return static_cast<int>(g.center.size());
                        },
                        [](const ProductOf1D& p) {
                          if (p.factors.empty()) throw ConfigError("product needs at least one factor");
                          for (const auto& f : p.factors)
                            if (f.dim() != 1) throw ConfigError("product factors must be one-dimensional");
                          return static_cast<int>(p.factors.size());
                        },
                        [](const KernelSnapshot& k) {
                          k.params.validate();
                          if (!(k.t0 > 0.0)) throw DomainError("kernel_snapshot t0 must be positive");
                          return k.params.dim;
                        },
                        [](const Tabulated& t) {
                          validate_table(t);
                          return static_cast<int>(t.shape.size());
                        },
                        [](const Constant& c) {
                          if (c.dim < 1) throw ConfigError("constant dimension must be >= 1");
                          return c.dim;
                        },
                        [](const Mixture& m) {
                          if (m.terms.empty() || m.terms.size() != m.weights.size())
                            throw ConfigError("mixture needs matching weights and terms");
                          for (const auto& f : m.terms)
                            if (f.dim() != m.terms.front().dim()) throw ConfigError("mixture terms differ in dimension");
                          return m.terms.front().dim();
                        },
                    },
                    kind);
  kind_ = std::make_shared<const Kind>(std::move(kind));
}

TestFunction TestFunction::gaussian_bump(std::vector<double> center, double inverse_width, double amplitude) {
  return TestFunction(GaussianBump{std::move(center), inverse_width, amplitude});
}
TestFunction TestFunction::product(std::vector<TestFunction> factors) {
  return TestFunction(ProductOf1D{std::move(factors)});
}
TestFunction TestFunction::kernel_snapshot(const StableParams& params, double t0) {
  return TestFunction(KernelSnapshot{params, t0});
}
TestFunction TestFunction::tabulated(Tabulated table) { return TestFunction(std::move(table)); }
TestFunction TestFunction::constant(int dim, double value) { return TestFunction(Constant{dim, value}); }
TestFunction TestFunction::mixture(std::vector<double> weights, std::vector<TestFunction> terms) {
  return TestFunction(Mixture{std::move(weights), std::move(terms)});
}

double TestFunction::operator()(std::span<const double> x, bool* inside) const {
  if (inside) *inside = true;
  return std::visit(Overloaded{
                        [&](const GaussianBump& g) {
                          double r2 = 0.0;
                          for (std::size_t j = 0; j < g.center.size(); ++j) {
                            const double u = x[j] - g.center[j];
                            r2 += u * u;
                          }
                          return g.amplitude * std::exp(-g.inverse_width * r2);
                        },
                        [&](const ProductOf1D& p) {
                          double v = 1.0;
                          for (std::size_t j = 0; j < p.factors.size(); ++j) v *= p.factors[j](x.subspan(j, 1), inside);
                          return v;
                        },
                        [&](const KernelSnapshot& k) { return density(k.params, k.t0, x); },
                        [&](const Tabulated& t) { return table_eval(t, x, inside); },
                        [&](const Constant& c) { return c.value; },
                        [&](const Mixture& m) {
                          double v = 0.0;
                          for (std::size_t i = 0; i < m.terms.size(); ++i) v += m.weights[i] * m.terms[i](x, inside);
                          return v;
                        },
                    },
                    *kind_);
}

bool TestFunction::has_analytic_fourier() const {
  return std::visit(Overloaded{
                        [](const ProductOf1D& p) {
                          return std::all_of(p.factors.begin(), p.factors.end(),
                                             [](const TestFunction& f) { return f.has_analytic_fourier(); });
                        },
                        [](const Mixture& m) {
                          return std::all_of(m.terms.begin(), m.terms.end(),
                                             [](const TestFunction& f) { return f.has_analytic_fourier(); });
                        },
                        [](const Tabulated&) { return false; },
                        [](const Constant&) { return false; },
                        [](const auto&) { return true; },
                    },
                    *kind_);
}

bool TestFunction::has_analytic_moments() const { return has_analytic_fourier(); }

bool TestFunction::in_generator_domain() const {
  return std::visit(Overloaded{
                        [](const ProductOf1D& p) {
                          return std::all_of(p.factors.begin(), p.factors.end(),
                                             [](const TestFunction& f) { return f.in_generator_domain(); });
                        },
                        [](const Mixture& m) {
                          return std::all_of(m.terms.begin(), m.terms.end(),
                                             [](const TestFunction& f) { return f.in_generator_domain(); });
                        },
                        [](const Tabulated&) { return false; },
                        [](const auto&) { return true; },
                    },
                    *kind_);
}

TailInfo TestFunction::tail() const {
  return std::visit(Overloaded{
                        [](const GaussianBump&) { return TailInfo{TailClass::gaussian, 0.0}; },
                        [](const ProductOf1D& p) {
                          TailInfo worst{TailClass::compact, 0.0};
                          for (const auto& f : p.factors) {
                            const TailInfo t = f.tail();
                            if (static_cast<int>(t.cls) > static_cast<int>(worst.cls) ||
                                (t.cls == TailClass::power && worst.cls == TailClass::power && t.exponent < worst.exponent))
                              worst = t;
                          }
                          return worst;
                        },
                        [](const KernelSnapshot& k) {
                          if (k.params.is_gaussian()) return TailInfo{TailClass::gaussian, 0.0};
                          return TailInfo{TailClass::power, k.params.dim + k.params.alpha};
                        },
                        [](const Tabulated& t) {
                          return t.compact_tail ? TailInfo{TailClass::compact, 0.0} : TailInfo{TailClass::unknown, 0.0};
                        },
                        [](const Constant&) { return TailInfo{TailClass::constant, 0.0}; },
                        [](const Mixture& m) {
                          TailInfo worst{TailClass::compact, 0.0};
                          for (const auto& f : m.terms) {
                            const TailInfo t = f.tail();
                            if (static_cast<int>(t.cls) > static_cast<int>(worst.cls) ||
                                (t.cls == TailClass::power && worst.cls == TailClass::power && t.exponent < worst.exponent))
                              worst = t;
                          }
                          return worst;
                        },
                    },
                    *kind_);
}

double TestFunction::sup_norm() const {
  return std::visit(Overloaded{
                        [](const GaussianBump& g) { return std::abs(g.amplitude); },
                        [](const ProductOf1D& p) {
                          double v = 1.0;
                          for (const auto& f : p.factors) v *= f.sup_norm();
                          return v;
                        },
                        [](const KernelSnapshot& k) {
                          return std::pow(k.t0, -k.params.dim / k.params.alpha) *
                                 theta_constant(k.params, MultiIndex::zero(k.params.dim));
                        },
                        [](const Tabulated& t) {
                          double m = 0.0;
                          for (double v : t.values) m = std::max(m, std::abs(v));
                          return m;
                        },
                        [](const Constant& c) { return std::abs(c.value); },
                        [](const Mixture& m) {
                          double v = 0.0;
                          for (std::size_t i = 0; i < m.terms.size(); ++i) v += std::abs(m.weights[i]) * m.terms[i].sup_norm();
                          return v;
                        },
                    },
                    *kind_);
}

std::string TestFunction::describe() const {
  return std::visit(Overloaded{
                        [](const GaussianBump& g) {
                          return fmt::format("gaussian_bump(center=[{}], inverse_width={}, amplitude={})",
                                             fmt::join(g.center, ","), g.inverse_width, g.amplitude);
                        },
                        [](const ProductOf1D& p) {
                          std::vector<std::string> parts;
                          for (const auto& f : p.factors) parts.push_back(f.describe());
                          return fmt::format("product({})", fmt::join(parts, " * "));
                        },
                        [](const KernelSnapshot& k) {
                          return fmt::format("kernel_snapshot(alpha={}, dim={}, t0={})", k.params.alpha, k.params.dim,
                                             k.t0);
                        },
                        [](const Tabulated& t) {
                          return fmt::format("tabulated(shape=[{}], tail={})", fmt::join(t.shape, "x"),
                                             t.compact_tail ? "compact" : "unknown");
                        },
                        [](const Constant& c) { return fmt::format("constant({})", c.value); },
                        [](const Mixture& m) {
                          std::vector<std::string> parts;
                          for (std::size_t i = 0; i < m.terms.size(); ++i)
                            parts.push_back(fmt::format("{}*{}", m.weights[i], m.terms[i].describe()));
                          return fmt::format("mixture({})", fmt::join(parts, " + "));
                        },
                    },
                    *kind_);
}

double moment_functional(const TestFunction& f, const MultiIndex& k) {
  if (k.dim() != f.dim()) throw DomainError("multi-index dimension does not match the test function");
  return std::visit(
      Overloaded{
          [&](const GaussianBump& g) {
            double v = g.amplitude;
            for (int j = 0; j < k.dim(); ++j)
              v *= gaussian_raw_moment(g.inverse_width, g.center[static_cast<std::size_t>(j)], k[j]) /
                   std::tgamma(k[j] + 1.0);
            return v;
          },
          [&](const ProductOf1D& p) {
            double v = 1.0;
            for (int j = 0; j < k.dim(); ++j) v *= moment_functional(p.factors[static_cast<std::size_t>(j)], MultiIndex{k[j]});
            return v;
          },
          [&](const KernelSnapshot& s) {
            if (s.params.is_gaussian()) {
              if (k.has_odd_component()) return 0.0;
              double v = 1.0;
              for (int j = 0; j < k.dim(); ++j)
                v *= std::pow(2.0 * s.t0, 0.5 * k[j]) * double_factorial(k[j] - 1) / std::tgamma(k[j] + 1.0);
              return v;
            }
            if (k.order() >= s.params.alpha)
              throw DomainError(fmt::format("moment of order {} diverges for a stable kernel with alpha={}", k.order(),
                                            s.params.alpha));
            return k.order() == 0 ? 1.0 : 0.0;
          },
          [&](const Tabulated& t) {
            if (!t.compact_tail)
              throw DomainError("moment of a tabulated function with unknown tail is not determined");
            double total = 0.0;
            for_each_table_node(t, [&](std::span<const double> x, double w, double v) {
              double mono = 1.0;
              for (int j = 0; j < k.dim(); ++j) mono *= std::pow(x[static_cast<std::size_t>(j)], k[j]);
              total += w * v * mono;
            });
            return total / k.factorial();
          },
          [&](const Constant&) -> double { throw DomainError("moments of a constant function diverge"); },
          [&](const Mixture& m) {
            double v = 0.0;
            for (std::size_t i = 0; i < m.terms.size(); ++i) v += m.weights[i] * moment_functional(m.terms[i], k);
            return v;
          },
      },
      f.kind());
}

const char* tristate_name(Tristate v) {
  switch (v) {
    case Tristate::yes:
      return "true";
    case Tristate::no:
      return "false";
    case Tristate::indeterminate:
      break;
  }
  return "indeterminate";
}

IntegrabilityResult check_integrability(const TestFunction& f, int N) {
  if (N < 0) throw DomainError("integrability order must be non-negative");
  return std::visit(
      Overloaded{
          [&](const GaussianBump&) {
            return IntegrabilityResult{Tristate::yes, "gaussian tail: every polynomial moment converges"};
          },
          [&](const ProductOf1D& p) {
            std::vector<IntegrabilityResult> parts;
            for (const auto& g : p.factors) parts.push_back(check_integrability(g, N));
            return combine_all(parts, "product");
          },
          [&](const KernelSnapshot& s) {
            if (s.params.is_gaussian())
              return IntegrabilityResult{Tristate::yes, "gaussian kernel tail: every polynomial moment converges"};
            const double decay = s.params.dim + s.params.alpha;
            // \int |x|^{N - decay} dx over |x| > 1 in d dims converges iff decay - N > d.
            if (decay - N > s.params.dim)
              return IntegrabilityResult{Tristate::yes, fmt::format("power tail |x|^-{}: order {} converges", decay, N)};
            return IntegrabilityResult{
                Tristate::no, fmt::format("power tail |x|^-{} in d={}: order {} diverges (needs N < alpha={})", decay,
                                          s.params.dim, N, s.params.alpha)};
          },
          [&](const Tabulated& t) {
            if (t.compact_tail) return IntegrabilityResult{Tristate::yes, "compact support"};
            return IntegrabilityResult{Tristate::indeterminate, "tabulated function with unknown tail"};
          },
          [&](const Constant&) {
            return IntegrabilityResult{Tristate::no, "constant function is not integrable"};
          },
          [&](const Mixture& m) {
            std::vector<IntegrabilityResult> parts;
            for (const auto& g : m.terms) parts.push_back(check_integrability(g, N));
            return combine_all(parts, "mixture");
          },
      },
      f.kind());
}

std::complex<double> fourier_transform(const TestFunction& f, std::span<const double> theta) {
  if (static_cast<int>(theta.size()) != f.dim()) throw DomainError("frequency dimension does not match the test function");
  using C = std::complex<double>;
  return std::visit(
      Overloaded{
          [&](const GaussianBump& g) {
            double r2 = 0.0, phase = 0.0;
            for (std::size_t j = 0; j < theta.size(); ++j) {
              r2 += theta[j] * theta[j];
              phase += theta[j] * g.center[j];
            }
            const double mag = g.amplitude * std::pow(kPi / g.inverse_width, 0.5 * static_cast<double>(theta.size())) *
                               std::exp(-r2 / (4.0 * g.inverse_width));
            return phase == 0.0 ? C(mag, 0.0) : std::polar(mag, -phase);
          },
          [&](const ProductOf1D& p) {
            C v = 1.0;
            for (std::size_t j = 0; j < p.factors.size(); ++j) v *= fourier_transform(p.factors[j], theta.subspan(j, 1));
            return v;
          },
          [&](const KernelSnapshot& s) {
            double r2 = 0.0;
            for (double v : theta) r2 += v * v;
            return C(std::exp(-s.t0 * std::pow(r2, 0.5 * s.params.alpha)), 0.0);
          },
          [&](const Tabulated& t) {
            C total = 0.0;
            for_each_table_node(t, [&](std::span<const double> x, double w, double v) {
              double phase = 0.0;
              for (std::size_t j = 0; j < x.size(); ++j) phase += theta[j] * x[j];
              total += w * v * C(std::cos(phase), -std::sin(phase));
            });
            return total;
          },
          [&](const Constant&) -> C { throw DomainError("a constant function has no Fourier transform"); },
          [&](const Mixture& m) {
            C v = 0.0;
            for (std::size_t i = 0; i < m.terms.size(); ++i) v += m.weights[i] * fourier_transform(m.terms[i], theta);
            return v;
          },
      },
      f.kind());
}

std::vector<PredictionTerm> prediction_terms(const TestFunction& f, const StableParams& params, double t, int N) {
  params.validate();
  if (!(t > 0.0)) throw DomainError("prediction time must be positive");
  if (f.dim() != params.dim) throw DomainError("test function dimension does not match params.dim");
  const auto integrable = check_integrability(f, N);
  if (!integrable.ok())
    throw DomainError(fmt::format("integrability check failed at order {}: {}", N, integrable.diagnostic));
  std::vector<PredictionTerm> terms;
  for (const auto& k : multiindex_enumerate(params.dim, N)) {
    if (k.has_odd_component()) continue;
    PredictionTerm term{k, theta_constant(params, k), moment_functional(f, k), 0.0};
    const double sign = (k.order() / 2) % 2 ? -1.0 : 1.0;
    term.value = sign * std::pow(t, -(params.dim + k.order()) / params.alpha) * term.theta * term.lambda;
    terms.push_back(std::move(term));
  }
  return terms;
}

double theorem_prediction(const TestFunction& f, const StableParams& params, double t, int N, double winf) {
  if (!(winf >= 0.0)) throw DomainError("winf must be non-negative");
  double total = 0.0;
  for (const auto& term : prediction_terms(f, params, t, N)) total += term.value;
  return winf * total;
}

Tabulated read_tabulation_csv(std::istream& in, int dim) {
  if (dim < 1 || dim > 3) throw ConfigError("tabulations support 1 <= d <= 3");
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    bool numeric = true;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cell, &used));
      } catch (const std::exception&) {
        numeric = false;
        break;
      }
    }
    if (!numeric) {
      if (rows.empty()) continue;  // header line
      throw ConfigError("tabulation: non-numeric row: " + line);
    }
    if (static_cast<int>(row.size()) != dim + 1) throw ConfigError("tabulation: expected x_1..x_d,value columns");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ConfigError("tabulation: no data rows");

  Tabulated t;
  std::vector<std::map<double, std::size_t>> index(static_cast<std::size_t>(dim));
  for (int j = 0; j < dim; ++j) {
    std::vector<double> coords;
    for (const auto& r : rows) coords.push_back(r[static_cast<std::size_t>(j)]);
    std::sort(coords.begin(), coords.end());
    coords.erase(std::unique(coords.begin(), coords.end()), coords.end());
    if (coords.size() < 2) throw ConfigError("tabulation: need at least two distinct coordinates per axis");
    const double h = (coords.back() - coords.front()) / static_cast<double>(coords.size() - 1);
    for (std::size_t i = 0; i < coords.size(); ++i) {
      if (std::abs(coords[i] - (coords.front() + static_cast<double>(i) * h)) > 1e-9 * std::max(1.0, std::abs(h) * coords.size()))
        throw ConfigError("tabulation: coordinates are not uniformly spaced");
      index[static_cast<std::size_t>(j)][coords[i]] = i;
    }
    t.origin.push_back(coords.front());
    t.spacing.push_back(h);
    t.shape.push_back(coords.size());
  }
  t.values.assign(table_size(t), 0.0);
  std::vector<bool> seen(t.values.size(), false);
  for (const auto& r : rows) {
    std::size_t flat = 0;
    for (int j = 0; j < dim; ++j) flat = flat * t.shape[static_cast<std::size_t>(j)] + index[static_cast<std::size_t>(j)].at(r[static_cast<std::size_t>(j)]);
    if (seen[flat]) throw ConfigError("tabulation: duplicate grid node");
    seen[flat] = true;
    t.values[flat] = r.back();
  }
  if (std::find(seen.begin(), seen.end(), false) != seen.end()) throw ConfigError("tabulation: grid is not complete");
  return t;
}

Tabulated load_tabulation_csv(const std::string& path, int dim) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open tabulation file: " + path);
  return read_tabulation_csv(in, dim);
}

}  // namespace sslab
