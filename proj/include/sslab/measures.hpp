#pragma once

// Initial measures and the whitelisted test-function family.

#include <complex>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "sslab/params.hpp"

namespace sslab {

/// Atomic finite measure m = sum_i mass_i delta_{location_i}.
class FiniteMeasure {
 public:
  struct Atom {
    std::vector<double> location;
    double mass = 0.0;
  };

  FiniteMeasure() = default;
  FiniteMeasure(int dim, std::vector<Atom> atoms, double moment_exponent = 1.0);
  static FiniteMeasure dirac(int dim, double mass = 1.0);

  int dim() const { return dim_; }
  const std::vector<Atom>& atoms() const { return atoms_; }
  double total_mass() const { return total_mass_; }
  /// Exponent a of the finite-moment condition; metadata for atomic measures.
  double moment_exponent() const { return moment_exponent_; }
  /// sum_i mass_i |location_i|^a
  double moment(double a) const;

 private:
  int dim_ = 1;
  std::vector<Atom> atoms_;
  double total_mass_ = 0.0;
  double moment_exponent_ = 1.0;
};

class TestFunction;

/// A exp(-a |x - c|^2)
struct GaussianBump {
  std::vector<double> center;
  double inverse_width = 1.0;
  double amplitude = 1.0;
};

/// f(x) = prod_j f_j(x_j) with one-dimensional factors.
struct ProductOf1D {
  std::vector<TestFunction> factors;
};

/// f = p_{t0} for the given stable parameters.
struct KernelSnapshot {
  StableParams params;
  double t0 = 1.0;
};

/// Multilinear interpolation of samples on a uniform tensor grid; zero outside.
struct Tabulated {
  std::vector<double> origin;
  std::vector<double> spacing;
  std::vector<std::size_t> shape;
  std::vector<double> values;  // axis 0 slowest
  /// Whether the tabulated function is known to vanish outside the grid.
  bool compact_tail = true;
};

/// f = value everywhere (not integrable; T_t f = f).
struct Constant {
  int dim = 1;
  double value = 1.0;
};

/// sum_i weight_i f_i
struct Mixture {
  std::vector<double> weights;
  std::vector<TestFunction> terms;
};

enum class TailClass { compact, gaussian, power, constant, unknown };

/// |f(x)| <= C |x|^{-exponent} for large |x| when cls == power.
struct TailInfo {
  TailClass cls = TailClass::unknown;
  double exponent = 0.0;
};

class TestFunction {
 public:
  using Kind = std::variant<GaussianBump, ProductOf1D, KernelSnapshot, Tabulated, Constant, Mixture>;

  TestFunction();
  explicit TestFunction(Kind kind);

  static TestFunction gaussian_bump(std::vector<double> center, double inverse_width = 1.0, double amplitude = 1.0);
  static TestFunction product(std::vector<TestFunction> factors);
  static TestFunction kernel_snapshot(const StableParams& params, double t0);
  static TestFunction tabulated(Tabulated table);
  static TestFunction constant(int dim, double value = 1.0);
  static TestFunction mixture(std::vector<double> weights, std::vector<TestFunction> terms);

  const Kind& kind() const { return *kind_; }
  int dim() const { return dim_; }

  /// f(x); for tabulated kinds `inside` is cleared off the grid.
  double operator()(std::span<const double> x, bool* inside = nullptr) const;

  bool has_analytic_fourier() const;
  bool has_analytic_moments() const;
  /// Member of the whitelist accepted a priori in the generator domain.
  bool in_generator_domain() const;
  bool is_constant() const { return std::holds_alternative<Constant>(*kind_); }
  TailInfo tail() const;
  /// sup |f| (an upper bound for mixtures).
  double sup_norm() const;
  /// Short human-readable description.
  std::string describe() const;

 private:
  std::shared_ptr<const Kind> kind_;
  int dim_ = 1;
};

/// lambda^k(f) = (1/k!) \int f(y) y^k dy. DomainError when divergent.
double moment_functional(const TestFunction& f, const MultiIndex& k);

enum class Tristate { yes, no, indeterminate };
const char* tristate_name(Tristate v);

struct IntegrabilityResult {
  Tristate verdict = Tristate::indeterminate;
  std::string diagnostic;
  bool ok() const { return verdict == Tristate::yes; }
};

/// Whether \int |f(y)| |y|^N dy < infinity, decided from the tail class.
IntegrabilityResult check_integrability(const TestFunction& f, int N);

/// f^(theta) = \int e^{-i theta.x} f(x) dx.
std::complex<double> fourier_transform(const TestFunction& f, std::span<const double> theta);

struct PredictionTerm {
  MultiIndex k;
  double theta = 0.0;
  double lambda = 0.0;
  /// (-1)^{|k|/2} t^{-(d+|k|)/alpha} theta^k lambda^k
  double value = 0.0;
};

/// Terms of the deterministic expansion for even |k| <= N (winf factored out).
std::vector<PredictionTerm> prediction_terms(const TestFunction& f, const StableParams& params, double t, int N);

/// winf * sum over even |k| <= N of (-1)^{|k|/2} t^{-(d+|k|)/alpha} theta^k lambda^k(f).
double theorem_prediction(const TestFunction& f, const StableParams& params, double t, int N, double winf);

/// Reads a tabulation with columns x_1..x_d,value on a full uniform tensor grid.
Tabulated read_tabulation_csv(std::istream& in, int dim);
Tabulated load_tabulation_csv(const std::string& path, int dim);

}  // namespace sslab
