#pragma once

// Branching alpha-stable particle system approximating the supercritical
// Dawson-Watanabe process: n particles per unit mass, each branching at rate
// n into 2 offspring with probability 1/2 + beta/(2n) and into 0 otherwise,
// moving as independent isotropic alpha-stable motions in between.

#include <array>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "sslab/measures.hpp"
#include "sslab/params.hpp"
#include "sslab/simd/kernels.hpp"
#include "sslab/stable_kernel.hpp"

namespace sslab {

using Rng = std::mt19937_64;

/// splitmix64 finaliser.
std::uint64_t mix64(std::uint64_t x);
/// Seed of replicate `index` derived from `base`; independent of scheduling.
std::uint64_t replicate_seed(std::uint64_t base, std::uint64_t index);

/// One draw from p_dt (characteristic function e^{-dt |theta|^alpha}).
void sample_stable_increment(const StableParams& params, double dt, Rng& rng, std::span<double> out);
std::vector<double> sample_stable_increment(const StableParams& params, double dt, Rng& rng);

/// Positive (alpha/2)-stable variable S with E e^{-uS} = e^{-dt u^{alpha/2}}.
double sample_positive_stable(double alpha, double dt, Rng& rng);

enum class Engine { genealogical, event_driven };
const char* engine_name(Engine e);
Engine parse_engine(const std::string& name);

struct SimulationConfig {
  StableParams params;
  double beta = 0.0;
  std::int64_t scale = 1000;
  FiniteMeasure initial = FiniteMeasure::dirac(1);
  double horizon = 1.0;
  /// Times at which particle positions are observed.
  std::vector<double> record_times{1.0};
  /// Later times at which only the population count is observed.
  std::vector<double> count_times;
  std::uint64_t seed = 0;
  std::uint64_t max_particles = 10'000'000;
  Engine engine = Engine::genealogical;

  /// Throws ConfigError on inconsistent fields and CapacityError when
  /// n m(1) e^{beta T} > max_particles / 10 for the last record time T.
  void validate() const;
  double birth_rate() const { return 0.5 * (static_cast<double>(scale) + beta); }
  double death_rate() const { return 0.5 * (static_cast<double>(scale) - beta); }
  double two_offspring_probability() const { return 0.5 + beta / (2.0 * static_cast<double>(scale)); }
  double mean_offspring() const { return 2.0 * two_offspring_probability(); }
  double particle_mass() const { return 1.0 / static_cast<double>(scale); }
};

/// Sum of d^k p_s over the particles (times the particle mass).
struct KernelProbe {
  MultiIndex k;
  double s = 1.0;
};

/// Real and imaginary parts of W(e_theta).
struct CharacteristicProbe {
  std::vector<double> theta;
};

/// A functional recorded along a trajectory, optionally at a single time.
struct Probe {
  std::string name;
  std::variant<TestFunction, KernelProbe, CharacteristicProbe> what;
  std::optional<double> at_time;

  std::size_t width() const { return std::holds_alternative<CharacteristicProbe>(what) ? 2 : 1; }
};

/// Column names of a probe list (characteristic probes span two columns).
std::vector<std::string> probe_columns(const std::vector<Probe>& probes);

struct RecordRow {
  double t = 0.0;
  std::uint64_t population = 0;
  double w1 = 0.0;
  double wtilde1 = 0.0;
  /// W_t of every probe column; NaN where not evaluated.
  std::vector<double> values;
  bool count_only = false;
};

struct TrajectoryRecord {
  std::uint64_t replicate = 0;
  std::uint64_t seed = 0;
  std::vector<RecordRow> rows;
  bool extinct = false;
  /// Exact time the population reached 0 (NaN while alive).
  double extinction_time = 0.0;
  bool aborted = false;
  std::string abort_reason;
  /// Particles outside a tabulated function or kernel table.
  std::uint64_t outside_count = 0;

  const RecordRow* row_at(double t) const;
};

/// Particle positions, axis-major: coords[j][i] is coordinate j of particle i.
struct ParticleState {
  int dim = 1;
  double time = 0.0;
  double mass = 1.0;
  std::array<std::vector<double>, 3> coords;

  std::size_t population() const { return coords[0].size(); }
  void add(std::span<const double> x);
  void clear();
  simd::PointsView view(std::size_t offset = 0, std::size_t count = SIZE_MAX) const;
};

/// sum_i mass f(x_i)
double evaluate_functional(const ParticleState& state, const TestFunction& f, std::uint64_t* outside = nullptr);
/// sum_i mass d^k p_s(x_i)
double evaluate_kernel_functional(const ParticleState& state, const StableParams& params, const MultiIndex& k, double s,
                                  std::uint64_t* outside = nullptr);
/// sum_i mass e^{i theta.x_i}
std::complex<double> empirical_characteristic(const ParticleState& state, std::span<const double> theta);

/// Shared kernel table for (params, k, s); built once per key.
std::shared_ptr<const KernelTable> cached_kernel_table(const StableParams& params, const MultiIndex& k, double s);

/// Branching event: time and population change (+1 or -1).
using EventObserver = std::function<void(double time, int delta)>;

/// One trajectory. Positions are exact in law at every record time.
TrajectoryRecord simulate(const SimulationConfig& config, const std::vector<Probe>& probes,
                          std::uint64_t replicate = 0, const EventObserver& observer = {});

/// Initial particle cloud: round(n m(1)) particles drawn from m / m(1).
ParticleState initial_state(const SimulationConfig& config, Rng& rng);

/// Birth-death family bookkeeping over a span u for rates (lambda, mu).
struct FamilyLaw {
  double lambda = 0.0;
  double mu = 0.0;

  double growth() const { return lambda - mu; }
  /// P(family alive after u)
  double survival(double u) const;
  /// E[tips | alive after u]
  double conditional_mean(double u) const;
  /// Depth of a coalescence node conditioned below u.
  double sample_node_depth(double u, Rng& rng) const;
  /// Latest extinction time among `families` families all conditioned to
  /// die within u.
  double sample_extinction_time(double u, std::uint64_t families, Rng& rng) const;
};

/// Count-only evolution of `population` particles over span u. When the
/// population dies out, `extinction_offset` receives the time of death
/// measured from the start of the span.
std::uint64_t evolve_count(const FamilyLaw& law, std::uint64_t population, double u, Rng& rng,
                           double* extinction_offset = nullptr);

void write_trajectory_csv(std::ostream& out, const std::vector<TrajectoryRecord>& records,
                          const std::vector<Probe>& probes);

}  // namespace sslab
