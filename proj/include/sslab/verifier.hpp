#pragma once

// Replicated Monte Carlo experiments on the particle system: moment
// identities, decoupling decay, kernel-functional limits and the long-time
// expansion of W_t(f).

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "sslab/measures.hpp"
#include "sslab/particle_sim.hpp"

namespace sslab {

enum class Conditioning { all, survivors_only, both };
const char* conditioning_name(Conditioning c);
Conditioning parse_conditioning(const std::string& name);

enum class Verdict { pass, fail, indeterminate };
const char* verdict_name(Verdict v);

struct ExperimentPlan {
  SimulationConfig sim;
  std::uint64_t replicates = 200;
  std::vector<double> t_grid{1.0, 2.0, 4.0};
  int expansion_order = 0;
  TestFunction test_function = TestFunction::constant(1);
  /// rho(t) = t^kappa
  double rho_exponent = 0.5;
  Conditioning conditioning = Conditioning::all;
  /// 0 selects the hardware concurrency.
  unsigned threads = 0;

  void validate() const;
};

/// One estimated quantity at one time.
struct EstimateRow {
  double t = 0.0;
  std::string quantity;
  double mean = 0.0;
  double variance = 0.0;
  double se = 0.0;
  std::uint64_t count = 0;
  Conditioning conditioning = Conditioning::all;
  /// NaN when the quantity has no target.
  double target = 0.0;
};

struct Check {
  std::string name;
  Verdict verdict = Verdict::indeterminate;
  double measured = 0.0;
  double target = 0.0;
  double tolerance = 0.0;
  std::string note;
};

struct EstimatorReport {
  std::string experiment;
  std::vector<EstimateRow> rows;
  std::vector<Check> checks;
  nlohmann::json details = nlohmann::json::object();

  /// No check failed.
  bool passed() const;
  bool any_failed() const;
  nlohmann::json to_json() const;
  /// Columns: experiment,t,quantity,conditioning,estimate,target,se,count,verdict
  void write_csv(std::ostream& out) const;
};

/// Sample statistics with SE = sqrt(variance / count).
struct SampleStats {
  std::uint64_t count = 0;
  double mean = 0.0;
  double variance = 0.0;
  double se = 0.0;
  /// Standard error of the sample variance from the fourth central moment.
  double variance_se = 0.0;
};
SampleStats sample_stats(const std::vector<double>& xs);

/// Runs replicates 0..R-1 of `config`, concurrently, returned in replicate order.
std::vector<TrajectoryRecord> run_replicates(const SimulationConfig& config, const std::vector<Probe>& probes,
                                             std::uint64_t replicates, unsigned threads = 0);

struct WinfEstimate {
  double mean = 0.0;
  double se = 0.0;
  double survivor_fraction = 0.0;
  /// Per replicate e^{-beta T} W_T(1).
  std::vector<double> proxies;
};

/// Proxy W~_infinity(1) = e^{-beta T} W_T(1) per replicate. T must be a record
/// (or count-only) time of every trajectory.
WinfEstimate estimate_winf(const std::vector<TrajectoryRecord>& records, double T, double beta);

/// Latest recorded time of a configuration (count-only times included).
double proxy_time(const SimulationConfig& config);

EstimatorReport first_moment_test(const ExperimentPlan& plan);
/// When `check_doubling` is set the run is repeated at 2n with the same seed
/// and the summed |bias| must shrink.
EstimatorReport variance_test(const ExperimentPlan& plan, bool check_doubling = true);
EstimatorReport decoupling_test(const ExperimentPlan& plan, const std::vector<double>& s_grid, double gap);
EstimatorReport kernel_limit_experiment(const ExperimentPlan& plan, const MultiIndex& k);
/// Residuals of the order-N expansion; for N > 0 also the paired comparison
/// with the order-0 residual at the last time.
EstimatorReport theorem_experiment(const ExperimentPlan& plan);
/// Trajectories used by theorem_experiment; reusable across expansion orders.
std::vector<TrajectoryRecord> theorem_records(const ExperimentPlan& plan);
EstimatorReport theorem_report(const ExperimentPlan& plan, const std::vector<TrajectoryRecord>& records);

}  // namespace sslab
