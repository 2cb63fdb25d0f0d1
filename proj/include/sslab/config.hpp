#pragma once

// Flat `section.key = value` configuration with command-line overrides.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "sslab/measures.hpp"
#include "sslab/params.hpp"
#include "sslab/particle_sim.hpp"
#include "sslab/verifier.hpp"

namespace sslab {

class RunConfig {
 public:
  /// Lines are `key = value`; `#` starts a comment. Unknown keys are errors.
  static RunConfig parse(std::istream& in, const std::string& origin = "<config>");
  static RunConfig load(const std::string& path);

  /// Applies a `key=value` override.
  void apply(const std::string& assignment);
  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const { return values_.count(key) > 0; }

  // Getters record defaults so that the echo shows the effective configuration.
  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  /// Comma- or whitespace-separated numbers.
  std::vector<double> get_list(const std::string& key, const std::vector<double>& fallback) const;

  /// Explicit and defaulted entries, sorted by key.
  std::map<std::string, std::string> effective() const;
  /// One `<prefix>key = value` line per effective entry.
  std::string echo(const std::string& prefix = "# ") const;

  static const std::vector<std::string>& known_keys();

 private:
  std::map<std::string, std::string> values_;
  mutable std::map<std::string, std::string> defaults_;
};

StableParams params_from(const RunConfig& cfg);
/// `initial.atoms = x1,...,xd@mass; ...` (default: unit mass at the origin).
FiniteMeasure initial_from(const RunConfig& cfg, int dim);
/// Test function from the `function.*` keys.
TestFunction function_from(const RunConfig& cfg, const StableParams& params);
SimulationConfig simulation_from(const RunConfig& cfg);
/// Probes from `probe.*`: the configured test function plus optional
/// characteristic and kernel probes.
std::vector<Probe> probes_from(const RunConfig& cfg, const StableParams& params);
ExperimentPlan plan_from(const RunConfig& cfg);
MultiIndex multiindex_from(const RunConfig& cfg, const std::string& key, int dim);

}  // namespace sslab
