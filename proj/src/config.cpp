#include "sslab/config.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <sstream>

#include "sslab/errors.hpp"

namespace sslab {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& text) {
  double v = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) throw ConfigError(fmt::format("{}: expected a number, got '{}'", key, text));
  return v;
}

template <class Int>
Int to_integer(const std::string& key, const std::string& text) {
  Int v = 0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  int base = 10;
  if (text.size() > 2 && text[0] == '0' && (text[1] == 'x' || text[1] == 'X')) {
    first += 2;
    base = 16;
  }
  auto [ptr, ec] = std::from_chars(first, last, v, base);
  if (ec != std::errc() || ptr != last) throw ConfigError(fmt::format("{}: expected an integer, got '{}'", key, text));
  return v;
}

std::vector<std::string> split(const std::string& text, const std::string& separators) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : text) {
    if (separators.find(c) != std::string::npos) {
      if (!trim(cur).empty()) parts.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!trim(cur).empty()) parts.push_back(trim(cur));
  return parts;
}

std::string format_list(const std::vector<double>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) out += (i ? "," : "") + fmt::format("{:g}", xs[i]);
  return out;
}

}  // namespace

const std::vector<std::string>& RunConfig::known_keys() {
  static const std::vector<std::string> keys{
      "params.alpha",       "params.dim",          "initial.atoms",        "function.kind",
      "function.center",    "function.inverse_width", "function.amplitude", "function.value",
      "function.t0",        "function.path",       "sim.beta",             "sim.scale",
      "sim.horizon",        "sim.record_times",    "sim.count_times",      "sim.seed",
      "sim.max_particles",  "sim.engine",          "sim.replicates",       "probe.function",
      "probe.theta",        "probe.kernel_k",      "probe.kernel_s",       "plan.replicates",
      "plan.t_grid",        "plan.expansion_order", "plan.rho_exponent",   "plan.conditioning",
      "plan.experiments",   "plan.s_grid",         "plan.gap",             "plan.k",
      "plan.check_doubling", "kernel.t",           "kernel.k",             "kernel.points",
      "kernel.half_extent", "kernel.method",       "theta.max_order",      "expand.t_grid",
      "expand.order",       "expand.points",       "expand.half_extent",   "run.threads",
      "run.verbosity"};
  return keys;
}

RunConfig RunConfig::parse(std::istream& in, const std::string& origin) {
  RunConfig cfg;
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(fmt::format("{}:{}: expected 'key = value'", origin, number));
    const std::string key = trim(line.substr(0, eq));
    if (cfg.values_.count(key)) throw ConfigError(fmt::format("{}:{}: duplicate key '{}'", origin, number, key));
    try {
      cfg.set(key, trim(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError(fmt::format("{}:{}: {}", origin, number, e.what()));
    }
  }
  return cfg;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  return parse(in, path);
}

void RunConfig::apply(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("override must look like key=value: " + assignment);
  set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

void RunConfig::set(const std::string& key, const std::string& value) {
  const auto& keys = known_keys();
  if (std::find(keys.begin(), keys.end(), key) == keys.end()) throw ConfigError("unknown configuration key '" + key + "'");
  values_[key] = value;
}

std::string RunConfig::get_string(const std::string& key, const std::string& fallback) const {
  if (auto it = values_.find(key); it != values_.end()) return it->second;
  defaults_[key] = fallback;
  return fallback;
}

double RunConfig::get_double(const std::string& key, double fallback) const {
  if (auto it = values_.find(key); it != values_.end()) return to_double(key, it->second);
  defaults_[key] = fmt::format("{:g}", fallback);
  return fallback;
}

std::int64_t RunConfig::get_int(const std::string& key, std::int64_t fallback) const {
  if (auto it = values_.find(key); it != values_.end()) return to_integer<std::int64_t>(key, it->second);
  defaults_[key] = std::to_string(fallback);
  return fallback;
}

std::uint64_t RunConfig::get_u64(const std::string& key, std::uint64_t fallback) const {
  if (auto it = values_.find(key); it != values_.end()) return to_integer<std::uint64_t>(key, it->second);
  defaults_[key] = std::to_string(fallback);
  return fallback;
}

bool RunConfig::get_bool(const std::string& key, bool fallback) const {
  if (auto it = values_.find(key); it != values_.end()) {
    const std::string& v = it->second;
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError(fmt::format("{}: expected a boolean, got '{}'", key, v));
  }
  defaults_[key] = fallback ? "true" : "false";
  return fallback;
}

std::vector<double> RunConfig::get_list(const std::string& key, const std::vector<double>& fallback) const {
  if (auto it = values_.find(key); it != values_.end()) {
    std::vector<double> out;
    for (const auto& part : split(it->second, ", \t")) out.push_back(to_double(key, part));
    return out;
  }
  defaults_[key] = format_list(fallback);
  return fallback;
}

std::map<std::string, std::string> RunConfig::effective() const {
  std::map<std::string, std::string> out = defaults_;
  for (const auto& [k, v] : values_) out[k] = v;
  return out;
}

std::string RunConfig::echo(const std::string& prefix) const {
  std::string out;
  for (const auto& [k, v] : effective()) out += prefix + k + " = " + v + "\n";
  return out;
}

StableParams params_from(const RunConfig& cfg) {
  StableParams p{cfg.get_double("params.alpha", 2.0), static_cast<int>(cfg.get_int("params.dim", 1))};
  try {
    p.validate();
  } catch (const DomainError& e) {
    throw ConfigError(e.what());
  }
  return p;
}

FiniteMeasure initial_from(const RunConfig& cfg, int dim) {
  const std::string text = cfg.get_string("initial.atoms", std::string("0@1"));
  std::vector<FiniteMeasure::Atom> atoms;
  for (const auto& entry : split(text, ";")) {
    FiniteMeasure::Atom atom;
    const auto at = entry.find('@');
    const std::string loc = trim(entry.substr(0, at));
    atom.mass = at == std::string::npos ? 1.0 : to_double("initial.atoms", trim(entry.substr(at + 1)));
    for (const auto& c : split(loc, ", ")) atom.location.push_back(to_double("initial.atoms", c));
    if (atom.location.size() == 1 && dim > 1) atom.location.assign(static_cast<std::size_t>(dim), atom.location[0]);
    if (static_cast<int>(atom.location.size()) != dim)
      throw ConfigError(fmt::format("initial.atoms: atom '{}' does not have {} coordinates", entry, dim));
    atoms.push_back(std::move(atom));
  }
  if (atoms.empty()) throw ConfigError("initial.atoms must list at least one atom");
  try {
    return FiniteMeasure(dim, std::move(atoms));
  } catch (const DomainError& e) {
    throw ConfigError(std::string("initial.atoms: ") + e.what());
  }
}

TestFunction function_from(const RunConfig& cfg, const StableParams& params) {
  const std::string kind = cfg.get_string("function.kind", "gaussian");
  const auto dim = static_cast<std::size_t>(params.dim);
  try {
    if (kind == "gaussian") {
      auto center = cfg.get_list("function.center", std::vector<double>(dim, 0.0));
      if (center.size() == 1 && dim > 1) center.assign(dim, center[0]);
      if (center.size() != dim) throw ConfigError("function.center has the wrong dimension");
      return TestFunction::gaussian_bump(center, cfg.get_double("function.inverse_width", 1.0),
                                         cfg.get_double("function.amplitude", 1.0));
    }
    if (kind == "constant") return TestFunction::constant(params.dim, cfg.get_double("function.value", 1.0));
    if (kind == "kernel_snapshot") return TestFunction::kernel_snapshot(params, cfg.get_double("function.t0", 1.0));
    if (kind == "tabulated") {
      const std::string path = cfg.get_string("function.path", "");
      if (path.empty()) throw ConfigError("function.path is required for tabulated functions");
      return TestFunction::tabulated(load_tabulation_csv(path, params.dim));
    }
  } catch (const DomainError& e) {
    throw ConfigError(std::string("function: ") + e.what());
  }
  throw ConfigError("function.kind must be gaussian, constant, kernel_snapshot or tabulated, got '" + kind + "'");
}

SimulationConfig simulation_from(const RunConfig& cfg) {
  SimulationConfig sim;
  sim.params = params_from(cfg);
  sim.beta = cfg.get_double("sim.beta", 0.5);
  sim.scale = cfg.get_int("sim.scale", 1000);
  sim.initial = initial_from(cfg, sim.params.dim);
  sim.record_times = cfg.get_list("sim.record_times", {1.0, 2.0});
  sim.horizon = cfg.get_double("sim.horizon", sim.record_times.empty() ? 1.0 : sim.record_times.back());
  sim.count_times = cfg.get_list("sim.count_times", {});
  sim.seed = cfg.get_u64("sim.seed", 1);
  sim.max_particles = cfg.get_u64("sim.max_particles", 10'000'000);
  sim.engine = parse_engine(cfg.get_string("sim.engine", "genealogical"));
  return sim;
}

std::vector<Probe> probes_from(const RunConfig& cfg, const StableParams& params) {
  std::vector<Probe> probes;
  if (cfg.get_bool("probe.function", true)) probes.push_back(Probe{"f", function_from(cfg, params), std::nullopt});
  const auto theta = cfg.get_list("probe.theta", {});
  if (!theta.empty()) {
    if (static_cast<int>(theta.size()) != params.dim) throw ConfigError("probe.theta has the wrong dimension");
    probes.push_back(Probe{"char", CharacteristicProbe{theta}, std::nullopt});
  }
  const std::string k = cfg.get_string("probe.kernel_k", "");
  if (!k.empty())
    probes.push_back(Probe{"kernel", KernelProbe{multiindex_from(cfg, "probe.kernel_k", params.dim),
                                                 cfg.get_double("probe.kernel_s", 1.0)},
                           std::nullopt});
  return probes;
}

MultiIndex multiindex_from(const RunConfig& cfg, const std::string& key, int dim) {
  std::string zeros = "0";
  for (int j = 1; j < dim; ++j) zeros += ",0";
  const std::string text = cfg.get_string(key, zeros);
  try {
    return parse_multiindex(text, dim);
  } catch (const std::exception& e) {
    throw ConfigError(key + ": " + e.what());
  }
}

ExperimentPlan plan_from(const RunConfig& cfg) {
  ExperimentPlan plan;
  plan.sim = simulation_from(cfg);
  plan.replicates = cfg.get_u64("plan.replicates", 200);
  plan.t_grid = cfg.get_list("plan.t_grid", {1.0, 2.0, 4.0});
  plan.expansion_order = static_cast<int>(cfg.get_int("plan.expansion_order", 0));
  plan.test_function = function_from(cfg, plan.sim.params);
  plan.rho_exponent = cfg.get_double("plan.rho_exponent", 0.5);
  plan.conditioning = parse_conditioning(cfg.get_string("plan.conditioning", "all"));
  plan.threads = static_cast<unsigned>(cfg.get_int("run.threads", 0));
  plan.validate();
  return plan;
}

}  // namespace sslab
