#include "commands.hpp"

#include <fmt/format.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "sslab/errors.hpp"
#include "sslab/semigroup.hpp"
#include "sslab/stable_kernel.hpp"
#include "sslab/verifier.hpp"

namespace sslab::cli {
namespace {

using ordered_json = nlohmann::ordered_json;

std::string num(double v) { return std::isfinite(v) ? fmt::format("{:.17g}", v) : std::string("nan"); }

std::string header(const Context& ctx, const std::string& command) {
  return fmt::format("# sslab {}\n# command = {}\n", SSLAB_VERSION, command) + ctx.config.echo("# ");
}

ordered_json json_header(const Context& ctx, const std::string& command) {
  ordered_json j;
  j["version"] = SSLAB_VERSION;
  j["command"] = command;
  ordered_json cfg = ordered_json::object();
  for (const auto& [k, v] : ctx.config.effective()) cfg[k] = v;
  j["config"] = cfg;
  return j;
}

// Writes all files after the command has finished computing.
void write_outputs(const Context& ctx, const std::vector<std::pair<std::string, std::string>>& files) {
  std::filesystem::create_directories(ctx.out_dir);
  for (const auto& [name, body] : files) {
    const auto path = ctx.out_dir / name;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << body;
    if (ctx.log) *ctx.log << "wrote " << path.string() << '\n';
  }
}

std::string k_label(const MultiIndex& k) {
  std::string s;
  for (int j = 0; j < k.dim(); ++j) s += (j ? "-" : "") + std::to_string(k[j]);
  return s;
}

KernelMethod parse_method(const std::string& m) {
  if (m == "automatic") return KernelMethod::automatic;
  if (m == "closed_form") return KernelMethod::closed_form;
  if (m == "quadrature") return KernelMethod::quadrature;
  throw ConfigError("kernel.method must be automatic, closed_form or quadrature");
}

}  // namespace

std::filesystem::path default_out_dir() {
  if (const char* env = std::getenv("SSLAB_OUT"); env && *env) return env;
  return "sslab_out";
}

int guarded(std::ostream& err, const std::function<int()>& fn) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const DomainError& e) {
    err << "domain error: " << e.what() << '\n';
    return kConfigError;
  } catch (const CapacityError& e) {
    err << "capacity error: " << e.what() << '\n';
    return kCapacityError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kError;
  }
}

int cmd_theta(Context& ctx) {
  const StableParams params = params_from(ctx.config);
  const int max_order = static_cast<int>(ctx.config.get_int("theta.max_order", 2));
  if (max_order < 0) throw ConfigError("theta.max_order must be non-negative");
  std::ostringstream body;
  for (int j = 1; j <= params.dim; ++j) body << "k" << j << ',';
  body << "order,theta\n";
  for (const auto& k : multiindex_enumerate(params.dim, max_order)) {
    for (int j = 0; j < params.dim; ++j) body << k[j] << ',';
    body << k.order() << ',' << num(theta_constant(params, k)) << '\n';
  }
  write_outputs(ctx, {{"theta.csv", header(ctx, "theta") + body.str()}});
  return kOk;
}

int cmd_kernel(Context& ctx) {
  const StableParams params = params_from(ctx.config);
  const double t = ctx.config.get_double("kernel.t", 1.0);
  const MultiIndex k = multiindex_from(ctx.config, "kernel.k", params.dim);
  const int points = static_cast<int>(ctx.config.get_int("kernel.points", params.dim == 1 ? 64 : 32));
  const double extent = ctx.config.get_double("kernel.half_extent", 0.0);
  const KernelMethod method = parse_method(ctx.config.get_string("kernel.method", "automatic"));
  const GridSpec grid = extent > 0.0 ? GridSpec{extent, points} : GridSpec::automatic(params, t, points);

  GridFunction values;
  if (method == KernelMethod::automatic) {
    values = kernel_grid(params, k, t, grid);
  } else {
    values.dim = params.dim;
    values.grid = grid;
    const auto total = static_cast<std::size_t>(std::pow(points, params.dim));
    values.values.resize(total);
    GridFunction shape;
    shape.dim = params.dim;
    shape.grid = grid;
    for (std::size_t i = 0; i < total; ++i) {
      const auto x = shape.point(i);
      values.values[i] = density_derivative(params, k, t, x, method);
    }
  }

  std::ostringstream body;
  body << "# grid.half_extent = " << num(grid.half_extent) << '\n'
       << "# grid.points_per_axis = " << grid.points_per_axis << '\n'
       << "# grid.spacing = " << num(grid.spacing()) << '\n';
  if (values.accuracy_warning) body << "# warning = " << values.warning << '\n';
  for (int j = 1; j <= params.dim; ++j) body << 'x' << j << ',';
  body << "value\n";
  for (std::size_t i = 0; i < values.values.size(); ++i) {
    for (double c : values.point(i)) body << num(c) << ',';
    body << num(values.values[i]) << '\n';
  }
  if (ctx.log && values.accuracy_warning) *ctx.log << "warning: " << values.warning << '\n';
  write_outputs(ctx, {{"kernel.csv", header(ctx, "kernel") + body.str()}});
  return kOk;
}

int cmd_expand(Context& ctx) {
  const StableParams params = params_from(ctx.config);
  const TestFunction f = function_from(ctx.config, params);
  const auto t_grid = ctx.config.get_list("expand.t_grid", {10.0, 20.0, 40.0, 80.0});
  const int order = static_cast<int>(ctx.config.get_int("expand.order", 0));
  const int points = static_cast<int>(ctx.config.get_int("expand.points", params.dim == 1 ? 256 : 48));
  const double extent = ctx.config.get_double("expand.half_extent", 0.0);
  if (t_grid.empty()) throw ConfigError("expand.t_grid must not be empty");

  std::ostringstream body;
  bool first = true;
  for (double t : t_grid) {
    const GridSpec grid = extent > 0.0 ? GridSpec{extent, points} : GridSpec::automatic(params, t, points);
    const ExpansionResult r = expansion_approx(params, f, t, order, grid);
    if (first) {
      body << "t,scaled_sup_error,accuracy_warning";
      for (const auto& term : r.per_term) body << ",coef_" << k_label(term.k);
      body << '\n';
      first = false;
    }
    body << num(t) << ',' << num(r.scaled_sup_error) << ',' << (r.accuracy_warning ? 1 : 0);
    for (const auto& term : r.per_term) body << ',' << num(term.coefficient);
    body << '\n';
  }
  write_outputs(ctx, {{"expand.csv", header(ctx, "expand") + body.str()}});
  return kOk;
}

int cmd_simulate(Context& ctx) {
  const SimulationConfig sim = simulation_from(ctx.config);
  const auto probes = probes_from(ctx.config, sim.params);
  const std::uint64_t replicates = ctx.config.get_u64("sim.replicates", 1);
  const auto threads = static_cast<unsigned>(ctx.config.get_int("run.threads", 0));
  if (replicates < 1) throw ConfigError("sim.replicates must be positive");
  sim.validate();

  const auto records = run_replicates(sim, probes, replicates, threads);
  for (const auto& rec : records)
    if (rec.aborted) throw CapacityError(fmt::format("replicate {} aborted: {}", rec.replicate, rec.abort_reason));

  std::ostringstream csv;
  csv << header(ctx, "simulate");
  write_trajectory_csv(csv, records, probes);

  ordered_json summary = json_header(ctx, "simulate");
  ordered_json times = ordered_json::array();
  const auto& rows0 = records.front().rows;
  for (std::size_t i = 0; i < rows0.size(); ++i) {
    std::vector<double> w, wt;
    std::uint64_t alive = 0;
    for (const auto& rec : records) {
      w.push_back(rec.rows[i].w1);
      wt.push_back(rec.rows[i].wtilde1);
      if (rec.rows[i].population > 0) ++alive;
    }
    const SampleStats sw = sample_stats(w), st = sample_stats(wt);
    times.push_back({{"t", rows0[i].t},
                     {"count_only", rows0[i].count_only},
                     {"mean_W1", sw.mean},
                     {"se_W1", sw.se},
                     {"mean_Wtilde1", st.mean},
                     {"se_Wtilde1", st.se},
                     {"var_Wtilde1", st.variance},
                     {"survivor_fraction", static_cast<double>(alive) / static_cast<double>(records.size())}});
  }
  summary["replicates"] = replicates;
  summary["times"] = times;
  std::uint64_t outside = 0;
  for (const auto& rec : records) outside += rec.outside_count;
  summary["outside_count"] = outside;

  write_outputs(ctx, {{"trajectories.csv", csv.str()}, {"summary.json", summary.dump(2) + "\n"}});
  return kOk;
}

int cmd_verify(Context& ctx) {
  const ExperimentPlan plan = plan_from(ctx.config);
  const std::string list = ctx.config.get_string("plan.experiments", "first_moment");
  std::vector<std::string> names;
  {
    std::string cur;
    for (char c : list + ",") {
      if (c == ',' || c == ' ') {
        if (!cur.empty()) names.push_back(cur);
        cur.clear();
      } else {
        cur += c;
      }
    }
  }
  if (names.empty()) throw ConfigError("plan.experiments must name at least one experiment");
  const auto s_grid = ctx.config.get_list("plan.s_grid", {1.0, 2.0, 4.0});
  const double gap = ctx.config.get_double("plan.gap", 1.0);
  const bool doubling = ctx.config.get_bool("plan.check_doubling", true);
  const MultiIndex k = multiindex_from(ctx.config, "plan.k", plan.sim.params.dim);
  for (const auto& name : names)
    if (name != "first_moment" && name != "variance" && name != "decoupling" && name != "kernel_limit" &&
        name != "theorem")
      throw ConfigError("unknown experiment '" + name + "'");

  std::vector<EstimatorReport> reports;
  bool errored = false, capacity = false;
  for (const auto& name : names) {
    EstimatorReport report;
    try {
      if (name == "first_moment") report = first_moment_test(plan);
      if (name == "variance") report = variance_test(plan, doubling);
      if (name == "decoupling") report = decoupling_test(plan, s_grid, gap);
      if (name == "kernel_limit") report = kernel_limit_experiment(plan, k);
      if (name == "theorem") report = theorem_experiment(plan);
    } catch (const std::exception& e) {
      report = EstimatorReport{};
      report.experiment = name;
      report.details["error"] = e.what();
      report.checks.push_back(Check{"error", Verdict::fail, std::nan(""), std::nan(""), std::nan(""), e.what()});
      errored = true;
      capacity = capacity || dynamic_cast<const CapacityError*>(&e) != nullptr;
    }
    if (ctx.log) {
      for (const auto& c : report.checks)
        *ctx.log << fmt::format("{:<14} {:<28} {:<13} measured={} target={}\n", report.experiment, c.name,
                                verdict_name(c.verdict), num(c.measured), num(c.target));
    }
    reports.push_back(std::move(report));
  }

  ordered_json out = json_header(ctx, "verify");
  ordered_json arr = ordered_json::array();
  bool failed = false;
  std::ostringstream csv;
  csv << header(ctx, "verify");
  bool first = true;
  for (const auto& r : reports) {
    arr.push_back(ordered_json::parse(r.to_json().dump()));
    failed = failed || r.any_failed();
    std::ostringstream part;
    r.write_csv(part);
    std::string text = part.str();
    if (!first) text.erase(0, text.find('\n') + 1);
    csv << text;
    first = false;
  }
  out["reports"] = arr;
  out["passed"] = !failed;
  write_outputs(ctx, {{"report.json", out.dump(2) + "\n"}, {"report.csv", csv.str()}});
  if (capacity) return kCapacityError;
  if (errored) return kError;
  return failed ? kCheckFailed : kOk;
}

}  // namespace sslab::cli
