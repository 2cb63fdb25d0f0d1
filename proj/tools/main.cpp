#include <CLI11.hpp>

#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include "commands.hpp"

int main(int argc, char** argv) {
  using namespace sslab::cli;
  CLI::App app{"Numerical lab for supercritical alpha-stable superprocesses"};
  app.set_version_flag("--version", std::string(SSLAB_VERSION));
  app.require_subcommand(1);

  std::string config_path, out_dir;
  std::vector<std::string> overrides;
  std::uint64_t seed = 0;
  int threads = -1;
  bool quiet = false;
  app.add_option("--config", config_path, "Configuration file (section.key = value)")->check(CLI::ExistingFile);
  app.add_option("--out", out_dir, "Output directory (default: $SSLAB_OUT or ./sslab_out)");
  auto* seed_opt = app.add_option("--seed", seed, "Base seed (overrides sim.seed)");
  app.add_option("--threads", threads, "Replicate threads (overrides run.threads; 0 = all cores)");
  app.add_option("--set", overrides, "Override a key: --set key=value (repeatable)");
  app.add_flag("-q,--quiet", quiet, "Suppress progress messages");

  auto* theta = app.add_subcommand("theta", "Table of the expansion constants theta^k")->fallthrough();
  auto* kernel = app.add_subcommand("kernel", "Gridded d^k p_t")->fallthrough();
  auto* expand = app.add_subcommand("expand", "Scaled sup errors of the semigroup expansion")->fallthrough();
  auto* simulate = app.add_subcommand("simulate", "Trajectories of the branching particle system")->fallthrough();
  auto* verify = app.add_subcommand("verify", "Run the experiments of a plan")->fallthrough();

  double alpha = 0.0;
  int dim = 0, max_order = -1;
  theta->add_option("--alpha", alpha, "Stability index");
  theta->add_option("--dim", dim, "Dimension");
  theta->add_option("--max-order", max_order, "Largest |k|");

  CLI11_PARSE(app, argc, argv);

  std::ostream* log = quiet ? nullptr : &std::cerr;
  return guarded(std::cerr, [&]() -> int {
    Context ctx;
    if (!config_path.empty()) ctx.config = sslab::RunConfig::load(config_path);
    if (alpha > 0.0) ctx.config.set("params.alpha", std::to_string(alpha));
    if (dim > 0) ctx.config.set("params.dim", std::to_string(dim));
    if (max_order >= 0) ctx.config.set("theta.max_order", std::to_string(max_order));
    for (const auto& o : overrides) ctx.config.apply(o);
    if (*seed_opt) ctx.config.set("sim.seed", std::to_string(seed));
    if (threads >= 0) ctx.config.set("run.threads", std::to_string(threads));
    ctx.out_dir = out_dir.empty() ? default_out_dir() : std::filesystem::path(out_dir);
    ctx.log = log;

    if (theta->parsed()) return cmd_theta(ctx);
    if (kernel->parsed()) return cmd_kernel(ctx);
    if (expand->parsed()) return cmd_expand(ctx);
    if (simulate->parsed()) return cmd_simulate(ctx);
    if (verify->parsed()) return cmd_verify(ctx);
    return kError;
  });
}
