#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>

#include "sslab/config.hpp"

namespace sslab::cli {

enum ExitCode : int {
  kOk = 0,
  kError = 1,
  kConfigError = 2,
  kCapacityError = 3,
  kCheckFailed = 4,
};

struct Context {
  RunConfig config;
  std::filesystem::path out_dir;
  std::ostream* log = nullptr;
};

/// Directory from the SSLAB_OUT environment variable, else ./sslab_out.
std::filesystem::path default_out_dir();

int cmd_theta(Context& ctx);
int cmd_kernel(Context& ctx);
int cmd_expand(Context& ctx);
int cmd_simulate(Context& ctx);
int cmd_verify(Context& ctx);

/// Runs `fn`, mapping exceptions to exit codes and messages on `err`.
int guarded(std::ostream& err, const std::function<int()>& fn);

}  // namespace sslab::cli
