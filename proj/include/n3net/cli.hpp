#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace n3net {

enum ExitCode : int {
  kExitOk = 0,
  kExitCheckFailed = 1,
  kExitIoError = 2,
  kExitConfigError = 3,
};

/// Runs one command line (without the program name), e.g.
/// {"train", "--epochs", "5", "--out", "run1"}. Commands: gradcheck,
/// limit-check, gen-data, train, denoise, ablate.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace n3net
