#pragma once

#include "lccmix/core_types.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace lccmix {

enum ExitCode : int {
  kExitOk = 0,
  kExitInput = 2,
  kExitNumeric = 3,
  kExitConfig = 4,
};

// "w,m,v;w,m,v" in one dimension, or "w,m1:m2,v1:v2;..." with diagonal
// covariances in d dimensions. Throws ConfigError on malformed strings.
MixtureParams parse_mixture(const std::string& text);

// Entry point of the lccmix tool. Subcommands: fit, classify, population,
// simulate, sample. Returns the process exit code; never throws.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace lccmix
