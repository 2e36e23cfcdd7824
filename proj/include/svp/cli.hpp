#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "svp/matrix.hpp"

namespace svp::cli {

enum ExitCode : int {
  kOk = 0,
  kUsage = 2,
  kHypothesis = 3,
  kIo = 4,
  kNumerical = 5,
};

// "start:stop:count" with inclusive endpoints; a bare number is a
// one-point grid.
Vector parse_grid(const std::string& spec);

// args excludes the program name. Diagnostics go to `err`, short
// progress/summary lines to `out`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace svp::cli
