#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace magmap::cli {

enum ExitCode : int {
  kOk = 0,
  kUnexpected = 1,
  kInputError = 2,
  kModelFileError = 3,
  kStreamOrderError = 4,
  kNumericalError = 5,
};

/// Runs the command line `args` (without the program name). Standard
/// input is read only by `stream --data -`.
int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out,
        std::ostream& err);

}  // namespace magmap::cli
