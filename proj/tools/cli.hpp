#pragma once

#include <iosfwd>
#include <stdexcept>

namespace lcseq::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kRuntime = 2 };

/// Bad or conflicting flags; reported with exit code 1.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Entry point behind the `lcseq` executable. Subcommands: gen-data, train,
/// eval, sweep, generate.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace lcseq::cli
