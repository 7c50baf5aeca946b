#pragma once

#include <functional>
#include <ostream>
#include <string>
#include <vector>

namespace lidarint::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitInternal = 1,
  kExitUser = 2,
};

using EnvLookup = std::function<const char*(const char*)>;

/// Full command line including the program name. Never throws; every
/// failure becomes a message on `err` and a non-zero exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
        const EnvLookup& getenv);

}  // namespace lidarint::cli
