#include <cstdlib>
#include <iostream>

#include "lidarint_cli/app.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return lidarint::cli::run(args, std::cout, std::cerr,
                            [](const char* name) { return std::getenv(name); });
}
