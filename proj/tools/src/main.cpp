#include <iostream>
#include <string>
#include <vector>

#include "fpref/cli/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return fpref::cli::run(args, std::cout, std::cerr);
}
