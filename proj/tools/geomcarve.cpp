#include <iostream>
#include <string>
#include <vector>

#include "geomcarve/cli.hpp"

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv + 1, argv + argc);
  return geomcarve::run_command(args, std::cout, std::cerr);
}
