#include <iostream>

#include "psps/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return psps::run_cli(args, std::cout, std::cerr);
}
