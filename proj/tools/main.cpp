#include <iostream>

#include "clb/cli.hpp"
#include "clb/log.hpp"

int main(int argc, char** argv) {
  clb::init_logging();
  std::vector<std::string> args(argv + 1, argv + argc);
  return clb::run_command(args, std::cout, std::cerr);
}
