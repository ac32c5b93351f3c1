#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace clb {

// Runs one subcommand (mine, synth, train-factors, index, train, evaluate,
// report). args excludes the program name. Returns 0 on success, 1 on a
// validation or usage error, 2 on a runtime failure.
int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace clb
