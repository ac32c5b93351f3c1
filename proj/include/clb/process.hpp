#pragma once

#include <string>
#include <vector>

namespace clb {

struct ProcessResult {
  int exit_code = -1;
  std::string out;
};

// Runs argv[0] (searched on PATH) without a shell, capturing stdout. Stderr
// is discarded.
ProcessResult run_process(const std::vector<std::string>& argv);

}  // namespace clb
