#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace clb {

// One @@-delimited block of a unified diff.
struct DiffHunk {
  std::string path;    // from "+++ b/..." or "--- a/..." for deletions
  std::string header;  // the full "@@ ... @@" line
  int old_start = 0;
  int old_count = 0;
  int new_start = 0;
  int new_count = 0;
  std::string body;    // "+", "-" and " " lines, newline terminated
  int added = 0;
  int removed = 0;
  int context = 0;
};

// Parses the output of `git diff` / `git show`. File headers without hunks
// produce nothing; a malformed @@ line raises ParseError with its line number.
std::vector<DiffHunk> extract_hunks(std::string_view unified_diff);

// Added plus removed lines over all hunks of a diff.
int diff_churn(std::string_view unified_diff);

}  // namespace clb
