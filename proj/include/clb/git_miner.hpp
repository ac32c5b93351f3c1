#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "clb/corpus.hpp"

namespace clb {

struct MiningResult {
  Corpus corpus;
  // Bugs whose report→fix window never touches a ground-truth file.
  std::vector<std::string> bugs_without_non_stationary;
  // "<commit>:<path>" entries that could not be read and were skipped.
  std::vector<std::string> skipped_units;
};

// Builds a corpus from a git working copy, shelling out to the system git.
//
// Stationary units are the ground-truth files as of each fix commit. The
// non-stationary units are every distinct version of those files introduced
// by commits dated strictly between the report date and the fix commit date.
// Hunk units come from the per-file diff of each of those commits. Each bug is
// linked to every unit whose commit is not later than its own fix.
//
// bug_meta supplies id, title, description, report_date, fix_commit and
// ground_truth_paths; fix_date is read from git. A fix commit that does not
// resolve raises RuntimeError naming the bug and the commit.
MiningResult mine_repository(const std::filesystem::path& repo_path,
                             std::vector<BugReport> bug_meta);

}  // namespace clb
