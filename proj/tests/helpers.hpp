#pragma once

#include <filesystem>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "clb/corpus.hpp"
#include "clb/env.hpp"
#include "clb/timestamp.hpp"

namespace testing {

// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() /
             ("clb-test-" + name + "-" + std::to_string(std::random_device{}()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline clb::BugReport bug(const std::string& id, const std::string& report, const std::string& fix,
                          std::set<std::string> paths, const std::string& desc = "desc") {
  clb::BugReport b;
  b.id = id;
  b.title = id;
  b.description = desc;
  b.report_date = clb::parse_timestamp(report);
  b.fix_date = clb::parse_timestamp(fix);
  b.fix_commit = "c" + id;
  b.ground_truth_paths = std::move(paths);
  return b;
}

inline clb::CodeUnit unit(const std::string& id, const std::string& path, const std::string& date,
                          clb::Regime regime = clb::Regime::stationary,
                          const std::string& content = "int x;") {
  clb::CodeUnit u;
  u.id = id;
  u.path = path;
  u.content = content;
  u.granularity = clb::Granularity::changeset_file;
  u.commit = "k" + id;
  u.commit_date = clb::parse_timestamp(date);
  u.regime = regime;
  return u;
}

// Hand-built bug case: relevance flags per live slot, zero embeddings.
inline std::shared_ptr<const clb::BugCase> bug_case(const std::vector<bool>& relevant, int k,
                                                    std::size_t pair_dim = 2) {
  auto bc = std::make_shared<clb::BugCase>();
  bc->bug_id = "B";
  bc->k = k;
  bc->pair_dim = pair_dim;
  for (std::size_t i = 0; i < relevant.size(); ++i) {
    clb::Candidate c;
    c.unit_id = "u" + std::to_string(i);
    c.path = "p" + std::to_string(i);
    c.relevant = relevant[i];
    c.embedding.assign(pair_dim, 0.1 * static_cast<double>(i + 1));
    if (c.relevant) bc->relevant_ids.push_back(c.unit_id);
    bc->candidates.push_back(std::move(c));
  }
  bc->pool_size = relevant.size();
  bc->relevant_in_pool = bc->relevant_ids.size();
  return bc;
}

}  // namespace testing
