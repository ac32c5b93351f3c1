#include "clb/git_miner.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

#include <spdlog/spdlog.h>

#include "clb/diff.hpp"
#include "clb/error.hpp"
#include "clb/process.hpp"

namespace clb {
namespace {

class Git {
 public:
  explicit Git(std::filesystem::path repo) : repo_(std::move(repo)) {}

  ProcessResult run(std::vector<std::string> args) const {
    std::vector<std::string> argv{"git", "-C", repo_.string()};
    argv.insert(argv.end(), std::make_move_iterator(args.begin()),
                std::make_move_iterator(args.end()));
    return run_process(argv);
  }

  std::string must(std::vector<std::string> args) const {
    auto r = run(args);
    if (r.exit_code != 0) {
      std::string cmd = "git";
      for (const auto& a : args) cmd += " " + a;
      throw RuntimeError("command failed: " + cmd);
    }
    return r.out;
  }

  std::optional<std::string> resolve_commit(const std::string& rev) const {
    auto r = run({"rev-parse", "--verify", "--quiet", rev + "^{commit}"});
    if (r.exit_code != 0) return std::nullopt;
    return trim(r.out);
  }

  Timestamp commit_time(const std::string& sha) const {
    return from_unix(std::stoll(trim(must({"show", "-s", "--format=%ct", sha}))));
  }

  std::optional<std::string> blob_id(const std::string& sha, const std::string& path) const {
    auto r = run({"rev-parse", "--verify", "--quiet", sha + ":" + path});
    if (r.exit_code != 0) return std::nullopt;
    return trim(r.out);
  }

  std::string file_at(const std::string& sha, const std::string& path) const {
    return must({"show", sha + ":" + path});
  }

  std::string file_diff(const std::string& sha, const std::string& path) const {
    return must({"show", "--format=", "--no-color", "--no-ext-diff", "--unified=3", sha,
                 "--", path});
  }

  bool touches(const std::string& sha, const std::string& path) const {
    return !trim(must({"diff-tree", "--no-commit-id", "--name-only", "-r", "--root", sha, "--",
                       path}))
                .empty();
  }

  // (sha, commit time) of ancestors of `sha` (inclusive) that touch any path.
  std::vector<std::pair<std::string, Timestamp>> history(
      const std::string& sha, const std::set<std::string>& paths) const {
    std::vector<std::string> args{"log", "--format=%H %ct", sha, "--"};
    args.insert(args.end(), paths.begin(), paths.end());
    std::vector<std::pair<std::string, Timestamp>> out;
    std::istringstream in(must(args));
    std::string line;
    while (std::getline(in, line)) {
      auto sp = line.find(' ');
      if (sp == std::string::npos) continue;
      out.emplace_back(line.substr(0, sp), from_unix(std::stoll(line.substr(sp + 1))));
    }
    return out;
  }

 private:
  static std::string trim(std::string s) {
    while (!s.empty() && (s.back() == '\n' || s.back() == '\r' || s.back() == ' ')) s.pop_back();
    return s;
  }

  std::filesystem::path repo_;
};

std::string short_sha(const std::string& sha) { return sha.substr(0, 12); }

}  // namespace

MiningResult mine_repository(const std::filesystem::path& repo_path,
                             std::vector<BugReport> bug_meta) {
  if (!std::filesystem::is_directory(repo_path)) {
    throw ValidationError("repository path '" + repo_path.string() + "' is not a directory");
  }
  const Git git(repo_path);
  MiningResult result;
  std::map<std::string, CodeUnit> units;  // keyed by id; map keeps output order stable

  auto add_file_and_hunks = [&](const std::string& sha, Timestamp when, const std::string& path,
                                Regime regime) {
    const std::string prefix = regime == Regime::stationary ? "st:" : "ns:";
    const std::string file_id = prefix + short_sha(sha) + ":" + path;
    if (units.count(file_id)) return;
    if (!git.blob_id(sha, path)) {
      spdlog::info("skipping {}:{} (file absent at commit)", short_sha(sha), path);
      result.skipped_units.push_back(short_sha(sha) + ":" + path);
      return;
    }
    CodeUnit file;
    file.id = file_id;
    file.path = path;
    file.content = git.file_at(sha, path);
    file.granularity = Granularity::changeset_file;
    file.commit = sha;
    file.commit_date = when;
    file.regime = regime;
    file.diff = git.file_diff(sha, path);
    const auto hunks = extract_hunks(*file.diff);
    for (std::size_t h = 0; h < hunks.size(); ++h) {
      CodeUnit hunk;
      hunk.id = file_id + "#" + std::to_string(h);
      hunk.path = path;
      hunk.content = hunks[h].body;
      hunk.granularity = Granularity::hunk;
      hunk.commit = sha;
      hunk.commit_date = when;
      hunk.regime = regime;
      hunk.parent_file_id = file_id;
      units.emplace(hunk.id, std::move(hunk));
    }
    units.emplace(file_id, std::move(file));
  };

  for (auto& bug : bug_meta) {
    const auto sha = git.resolve_commit(bug.fix_commit);
    if (!sha) {
      throw RuntimeError("bug '" + bug.id + "': fix commit '" + bug.fix_commit + "' not found");
    }
    bug.fix_commit = *sha;
    bug.fix_date = git.commit_time(*sha);

    for (const auto& path : bug.ground_truth_paths) {
      add_file_and_hunks(*sha, bug.fix_date, path, Regime::stationary);
    }

    // Distinct versions introduced strictly inside (report_date, fix_date).
    std::map<std::string, std::set<std::string>> seen_blobs;
    std::size_t n_versions = 0;
    auto window = git.history(*sha, bug.ground_truth_paths);
    std::reverse(window.begin(), window.end());  // oldest first
    for (const auto& [commit, when] : window) {
      if (commit == *sha || !(bug.report_date < when && when < bug.fix_date)) continue;
      for (const auto& path : bug.ground_truth_paths) {
        if (!git.touches(commit, path)) continue;
        const auto blob = git.blob_id(commit, path);
        if (!blob) {
          result.skipped_units.push_back(short_sha(commit) + ":" + path);
          continue;
        }
        if (!seen_blobs[path].insert(*blob).second) continue;
        add_file_and_hunks(commit, when, path, Regime::non_stationary);
        ++n_versions;
      }
    }
    if (n_versions == 0) {
      spdlog::warn("bug '{}': no non-stationary versions in its report-to-fix window", bug.id);
      result.bugs_without_non_stationary.push_back(bug.id);
    }
  }

  Corpus& corpus = result.corpus;
  for (auto& [id, unit] : units) corpus.code_units.push_back(std::move(unit));
  for (auto& bug : bug_meta) {
    auto& ids = corpus.links[bug.id];
    for (const auto& u : corpus.code_units) {
      if (u.commit_date <= bug.fix_date) ids.push_back(u.id);
    }
    corpus.bug_reports.push_back(std::move(bug));
  }
  corpus.validate();
  return result;
}

}  // namespace clb
