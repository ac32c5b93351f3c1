#include <doctest.h>

#include <cstdlib>
#include <fstream>

#include "clb/error.hpp"
#include "clb/git_miner.hpp"
#include "clb/process.hpp"
#include "helpers.hpp"

using namespace clb;

namespace {

// Scripted repository with fixed author/committer dates.
class FixtureRepo {
 public:
  explicit FixtureRepo(const std::string& name) : dir_(testing::scratch_dir(name)) {
    git({"init", "-q"});
    git({"config", "user.email", "t@example.com"});
    git({"config", "user.name", "t"});
    git({"config", "commit.gpgsign", "false"});
  }

  const std::filesystem::path& dir() const { return dir_; }

  void write(const std::string& path, const std::string& text) {
    std::filesystem::create_directories((dir_ / path).parent_path());
    std::ofstream(dir_ / path, std::ios::binary) << text;
  }

  std::string commit(const std::string& message, const std::string& date) {
    git({"add", "-A"});
    ::setenv("GIT_AUTHOR_DATE", date.c_str(), 1);
    ::setenv("GIT_COMMITTER_DATE", date.c_str(), 1);
    git({"commit", "-q", "-m", message});
    ::unsetenv("GIT_AUTHOR_DATE");
    ::unsetenv("GIT_COMMITTER_DATE");
    auto head = git({"rev-parse", "HEAD"});
    while (!head.empty() && (head.back() == '\n' || head.back() == '\r')) head.pop_back();
    return head;
  }

 private:
  std::string git(std::vector<std::string> args) {
    args.insert(args.begin(), {"git", "-C", dir_.string()});
    auto r = run_process(args);
    REQUIRE(r.exit_code == 0);
    return r.out;
  }

  std::filesystem::path dir_;
};

BugReport meta(const std::string& id, const std::string& report, const std::string& fix_commit,
               std::set<std::string> paths) {
  BugReport b;
  b.id = id;
  b.title = id;
  b.description = "open file handle leak";
  b.report_date = parse_timestamp(report);
  b.fix_commit = fix_commit;
  b.ground_truth_paths = std::move(paths);
  return b;
}

std::size_t count_units(const Corpus& c, Regime regime, Granularity g, const std::string& path) {
  std::size_t n = 0;
  for (const auto& u : c.code_units) n += u.regime == regime && u.granularity == g && u.path == path;
  return n;
}

}  // namespace

TEST_CASE("fix commit without intermediate commits") {
  FixtureRepo repo("miner-plain");
  repo.write("src/A.java", "class A {\n  int x;\n}\n");
  repo.commit("init", "2020-01-01T00:00:00Z");
  repo.write("src/A.java", "class A {\n  int x = 1;\n}\n");
  const auto fix = repo.commit("fix", "2020-01-10T00:00:00Z");

  auto result = mine_repository(repo.dir(), {meta("BUG-1", "2020-01-05T00:00:00Z", fix, {"src/A.java"})});
  const auto& c = result.corpus;
  CHECK(count_units(c, Regime::stationary, Granularity::changeset_file, "src/A.java") == 1);
  CHECK(count_units(c, Regime::non_stationary, Granularity::changeset_file, "src/A.java") == 0);
  CHECK(result.bugs_without_non_stationary == std::vector<std::string>{"BUG-1"});

  REQUIRE(c.bug_reports.size() == 1);
  CHECK(c.bug_reports[0].fix_commit == fix);
  CHECK(c.bug_reports[0].fix_date == parse_timestamp("2020-01-10T00:00:00Z"));

  const CodeUnit* file = nullptr;
  for (const auto& u : c.code_units) {
    if (u.granularity == Granularity::changeset_file) file = &u;
  }
  REQUIRE(file != nullptr);
  CHECK(file->content == "class A {\n  int x = 1;\n}\n");
  REQUIRE(file->diff.has_value());
  CHECK(count_units(c, Regime::stationary, Granularity::hunk, "src/A.java") == 1);
}

TEST_CASE("two window edits give two non-stationary versions") {
  FixtureRepo repo("miner-window");
  repo.write("src/A.java", "class A {\n  int x;\n}\n");
  repo.write("src/B.java", "class B {}\n");
  repo.commit("init", "2020-01-01T00:00:00Z");
  repo.write("src/A.java", "class A {\n  int x;\n  int y;\n}\n");
  repo.commit("edit 1", "2020-01-06T00:00:00Z");
  repo.write("src/A.java", "class A {\n  int x;\n  int y;\n  int z;\n}\n");
  repo.commit("edit 2", "2020-01-07T00:00:00Z");
  repo.write("src/A.java", "class A {\n  int x = 0;\n  int y;\n  int z;\n}\n");
  const auto fix = repo.commit("fix", "2020-01-10T00:00:00Z");

  auto result = mine_repository(repo.dir(), {meta("BUG-2", "2020-01-05T00:00:00Z", fix, {"src/A.java"})});
  const auto& c = result.corpus;
  CHECK(count_units(c, Regime::non_stationary, Granularity::changeset_file, "src/A.java") == 2);
  CHECK(count_units(c, Regime::stationary, Granularity::changeset_file, "src/A.java") == 1);
  CHECK(result.bugs_without_non_stationary.empty());
  for (const auto& u : c.code_units) {
    if (u.regime != Regime::non_stationary) continue;
    CHECK(u.commit_date > c.bug_reports[0].report_date);
    CHECK(u.commit_date < c.bug_reports[0].fix_date);
    if (u.granularity == Granularity::hunk) {
      CHECK(u.parent_file_id.has_value());
      CHECK(u.content.find("+  int") != std::string::npos);
    }
  }
}

TEST_CASE("edits before the report are outside the window") {
  FixtureRepo repo("miner-before");
  repo.write("A.java", "a\n");
  repo.commit("init", "2020-01-01T00:00:00Z");
  repo.write("A.java", "b\n");
  repo.commit("early", "2020-01-02T00:00:00Z");
  repo.write("A.java", "c\n");
  const auto fix = repo.commit("fix", "2020-01-10T00:00:00Z");
  auto result = mine_repository(repo.dir(), {meta("BUG-3", "2020-01-05T00:00:00Z", fix, {"A.java"})});
  CHECK(count_units(result.corpus, Regime::non_stationary, Granularity::changeset_file, "A.java") == 0);
}

TEST_CASE("window commits that touch no ground-truth file flag the bug") {
  FixtureRepo repo("miner-jdt");
  repo.write("A.java", "class A {}\n");
  repo.write("B.java", "class B {}\n");
  repo.commit("init", "2020-01-01T00:00:00Z");
  repo.write("B.java", "class B { int q; }\n");
  repo.commit("unrelated", "2020-01-06T00:00:00Z");
  repo.write("A.java", "class A { int fixed; }\n");
  const auto fix = repo.commit("fix", "2020-01-10T00:00:00Z");

  auto result = mine_repository(repo.dir(), {meta("BUG-4", "2020-01-05T00:00:00Z", fix, {"A.java"})});
  for (const auto& u : result.corpus.code_units) CHECK(u.regime == Regime::stationary);
  CHECK(result.bugs_without_non_stationary == std::vector<std::string>{"BUG-4"});
}

TEST_CASE("missing fix commit names the bug and the commit") {
  FixtureRepo repo("miner-missing");
  repo.write("A.java", "x\n");
  repo.commit("init", "2020-01-01T00:00:00Z");
  std::string msg;
  try {
    mine_repository(repo.dir(), {meta("BUG-5", "2020-01-05T00:00:00Z", "deadbeef", {"A.java"})});
  } catch (const RuntimeError& e) {
    msg = e.what();
  }
  CHECK(msg.find("BUG-5") != std::string::npos);
  CHECK(msg.find("deadbeef") != std::string::npos);
}

TEST_CASE("ground-truth file absent at the fix commit is skipped") {
  FixtureRepo repo("miner-absent");
  repo.write("A.java", "x\n");
  repo.write("Gone.java", "y\n");
  repo.commit("init", "2020-01-01T00:00:00Z");
  repo.write("A.java", "z\n");
  std::filesystem::remove(repo.dir() / "Gone.java");
  const auto fix = repo.commit("fix", "2020-01-10T00:00:00Z");
  auto result =
      mine_repository(repo.dir(), {meta("BUG-6", "2020-01-05T00:00:00Z", fix, {"A.java", "Gone.java"})});
  CHECK(result.skipped_units.size() == 1);
  CHECK(count_units(result.corpus, Regime::stationary, Granularity::changeset_file, "A.java") == 1);
}
