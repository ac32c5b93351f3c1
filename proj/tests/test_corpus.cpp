#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "clb/corpus.hpp"
#include "clb/diff.hpp"
#include "clb/env.hpp"
#include "clb/error.hpp"
#include "clb/rng.hpp"
#include "clb/synth.hpp"
#include "clb/tokenize.hpp"
#include "helpers.hpp"

using namespace clb;

namespace {

Corpus small_corpus() {
  Corpus c;
  c.bug_reports.push_back(testing::bug("b1", "2020-01-01T00:00:00Z", "2020-01-05T00:00:00Z",
                                       {"src/A.java"}));
  c.bug_reports.push_back(testing::bug("b2", "2020-02-01T00:00:00Z", "2020-02-05T00:00:00Z",
                                       {"src/B.java"}));
  for (int i = 1; i <= 6; ++i) {
    const std::string path = i % 2 ? "src/A.java" : "src/B.java";
    c.code_units.push_back(testing::unit("u" + std::to_string(i), path, "2020-01-05T00:00:00Z"));
  }
  c.links["b1"] = {"u1", "u2", "u3"};
  c.links["b2"] = {"u4", "u5", "u6"};
  return c;
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

std::string error_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const std::exception& e) {
    return e.what();
  }
  return {};
}

Corpus bugs_only(const std::vector<std::pair<std::string, std::string>>& id_dates) {
  Corpus c;
  for (const auto& [id, date] : id_dates) {
    c.bug_reports.push_back(testing::bug(id, date, "2030-01-01T00:00:00Z", {"x"}));
  }
  return c;
}

}  // namespace

TEST_CASE("well-formed corpus round-trips through a file") {
  auto dir = testing::scratch_dir("corpus");
  auto c = small_corpus();
  c.validate();
  save_corpus(c, dir / "c.json");
  auto loaded = load_corpus(dir / "c.json");
  CHECK(loaded.bug_reports.size() == 2);
  CHECK(loaded.code_units.size() == 6);
  CHECK(loaded == c);
  CHECK(loaded.dropped_bugs == 0);
}

TEST_CASE("dangling link is reported as bug→unit") {
  auto c = small_corpus();
  c.links["b1"].push_back("u9");
  auto msg = error_of([&] { c.validate(); });
  CHECK(msg.find("b1→u9") != std::string::npos);
  CHECK_THROWS_AS(c.validate(), ValidationError);
}

TEST_CASE("synthetic corpus reloads equal to its in-memory form") {
  auto dir = testing::scratch_dir("synth-roundtrip");
  SynthConfig cfg;
  auto c = generate_synthetic_corpus(cfg, 7);
  save_corpus(c, dir / "c.json");
  auto loaded = load_corpus(dir / "c.json");
  CHECK(loaded == c);
}

TEST_CASE("bugs without a ground-truth candidate are dropped and counted") {
  auto c = small_corpus();
  c.links["b2"] = {"u1"};  // only A.java, b2's ground truth is B.java
  c.validate();
  CHECK(c.bug_reports.size() == 1);
  CHECK(c.dropped_bugs == 1);
  CHECK(c.find_bug("b2") == nullptr);
  CHECK(c.links.count("b2") == 0);
}

TEST_CASE("record invariants") {
  SUBCASE("report must precede the fix") {
    auto c = small_corpus();
    c.bug_reports[0].fix_date = c.bug_reports[0].report_date;
    CHECK_THROWS_AS(c.validate(), ValidationError);
  }
  SUBCASE("ground truth must be non-empty") {
    auto c = small_corpus();
    c.bug_reports[0].ground_truth_paths.clear();
    CHECK_THROWS_AS(c.validate(), ValidationError);
  }
  SUBCASE("hunks need a parent") {
    auto c = small_corpus();
    c.code_units[0].granularity = Granularity::hunk;
    CHECK_THROWS_AS(c.validate(), ValidationError);
    c.code_units[0].parent_file_id = "u3";
    CHECK_NOTHROW(c.validate());
  }
  SUBCASE("files must not have a parent") {
    auto c = small_corpus();
    c.code_units[0].parent_file_id = "u3";
    CHECK_THROWS_AS(c.validate(), ValidationError);
  }
}

TEST_CASE("parse errors name the line or the field") {
  auto dir = testing::scratch_dir("parse");
  write_file(dir / "bad.json", "{\n  \"bug_reports\": [\n    oops\n  ]\n}\n");
  auto msg = error_of([&] { load_corpus(dir / "bad.json"); });
  CHECK(msg.find(":3:") != std::string::npos);
  CHECK_THROWS_AS(load_corpus(dir / "bad.json"), ParseError);

  auto j = corpus_to_json(small_corpus());
  j["bug_reports"][1].erase("description");
  msg = error_of([&] { corpus_from_json(j); });
  CHECK(msg.find("bug_reports[1].description") != std::string::npos);

  j = corpus_to_json(small_corpus());
  j["code_units"][2]["commit_date"] = "yesterday";
  msg = error_of([&] { corpus_from_json(j); });
  CHECK(msg.find("code_units[2].commit_date") != std::string::npos);

  CHECK_THROWS_AS(load_corpus(dir / "missing.json"), ValidationError);
}

TEST_CASE("timestamps") {
  auto ts = parse_timestamp("2021-03-04T05:06:07Z");
  CHECK(format_timestamp(ts) == "2021-03-04T05:06:07Z");
  CHECK(parse_timestamp("2021-03-04T05:06:07+00:00") == ts);
  CHECK(to_unix(parse_timestamp("1970-01-02T00:00:00Z")) == 86400);
  CHECK_THROWS_AS(parse_timestamp("2021-13-04T05:06:07Z"), ParseError);
  CHECK_THROWS_AS(parse_timestamp("not a date"), ParseError);
}

TEST_CASE("split: 60:40 by report date") {
  std::vector<std::pair<std::string, std::string>> bugs;
  for (int i = 0; i < 10; ++i) {
    bugs.emplace_back("b" + std::to_string(9 - i),
                      "2020-01-" + std::string(i < 9 ? "0" : "") + std::to_string(i + 1) +
                          "T00:00:00Z");
  }
  auto split = split_train_test(bugs_only(bugs));
  CHECK(split.train.size() == 6);
  CHECK(split.test.size() == 4);
  CHECK(split.train.front() == "b9");
  CHECK(split.test.back() == "b0");

  bugs.resize(5);
  split = split_train_test(bugs_only(bugs));
  CHECK(split.train.size() == 3);
  CHECK(split.test.size() == 2);
}

TEST_CASE("split: equal dates are ordered by id") {
  auto c = bugs_only({{"zeta", "2020-01-01T00:00:00Z"}, {"alpha", "2020-01-01T00:00:00Z"},
                      {"mid", "2020-01-01T00:00:00Z"}});
  auto split = split_train_test(c);
  std::vector<std::string> all = split.train;
  all.insert(all.end(), split.test.begin(), split.test.end());
  CHECK(all == std::vector<std::string>{"alpha", "mid", "zeta"});

  auto two = bugs_only({{"b", "2020-01-01T00:00:00Z"}, {"a", "2020-01-01T00:00:00Z"}});
  split = split_train_test(two);
  CHECK(split.train.front() == "a");
}

TEST_CASE("split: fewer than two bugs is an error") {
  CHECK_THROWS_AS(split_train_test(bugs_only({{"a", "2020-01-01T00:00:00Z"}})), ValidationError);
}

TEST_CASE("split is a date-ordered partition (property)") {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const auto n = 2 + rng.below(40);
    std::vector<std::pair<std::string, std::string>> bugs;
    for (std::uint64_t i = 0; i < n; ++i) {
      const auto day = 1 + rng.below(9);  // plenty of ties
      bugs.emplace_back("b" + std::to_string(rng.below(1000)) + "_" + std::to_string(i),
                        "2020-01-0" + std::to_string(day) + "T00:00:00Z");
    }
    auto c = bugs_only(bugs);
    c.reindex();
    auto split = split_train_test(c);
    std::set<std::string> train(split.train.begin(), split.train.end());
    std::set<std::string> test(split.test.begin(), split.test.end());
    REQUIRE(train.size() + test.size() == n);
    for (const auto& id : test) REQUIRE(train.count(id) == 0);
    if (!split.test.empty()) {
      Timestamp max_train{};
      for (const auto& id : split.train) max_train = std::max(max_train, c.bug(id).report_date);
      for (const auto& id : split.test) REQUIRE(c.bug(id).report_date >= max_train);
    }
    REQUIRE(split.train.size() == (6 * n + 9) / 10);
  }
}

TEST_CASE("make_task keeps report-date order and drops bugs without candidates") {
  auto c = small_corpus();
  c.validate();
  auto task = make_task(c, Regime::stationary, Granularity::changeset_file, {"b2", "b1"});
  CHECK(task.bug_ids == std::vector<std::string>{"b1", "b2"});
  task = make_task(c, Regime::non_stationary, Granularity::changeset_file, {"b1", "b2"});
  CHECK(task.bug_ids.empty());
}

TEST_CASE("extract_hunks: one block of three added lines") {
  const std::string diff =
      "diff --git a/A.java b/A.java\n"
      "--- a/A.java\n"
      "+++ b/A.java\n"
      "@@ -0,0 +1,3 @@\n"
      "+one\n"
      "+two\n"
      "+three\n";
  auto hunks = extract_hunks(diff);
  REQUIRE(hunks.size() == 1);
  CHECK(hunks[0].path == "A.java");
  CHECK(hunks[0].body == "+one\n+two\n+three\n");
  CHECK(hunks[0].added == 3);
  CHECK(hunks[0].removed == 0);
  CHECK(diff_churn(diff) == 3);
}

TEST_CASE("extract_hunks: two files with two and one hunks") {
  const std::string diff =
      "diff --git a/src/A.java b/src/A.java\n"
      "index 1..2 100644\n"
      "--- a/src/A.java\n"
      "+++ b/src/A.java\n"
      "@@ -1,2 +1,2 @@ class A\n"
      " keep\n"
      "-old\n"
      "+new\n"
      "@@ -10 +10,2 @@\n"
      " ctx\n"
      "+added\n"
      "diff --git a/src/B.java b/src/B.java\n"
      "--- a/src/B.java\n"
      "+++ b/src/B.java\n"
      "@@ -3,3 +3,2 @@\n"
      " a\n"
      "-b\n"
      " c\n";
  auto hunks = extract_hunks(diff);
  REQUIRE(hunks.size() == 3);
  CHECK(hunks[0].path == "src/A.java");
  CHECK(hunks[1].path == "src/A.java");
  CHECK(hunks[2].path == "src/B.java");
  CHECK(hunks[1].old_start == 10);
  CHECK(hunks[1].old_count == 1);
  CHECK(hunks[1].new_count == 2);
  CHECK(hunks[0].header == "@@ -1,2 +1,2 @@ class A");
}

TEST_CASE("extract_hunks: pure deletion takes the old path") {
  const std::string diff =
      "diff --git a/gone.py b/gone.py\n"
      "deleted file mode 100644\n"
      "--- a/gone.py\n"
      "+++ /dev/null\n"
      "@@ -1,2 +0,0 @@\n"
      "-x = 1\n"
      "-y = 2\n";
  auto hunks = extract_hunks(diff);
  REQUIRE(hunks.size() == 1);
  CHECK(hunks[0].path == "gone.py");
  CHECK(hunks[0].removed == 2);
}

TEST_CASE("extract_hunks: degenerate inputs") {
  CHECK(extract_hunks("").empty());
  CHECK(extract_hunks("diff --git a/x b/x\n--- a/x\n+++ b/x\n").empty());
  const std::string bad = "--- a/x\n+++ b/x\n@@ -1,2 +1,2 @@\n x\n-y\n+z\n@@ garbage @@\n";
  auto msg = error_of([&] { extract_hunks(bad); });
  CHECK(msg.find("line 7") != std::string::npos);
  CHECK_THROWS_AS(extract_hunks(bad), ParseError);
}

TEST_CASE("extract_hunks is lossless for line classification (property)") {
  Rng rng(5);
  for (int trial = 0; trial < 300; ++trial) {
    std::string diff;
    int want_add = 0, want_del = 0, want_ctx = 0;
    const auto files = 1 + rng.below(3);
    for (std::uint64_t f = 0; f < files; ++f) {
      const auto name = "f" + std::to_string(f) + ".c";
      diff += "diff --git a/" + name + " b/" + name + "\n--- a/" + name + "\n+++ b/" + name + "\n";
      const auto n_hunks = rng.below(4);
      for (std::uint64_t h = 0; h < n_hunks; ++h) {
        std::string body;
        int oc = 0, nc = 0;
        const auto lines = 1 + rng.below(8);
        for (std::uint64_t l = 0; l < lines; ++l) {
          switch (rng.below(3)) {
            case 0: body += "+added line\n"; ++nc; ++want_add; break;
            case 1: body += "-removed line\n"; ++oc; ++want_del; break;
            default: body += " same line\n"; ++oc; ++nc; ++want_ctx; break;
          }
        }
        diff += "@@ -1," + std::to_string(oc) + " +1," + std::to_string(nc) + " @@\n" + body;
      }
    }
    int add = 0, del = 0, ctx = 0;
    for (const auto& h : extract_hunks(diff)) {
      add += h.added;
      del += h.removed;
      ctx += h.context;
      for (char kind : {'+', '-', ' '}) {
        int count = 0;
        std::istringstream in(h.body);
        for (std::string line; std::getline(in, line);) count += !line.empty() && line[0] == kind;
        REQUIRE(count == (kind == '+' ? h.added : kind == '-' ? h.removed : h.context));
      }
    }
    REQUIRE(add == want_add);
    REQUIRE(del == want_del);
    REQUIRE(ctx == want_ctx);
  }
}

TEST_CASE("synthetic corpus: full signal plants every token in the ground truth") {
  // Non-vocabulary words the generator mixes into descriptions.
  const std::set<std::string> filler{"error", "exception", "when",   "fails",  "null",
                                     "crash", "value",     "wrong",  "after",  "update",
                                     "should", "returns",  "broken", "state",  "missing"};
  SynthConfig cfg;
  cfg.signal = 1.0;
  cfg.drift = 0.0;
  auto c = generate_synthetic_corpus(cfg, 1);
  REQUIRE(!c.bug_reports.empty());
  for (const auto& b : c.bug_reports) {
    std::set<std::string> planted;
    for (const auto& t : tokenize(b.description)) {
      if (!filler.count(t)) planted.insert(t);
    }
    REQUIRE(planted.size() >= 1);
    for (const auto* u : c.candidates(b.id, Regime::stationary, Granularity::changeset_file)) {
      if (!b.ground_truth_paths.count(u->path)) continue;
      const auto toks = tokenize(u->content);
      const std::set<std::string> have(toks.begin(), toks.end());
      for (const auto& t : planted) CHECK_MESSAGE(have.count(t), b.id << " misses " << t);
    }
  }
}

TEST_CASE("synthetic corpus is byte-identical per seed") {
  auto dir = testing::scratch_dir("synth-bytes");
  SynthConfig cfg;
  save_corpus(generate_synthetic_corpus(cfg, 1), dir / "a.json");
  save_corpus(generate_synthetic_corpus(cfg, 1), dir / "b.json");
  save_corpus(generate_synthetic_corpus(cfg, 2), dir / "c.json");
  CHECK(read_file(dir / "a.json") == read_file(dir / "b.json"));
  CHECK(read_file(dir / "a.json") != read_file(dir / "c.json"));
}

TEST_CASE("synthetic corpus rejects out-of-range signal and drift") {
  SynthConfig cfg;
  cfg.signal = 1.5;
  CHECK_THROWS_AS(generate_synthetic_corpus(cfg, 1), ValidationError);
  cfg.signal = 0.9;
  cfg.drift = -0.1;
  CHECK_THROWS_AS(generate_synthetic_corpus(cfg, 1), ValidationError);
}

TEST_CASE("synthetic corpus: BM25 top-5 recall of the ground truth") {
  SynthConfig cfg;
  cfg.signal = 0.9;
  cfg.n_bugs = 50;
  auto c = generate_synthetic_corpus(cfg, 1);
  EnvConfig env;
  TaskIndex index(c, Regime::stationary, Granularity::changeset_file, env);
  std::size_t relevant = 0, found = 0;
  for (const auto& b : c.bug_reports) {
    std::set<std::string> top;
    for (const auto& d : index.retrieve(c, b, 5)) top.insert(d.id);
    for (const auto* u : c.candidates(b.id, Regime::stationary, Granularity::changeset_file)) {
      if (!b.ground_truth_paths.count(u->path)) continue;
      ++relevant;
      found += top.count(u->id);
    }
  }
  REQUIRE(relevant > 0);
  CHECK(static_cast<double>(found) / static_cast<double>(relevant) >= 0.8);
}

TEST_CASE("synthetic corpus: non-stationary units lie strictly inside the window") {
  auto c = generate_synthetic_corpus(SynthConfig{}, 3);
  std::size_t seen = 0;
  for (const auto& b : c.bug_reports) {
    for (const auto& uid : c.links.at(b.id)) {
      const auto& u = c.unit(uid);
      if (u.regime != Regime::non_stationary) continue;
      ++seen;
      CHECK(u.commit_date > b.report_date);
      CHECK(u.commit_date < b.fix_date);
    }
  }
  CHECK(seen > 0);
}

TEST_CASE("synthetic corpus provides hunks with parents") {
  auto c = generate_synthetic_corpus(SynthConfig{}, 4);
  std::size_t hunks = 0;
  for (const auto& u : c.code_units) {
    if (u.granularity != Granularity::hunk) continue;
    ++hunks;
    REQUIRE(u.parent_file_id.has_value());
    CHECK(c.unit(*u.parent_file_id).path == u.path);
  }
  CHECK(hunks > 0);
}
