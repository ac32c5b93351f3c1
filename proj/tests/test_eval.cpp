#include <doctest.h>

#include <cmath>

#include "clb/error.hpp"
#include "clb/eval.hpp"
#include "clb/nets.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace clb;

namespace {

RankedResult result(std::vector<std::string> ranked, std::set<std::string> relevant,
                    std::string id = "b") {
  return {std::move(id), std::move(ranked), std::move(relevant)};
}

}  // namespace

TEST_CASE("MRR examples") {
  CHECK(mrr({result({"a", "b", "c"}, {"b"})}) == 0.5);
  CHECK(mrr({result({"a", "b", "c"}, {"z"})}) == 0.0);
  CHECK(mrr({result({"a", "b"}, {"a"}), result({"a", "b", "c", "d"}, {"d", "z"})}) ==
        doctest::Approx(0.625));
  CHECK(first_relevant_rank(result({"x", "y", "z"}, {"z"})) == 3);
}

TEST_CASE("MAP examples") {
  CHECK(average_precision(result({"a", "b", "c"}, {"a", "c"})) == doctest::Approx(5.0 / 6.0));
  CHECK(map_metric({result({"a", "b"}, {"a", "b"})}) == 1.0);
  // A relevant unit that was never ranked still counts in the denominator.
  CHECK(average_precision(result({"a", "b"}, {"a", "q", "r"})) == doctest::Approx(1.0 / 3.0));
  CHECK(average_precision(result({"a"}, {})) == 0.0);
}

TEST_CASE("top@k examples") {
  const std::vector<RankedResult> rs{result({"a", "b", "c"}, {"a"}),
                                     result({"a", "b", "c", "d", "e", "f"}, {"f"}),
                                     result({"a"}, {"z"})};
  CHECK(top_at_k(rs, 1) == doctest::Approx(1.0 / 3.0));
  CHECK(top_at_k(rs, 5) == doctest::Approx(1.0 / 3.0));
  CHECK(top_at_k(rs, 6) == doctest::Approx(2.0 / 3.0));
  CHECK(top_at_k(rs, 10) == doctest::Approx(2.0 / 3.0));
  CHECK_THROWS_AS(top_at_k(rs, 0), ValidationError);
}

TEST_CASE("empty result lists are rejected") {
  CHECK_THROWS_AS(mrr({}), ValidationError);
  CHECK_THROWS_AS(map_metric({}), ValidationError);
  CHECK_THROWS_AS(top_at_k({}, 5), ValidationError);
}

TEST_CASE("metrics agree with brute-force definitions (property)") {
  Rng rng(31);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<RankedResult> rs;
    const auto n = 1 + rng.below(6);
    for (std::uint64_t i = 0; i < n; ++i) rs.push_back(oracle::random_result(rng, std::to_string(i)));
    REQUIRE(mrr(rs) == oracle::bf_mean(rs, oracle::bf_reciprocal_rank));
    REQUIRE(map_metric(rs) == oracle::bf_mean(rs, oracle::bf_average_precision));
    for (std::size_t k : {1, 5, 10}) REQUIRE(top_at_k(rs, k) == oracle::bf_top(rs, k));
    REQUIRE(top_at_k(rs, 1) <= top_at_k(rs, 5));
    REQUIRE(top_at_k(rs, 5) <= top_at_k(rs, 10));
    REQUIRE(mrr(rs) >= 0.0);
    REQUIRE(mrr(rs) <= 1.0);
    REQUIRE(map_metric(rs) <= 1.0);

    auto shuffled = rs;
    rng.shuffle(shuffled);
    REQUIRE(std::abs(mrr(shuffled) - mrr(rs)) < 1e-12);
    REQUIRE(std::abs(map_metric(shuffled) - map_metric(rs)) < 1e-12);
  }
}

TEST_CASE("forgetting examples") {
  const std::vector<std::size_t> phases{0, 1, 0, 1};
  const auto flat = forgetting({{5, 5, 5, 5}, {2, 2, 2, 2}}, phases);
  CHECK(flat == std::vector<double>{0.0, 0.0});

  // Task 0 last trained in phase 2, measured again after phase 3.
  const auto drop = forgetting({{1, 8, 6, 4}, {1, 1, 1, 1}}, phases);
  CHECK(drop[0] == doctest::Approx(0.25));
  CHECK(drop[1] == 0.0);

  // Negative returns use the magnitude of the maximum.
  CHECK(forgetting({{-4, -2}, {1, 1}}, {0, 1})[0] == doctest::Approx(-1.0));

  // A task never followed by another phase has nothing to forget.
  CHECK(forgetting({{1, 2}, {3, 1}}, {0, 1})[1] == 0.0);

  CHECK_THROWS_AS(forgetting({{0, 0}, {1, 1}}, {0, 1}), ValidationError);
  CHECK_THROWS_AS(forgetting({{1, 2, 3}}, {0, 1}), ValidationError);
}

TEST_CASE("non-decreasing returns never show positive forgetting (property)") {
  Rng rng(32);
  for (int trial = 0; trial < 300; ++trial) {
    const auto n_tasks = 1 + rng.below(4);
    const auto n_phases = 1 + rng.below(10);
    std::vector<std::size_t> phases(n_phases);
    for (auto& p : phases) p = rng.below(n_tasks);
    std::vector<std::vector<double>> returns(n_tasks);
    for (auto& row : returns) {
      double v = rng.uniform(0.1, 1.0);
      for (std::uint64_t j = 0; j < n_phases; ++j) {
        row.push_back(v);
        v += rng.uniform(0.0, 1.0);
      }
    }
    for (double f : forgetting(returns, phases)) REQUIRE(f <= 0.0);
  }
}

TEST_CASE("expected random reciprocal rank") {
  CHECK(expected_random_rr(1, 1) == 1.0);
  CHECK(expected_random_rr(5, 5) == 1.0);
  CHECK(expected_random_rr(2, 1) == doctest::Approx(0.75));
  CHECK(expected_random_rr(3, 0) == 0.0);
  // H_n / n for a single relevant item.
  double h = 0.0;
  for (int i = 1; i <= 31; ++i) h += 1.0 / i;
  CHECK(expected_random_rr(31, 1) == doctest::Approx(h / 31.0).epsilon(1e-12));
  CHECK_THROWS_AS(expected_random_rr(2, 3), ValidationError);
}

TEST_CASE("random ranking MRR matches simulation") {
  Rng rng(33);
  std::vector<std::shared_ptr<const BugCase>> cases;
  for (int b = 0; b < 200; ++b) {
    const auto live = 1 + rng.below(31);
    std::vector<bool> flags(live);
    for (auto&& f : flags) f = rng.bernoulli(0.1);
    flags[rng.below(live)] = true;
    cases.push_back(testing::bug_case(flags, 31));
  }
  const double analytic = random_ranking_mrr(cases);

  double sim = 0.0;
  const int reps = 200;
  for (int rep = 0; rep < reps; ++rep) {
    std::vector<RankedResult> rs;
    for (const auto& c : cases) {
      RankedResult r;
      for (const auto& cand : c->candidates) r.ranked_unit_ids.push_back(cand.unit_id);
      rng.shuffle(r.ranked_unit_ids);
      r.relevant_ids.insert(c->relevant_ids.begin(), c->relevant_ids.end());
      rs.push_back(std::move(r));
    }
    sim += mrr(rs);
  }
  CHECK(std::abs(sim / reps - analytic) < 0.05);
  CHECK(std::abs(sim / reps - analytic) < 0.01);
  CHECK_THROWS_AS(random_ranking_mrr({}), ValidationError);
}

TEST_CASE("uniform agent scores near the random baseline") {
  NetConfig net;
  net.input_dim = 31 * 3 + 1;
  net.hidden = {4};
  net.n_actions = 31;
  net.init_seed = 1;
  Rng rng(34);
  TaskData test;
  for (int b = 0; b < 200; ++b) {
    std::vector<bool> flags(1 + rng.below(31));
    flags[rng.below(flags.size())] = true;
    // Shuffled embeddings break the symmetry of the hand-built cases.
    auto bc = std::const_pointer_cast<BugCase>(testing::bug_case(flags, 31));
    for (auto& c : bc->candidates)
      for (auto& v : c.embedding) v = oracle::gaussian(rng);
    bc->bug_id = "B" + std::to_string(b);
    test.cases.push_back(bc);
  }
  EnvConfig env;
  // Many random small networks average to a permutation-invariant ranker.
  double total = 0.0;
  const int nets = 20;
  for (int i = 0; i < nets; ++i) {
    net.init_seed = 100 + static_cast<std::uint64_t>(i);
    const auto report = evaluate_agent(init_params(net), test, env);
    total += report.mrr;
    CHECK(report.random_mrr == doctest::Approx(random_ranking_mrr(test.cases)));
  }
  CHECK(std::abs(total / nets - random_ranking_mrr(test.cases)) < 0.05);
}

TEST_CASE("oracle ranking reaches the retrieval recall ceiling") {
  std::vector<RankedResult> rs;
  std::size_t with_candidate = 0;
  Rng rng(35);
  for (int b = 0; b < 100; ++b) {
    RankedResult r;
    r.bug_id = "B" + std::to_string(b);
    std::vector<std::string> candidates;
    for (int i = 0; i < 31; ++i) candidates.push_back("u" + std::to_string(i));
    r.relevant_ids = {"gt" + std::to_string(b)};
    if (rng.bernoulli(0.7)) {
      candidates[rng.below(31)] = *r.relevant_ids.begin();
      ++with_candidate;
    }
    // Oracle policy: relevant candidates first.
    std::stable_partition(candidates.begin(), candidates.end(),
                          [&](const std::string& u) { return r.relevant_ids.count(u) > 0; });
    r.ranked_unit_ids = candidates;
    rs.push_back(r);
  }
  const double ceiling = static_cast<double>(with_candidate) / 100.0;
  CHECK(top_at_k(rs, 10) == ceiling);
  CHECK(top_at_k(rs, 1) == ceiling);
  CHECK(mrr(rs) == doctest::Approx(ceiling));
}

TEST_CASE("evaluate_agent output formats") {
  NetConfig net;
  net.input_dim = 4 * 3 + 1;
  net.hidden = {};
  net.n_actions = 4;
  TaskData test;
  test.cases.push_back(testing::bug_case({false, true}, 4));
  test.skipped = {"B9"};
  EnvConfig env;
  env.k = 4;
  auto report = evaluate_agent(init_params(net), test, env);
  CHECK(report.n_bugs == 1);
  CHECK(report.skipped == 1);
  CHECK(report.results[0].ranked_unit_ids.size() == 2);
  report.forgetting_tasks = {"t1", "t2"};
  report.forgetting = {0.5, -0.25};
  report.mean_forgetting = 0.125;
  report.training_time_s = 3.5;

  const auto j = metrics_to_json(report);
  CHECK(j.at("forgetting").at("t2") == -0.25);
  CHECK_FALSE(j.contains("training_time_s"));
  CHECK(metrics_to_json(report, true).at("training_time_s") == 3.5);
  for (const char* key : {"mrr", "map", "top1", "top5", "top10", "random_mrr", "n_bugs"})
    CHECK(j.contains(key));

  const auto table = metrics_table({report});
  CHECK(table.find("MRR") != std::string::npos);
  CHECK(table.find(report.task) != std::string::npos);
  const auto csv = per_bug_csv(report);
  CHECK(csv.rfind("bug_id,first_relevant_rank,average_precision\n", 0) == 0);
  CHECK(csv.find("B,") != std::string::npos);

  CHECK_THROWS_AS(evaluate_agent(init_params(net), TaskData{}, env), ValidationError);
}
