#pragma once

#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "clb/env.hpp"
#include "clb/nets.hpp"

namespace clb {

struct RankedResult {
  std::string bug_id;
  std::vector<std::string> ranked_unit_ids;
  std::set<std::string> relevant_ids;  // full ground truth, retrieved or not
};

// 1-based rank of the first relevant item, 0 when none is ranked.
std::size_t first_relevant_rank(const RankedResult& r);
double average_precision(const RankedResult& r);

// All three throw ValidationError on an empty result list.
double mrr(const std::vector<RankedResult>& results);
double map_metric(const std::vector<RankedResult>& results);
double top_at_k(const std::vector<RankedResult>& results, std::size_t k);

// F_i = (r[i][j-1] − r[i][j]) / |max_j r[i][j]|, where j−1 is the latest
// phase training task i that is followed by a phase training another task and
// j is that following phase. 0 when no such phase exists. phase_tasks[j]
// names the task trained in phase j.
std::vector<double> forgetting(const std::vector<std::vector<double>>& returns,
                               const std::vector<std::size_t>& phase_tasks);

// Expected reciprocal rank of the first relevant item in a uniformly random
// permutation of pool items, `relevant` of which are relevant.
double expected_random_rr(std::size_t pool, std::size_t relevant);
double random_ranking_mrr(const std::vector<std::shared_ptr<const BugCase>>& cases);

struct MetricsReport {
  std::string task;
  double mrr = 0.0;
  double map = 0.0;
  double top1 = 0.0;
  double top5 = 0.0;
  double top10 = 0.0;
  double random_mrr = 0.0;
  std::size_t n_bugs = 0;
  std::size_t skipped = 0;
  double training_time_s = 0.0;
  std::vector<std::string> forgetting_tasks;
  std::vector<double> forgetting;
  double mean_forgetting = 0.0;
  std::vector<RankedResult> results;
};

// Fills the ranking metrics from per-bug results.
void fill_metrics(MetricsReport& report);

// One greedy episode per test bug (re-selection disabled).
MetricsReport evaluate_agent(const ActorCriticParams& params, const TaskData& test,
                             const EnvConfig& env);

// Wall-clock time is only written when with_timing is set, so that reports of
// identical runs compare equal byte for byte.
nlohmann::json metrics_to_json(const MetricsReport& report, bool with_timing = false);
std::string metrics_table(const std::vector<MetricsReport>& reports);
std::string per_bug_csv(const MetricsReport& report);

}  // namespace clb
