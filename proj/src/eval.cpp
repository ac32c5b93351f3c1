#include "clb/eval.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <spdlog/fmt/fmt.h>

#include "clb/error.hpp"
#include "clb/learners.hpp"

namespace clb {

std::size_t first_relevant_rank(const RankedResult& r) {
  for (std::size_t i = 0; i < r.ranked_unit_ids.size(); ++i)
    if (r.relevant_ids.count(r.ranked_unit_ids[i])) return i + 1;
  return 0;
}

double average_precision(const RankedResult& r) {
  if (r.relevant_ids.empty()) return 0.0;
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < r.ranked_unit_ids.size(); ++i) {
    if (!r.relevant_ids.count(r.ranked_unit_ids[i])) continue;
    ++hits;
    sum += static_cast<double>(hits) / static_cast<double>(i + 1);
  }
  return sum / static_cast<double>(r.relevant_ids.size());
}

namespace {
void require_results(const std::vector<RankedResult>& results) {
  if (results.empty()) throw ValidationError("no ranked results to score");
}
}  // namespace

double mrr(const std::vector<RankedResult>& results) {
  require_results(results);
  double sum = 0.0;
  for (const auto& r : results) {
    auto rank = first_relevant_rank(r);
    if (rank) sum += 1.0 / static_cast<double>(rank);
  }
  return sum / static_cast<double>(results.size());
}

double map_metric(const std::vector<RankedResult>& results) {
  require_results(results);
  double sum = 0.0;
  for (const auto& r : results) sum += average_precision(r);
  return sum / static_cast<double>(results.size());
}

double top_at_k(const std::vector<RankedResult>& results, std::size_t k) {
  require_results(results);
  if (k == 0) throw ValidationError("top@k needs k >= 1");
  std::size_t hits = 0;
  for (const auto& r : results) {
    auto rank = first_relevant_rank(r);
    if (rank && rank <= k) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(results.size());
}

std::vector<double> forgetting(const std::vector<std::vector<double>>& returns,
                               const std::vector<std::size_t>& phase_tasks) {
  std::vector<double> out(returns.size(), 0.0);
  for (std::size_t i = 0; i < returns.size(); ++i) {
    const auto& r = returns[i];
    if (r.size() != phase_tasks.size())
      throw ValidationError("returns row length does not match the phase count");
    if (r.empty()) continue;
    double mx = *std::max_element(r.begin(), r.end());
    if (mx == 0.0)
      throw ValidationError("forgetting undefined: maximum return of task " + std::to_string(i) +
                            " is 0");
    for (std::size_t j = phase_tasks.size(); j-- > 1;) {
      if (phase_tasks[j - 1] == i && phase_tasks[j] != i) {
        out[i] = (r[j - 1] - r[j]) / std::abs(mx);
        break;
      }
    }
  }
  return out;
}

double expected_random_rr(std::size_t pool, std::size_t relevant) {
  if (relevant > pool) throw ValidationError("more relevant items than pool entries");
  if (relevant == 0) return 0.0;
  const double m = static_cast<double>(pool), r = static_cast<double>(relevant);
  double none_before = 1.0;  // P(no relevant item among the first i−1)
  double e = 0.0;
  for (std::size_t i = 1; i + relevant <= pool + 1; ++i) {
    double di = static_cast<double>(i);
    e += none_before * r / (m - di + 1.0) / di;
    none_before *= (m - r - di + 1.0) / (m - di + 1.0);
  }
  return e;
}

double random_ranking_mrr(const std::vector<std::shared_ptr<const BugCase>>& cases) {
  if (cases.empty()) throw ValidationError("no bugs for random ranking baseline");
  double sum = 0.0;
  for (const auto& c : cases) {
    std::size_t rel = 0;
    for (const auto& cand : c->candidates) rel += cand.relevant ? 1 : 0;
    sum += expected_random_rr(c->candidates.size(), rel);
  }
  return sum / static_cast<double>(cases.size());
}

void fill_metrics(MetricsReport& report) {
  report.n_bugs = report.results.size();
  report.mrr = mrr(report.results);
  report.map = map_metric(report.results);
  report.top1 = top_at_k(report.results, 1);
  report.top5 = top_at_k(report.results, 5);
  report.top10 = top_at_k(report.results, 10);
}

MetricsReport evaluate_agent(const ActorCriticParams& params, const TaskData& test,
                             const EnvConfig& env) {
  if (test.cases.empty()) throw ValidationError("empty test set for " + test.spec.name());
  MetricsReport report;
  report.task = test.spec.name();
  report.skipped = test.skipped.size();
  for (const auto& c : test.cases) {
    auto ep = greedy_episode(params, c, env);
    RankedResult r;
    r.bug_id = c->bug_id;
    for (int slot : ep.ranked)
      r.ranked_unit_ids.push_back(c->candidates.at(static_cast<std::size_t>(slot)).unit_id);
    r.relevant_ids.insert(c->relevant_ids.begin(), c->relevant_ids.end());
    report.results.push_back(std::move(r));
  }
  fill_metrics(report);
  report.random_mrr = random_ranking_mrr(test.cases);
  return report;
}

nlohmann::json metrics_to_json(const MetricsReport& report, bool with_timing) {
  nlohmann::json forg = nlohmann::json::object();
  for (std::size_t i = 0; i < report.forgetting.size(); ++i)
    forg[report.forgetting_tasks.at(i)] = report.forgetting[i];
  nlohmann::json j = {{"task", report.task},
                      {"mrr", report.mrr},
                      {"map", report.map},
                      {"top1", report.top1},
                      {"top5", report.top5},
                      {"top10", report.top10},
                      {"random_mrr", report.random_mrr},
                      {"n_bugs", report.n_bugs},
                      {"skipped", report.skipped},
                      {"forgetting", forg},
                      {"mean_forgetting", report.mean_forgetting}};
  if (with_timing) j["training_time_s"] = report.training_time_s;
  return j;
}

std::string metrics_table(const std::vector<MetricsReport>& reports) {
  std::ostringstream os;
  os << fmt::format("{:<28} {:>6} {:>7} {:>7} {:>7} {:>7} {:>7} {:>9} {:>10}\n", "task", "bugs",
                    "MRR", "MAP", "top1", "top5", "top10", "forget", "time_s");
  for (const auto& r : reports)
    os << fmt::format("{:<28} {:>6} {:>7.4f} {:>7.4f} {:>7.4f} {:>7.4f} {:>7.4f} {:>9.4f} {:>10.2f}\n",
                      r.task, r.n_bugs, r.mrr, r.map, r.top1, r.top5, r.top10, r.mean_forgetting,
                      r.training_time_s);
  return os.str();
}

std::string per_bug_csv(const MetricsReport& report) {
  std::ostringstream os;
  os << "bug_id,first_relevant_rank,average_precision\n";
  for (const auto& r : report.results)
    os << r.bug_id << ',' << first_relevant_rank(r) << ','
       << fmt::format("{:.6f}", average_precision(r)) << '\n';
  return os.str();
}

}  // namespace clb
