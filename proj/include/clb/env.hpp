#pragma once

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "clb/corpus.hpp"
#include "clb/embed.hpp"
#include "clb/logistic.hpp"
#include "clb/retrieval.hpp"

namespace clb {

struct EnvConfig {
  int k = 31;
  double reward_scale = 3.0;  // M
  double gamma = 0.99;
  int max_steps = 0;          // 0 means 4k
  bool allow_reselect = true;
  std::optional<LogisticModel> regression_bonus;
  Bm25Params bm25;
  bool query_with_title = false;
  bool index_paths = true;

  int step_cap() const { return max_steps > 0 ? max_steps : 4 * k; }
  void validate() const;
};

struct Candidate {
  std::string unit_id;
  std::string path;
  bool relevant = false;
  double bonus = 0.0;            // bug probability, 0 without a factor model
  std::vector<double> embedding; // file ‖ report, length 2d
};

// One bug with its retrieved candidate slots. Slots [0, candidates.size())
// are live in BM25 order; the rest up to k are padding.
struct BugCase {
  std::string bug_id;
  int k = 0;
  std::size_t pair_dim = 0;  // 2d
  std::vector<Candidate> candidates;
  std::vector<std::string> relevant_ids;  // every ground-truth unit of the bug in this task
  std::size_t pool_size = 0;              // linked units before top-k filtering
  std::size_t relevant_in_pool = 0;

  int live() const { return static_cast<int>(candidates.size()); }
  std::size_t feature_dim() const { return static_cast<std::size_t>(k) * (pair_dim + 1) + 1; }
};

struct Observation {
  std::shared_ptr<const BugCase> bug;
  std::vector<int> ranked;  // slots in the order they were ranked
  int t = 1;                // actions taken so far + 1

  bool is_ranked(int slot) const;
  bool is_live(int slot) const { return slot >= 0 && slot < bug->live(); }
  std::vector<bool> relevance_mask() const;
  bool all_ranked() const { return static_cast<int>(ranked.size()) == bug->live(); }
};

struct RewardInfo {
  bool fresh = false;
  bool relevant_pick = false;
  double distance = 1.0;
  double bonus = 0.0;
};

struct StepResult {
  Observation observation;
  double reward = 0.0;
  bool done = false;
  RewardInfo info;
};

// Mean gap between consecutive relevant positions; 1 with fewer than two.
double distance(std::span<const int> relevant_positions);

// Re-picks (and padded slots) cost -log2(t+1); fresh picks earn
// M·relevance / (log2(t+1)·distance) with distance taken over the ranked list
// after placing the action. The bug-probability bonus is added either way.
std::pair<double, RewardInfo> compute_reward(const Observation& obs, int action,
                                             const EnvConfig& cfg);

Observation reset(std::shared_ptr<const BugCase> bug);

// Throws ValidationError when the episode is already over or the action is
// out of range (or a ranked slot with re-selection disabled).
StepResult step(const Observation& obs, int action, const EnvConfig& cfg);

bool is_done(const Observation& obs, const EnvConfig& cfg);

// Per slot: the pair embedding, or zeros once ranked / padded; then one
// flag per slot (1 = ranked or padding); then (t-1)/k.
std::vector<double> observation_features(const Observation& obs);
void write_features(const Observation& obs, std::span<double> out);

// true = selectable. Padding is never selectable; ranked slots only when
// allow_reselect.
std::vector<bool> action_mask(const Observation& obs, bool allow_reselect);

// BM25 index over every unit of one regime and granularity.
class TaskIndex {
 public:
  TaskIndex(const Corpus& corpus, Regime regime, Granularity granularity, const EnvConfig& cfg);

  const Bm25Index& index() const { return index_; }
  // Top-k linked candidates of a bug, ordered by score.
  std::vector<ScoredDoc> retrieve(const Corpus& corpus, const BugReport& bug, int k) const;

 private:
  Regime regime_;
  Granularity granularity_;
  bool with_title_;
  Bm25Index index_;
  std::unordered_map<std::string, std::uint32_t> position_;
};

// Retrieval plus embedding for one bug; throws ValidationError when nothing
// is retrievable.
std::shared_ptr<const BugCase> make_bug_case(const Corpus& corpus, const BugReport& bug,
                                             const TaskIndex& index, const Embedder& embedder,
                                             const EnvConfig& cfg, Regime regime,
                                             Granularity granularity);

struct TaskData {
  TaskSpec spec;
  std::vector<std::shared_ptr<const BugCase>> cases;
  std::vector<std::string> skipped;  // bugs without retrievable candidates
};

TaskData prepare_task(const Corpus& corpus, const TaskSpec& spec, const Embedder& embedder,
                      const EnvConfig& cfg);

}  // namespace clb
