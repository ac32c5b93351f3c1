#include "clb/env.hpp"

#include <algorithm>
#include <cmath>

#include <spdlog/spdlog.h>

#include "clb/error.hpp"
#include "clb/factors.hpp"

namespace clb {

void EnvConfig::validate() const {
  if (k < 1) throw ValidationError("env: k must be >= 1");
  if (!(reward_scale > 0.0)) throw ValidationError("env: reward scale M must be > 0");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw ValidationError("env: gamma must lie in (0, 1]");
  if (max_steps < 0) throw ValidationError("env: max_steps must be >= 0");
}

bool Observation::is_ranked(int slot) const {
  return std::find(ranked.begin(), ranked.end(), slot) != ranked.end();
}

std::vector<bool> Observation::relevance_mask() const {
  std::vector<bool> mask(static_cast<std::size_t>(bug->k), false);
  for (int s = 0; s < bug->live(); ++s) mask[static_cast<std::size_t>(s)] = bug->candidates[static_cast<std::size_t>(s)].relevant;
  return mask;
}

double distance(std::span<const int> positions) {
  if (positions.size() < 2) return 1.0;
  double sum = 0.0;
  for (std::size_t i = 0; i + 1 < positions.size(); ++i) sum += positions[i + 1] - positions[i];
  return sum / static_cast<double>(positions.size() - 1);
}

std::pair<double, RewardInfo> compute_reward(const Observation& obs, int action,
                                             const EnvConfig& cfg) {
  if (action < 0 || action >= obs.bug->k) {
    throw ValidationError("action " + std::to_string(action) + " out of range [0, " +
                          std::to_string(obs.bug->k) + ")");
  }
  RewardInfo info;
  const double log_term = std::log2(static_cast<double>(obs.t) + 1.0);
  const bool live = obs.is_live(action);
  if (live) info.bonus = obs.bug->candidates[static_cast<std::size_t>(action)].bonus;
  if (!live || obs.is_ranked(action)) {
    return {-log_term + info.bonus, info};
  }
  info.fresh = true;
  info.relevant_pick = obs.bug->candidates[static_cast<std::size_t>(action)].relevant;
  std::vector<int> positions;
  for (std::size_t i = 0; i < obs.ranked.size(); ++i) {
    if (obs.bug->candidates[static_cast<std::size_t>(obs.ranked[i])].relevant) {
      positions.push_back(static_cast<int>(i) + 1);
    }
  }
  if (info.relevant_pick) positions.push_back(static_cast<int>(obs.ranked.size()) + 1);
  info.distance = distance(positions);
  const double relevance = info.relevant_pick ? 1.0 : 0.0;
  return {cfg.reward_scale * relevance / (log_term * info.distance) + info.bonus, info};
}

Observation reset(std::shared_ptr<const BugCase> bug) {
  if (!bug || bug->live() == 0) throw ValidationError("reset: bug has no candidates");
  Observation obs;
  obs.bug = std::move(bug);
  return obs;
}

bool is_done(const Observation& obs, const EnvConfig& cfg) {
  return obs.all_ranked() || obs.t > cfg.step_cap();
}

StepResult step(const Observation& obs, int action, const EnvConfig& cfg) {
  if (is_done(obs, cfg)) throw ValidationError("step called on a finished episode");
  if (!cfg.allow_reselect && obs.is_ranked(action)) {
    throw ValidationError("slot " + std::to_string(action) + " is already ranked");
  }
  auto [reward, info] = compute_reward(obs, action, cfg);
  StepResult r;
  r.observation = obs;
  if (info.fresh) r.observation.ranked.push_back(action);
  r.observation.t += 1;
  r.reward = reward;
  r.info = info;
  r.done = is_done(r.observation, cfg);
  return r;
}

void write_features(const Observation& obs, std::span<double> out) {
  const auto& bug = *obs.bug;
  if (out.size() != bug.feature_dim()) throw ValidationError("feature buffer has the wrong size");
  std::fill(out.begin(), out.end(), 0.0);
  const auto k = static_cast<std::size_t>(bug.k);
  const auto flags = k * bug.pair_dim;
  for (std::size_t s = 0; s < k; ++s) {
    const bool live = static_cast<int>(s) < bug.live();
    const bool ranked = live && obs.is_ranked(static_cast<int>(s));
    if (live && !ranked) {
      const auto& e = bug.candidates[s].embedding;
      std::copy(e.begin(), e.end(), out.begin() + static_cast<std::ptrdiff_t>(s * bug.pair_dim));
    } else {
      out[flags + s] = 1.0;
    }
  }
  out[flags + k] = static_cast<double>(obs.t - 1) / static_cast<double>(k);
}

std::vector<double> observation_features(const Observation& obs) {
  std::vector<double> f(obs.bug->feature_dim());
  write_features(obs, f);
  return f;
}

std::vector<bool> action_mask(const Observation& obs, bool allow_reselect) {
  std::vector<bool> mask(static_cast<std::size_t>(obs.bug->k), false);
  for (int s = 0; s < obs.bug->live(); ++s) {
    mask[static_cast<std::size_t>(s)] = allow_reselect || !obs.is_ranked(s);
  }
  return mask;
}

TaskIndex::TaskIndex(const Corpus& corpus, Regime regime, Granularity granularity,
                     const EnvConfig& cfg)
    : regime_(regime), granularity_(granularity), with_title_(cfg.query_with_title) {
  std::vector<std::pair<std::string, std::string>> docs;
  for (const auto& u : corpus.code_units) {
    if (u.regime != regime || u.granularity != granularity) continue;
    position_.emplace(u.id, static_cast<std::uint32_t>(docs.size()));
    docs.emplace_back(u.id, cfg.index_paths ? u.content + "\n" + u.path : u.content);
  }
  index_ = build_index(docs, cfg.bm25);
}

std::vector<ScoredDoc> TaskIndex::retrieve(const Corpus& corpus, const BugReport& bug,
                                           int k) const {
  std::vector<bool> allowed(index_.n_docs(), false);
  for (const auto* u : corpus.candidates(bug.id, regime_, granularity_)) {
    allowed[position_.at(u->id)] = true;
  }
  const std::string query = with_title_ ? bug.title + "\n" + bug.description : bug.description;
  return query_top_k(index_, query, static_cast<std::size_t>(k), &allowed);
}

std::shared_ptr<const BugCase> make_bug_case(const Corpus& corpus, const BugReport& bug,
                                             const TaskIndex& index, const Embedder& embedder,
                                             const EnvConfig& cfg, Regime regime,
                                             Granularity granularity) {
  const auto hits = index.retrieve(corpus, bug, cfg.k);
  if (hits.empty()) {
    throw ValidationError("bug '" + bug.id + "' has no retrievable candidates");
  }
  auto bc = std::make_shared<BugCase>();
  bc->bug_id = bug.id;
  bc->k = cfg.k;
  bc->pair_dim = 2 * embedder.dim();
  const Embedding report = embedder.embed("report:" + bug.id, bug.description);
  for (const auto& hit : hits) {
    const CodeUnit& u = corpus.unit(hit.id);
    Candidate c;
    c.unit_id = u.id;
    c.path = u.path;
    c.relevant = bug.ground_truth_paths.count(u.path) > 0;
    if (cfg.regression_bonus) {
      c.bonus = predict_bug_probability(*cfg.regression_bonus, compute_factors(u, corpus));
    }
    c.embedding = combine(embedder.embed(u.id, u.content), report).values;
    bc->candidates.push_back(std::move(c));
  }
  const auto pool = corpus.candidates(bug.id, regime, granularity);
  bc->pool_size = pool.size();
  for (const auto* u : pool) {
    if (bug.ground_truth_paths.count(u->path)) bc->relevant_ids.push_back(u->id);
  }
  bc->relevant_in_pool = bc->relevant_ids.size();
  return bc;
}

TaskData prepare_task(const Corpus& corpus, const TaskSpec& spec, const Embedder& embedder,
                      const EnvConfig& cfg) {
  cfg.validate();
  const TaskIndex index(corpus, spec.regime, spec.granularity, cfg);
  TaskData data;
  data.spec = spec;
  for (const auto& id : spec.bug_ids) {
    try {
      data.cases.push_back(make_bug_case(corpus, corpus.bug(id), index, embedder, cfg,
                                         spec.regime, spec.granularity));
    } catch (const ValidationError& e) {
      spdlog::warn("{}: skipping bug: {}", spec.name(), e.what());
      data.skipped.push_back(id);
    }
  }
  return data;
}

}  // namespace clb
