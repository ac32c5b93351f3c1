#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "clb/env.hpp"
#include "clb/ewc.hpp"
#include "clb/nets.hpp"
#include "clb/replay.hpp"
#include "clb/rng.hpp"
#include "clb/trajectory.hpp"
#include "clb/vtrace.hpp"

namespace clb {

enum class LearnerKind { clear, ewc, naive };

std::string_view to_string(LearnerKind k);
LearnerKind parse_learner(std::string_view s);

struct TrainConfig {
  int episodes_per_task = 7500;
  int cycles = 2;
  int segment_length = 16;
  int batch_size = 8;  // trajectories per update
  double replay_ratio = 0.5;
  double clone_policy_coef = 0.01;
  double clone_value_coef = 0.005;
  double entropy_coef = 0.01;
  double value_coef = 0.5;
  LearnerKind learner = LearnerKind::clear;
  std::uint64_t seed = 0;
  double ewc_lambda = 100.0;
  std::size_t replay_capacity = 5000;
  int probe_size = 10;        // train bugs per task used for phase-end returns
  int fisher_episodes = 10;   // rollouts per EWC Fisher estimate
  VTraceConfig vtrace;
  OptimizerConfig optimizer;

  // Replay ratio actually used: always 0 for ewc and naive.
  double effective_replay_ratio() const {
    return learner == LearnerKind::clear ? replay_ratio : 0.0;
  }
  std::size_t new_per_batch() const;
  std::size_t replay_per_batch() const;
  void validate() const;
};

nlohmann::json train_config_to_json(const TrainConfig& cfg);

struct UpdateStats {
  double loss = 0.0;
  double grad_norm = 0.0;
  std::size_t new_trajectories = 0;
  std::size_t replayed_trajectories = 0;
  std::size_t transitions = 0;
};

// Policy evaluation of one observation.
PolicyOutput evaluate_observation(const ActorCriticParams& params, const Observation& obs,
                                  bool allow_reselect);

// Per-sample loss terms of the V-Trace actor-critic objective for a batch of
// trajectories (one column of X per transition); replayed trajectories also
// carry the cloning terms.
struct BatchProblem {
  Eigen::MatrixXd X;
  std::vector<std::vector<bool>> masks;
  std::vector<LossSample> samples;
  BatchForward forward;
};

BatchProblem build_batch(const ActorCriticParams& params,
                         const std::vector<const Trajectory*>& trajs,
                         const std::vector<bool>& replayed, const TrainConfig& cfg);

// One CLEAR step: the new trajectories plus replay_per_batch() replayed ones,
// V-Trace targets under the current policy, one optimizer step; the new
// trajectories are inserted into the buffer afterwards. buffer may be null
// (no replay); ewc, when given, adds its penalty gradient.
UpdateStats clear_update(ActorCriticParams& params, Optimizer& opt,
                         const std::vector<Trajectory>& new_trajs, ReplayBuffer* buffer,
                         const TrainConfig& cfg, const EwcState* ewc = nullptr);

// Rolls out one episode with actions sampled from π, cut into segments.
std::vector<Trajectory> rollout_episode(const ActorCriticParams& params,
                                        std::shared_ptr<const BugCase> bug,
                                        const EnvConfig& env, int segment_length, Rng& rng);

struct GreedyEpisode {
  std::vector<int> ranked;  // slots in ranking order
  double total_return = 0.0;
};

// Argmax policy with re-selection disabled.
GreedyEpisode greedy_episode(const ActorCriticParams& params, std::shared_ptr<const BugCase> bug,
                             const EnvConfig& env);

struct TrainedAgent {
  ActorCriticParams params;
  LearnerKind learner = LearnerKind::clear;
  EwcState ewc;
  std::size_t buffer_size = 0;
  std::uint64_t buffer_seen = 0;
};

struct PhaseLog {
  std::size_t task = 0;
  int cycle = 0;
  int episodes = 0;
  int updates = 0;
  double mean_loss = 0.0;
  double mean_episode_return = 0.0;
  double wall_clock_s = 0.0;  // kept out of the JSON log
};

struct TrainLog {
  std::vector<std::string> tasks;
  std::vector<PhaseLog> phases;
  std::vector<std::vector<double>> returns;  // [task][phase]
  nlohmann::json provenance = nlohmann::json::object();

  double total_wall_clock_s() const;
};

nlohmann::json train_log_to_json(const TrainLog& log);
nlohmann::json agent_to_json(const TrainedAgent& agent);
TrainedAgent agent_from_json(const nlohmann::json& j);

struct TrainResult {
  TrainedAgent agent;
  TrainLog log;
};

// Cyclic training over tasks (each a list of train bug cases). net.input_dim
// and net.n_actions must match the cases.
TrainResult train_continual(const std::vector<TaskData>& tasks, const TrainConfig& cfg,
                            const EnvConfig& env, const NetConfig& net);

}  // namespace clb
