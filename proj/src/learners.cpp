#include "clb/learners.hpp"

#include <chrono>
#include <cmath>

#include <spdlog/spdlog.h>

#include "clb/error.hpp"

namespace clb {

std::string_view to_string(LearnerKind k) {
  switch (k) {
    case LearnerKind::clear: return "clear";
    case LearnerKind::ewc: return "ewc";
    case LearnerKind::naive: return "naive";
  }
  return "?";
}

LearnerKind parse_learner(std::string_view s) {
  if (s == "clear") return LearnerKind::clear;
  if (s == "ewc") return LearnerKind::ewc;
  if (s == "naive") return LearnerKind::naive;
  throw ValidationError("unknown learner '" + std::string(s) + "' (expected clear, ewc or naive)");
}

std::size_t TrainConfig::new_per_batch() const {
  double r = effective_replay_ratio();
  return static_cast<std::size_t>(std::ceil((1.0 - r) * batch_size - 1e-9));
}

std::size_t TrainConfig::replay_per_batch() const {
  double r = effective_replay_ratio();
  return static_cast<std::size_t>(std::floor(r * batch_size + 1e-9));
}

void TrainConfig::validate() const {
  if (episodes_per_task < 1) throw ValidationError("episodes_per_task must be >= 1");
  if (cycles < 1) throw ValidationError("cycles must be >= 1");
  if (segment_length < 1) throw ValidationError("segment_length must be >= 1");
  if (batch_size < 1) throw ValidationError("batch_size must be >= 1");
  if (!(replay_ratio >= 0.0 && replay_ratio < 1.0))
    throw ValidationError("replay_ratio must be in [0, 1)");
  if (clone_policy_coef < 0 || clone_value_coef < 0 || entropy_coef < 0 || value_coef < 0)
    throw ValidationError("loss coefficients must be non-negative");
  if (ewc_lambda < 0) throw ValidationError("ewc lambda must be non-negative");
  if (replay_capacity == 0) throw ValidationError("replay capacity must be positive");
  if (probe_size < 1) throw ValidationError("probe_size must be >= 1");
  if (fisher_episodes < 1) throw ValidationError("fisher_episodes must be >= 1");
  if (!(optimizer.lr >= 0.0)) throw ValidationError("learning rate must be non-negative");
  vtrace.validate();
}

nlohmann::json train_config_to_json(const TrainConfig& cfg) {
  return {{"episodes_per_task", cfg.episodes_per_task},
          {"cycles", cfg.cycles},
          {"segment_length", cfg.segment_length},
          {"batch_size", cfg.batch_size},
          {"replay_ratio", cfg.replay_ratio},
          {"effective_replay_ratio", cfg.effective_replay_ratio()},
          {"clone_policy_coef", cfg.clone_policy_coef},
          {"clone_value_coef", cfg.clone_value_coef},
          {"entropy_coef", cfg.entropy_coef},
          {"value_coef", cfg.value_coef},
          {"learner", to_string(cfg.learner)},
          {"seed", cfg.seed},
          {"ewc_lambda", cfg.ewc_lambda},
          {"replay_capacity", cfg.replay_capacity},
          {"probe_size", cfg.probe_size},
          {"fisher_episodes", cfg.fisher_episodes},
          {"gamma", cfg.vtrace.gamma},
          {"rho_bar", cfg.vtrace.rho_bar},
          {"c_bar", cfg.vtrace.c_bar},
          {"optimizer", cfg.optimizer.kind == OptimizerKind::sgd ? "sgd" : "rmsprop"},
          {"lr", cfg.optimizer.lr},
          {"max_grad_norm", cfg.optimizer.max_grad_norm},
          {"rms_decay", cfg.optimizer.rms_decay},
          {"rms_epsilon", cfg.optimizer.rms_epsilon}};
}

PolicyOutput evaluate_observation(const ActorCriticParams& params, const Observation& obs,
                                  bool allow_reselect) {
  auto features = observation_features(obs);
  return forward(params, features, action_mask(obs, allow_reselect));
}

namespace {

void fill_column(Eigen::MatrixXd& X, Eigen::Index c, const Observation& obs) {
  write_features(obs, std::span<double>(X.col(c).data(), static_cast<std::size_t>(X.rows())));
}

}  // namespace

BatchProblem build_batch(const ActorCriticParams& params,
                         const std::vector<const Trajectory*>& trajs,
                         const std::vector<bool>& replayed, const TrainConfig& cfg) {
  if (trajs.size() != replayed.size()) throw ValidationError("replayed flags length mismatch");
  const auto dim = static_cast<Eigen::Index>(params.config().input_dim);
  std::size_t n = 0, n_boot = 0;
  for (const auto* t : trajs) {
    t->validate();
    n += t->steps.size();
    if (t->bootstrap) ++n_boot;
  }

  BatchProblem b;
  b.X.resize(dim, static_cast<Eigen::Index>(n));
  b.masks.reserve(n);
  Eigen::MatrixXd boot(dim, static_cast<Eigen::Index>(std::max<std::size_t>(n_boot, 1)));
  std::vector<std::vector<bool>> boot_masks;
  Eigen::Index c = 0, bc = 0;
  for (const auto* t : trajs) {
    for (const auto& s : t->steps) {
      fill_column(b.X, c++, s.observation);
      b.masks.push_back(s.mask);
    }
    if (t->bootstrap) {
      fill_column(boot, bc++, *t->bootstrap);
      boot_masks.emplace_back(params.config().n_actions, true);
    }
  }
  b.forward = forward_batch(params, b.X, b.masks);
  Eigen::RowVectorXd boot_values;
  if (n_boot > 0) boot_values = forward_batch(params, boot, boot_masks).values;

  b.samples.reserve(n);
  c = 0;
  bc = 0;
  for (std::size_t i = 0; i < trajs.size(); ++i) {
    const auto& t = *trajs[i];
    const std::size_t len = t.steps.size();
    std::vector<double> rewards(len), mu(len), pi(len), values(len + 1);
    for (std::size_t s = 0; s < len; ++s) {
      const auto& tr = t.steps[s];
      auto col = c + static_cast<Eigen::Index>(s);
      rewards[s] = tr.reward;
      mu[s] = tr.behavior_log_probs.at(static_cast<std::size_t>(tr.action));
      pi[s] = b.forward.log_probs(tr.action, col);
      values[s] = b.forward.values(col);
    }
    values[len] = t.bootstrap ? boot_values(bc++) : 0.0;
    auto vt = vtrace_targets(rewards, mu, pi, values, cfg.vtrace);
    for (std::size_t s = 0; s < len; ++s) {
      const auto& tr = t.steps[s];
      LossSample ls;
      ls.action = tr.action;
      ls.value_target = vt.v[s];
      ls.value_weight = cfg.value_coef;
      ls.pg_coef = vt.pg_adv[s];
      ls.entropy_coef = cfg.entropy_coef;
      if (replayed[i]) {
        ls.behavior_log_probs = tr.behavior_log_probs;
        ls.kl_coef = cfg.clone_policy_coef;
        ls.behavior_value = tr.behavior_value;
        ls.value_clone_coef = cfg.clone_value_coef;
      }
      b.samples.push_back(std::move(ls));
    }
    c += static_cast<Eigen::Index>(len);
  }
  return b;
}

UpdateStats clear_update(ActorCriticParams& params, Optimizer& opt,
                         const std::vector<Trajectory>& new_trajs, ReplayBuffer* buffer,
                         const TrainConfig& cfg, const EwcState* ewc) {
  if (new_trajs.empty()) throw ValidationError("clear_update needs new trajectories");
  std::vector<const Trajectory*> batch;
  std::vector<bool> replayed;
  for (const auto& t : new_trajs) {
    batch.push_back(&t);
    replayed.push_back(false);
  }
  std::size_t want = cfg.replay_per_batch();
  std::size_t n_replay = 0;
  if (want > 0 && buffer) {
    if (buffer->empty()) {
      spdlog::debug("replay buffer empty, using an all-new batch");
    } else {
      for (const auto* t : buffer->sample(want)) {
        batch.push_back(t);
        replayed.push_back(true);
        ++n_replay;
      }
    }
  }

  auto problem = build_batch(params, batch, replayed, cfg);
  UpdateStats stats;
  stats.new_trajectories = new_trajs.size();
  stats.replayed_trajectories = n_replay;
  stats.transitions = problem.samples.size();
  stats.loss = composite_loss(problem.forward, problem.masks, problem.samples);
  auto grads = backward(params, problem.forward, problem.masks, problem.samples);
  if (ewc && !ewc->anchors.empty()) {
    stats.loss += ewc_penalty(params, *ewc);
    grads = ewc_penalized_grads(grads, params, *ewc);
  }
  stats.grad_norm = grads.flat.norm();
  opt.step(params, std::move(grads));

  if (buffer)
    for (const auto& t : new_trajs) buffer->insert(t);
  return stats;
}

namespace {

int sample_action(const Eigen::VectorXd& log_probs, const std::vector<bool>& mask, Rng& rng) {
  double u = rng.uniform();
  double acc = 0.0;
  int last = -1;
  for (Eigen::Index j = 0; j < log_probs.size(); ++j) {
    if (!mask[static_cast<std::size_t>(j)]) continue;
    last = static_cast<int>(j);
    acc += std::exp(log_probs(j));
    if (u < acc) return last;
  }
  return last;
}

int argmax_action(const Eigen::VectorXd& logits, const std::vector<bool>& mask) {
  int best = -1;
  for (Eigen::Index j = 0; j < logits.size(); ++j) {
    if (!mask[static_cast<std::size_t>(j)]) continue;
    if (best < 0 || logits(j) > logits(best)) best = static_cast<int>(j);
  }
  return best;
}

}  // namespace

std::vector<Trajectory> rollout_episode(const ActorCriticParams& params,
                                        std::shared_ptr<const BugCase> bug,
                                        const EnvConfig& env, int segment_length, Rng& rng) {
  std::vector<Trajectory> out;
  Observation obs = reset(std::move(bug));
  if (is_done(obs, env)) return out;
  auto mask = action_mask(obs, env.allow_reselect);
  auto pol = forward(params, observation_features(obs), mask);
  Trajectory cur;
  while (true) {
    int a = sample_action(pol.log_probs, mask, rng);
    auto res = step(obs, a, env);
    Transition tr;
    tr.observation = std::move(obs);
    tr.action = a;
    tr.reward = res.reward;
    tr.behavior_log_probs.assign(pol.log_probs.data(), pol.log_probs.data() + pol.log_probs.size());
    tr.behavior_value = pol.value;
    tr.mask = std::move(mask);
    tr.done = res.done;
    cur.steps.push_back(std::move(tr));
    obs = std::move(res.observation);
    if (res.done) {
      out.push_back(std::move(cur));
      return out;
    }
    mask = action_mask(obs, env.allow_reselect);
    pol = forward(params, observation_features(obs), mask);
    if (static_cast<int>(cur.steps.size()) >= segment_length) {
      cur.bootstrap = obs;
      cur.bootstrap_value = pol.value;
      out.push_back(std::move(cur));
      cur = Trajectory{};
    }
  }
}

GreedyEpisode greedy_episode(const ActorCriticParams& params, std::shared_ptr<const BugCase> bug,
                             const EnvConfig& env) {
  EnvConfig eval_env = env;
  eval_env.allow_reselect = false;
  GreedyEpisode ep;
  Observation obs = reset(std::move(bug));
  while (!is_done(obs, eval_env)) {
    auto mask = action_mask(obs, false);
    auto pol = forward(params, observation_features(obs), mask);
    int a = argmax_action(pol.logits, mask);
    auto res = step(obs, a, eval_env);
    ep.total_return += res.reward;
    obs = std::move(res.observation);
  }
  ep.ranked = obs.ranked;
  return ep;
}

double TrainLog::total_wall_clock_s() const {
  double s = 0.0;
  for (const auto& p : phases) s += p.wall_clock_s;
  return s;
}

nlohmann::json train_log_to_json(const TrainLog& log) {
  nlohmann::json phases = nlohmann::json::array();
  for (const auto& p : log.phases)
    phases.push_back({{"task", log.tasks.at(p.task)},
                      {"cycle", p.cycle},
                      {"episodes", p.episodes},
                      {"updates", p.updates},
                      {"mean_loss", p.mean_loss},
                      {"mean_episode_return", p.mean_episode_return}});
  return {{"tasks", log.tasks},
          {"phases", phases},
          {"returns", log.returns},
          {"provenance", log.provenance}};
}

nlohmann::json agent_to_json(const TrainedAgent& agent) {
  return {{"learner", to_string(agent.learner)},
          {"checkpoint", checkpoint_to_json(agent.params)},
          {"ewc", ewc_to_json(agent.ewc)},
          {"replay", {{"size", agent.buffer_size}, {"seen", agent.buffer_seen}}}};
}

TrainedAgent agent_from_json(const nlohmann::json& j) {
  try {
    TrainedAgent a;
    a.learner = parse_learner(j.at("learner").get<std::string>());
    a.params = checkpoint_from_json(j.at("checkpoint"));
    a.ewc = ewc_from_json(j.at("ewc"));
    for (const auto& anchor : a.ewc.anchors)
      if (anchor.params.size() != a.params.flat().size())
        throw ParseError("EWC anchor shape does not match checkpoint");
    a.buffer_size = j.at("replay").at("size").get<std::size_t>();
    a.buffer_seen = j.at("replay").at("seen").get<std::uint64_t>();
    return a;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("agent: ") + e.what());
  }
}

namespace {

std::vector<std::shared_ptr<const BugCase>> probe_set(const TaskData& task, int size) {
  auto n = std::min(task.cases.size(), static_cast<std::size_t>(size));
  return {task.cases.begin(), task.cases.begin() + static_cast<std::ptrdiff_t>(n)};
}

Eigen::VectorXd fisher_for_task(const ActorCriticParams& params, const TaskData& task,
                                const TrainConfig& cfg, const EnvConfig& env, Rng& rng) {
  std::vector<Transition> steps;
  auto probes = probe_set(task, cfg.probe_size);
  for (int e = 0; e < cfg.fisher_episodes; ++e) {
    auto bug = probes[static_cast<std::size_t>(e) % probes.size()];
    for (auto& t : rollout_episode(params, bug, env, cfg.segment_length, rng))
      for (auto& s : t.steps) steps.push_back(std::move(s));
  }
  Eigen::MatrixXd X(static_cast<Eigen::Index>(params.config().input_dim),
                    static_cast<Eigen::Index>(steps.size()));
  std::vector<std::vector<bool>> masks;
  std::vector<int> actions;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    fill_column(X, static_cast<Eigen::Index>(i), steps[i].observation);
    masks.push_back(steps[i].mask);
    actions.push_back(steps[i].action);
  }
  return ewc_fisher(params, X, masks, actions);
}

}  // namespace

TrainResult train_continual(const std::vector<TaskData>& tasks, const TrainConfig& cfg,
                            const EnvConfig& env, const NetConfig& net) {
  cfg.validate();
  env.validate();
  if (tasks.empty()) throw ValidationError("no tasks to train on");
  for (const auto& t : tasks) {
    if (t.cases.empty())
      throw ValidationError("task " + t.spec.name() + " has no usable bugs");
    for (const auto& c : t.cases) {
      if (c->k != static_cast<int>(net.n_actions) || c->feature_dim() != net.input_dim)
        throw ValidationError("bug " + c->bug_id + " does not match the network shape");
    }
  }

  TrainResult result;
  auto& log = result.log;
  auto& agent = result.agent;
  agent.learner = cfg.learner;
  agent.params = init_params(net);
  agent.ewc.lambda = cfg.ewc_lambda;
  Optimizer opt(cfg.optimizer, agent.params.size());
  Rng rng(cfg.seed);
  ReplayBuffer buffer(cfg.replay_capacity, cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  const bool use_replay = cfg.learner == LearnerKind::clear;
  const bool use_ewc = cfg.learner == LearnerKind::ewc;

  for (const auto& t : tasks) log.tasks.push_back(t.spec.name());
  log.returns.assign(tasks.size(), {});
  std::vector<std::size_t> cursor(tasks.size(), 0);
  const std::size_t n_new = cfg.new_per_batch();

  for (int cycle = 1; cycle <= cfg.cycles; ++cycle) {
    for (std::size_t ti = 0; ti < tasks.size(); ++ti) {
      const auto& task = tasks[ti];
      auto start = std::chrono::steady_clock::now();
      PhaseLog phase;
      phase.task = ti;
      phase.cycle = cycle;
      double loss_sum = 0.0, return_sum = 0.0;
      std::vector<Trajectory> pending;

      auto update = [&] {
        if (pending.empty()) return;
        auto st = clear_update(agent.params, opt, pending, use_replay ? &buffer : nullptr, cfg,
                               use_ewc ? &agent.ewc : nullptr);
        loss_sum += st.loss;
        ++phase.updates;
        pending.clear();
      };

      for (int e = 0; e < cfg.episodes_per_task; ++e) {
        const auto& bug = task.cases[cursor[ti]++ % task.cases.size()];
        auto segs = rollout_episode(agent.params, bug, env, cfg.segment_length, rng);
        for (auto& s : segs) {
          for (const auto& tr : s.steps) return_sum += tr.reward;
          pending.push_back(std::move(s));
          if (pending.size() >= n_new) update();
        }
        ++phase.episodes;
      }
      update();

      if (use_ewc) {
        agent.ewc.anchors.push_back(
            {agent.params.flat(), fisher_for_task(agent.params, task, cfg, env, rng)});
      }

      for (std::size_t tj = 0; tj < tasks.size(); ++tj) {
        double total = 0.0;
        auto probes = probe_set(tasks[tj], cfg.probe_size);
        for (const auto& b : probes) total += greedy_episode(agent.params, b, env).total_return;
        log.returns[tj].push_back(total / static_cast<double>(probes.size()));
      }

      phase.mean_loss = phase.updates ? loss_sum / phase.updates : 0.0;
      phase.mean_episode_return = return_sum / phase.episodes;
      phase.wall_clock_s =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      spdlog::info("cycle {} task {}: {} updates, loss {:.4f}, mean return {:.3f}", cycle,
                   task.spec.name(), phase.updates, phase.mean_loss, phase.mean_episode_return);
      log.phases.push_back(phase);
    }
  }
  agent.buffer_size = buffer.size();
  agent.buffer_seen = buffer.seen();
  return result;
}

}  // namespace clb
