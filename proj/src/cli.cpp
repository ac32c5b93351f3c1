#include "clb/cli.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <CLI11.hpp>
#include <spdlog/fmt/fmt.h>
#include <spdlog/spdlog.h>

#include "clb/config.hpp"
#include "clb/error.hpp"
#include "clb/eval.hpp"
#include "clb/factors.hpp"
#include "clb/git_miner.hpp"
#include "clb/retrieval.hpp"

#ifndef CLB_VERSION
#define CLB_VERSION "unknown"
#endif

namespace clb {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string read_file(const fs::path& path, const std::string& what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot read " + what + " '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json read_json(const fs::path& path, const std::string& what) {
  auto text = read_file(path, what);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    auto upto = std::min<std::size_t>(e.byte, text.size());
    auto line = 1 + std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(upto), '\n');
    throw ParseError(path.string() + ":" + std::to_string(line) + ": " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RuntimeError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw RuntimeError("write failed for '" + path.string() + "'");
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(1) + "\n"); }

// Options shared by every subcommand; values land in a ConfigMap so that they
// override the config file.
struct CommonOptions {
  std::string config;
  std::vector<std::pair<std::string, std::string>> flags;  // option → config key
  std::map<std::string, std::string> values;

  void add(CLI::App* app, const std::string& name, const std::string& key,
           const std::string& help) {
    flags.emplace_back(name, key);
    app->add_option("--" + name, values[name], help);
  }
};

ConfigMap extras_to_map(const std::vector<std::string>& extras) {
  ConfigMap out;
  for (std::size_t i = 0; i < extras.size(); ++i) {
    const auto& tok = extras[i];
    if (tok.rfind("--", 0) != 0 || tok.find('.') == std::string::npos)
      throw UsageError("unknown flag or argument '" + tok + "'");
    auto body = tok.substr(2);
    auto eq = body.find('=');
    if (eq != std::string::npos) {
      out[body.substr(0, eq)] = body.substr(eq + 1);
      continue;
    }
    if (i + 1 >= extras.size()) throw UsageError("flag '" + tok + "' needs a value");
    out[body] = extras[++i];
  }
  auto known = known_config_keys();
  for (const auto& [k, _] : out)
    if (std::find(known.begin(), known.end(), k) == known.end())
      throw UsageError("unknown flag '--" + k + "'");
  return out;
}

ExperimentConfig resolve_config(CLI::App* app, const CommonOptions& opts) {
  ExperimentConfig cfg;
  if (!opts.config.empty()) apply_config(cfg, load_config_file(opts.config));
  ConfigMap flags;
  for (const auto& [name, key] : opts.flags)
    if (app->count("--" + name) > 0) flags[key] = opts.values.at(name);
  apply_config(cfg, flags);
  apply_config(cfg, extras_to_map(app->remaining()));
  cfg.env.gamma = cfg.train.vtrace.gamma;
  return cfg;
}

Corpus open_corpus(const ExperimentConfig& cfg) {
  if (cfg.corpus.empty()) throw ValidationError("no corpus path given (--corpus or paths.corpus)");
  if (!fs::exists(cfg.corpus))
    throw ValidationError("corpus file not found: '" + cfg.corpus.string() + "'");
  return load_corpus(cfg.corpus);
}

EnvConfig resolve_env(const ExperimentConfig& cfg) {
  EnvConfig env = cfg.env;
  if (cfg.regression) {
    if (!cfg.factor_model)
      throw ValidationError("--regression on needs a factor model (paths.factor_model)");
    if (!fs::exists(*cfg.factor_model))
      throw ValidationError("factor model not found: '" + cfg.factor_model->string() + "'");
    env.regression_bonus = model_from_json(read_json(*cfg.factor_model, "factor model"));
  }
  env.validate();
  return env;
}

std::vector<TaskData> prepare_tasks(const Corpus& corpus, const std::vector<std::string>& bugs,
                                    const ExperimentConfig& cfg, const EnvConfig& env,
                                    const Embedder& embedder) {
  std::vector<TaskData> out;
  for (auto regime : {Regime::stationary, Regime::non_stationary}) {
    auto spec = make_task(corpus, regime, cfg.granularity, bugs);
    auto td = prepare_task(corpus, spec, embedder, env);
    if (!td.skipped.empty())
      spdlog::info("{}: {} bugs without retrievable candidates skipped", spec.name(),
                   td.skipped.size());
    out.push_back(std::move(td));
  }
  return out;
}

fs::path seed_dir(const ExperimentConfig& cfg, std::uint64_t seed) {
  return cfg.out_dir / ("seed-" + std::to_string(seed));
}

int cmd_synth(const ExperimentConfig& cfg, const fs::path& out_path, std::ostream& out) {
  auto corpus = generate_synthetic_corpus(cfg.synth, cfg.seeds.front());
  save_corpus(corpus, out_path);
  out << "wrote " << corpus.bug_reports.size() << " bugs, " << corpus.code_units.size()
      << " units to " << out_path.string() << "\n";
  return 0;
}

int cmd_mine(const fs::path& repo, const fs::path& meta, const fs::path& out_path,
             std::ostream& out) {
  if (!fs::is_directory(repo)) throw ValidationError("repository not found: '" + repo.string() + "'");
  auto bugs = bug_metadata_from_json(read_json(meta, "bug metadata"));
  auto result = mine_repository(repo, std::move(bugs));
  save_corpus(result.corpus, out_path);
  for (const auto& b : result.bugs_without_non_stationary)
    spdlog::warn("bug {} has no non-stationary units", b);
  out << "mined " << result.corpus.bug_reports.size() << " bugs, "
      << result.corpus.code_units.size() << " units (" << result.skipped_units.size()
      << " skipped) to " << out_path.string() << "\n";
  return 0;
}

int cmd_train_factors(const ExperimentConfig& cfg, const fs::path& out_path, std::ostream& out) {
  auto corpus = open_corpus(cfg);
  auto split = split_train_test(corpus);
  std::vector<FactorVector> rows;
  std::vector<double> labels;
  for (const auto& id : split.train) {
    const auto& bug = corpus.bug(id);
    for (auto regime : {Regime::stationary, Regime::non_stationary}) {
      for (const auto* u : corpus.candidates(id, regime, cfg.granularity)) {
        rows.push_back(compute_factors(*u, corpus));
        labels.push_back(bug.ground_truth_paths.count(u->path) ? 1.0 : 0.0);
      }
    }
  }
  if (rows.empty()) throw ValidationError("no training units for the factor model");
  const auto& names = FactorVector::names;
  Eigen::MatrixXd X(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(names.size()));
  Eigen::VectorXd y(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < names.size(); ++j)
      X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i].get(names[j]);
    y(static_cast<Eigen::Index>(i)) = labels[i];
  }
  std::vector<std::string> name_list(names.begin(), names.end());
  auto model = select_features(X, y, name_list, cfg.selection);
  write_json(out_path, model_to_json(model));
  out << "factor model on " << rows.size() << " units keeps";
  for (const auto& n : model.feature_names) out << ' ' << n;
  out << " -> " << out_path.string() << "\n";
  return 0;
}

int cmd_index(const ExperimentConfig& cfg, const std::string& out_path, bool postings,
              std::ostream& out) {
  auto corpus = open_corpus(cfg);
  json stats = json::object();
  for (auto regime : {Regime::stationary, Regime::non_stationary}) {
    TaskIndex index(corpus, regime, cfg.granularity, cfg.env);
    stats[std::string(to_string(regime))] = index_stats(index.index(), postings);
  }
  if (out_path.empty())
    out << stats.dump(1) << "\n";
  else
    write_json(out_path, stats);
  return 0;
}

int cmd_train(const ExperimentConfig& cfg, std::ostream& out) {
  auto corpus = open_corpus(cfg);
  auto env = resolve_env(cfg);
  auto split = split_train_test(corpus);
  Embedder embedder(cfg.embedder);
  auto tasks = prepare_tasks(corpus, split.train, cfg, env, embedder);
  for (auto seed : cfg.seeds) {
    TrainConfig tc = cfg.train;
    tc.seed = seed;
    tc.learner = cfg.learner;
    auto net = resolved_net_config(cfg, seed);
    auto result = train_continual(tasks, tc, env, net);
    result.log.provenance = {{"version", CLB_VERSION},
                             {"seed", seed},
                             {"config", config_to_json(cfg)}};
    auto dir = seed_dir(cfg, seed);
    write_json(dir / "agent.json", agent_to_json(result.agent));
    write_json(dir / "train_log.json", train_log_to_json(result.log));
    json timing = {{"training_time_s", result.log.total_wall_clock_s()}, {"phases", json::array()}};
    for (const auto& p : result.log.phases) timing["phases"].push_back(p.wall_clock_s);
    write_json(dir / "timing.json", timing);
    out << fmt::format("seed {}: trained {} ({} phases) -> {}\n", seed, to_string(tc.learner),
                       result.log.phases.size(), dir.string());
  }
  return 0;
}

int cmd_evaluate(const ExperimentConfig& cfg, std::ostream& out) {
  auto corpus = open_corpus(cfg);
  auto env = resolve_env(cfg);
  auto split = split_train_test(corpus);
  Embedder embedder(cfg.embedder);
  auto tasks = prepare_tasks(corpus, split.test, cfg, env, embedder);
  for (auto seed : cfg.seeds) {
    auto dir = seed_dir(cfg, seed);
    auto agent = agent_from_json(read_json(dir / "agent.json", "agent checkpoint"));
    auto log = read_json(dir / "train_log.json", "training log");
    double train_time = 0.0;
    if (fs::exists(dir / "timing.json"))
      train_time = read_json(dir / "timing.json", "timing").value("training_time_s", 0.0);

    auto task_names = log.at("tasks").get<std::vector<std::string>>();
    std::vector<std::size_t> phase_tasks;
    for (const auto& p : log.at("phases")) {
      auto name = p.at("task").get<std::string>();
      phase_tasks.push_back(static_cast<std::size_t>(
          std::find(task_names.begin(), task_names.end(), name) - task_names.begin()));
    }
    std::vector<double> forg;
    try {
      forg = forgetting(log.at("returns").get<std::vector<std::vector<double>>>(), phase_tasks);
    } catch (const ValidationError& e) {
      spdlog::warn("seed {}: {}", seed, e.what());
    }
    double mean_forg = 0.0;
    for (double f : forg) mean_forg += f;
    if (!forg.empty()) mean_forg /= static_cast<double>(forg.size());

    json reports = json::array();
    std::vector<MetricsReport> all;
    for (const auto& task : tasks) {
      if (task.cases.empty()) {
        spdlog::warn("{}: empty test set, skipped", task.spec.name());
        continue;
      }
      auto report = evaluate_agent(agent.params, task, env);
      report.training_time_s = train_time;
      if (!forg.empty()) {
        report.forgetting_tasks = task_names;
        report.forgetting = forg;
        report.mean_forgetting = mean_forg;
      }
      reports.push_back(metrics_to_json(report));
      write_text(dir / ("per_bug_" + std::string(to_string(task.spec.regime)) + ".csv"),
                 per_bug_csv(report));
      all.push_back(std::move(report));
    }
    if (all.empty()) throw ValidationError("no test bugs to evaluate");
    write_json(dir / "metrics.json", reports);
    auto table = metrics_table(all);
    write_text(dir / "metrics.txt", table);
    out << "seed " << seed << "\n" << table;
  }
  return 0;
}

struct Stat {
  std::vector<double> xs;
  std::string str() const {
    if (xs.empty()) return "-";
    double m = 0.0;
    for (double x : xs) m += x;
    m /= static_cast<double>(xs.size());
    double v = 0.0;
    for (double x : xs) v += (x - m) * (x - m);
    double sd = xs.size() > 1 ? std::sqrt(v / static_cast<double>(xs.size() - 1)) : 0.0;
    return fmt::format("{:.4f}±{:.4f}", m, sd);
  }
};

int cmd_report(const std::vector<std::string>& runs, const std::string& out_path,
               std::ostream& out) {
  if (runs.empty()) throw ValidationError("report needs at least one run directory");
  std::ostringstream os;
  os << fmt::format("{:<24} {:<28} {:>5} {:>15} {:>15} {:>15} {:>15} {:>15} {:>16} {:>15}\n",
                    "run", "task", "seeds", "MRR", "MAP", "top1", "top5", "top10", "forgetting",
                    "time_s");
  for (const auto& run : runs) {
    if (!fs::is_directory(run)) throw ValidationError("run directory not found: '" + run + "'");
    std::vector<fs::path> seeds;
    for (const auto& e : fs::directory_iterator(run))
      if (e.is_directory() && fs::exists(e.path() / "metrics.json")) seeds.push_back(e.path());
    std::sort(seeds.begin(), seeds.end());
    if (seeds.empty()) throw ValidationError("no evaluated seeds under '" + run + "'");
    std::map<std::string, std::map<std::string, Stat>> by_task;
    for (const auto& s : seeds) {
      auto reports = read_json(s / "metrics.json", "metrics");
      double t = 0.0;
      if (fs::exists(s / "timing.json"))
        t = read_json(s / "timing.json", "timing").value("training_time_s", 0.0);
      for (const auto& r : reports) {
        auto& st = by_task[r.at("task").get<std::string>()];
        for (const char* key : {"mrr", "map", "top1", "top5", "top10", "mean_forgetting"})
          st[key].xs.push_back(r.at(key).get<double>());
        st["time"].xs.push_back(t);
      }
    }
    for (auto& [task, st] : by_task)
      os << fmt::format("{:<24} {:<28} {:>5} {:>15} {:>15} {:>15} {:>15} {:>15} {:>16} {:>15}\n",
                        fs::path(run).filename().string(), task, st["mrr"].xs.size(),
                        st["mrr"].str(), st["map"].str(), st["top1"].str(), st["top5"].str(),
                        st["top10"].str(), st["mean_forgetting"].str(), st["time"].str());
  }
  if (!out_path.empty()) write_text(out_path, os.str());
  out << os.str();
  return 0;
}

}  // namespace

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Continual-RL bug localization toolkit", "clb"};
  app.require_subcommand(1);
  app.set_version_flag("--version", CLB_VERSION);

  std::map<std::string, CommonOptions> common;
  auto add_common = [&](CLI::App* sub) {
    auto& o = common[sub->get_name()];
    sub->allow_extras();
    sub->add_option("--config", o.config, "sectioned key=value configuration file");
    o.add(sub, "seed", "experiment.seeds", "seed, or comma-separated seed list");
    o.add(sub, "granularity", "experiment.granularity", "file or hunk");
    o.add(sub, "learner", "experiment.learner", "clear, ewc or naive");
    o.add(sub, "regression", "experiment.regression", "on or off");
    o.add(sub, "episodes", "train.episodes_per_task", "episodes per task phase");
    o.add(sub, "cycles", "train.cycles", "passes over the task sequence");
    o.add(sub, "k", "env.k", "candidate slots per bug");
    o.add(sub, "dim", "embedder.dim", "embedding dimension");
    o.add(sub, "corpus", "paths.corpus", "corpus JSON file");
    o.add(sub, "factor-model", "paths.factor_model", "factor model JSON file");
    return sub;
  };

  std::string out_opt, repo, meta, bugs_opt;
  bool postings = false;
  std::vector<std::string> runs;

  auto* mine = add_common(app.add_subcommand("mine", "build a corpus from a git repository"));
  mine->add_option("--repo", repo, "git working copy")->required();
  mine->add_option("--meta", meta, "bug metadata JSON (array of bug reports)")->required();
  mine->add_option("--out", out_opt, "output corpus file")->required();

  auto* synth = add_common(app.add_subcommand("synth", "generate a synthetic corpus"));
  synth->add_option("--bugs", bugs_opt, "number of bug reports");
  synth->add_option("--out", out_opt, "output corpus file")->required();

  auto* factors = add_common(app.add_subcommand("train-factors", "fit the bug-factor model"));
  factors->add_option("--out", out_opt, "output model file")->required();

  auto* index = add_common(app.add_subcommand("index", "build BM25 indexes and dump statistics"));
  index->add_option("--out", out_opt, "statistics file (default stdout)");
  index->add_flag("--postings", postings, "include posting lists");

  auto* train = add_common(app.add_subcommand("train", "train agents, one per seed"));
  train->add_option("--out", out_opt, "run directory");

  auto* evaluate = add_common(app.add_subcommand("evaluate", "evaluate trained agents"));
  evaluate->add_option("--out", out_opt, "run directory");

  auto* report = add_common(app.add_subcommand("report", "aggregate evaluated runs"));
  report->add_option("runs", runs, "run directories");
  report->add_option("--out", out_opt, "write the table to this file");

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << CLB_VERSION << "\n";
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 1;
  }

  CLI::App* sub = app.get_subcommands().front();
  try {
    auto cfg = resolve_config(sub, common.at(sub->get_name()));
    if (sub == synth && !bugs_opt.empty()) apply_config(cfg, {{"synth.bugs", bugs_opt}});
    if ((sub == train || sub == evaluate) && !out_opt.empty()) cfg.out_dir = out_opt;
    if (sub == mine) return cmd_mine(repo, meta, out_opt, out);
    if (sub == synth) return cmd_synth(cfg, out_opt, out);
    if (sub == factors) return cmd_train_factors(cfg, out_opt, out);
    if (sub == index) return cmd_index(cfg, out_opt, postings, out);
    if (sub == train) return cmd_train(cfg, out);
    if (sub == evaluate) return cmd_evaluate(cfg, out);
    return cmd_report(runs, out_opt, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n\n" << sub->help();
    return 1;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace clb
