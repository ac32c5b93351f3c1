#include "clb/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "clb/error.hpp"

namespace clb {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || p != v.data() + v.size())
    throw ValidationError(key + ": invalid number '" + v + "'");
  return out;
}

int as_int(const std::string& k, const std::string& v) { return parse_number<int>(k, v); }
double as_double(const std::string& k, const std::string& v) { return parse_number<double>(k, v); }
std::size_t as_size(const std::string& k, const std::string& v) {
  return parse_number<std::size_t>(k, v);
}
std::uint64_t as_u64(const std::string& k, const std::string& v) {
  return parse_number<std::uint64_t>(k, v);
}

bool as_bool(const std::string& k, const std::string& v) {
  if (v == "on" || v == "true" || v == "yes" || v == "1") return true;
  if (v == "off" || v == "false" || v == "no" || v == "0") return false;
  throw ValidationError(k + ": expected on/off, got '" + v + "'");
}

using Setter = std::function<void(ExperimentConfig&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> t;
    auto& s = t;
    s["paths.corpus"] = [](auto& c, auto&, auto& v) { c.corpus = v; };
    s["paths.out"] = [](auto& c, auto&, auto& v) { c.out_dir = v; };
    s["paths.factor_model"] = [](auto& c, auto&, auto& v) {
      if (v.empty()) c.factor_model.reset(); else c.factor_model = v;
    };
    s["paths.embeddings"] = [](auto& c, auto&, auto& v) {
      if (v.empty()) {
        c.embedder.external_path.reset();
        c.embedder.mode = EmbedMode::hashed_tf;
      } else {
        c.embedder.external_path = v;
        c.embedder.mode = EmbedMode::external;
      }
    };
    s["experiment.granularity"] = [](auto& c, auto& k, auto& v) {
      if (v == "file" || v == "changeset_file") c.granularity = Granularity::changeset_file;
      else if (v == "hunk") c.granularity = Granularity::hunk;
      else throw ValidationError(k + ": expected file or hunk, got '" + v + "'");
    };
    s["experiment.learner"] = [](auto& c, auto&, auto& v) { c.learner = parse_learner(v); };
    s["experiment.regression"] = [](auto& c, auto& k, auto& v) { c.regression = as_bool(k, v); };
    s["experiment.seeds"] = [](auto& c, auto& k, auto& v) {
      c.seeds.clear();
      for (const auto& item : split_list(v)) c.seeds.push_back(as_u64(k, item));
      if (c.seeds.empty()) throw ValidationError(k + ": seed list is empty");
    };

    s["env.k"] = [](auto& c, auto& k, auto& v) { c.env.k = as_int(k, v); };
    s["env.reward_scale"] = [](auto& c, auto& k, auto& v) { c.env.reward_scale = as_double(k, v); };
    s["env.max_steps"] = [](auto& c, auto& k, auto& v) { c.env.max_steps = as_int(k, v); };
    s["env.allow_reselect"] = [](auto& c, auto& k, auto& v) { c.env.allow_reselect = as_bool(k, v); };
    s["env.query_with_title"] = [](auto& c, auto& k, auto& v) { c.env.query_with_title = as_bool(k, v); };
    s["env.index_paths"] = [](auto& c, auto& k, auto& v) { c.env.index_paths = as_bool(k, v); };

    s["net.hidden"] = [](auto& c, auto& k, auto& v) {
      c.net.hidden.clear();
      for (const auto& item : split_list(v)) c.net.hidden.push_back(as_size(k, item));
    };
    s["net.activation"] = [](auto& c, auto& k, auto& v) {
      if (v == "tanh") c.net.activation = Activation::tanh;
      else if (v == "relu") c.net.activation = Activation::relu;
      else throw ValidationError(k + ": expected tanh or relu, got '" + v + "'");
    };
    s["net.init_scale"] = [](auto& c, auto& k, auto& v) { c.net.init_scale = as_double(k, v); };

    s["train.episodes_per_task"] = [](auto& c, auto& k, auto& v) { c.train.episodes_per_task = as_int(k, v); };
    s["train.cycles"] = [](auto& c, auto& k, auto& v) { c.train.cycles = as_int(k, v); };
    s["train.segment_length"] = [](auto& c, auto& k, auto& v) { c.train.segment_length = as_int(k, v); };
    s["train.batch_size"] = [](auto& c, auto& k, auto& v) { c.train.batch_size = as_int(k, v); };
    s["train.replay_ratio"] = [](auto& c, auto& k, auto& v) { c.train.replay_ratio = as_double(k, v); };
    s["train.clone_policy_coef"] = [](auto& c, auto& k, auto& v) { c.train.clone_policy_coef = as_double(k, v); };
    s["train.clone_value_coef"] = [](auto& c, auto& k, auto& v) { c.train.clone_value_coef = as_double(k, v); };
    s["train.entropy_coef"] = [](auto& c, auto& k, auto& v) { c.train.entropy_coef = as_double(k, v); };
    s["train.value_coef"] = [](auto& c, auto& k, auto& v) { c.train.value_coef = as_double(k, v); };
    s["train.ewc_lambda"] = [](auto& c, auto& k, auto& v) { c.train.ewc_lambda = as_double(k, v); };
    s["train.replay_capacity"] = [](auto& c, auto& k, auto& v) { c.train.replay_capacity = as_size(k, v); };
    s["train.probe_size"] = [](auto& c, auto& k, auto& v) { c.train.probe_size = as_int(k, v); };
    s["train.fisher_episodes"] = [](auto& c, auto& k, auto& v) { c.train.fisher_episodes = as_int(k, v); };
    s["train.optimizer"] = [](auto& c, auto& k, auto& v) {
      if (v == "sgd") c.train.optimizer.kind = OptimizerKind::sgd;
      else if (v == "rmsprop") c.train.optimizer.kind = OptimizerKind::rmsprop;
      else throw ValidationError(k + ": expected sgd or rmsprop, got '" + v + "'");
    };
    s["train.lr"] = [](auto& c, auto& k, auto& v) { c.train.optimizer.lr = as_double(k, v); };
    s["train.max_grad_norm"] = [](auto& c, auto& k, auto& v) { c.train.optimizer.max_grad_norm = as_double(k, v); };
    s["train.rms_decay"] = [](auto& c, auto& k, auto& v) { c.train.optimizer.rms_decay = as_double(k, v); };
    s["train.rms_epsilon"] = [](auto& c, auto& k, auto& v) { c.train.optimizer.rms_epsilon = as_double(k, v); };

    s["vtrace.gamma"] = [](auto& c, auto& k, auto& v) {
      c.train.vtrace.gamma = as_double(k, v);
      c.env.gamma = c.train.vtrace.gamma;
    };
    s["vtrace.rho_bar"] = [](auto& c, auto& k, auto& v) { c.train.vtrace.rho_bar = as_double(k, v); };
    s["vtrace.c_bar"] = [](auto& c, auto& k, auto& v) { c.train.vtrace.c_bar = as_double(k, v); };

    s["selection.p_threshold"] = [](auto& c, auto& k, auto& v) { c.selection.p_threshold = as_double(k, v); };
    s["selection.vif_max"] = [](auto& c, auto& k, auto& v) { c.selection.vif_max = as_double(k, v); };
    s["selection.standardize"] = [](auto& c, auto& k, auto& v) { c.selection.standardize = as_bool(k, v); };

    s["embedder.dim"] = [](auto& c, auto& k, auto& v) { c.embedder.dim = as_size(k, v); };

    s["bm25.k1"] = [](auto& c, auto& k, auto& v) { c.env.bm25.k1 = as_double(k, v); };
    s["bm25.b"] = [](auto& c, auto& k, auto& v) { c.env.bm25.b = as_double(k, v); };

    s["synth.bugs"] = [](auto& c, auto& k, auto& v) { c.synth.n_bugs = as_int(k, v); };
    s["synth.files"] = [](auto& c, auto& k, auto& v) { c.synth.n_files = as_int(k, v); };
    s["synth.vocab_size"] = [](auto& c, auto& k, auto& v) { c.synth.vocab_size = as_int(k, v); };
    s["synth.signal"] = [](auto& c, auto& k, auto& v) { c.synth.signal = as_double(k, v); };
    s["synth.drift"] = [](auto& c, auto& k, auto& v) { c.synth.drift = as_double(k, v); };
    s["synth.planted_tokens"] = [](auto& c, auto& k, auto& v) { c.synth.planted_tokens = as_int(k, v); };
    s["synth.lines_per_file"] = [](auto& c, auto& k, auto& v) { c.synth.lines_per_file = as_int(k, v); };
    s["synth.ns_distractors"] = [](auto& c, auto& k, auto& v) { c.synth.ns_distractors = as_int(k, v); };
    s["synth.ns_echoes"] = [](auto& c, auto& k, auto& v) { c.synth.ns_echoes = as_int(k, v); };
    s["synth.hot_fraction"] = [](auto& c, auto& k, auto& v) { c.synth.hot_fraction = as_double(k, v); };
    return t;
  }();
  return table;
}

}  // namespace

ExperimentConfig::ExperimentConfig() { train.episodes_per_task = 500; }

ConfigMap parse_config_text(std::string_view text, const std::string& source) {
  ConfigMap out;
  std::string section = "experiment";
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    auto raw = text.substr(pos, nl == std::string_view::npos ? text.size() - pos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    auto line = trim(raw);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    auto where = source + ":" + std::to_string(line_no);
    if (line.front() == '[') {
      if (line.back() != ']') throw ParseError(where + ": unterminated section header");
      section = trim(std::string_view(line).substr(1, line.size() - 2));
      if (section.empty()) throw ParseError(where + ": empty section name");
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(where + ": expected key = value");
    auto key = trim(std::string_view(line).substr(0, eq));
    auto value = trim(std::string_view(line).substr(eq + 1));
    if (key.empty()) throw ParseError(where + ": empty key");
    out[key.find('.') == std::string::npos ? section + "." + key : key] = value;
  }
  return out;
}

ConfigMap load_config_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot read config file '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), path.string());
}

void apply_config(ExperimentConfig& cfg, const ConfigMap& values) {
  const auto& table = setters();
  for (const auto& [key, value] : values) {
    auto it = table.find(key);
    if (it == table.end()) throw ValidationError("unknown configuration key '" + key + "'");
    it->second(cfg, key, value);
  }
}

std::vector<std::string> known_config_keys() {
  std::vector<std::string> out;
  for (const auto& [k, _] : setters()) out.push_back(k);
  return out;
}

NetConfig resolved_net_config(const ExperimentConfig& cfg, std::uint64_t seed) {
  NetConfig net = cfg.net;
  const auto k = static_cast<std::size_t>(cfg.env.k);
  net.input_dim = k * (2 * cfg.embedder.dim + 1) + 1;
  net.n_actions = k;
  net.init_seed = seed;
  return net;
}

nlohmann::json config_to_json(const ExperimentConfig& cfg) {
  nlohmann::json j;
  j["paths"] = {{"corpus", cfg.corpus.string()},
                {"out", cfg.out_dir.string()},
                {"factor_model", cfg.factor_model ? cfg.factor_model->string() : ""},
                {"embeddings", cfg.embedder.external_path ? cfg.embedder.external_path->string() : ""}};
  j["experiment"] = {{"granularity", cfg.granularity == Granularity::hunk ? "hunk" : "file"},
                     {"learner", to_string(cfg.learner)},
                     {"regression", cfg.regression}};
  j["env"] = {{"k", cfg.env.k},
              {"reward_scale", cfg.env.reward_scale},
              {"max_steps", cfg.env.step_cap()},
              {"allow_reselect", cfg.env.allow_reselect},
              {"query_with_title", cfg.env.query_with_title},
              {"index_paths", cfg.env.index_paths}};
  auto net = net_config_to_json(cfg.net);
  net.erase("input_dim");
  net.erase("n_actions");
  net.erase("init_seed");
  j["net"] = net;
  j["train"] = train_config_to_json(cfg.train);
  j["train"].erase("seed");
  j["selection"] = {{"p_threshold", cfg.selection.p_threshold},
                    {"vif_max", cfg.selection.vif_max},
                    {"standardize", cfg.selection.standardize}};
  j["embedder"] = {{"dim", cfg.embedder.dim},
                   {"mode", cfg.embedder.mode == EmbedMode::hashed_tf ? "hashed_tf" : "external"}};
  j["bm25"] = {{"k1", cfg.env.bm25.k1}, {"b", cfg.env.bm25.b}};
  return j;
}

}  // namespace clb
