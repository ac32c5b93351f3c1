#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "clb/corpus.hpp"
#include "clb/embed.hpp"
#include "clb/env.hpp"
#include "clb/learners.hpp"
#include "clb/logistic.hpp"
#include "clb/nets.hpp"
#include "clb/synth.hpp"

namespace clb {

// Flat "section.key" → value map read from a sectioned key=value file:
//
//   # comment
//   [train]
//   episodes_per_task = 500
//
// Keys before the first section header go to the "experiment" section.
using ConfigMap = std::map<std::string, std::string>;

ConfigMap parse_config_text(std::string_view text, const std::string& source = "config");
ConfigMap load_config_file(const std::filesystem::path& path);

struct ExperimentConfig {
  std::filesystem::path corpus;
  std::filesystem::path out_dir = "run";
  std::optional<std::filesystem::path> factor_model;
  Granularity granularity = Granularity::changeset_file;
  LearnerKind learner = LearnerKind::clear;
  bool regression = false;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};

  EnvConfig env;
  NetConfig net;  // input_dim and n_actions are filled from the env at run time
  TrainConfig train;
  SelectionConfig selection;
  EmbedderConfig embedder;
  SynthConfig synth;

  ExperimentConfig();
};

// Applies every entry; unknown keys and malformed values raise ValidationError
// naming the key.
void apply_config(ExperimentConfig& cfg, const ConfigMap& values);
std::vector<std::string> known_config_keys();

// Full resolved configuration (without seeds) for provenance records.
nlohmann::json config_to_json(const ExperimentConfig& cfg);

// Net shape matching the environment: k·(2d+1)+1 inputs, k actions.
NetConfig resolved_net_config(const ExperimentConfig& cfg, std::uint64_t seed);

}  // namespace clb
