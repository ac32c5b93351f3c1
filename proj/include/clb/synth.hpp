#pragma once

#include <cstdint>

#include "clb/corpus.hpp"

namespace clb {

struct SynthConfig {
  int n_bugs = 50;
  int n_files = 40;
  int vocab_size = 600;
  double signal = 0.9;  // share of a bug's planted tokens present in its ground-truth files
  double drift = 0.3;   // share of words rewritten in non-stationary versions
  int planted_tokens = 8;
  int lines_per_file = 12;
  int ns_distractors = 30;     // other files edited inside each report→fix window
  int ns_echoes = 2;           // window edits to other files that quote the report
  double hot_fraction = 0.25;  // files that attract most bugs
};

// Deterministic desk-scale corpus: Java-like files with planted bug-report
// vocabulary, one fix commit per bug, drifted intermediate versions, diffs and
// hunks. Pure function of (cfg, seed). Throws ValidationError when signal or
// drift lie outside [0, 1].
Corpus generate_synthetic_corpus(const SynthConfig& cfg, std::uint64_t seed);

}  // namespace clb
