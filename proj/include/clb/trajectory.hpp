#pragma once

#include <optional>
#include <vector>

#include "clb/env.hpp"

namespace clb {

// One acting step. The observation is kept in its compact form; features are
// rebuilt from it when the transition is learned from.
struct Transition {
  Observation observation;
  int action = 0;
  double reward = 0.0;
  std::vector<double> behavior_log_probs;  // μ at acting time, one per slot
  double behavior_value = 0.0;
  std::vector<bool> mask;
  bool done = false;
};

struct Trajectory {
  std::vector<Transition> steps;
  std::optional<Observation> bootstrap;  // state after the last step, unset if terminal
  double bootstrap_value = 0.0;          // value at acting time, 0 if terminal

  void validate() const;
};

}  // namespace clb
