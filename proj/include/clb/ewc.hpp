#pragma once

#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "clb/nets.hpp"

namespace clb {

struct EwcAnchor {
  Eigen::VectorXd params;  // θ* at the end of a phase
  Eigen::VectorXd fisher;  // diagonal F
};

struct EwcState {
  std::vector<EwcAnchor> anchors;
  double lambda = 100.0;
};

// Empirical diagonal Fisher: mean over samples of (∂ log π(a|x) / ∂θ)².
// X holds one column per sample.
Eigen::VectorXd ewc_fisher(const ActorCriticParams& params, const Eigen::MatrixXd& X,
                           const std::vector<std::vector<bool>>& masks,
                           const std::vector<int>& actions);

// base + Σ λ·F·(θ − θ*).
Gradients ewc_penalized_grads(const Gradients& base, const ActorCriticParams& params,
                              const EwcState& ewc);

// Σ (λ/2)·F·(θ − θ*)².
double ewc_penalty(const ActorCriticParams& params, const EwcState& ewc);

nlohmann::json ewc_to_json(const EwcState& ewc);
EwcState ewc_from_json(const nlohmann::json& j);

}  // namespace clb
