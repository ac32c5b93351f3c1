#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace clb {

enum class Activation { tanh, relu };

struct NetConfig {
  std::size_t input_dim = 0;
  std::vector<std::size_t> hidden{128, 64};
  Activation activation = Activation::tanh;
  std::size_t n_actions = 0;
  std::uint64_t init_seed = 0;
  double init_scale = 1.0;

  void validate() const;
  bool operator==(const NetConfig&) const = default;
};

// Offsets of every weight matrix / bias vector inside one flat buffer.
// Layers are the trunk layers in order, then the policy head, then the value
// head. Matrices are stored column-major, shape (out × in).
class ParamLayout {
 public:
  ParamLayout() = default;
  explicit ParamLayout(const NetConfig& cfg);

  std::size_t size() const { return size_; }
  std::size_t n_layers() const { return blocks_.size(); }
  std::size_t trunk_layers() const { return blocks_.size() - 2; }
  std::size_t policy_layer() const { return blocks_.size() - 2; }
  std::size_t value_layer() const { return blocks_.size() - 1; }

  Eigen::Map<Eigen::MatrixXd> weight(Eigen::VectorXd& flat, std::size_t l) const;
  Eigen::Map<const Eigen::MatrixXd> weight(const Eigen::VectorXd& flat, std::size_t l) const;
  Eigen::Map<Eigen::VectorXd> bias(Eigen::VectorXd& flat, std::size_t l) const;
  Eigen::Map<const Eigen::VectorXd> bias(const Eigen::VectorXd& flat, std::size_t l) const;

 private:
  struct Block {
    Eigen::Index rows, cols;
    std::size_t w_off, b_off;
  };
  std::vector<Block> blocks_;
  std::size_t size_ = 0;
};

// All learnable weights: shared trunk, policy head (value parameters θ and
// policy parameters ω share the trunk).
class ActorCriticParams {
 public:
  ActorCriticParams() = default;
  explicit ActorCriticParams(NetConfig cfg);  // zero filled

  const NetConfig& config() const { return cfg_; }
  const ParamLayout& layout() const { return layout_; }
  Eigen::VectorXd& flat() { return flat_; }
  const Eigen::VectorXd& flat() const { return flat_; }
  std::size_t size() const { return static_cast<std::size_t>(flat_.size()); }

  bool operator==(const ActorCriticParams& o) const {
    return cfg_ == o.cfg_ && flat_.size() == o.flat_.size() && flat_ == o.flat_;
  }

 private:
  NetConfig cfg_;
  ParamLayout layout_;
  Eigen::VectorXd flat_;
};

struct Gradients {
  Eigen::VectorXd flat;
};

ActorCriticParams init_params(const NetConfig& cfg);

struct PolicyOutput {
  Eigen::VectorXd logits;
  Eigen::VectorXd log_probs;
  double value = 0.0;
};

// available[j] == false masks slot j (logit −1e9 before the softmax).
PolicyOutput forward(const ActorCriticParams& params, std::span<const double> features,
                     const std::vector<bool>& available);

struct BatchForward {
  std::vector<Eigen::MatrixXd> activations;  // [0] = inputs, then each trunk layer
  Eigen::MatrixXd logits;                    // k × n, masked entries −1e9
  Eigen::MatrixXd log_probs;                 // k × n
  Eigen::RowVectorXd values;                 // 1 × n
};

// X is input_dim × n, one column per sample.
BatchForward forward_batch(const ActorCriticParams& params, const Eigen::MatrixXd& X,
                           const std::vector<std::vector<bool>>& available);

// Per-sample terms of the composite loss
//   value_weight·(value_target − V)² − pg_coef·log π(a)
//   − entropy_coef·H(π) + kl_coef·KL(μ ‖ π) + value_clone_coef·(V − behavior_value)²
// where μ = exp(behavior_log_probs) (KL term skipped when empty). pg_coef is
// a constant: the caller supplies advantage × importance weight.
struct LossSample {
  int action = 0;
  double value_target = 0.0;
  double value_weight = 0.0;
  double pg_coef = 0.0;
  double entropy_coef = 0.0;
  std::vector<double> behavior_log_probs;
  double kl_coef = 0.0;
  double behavior_value = 0.0;
  double value_clone_coef = 0.0;
};

// Mean of the per-sample losses.
double composite_loss(const ActorCriticParams& params, const Eigen::MatrixXd& X,
                      const std::vector<std::vector<bool>>& available,
                      const std::vector<LossSample>& samples);

double composite_loss(const BatchForward& fwd, const std::vector<std::vector<bool>>& available,
                      const std::vector<LossSample>& samples);

// Exact gradient of composite_loss. Throws ValidationError on non-finite input.
Gradients backward(const ActorCriticParams& params, const Eigen::MatrixXd& X,
                   const std::vector<std::vector<bool>>& available,
                   const std::vector<LossSample>& samples);

// Same, reusing a forward pass computed on the same inputs.
Gradients backward(const ActorCriticParams& params, const BatchForward& fwd,
                   const std::vector<std::vector<bool>>& available,
                   const std::vector<LossSample>& samples);

// Scales grads in place to global norm ≤ max_norm; returns the norm before.
double clip_global_norm(Gradients& grads, double max_norm);

enum class OptimizerKind { sgd, rmsprop };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::sgd;
  double lr = 1e-3;
  double max_grad_norm = 40.0;
  double rms_decay = 0.99;
  double rms_epsilon = 1e-5;
};

// Global-norm clipping followed by one plain SGD step.
ActorCriticParams apply_update(const ActorCriticParams& params, Gradients grads, double lr,
                               double max_grad_norm);

class Optimizer {
 public:
  Optimizer(OptimizerConfig cfg, std::size_t n_params);

  const OptimizerConfig& config() const { return cfg_; }
  void step(ActorCriticParams& params, Gradients grads);

 private:
  OptimizerConfig cfg_;
  Eigen::VectorXd mean_square_;
};

nlohmann::json net_config_to_json(const NetConfig& cfg);
NetConfig net_config_from_json(const nlohmann::json& j);
nlohmann::json checkpoint_to_json(const ActorCriticParams& params);
ActorCriticParams checkpoint_from_json(const nlohmann::json& j);

}  // namespace clb
