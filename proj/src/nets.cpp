#include "clb/nets.hpp"

#include <cmath>
#include <limits>

#include "clb/error.hpp"
#include "clb/rng.hpp"

namespace clb {

namespace {

constexpr double kMaskedLogit = -1e9;

void activate(Eigen::MatrixXd& m, Activation a) {
  if (a == Activation::tanh)
    m = m.array().tanh().matrix();
  else
    m = m.cwiseMax(0.0);
}

// Derivative of the activation expressed through its output h.
Eigen::MatrixXd activation_grad(const Eigen::MatrixXd& h, Activation a) {
  if (a == Activation::tanh) return (1.0 - h.array().square()).matrix();
  return (h.array() > 0.0).cast<double>().matrix();
}

void check_available(const std::vector<std::vector<bool>>& available, Eigen::Index n,
                     std::size_t k) {
  if (available.size() != static_cast<std::size_t>(n))
    throw ValidationError("mask count does not match batch size");
  for (const auto& m : available) {
    if (m.size() != k) throw ValidationError("mask length does not match action count");
    bool any = false;
    for (bool b : m) any = any || b;
    if (!any) throw ValidationError("observation has no available action");
  }
}

}  // namespace

void NetConfig::validate() const {
  if (input_dim == 0) throw ValidationError("net input_dim must be positive");
  if (n_actions == 0) throw ValidationError("net n_actions must be positive");
  for (auto h : hidden)
    if (h == 0) throw ValidationError("hidden layer width must be positive");
  if (!(init_scale >= 0.0)) throw ValidationError("init_scale must be non-negative");
}

ParamLayout::ParamLayout(const NetConfig& cfg) {
  std::size_t off = 0;
  auto add = [&](std::size_t out, std::size_t in) {
    Block b{static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(in), off, off + out * in};
    off += out * in + out;
    blocks_.push_back(b);
  };
  std::size_t in = cfg.input_dim;
  for (auto h : cfg.hidden) {
    add(h, in);
    in = h;
  }
  add(cfg.n_actions, in);
  add(1, in);
  size_ = off;
}

Eigen::Map<Eigen::MatrixXd> ParamLayout::weight(Eigen::VectorXd& flat, std::size_t l) const {
  const auto& b = blocks_.at(l);
  return {flat.data() + b.w_off, b.rows, b.cols};
}
Eigen::Map<const Eigen::MatrixXd> ParamLayout::weight(const Eigen::VectorXd& flat,
                                                      std::size_t l) const {
  const auto& b = blocks_.at(l);
  return {flat.data() + b.w_off, b.rows, b.cols};
}
Eigen::Map<Eigen::VectorXd> ParamLayout::bias(Eigen::VectorXd& flat, std::size_t l) const {
  const auto& b = blocks_.at(l);
  return {flat.data() + b.b_off, b.rows};
}
Eigen::Map<const Eigen::VectorXd> ParamLayout::bias(const Eigen::VectorXd& flat,
                                                    std::size_t l) const {
  const auto& b = blocks_.at(l);
  return {flat.data() + b.b_off, b.rows};
}

ActorCriticParams::ActorCriticParams(NetConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  layout_ = ParamLayout(cfg_);
  flat_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(layout_.size()));
}

ActorCriticParams init_params(const NetConfig& cfg) {
  ActorCriticParams p(cfg);
  Rng rng(cfg.init_seed);
  const auto& lay = p.layout();
  for (std::size_t l = 0; l < lay.n_layers(); ++l) {
    auto w = lay.weight(p.flat(), l);
    double bound = cfg.init_scale / std::sqrt(static_cast<double>(w.cols()));
    for (Eigen::Index c = 0; c < w.cols(); ++c)
      for (Eigen::Index r = 0; r < w.rows(); ++r) w(r, c) = rng.uniform(-1.0, 1.0) * bound;
  }
  return p;
}

BatchForward forward_batch(const ActorCriticParams& params, const Eigen::MatrixXd& X,
                           const std::vector<std::vector<bool>>& available) {
  const auto& cfg = params.config();
  const auto& lay = params.layout();
  if (static_cast<std::size_t>(X.rows()) != cfg.input_dim)
    throw ValidationError("feature length " + std::to_string(X.rows()) + " != input_dim " +
                          std::to_string(cfg.input_dim));
  if (!X.allFinite()) throw ValidationError("non-finite network input");
  check_available(available, X.cols(), cfg.n_actions);

  BatchForward out;
  out.activations.reserve(lay.trunk_layers() + 1);
  out.activations.push_back(X);
  for (std::size_t l = 0; l < lay.trunk_layers(); ++l) {
    Eigen::MatrixXd z = lay.weight(params.flat(), l) * out.activations.back();
    z.colwise() += lay.bias(params.flat(), l);
    activate(z, cfg.activation);
    out.activations.push_back(std::move(z));
  }
  const auto& h = out.activations.back();
  out.logits = lay.weight(params.flat(), lay.policy_layer()) * h;
  out.logits.colwise() += lay.bias(params.flat(), lay.policy_layer());
  out.values = (lay.weight(params.flat(), lay.value_layer()) * h).row(0);
  out.values.array() += lay.bias(params.flat(), lay.value_layer())(0);

  const Eigen::Index k = out.logits.rows();
  out.log_probs.resize(k, X.cols());
  for (Eigen::Index c = 0; c < X.cols(); ++c) {
    const auto& mask = available[static_cast<std::size_t>(c)];
    double mx = -std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < k; ++j) {
      if (!mask[static_cast<std::size_t>(j)]) out.logits(j, c) = kMaskedLogit;
      mx = std::max(mx, out.logits(j, c));
    }
    double s = 0.0;
    for (Eigen::Index j = 0; j < k; ++j) s += std::exp(out.logits(j, c) - mx);
    double lse = mx + std::log(s);
    for (Eigen::Index j = 0; j < k; ++j) out.log_probs(j, c) = out.logits(j, c) - lse;
  }
  return out;
}

PolicyOutput forward(const ActorCriticParams& params, std::span<const double> features,
                     const std::vector<bool>& available) {
  Eigen::MatrixXd X(static_cast<Eigen::Index>(features.size()), 1);
  for (std::size_t i = 0; i < features.size(); ++i) X(static_cast<Eigen::Index>(i), 0) = features[i];
  auto f = forward_batch(params, X, {available});
  return {f.logits.col(0), f.log_probs.col(0), f.values(0)};
}

namespace {

void check_samples(const std::vector<LossSample>& samples, Eigen::Index n, std::size_t k) {
  if (samples.size() != static_cast<std::size_t>(n))
    throw ValidationError("sample count does not match batch size");
  for (const auto& s : samples) {
    if (s.action < 0 || static_cast<std::size_t>(s.action) >= k)
      throw ValidationError("action out of range");
    if (!s.behavior_log_probs.empty() && s.behavior_log_probs.size() != k)
      throw ValidationError("behavior_log_probs length does not match action count");
    if (!std::isfinite(s.value_target) || !std::isfinite(s.pg_coef) ||
        !std::isfinite(s.behavior_value))
      throw ValidationError("non-finite loss sample");
  }
}

}  // namespace

double composite_loss(const ActorCriticParams& params, const Eigen::MatrixXd& X,
                      const std::vector<std::vector<bool>>& available,
                      const std::vector<LossSample>& samples) {
  return composite_loss(forward_batch(params, X, available), available, samples);
}

double composite_loss(const BatchForward& fwd, const std::vector<std::vector<bool>>& available,
                      const std::vector<LossSample>& samples) {
  const Eigen::Index k = fwd.log_probs.rows();
  const Eigen::Index n = fwd.log_probs.cols();
  check_samples(samples, n, static_cast<std::size_t>(k));
  double total = 0.0;
  for (Eigen::Index c = 0; c < n; ++c) {
    const auto& s = samples[static_cast<std::size_t>(c)];
    const auto& mask = available[static_cast<std::size_t>(c)];
    double v = fwd.values(c);
    double loss = s.value_weight * (s.value_target - v) * (s.value_target - v);
    loss -= s.pg_coef * fwd.log_probs(s.action, c);
    double h = 0.0;
    for (Eigen::Index j = 0; j < k; ++j) {
      if (!mask[static_cast<std::size_t>(j)]) continue;
      double lp = fwd.log_probs(j, c);
      h -= std::exp(lp) * lp;
    }
    loss -= s.entropy_coef * h;
    if (!s.behavior_log_probs.empty() && s.kl_coef != 0.0) {
      double kl = 0.0;
      for (Eigen::Index j = 0; j < k; ++j) {
        double blp = s.behavior_log_probs[static_cast<std::size_t>(j)];
        double mu = std::exp(blp);
        if (mu > 0.0) kl += mu * (blp - fwd.log_probs(j, c));
      }
      loss += s.kl_coef * kl;
    }
    loss += s.value_clone_coef * (v - s.behavior_value) * (v - s.behavior_value);
    total += loss;
  }
  return total / static_cast<double>(n);
}

Gradients backward(const ActorCriticParams& params, const Eigen::MatrixXd& X,
                   const std::vector<std::vector<bool>>& available,
                   const std::vector<LossSample>& samples) {
  return backward(params, forward_batch(params, X, available), available, samples);
}

Gradients backward(const ActorCriticParams& params, const BatchForward& fwd,
                   const std::vector<std::vector<bool>>& available,
                   const std::vector<LossSample>& samples) {
  const auto& cfg = params.config();
  const auto& lay = params.layout();
  const Eigen::Index n = fwd.log_probs.cols();
  const Eigen::Index k = fwd.log_probs.rows();
  check_samples(samples, n, static_cast<std::size_t>(k));
  const double inv_n = 1.0 / static_cast<double>(n);

  Eigen::MatrixXd dz = Eigen::MatrixXd::Zero(k, n);
  Eigen::RowVectorXd dv(n);
  for (Eigen::Index c = 0; c < n; ++c) {
    const auto& s = samples[static_cast<std::size_t>(c)];
    const auto& mask = available[static_cast<std::size_t>(c)];
    Eigen::VectorXd p = fwd.log_probs.col(c).array().exp();
    double h = 0.0;
    for (Eigen::Index j = 0; j < k; ++j)
      if (mask[static_cast<std::size_t>(j)]) h -= p(j) * fwd.log_probs(j, c);
    double mu_sum = 0.0;
    Eigen::VectorXd mu = Eigen::VectorXd::Zero(k);
    bool use_kl = !s.behavior_log_probs.empty() && s.kl_coef != 0.0;
    if (use_kl) {
      for (Eigen::Index j = 0; j < k; ++j) mu(j) = std::exp(s.behavior_log_probs[static_cast<std::size_t>(j)]);
      mu_sum = mu.sum();
    }
    for (Eigen::Index j = 0; j < k; ++j) {
      if (!mask[static_cast<std::size_t>(j)]) continue;
      double g = s.pg_coef * p(j);
      if (j == s.action) g -= s.pg_coef;
      g += s.entropy_coef * p(j) * (fwd.log_probs(j, c) + h);
      if (use_kl) g += s.kl_coef * (p(j) * mu_sum - mu(j));
      dz(j, c) = g * inv_n;
    }
    double v = fwd.values(c);
    dv(c) = (2.0 * s.value_weight * (v - s.value_target) +
             2.0 * s.value_clone_coef * (v - s.behavior_value)) *
            inv_n;
  }

  Gradients g{Eigen::VectorXd::Zero(static_cast<Eigen::Index>(lay.size()))};
  const auto& top = fwd.activations.back();
  lay.weight(g.flat, lay.policy_layer()).noalias() = dz * top.transpose();
  lay.bias(g.flat, lay.policy_layer()) = dz.rowwise().sum();
  lay.weight(g.flat, lay.value_layer()).noalias() = dv * top.transpose();
  lay.bias(g.flat, lay.value_layer())(0) = dv.sum();

  if (lay.trunk_layers() == 0) return g;
  Eigen::MatrixXd dh = lay.weight(params.flat(), lay.policy_layer()).transpose() * dz;
  dh.noalias() += lay.weight(params.flat(), lay.value_layer()).transpose() * dv;
  for (std::size_t l = lay.trunk_layers(); l-- > 0;) {
    const auto& out = fwd.activations[l + 1];
    Eigen::MatrixXd da = dh.cwiseProduct(activation_grad(out, cfg.activation));
    lay.weight(g.flat, l).noalias() = da * fwd.activations[l].transpose();
    lay.bias(g.flat, l) = da.rowwise().sum();
    if (l > 0) dh.noalias() = lay.weight(params.flat(), l).transpose() * da;
  }
  return g;
}

double clip_global_norm(Gradients& grads, double max_norm) {
  double norm = grads.flat.norm();
  if (!std::isfinite(norm)) throw RuntimeError("non-finite gradient norm");
  if (max_norm > 0.0 && norm > max_norm) grads.flat *= max_norm / norm;
  return norm;
}

ActorCriticParams apply_update(const ActorCriticParams& params, Gradients grads, double lr,
                               double max_grad_norm) {
  if (grads.flat.size() != params.flat().size())
    throw ValidationError("gradient size does not match parameters");
  clip_global_norm(grads, max_grad_norm);
  ActorCriticParams out = params;
  out.flat() -= lr * grads.flat;
  return out;
}

Optimizer::Optimizer(OptimizerConfig cfg, std::size_t n_params)
    : cfg_(cfg), mean_square_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_params))) {
  if (!(cfg_.lr >= 0.0)) throw ValidationError("learning rate must be non-negative");
}

void Optimizer::step(ActorCriticParams& params, Gradients grads) {
  if (grads.flat.size() != params.flat().size() || grads.flat.size() != mean_square_.size())
    throw ValidationError("gradient size does not match parameters");
  clip_global_norm(grads, cfg_.max_grad_norm);
  if (cfg_.kind == OptimizerKind::sgd) {
    params.flat() -= cfg_.lr * grads.flat;
    return;
  }
  mean_square_ = cfg_.rms_decay * mean_square_ +
                 (1.0 - cfg_.rms_decay) * grads.flat.array().square().matrix();
  params.flat().array() -=
      cfg_.lr * grads.flat.array() / (mean_square_.array() + cfg_.rms_epsilon).sqrt();
}

nlohmann::json net_config_to_json(const NetConfig& cfg) {
  return {{"input_dim", cfg.input_dim},
          {"hidden", cfg.hidden},
          {"activation", cfg.activation == Activation::tanh ? "tanh" : "relu"},
          {"n_actions", cfg.n_actions},
          {"init_seed", cfg.init_seed},
          {"init_scale", cfg.init_scale}};
}

NetConfig net_config_from_json(const nlohmann::json& j) {
  try {
    NetConfig cfg;
    cfg.input_dim = j.at("input_dim").get<std::size_t>();
    cfg.hidden = j.at("hidden").get<std::vector<std::size_t>>();
    auto act = j.at("activation").get<std::string>();
    if (act == "tanh")
      cfg.activation = Activation::tanh;
    else if (act == "relu")
      cfg.activation = Activation::relu;
    else
      throw ParseError("unknown activation '" + act + "'");
    cfg.n_actions = j.at("n_actions").get<std::size_t>();
    cfg.init_seed = j.at("init_seed").get<std::uint64_t>();
    cfg.init_scale = j.at("init_scale").get<double>();
    cfg.validate();
    return cfg;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("net config: ") + e.what());
  }
}

nlohmann::json checkpoint_to_json(const ActorCriticParams& params) {
  std::vector<double> flat(params.flat().data(), params.flat().data() + params.flat().size());
  return {{"net", net_config_to_json(params.config())}, {"params", flat}};
}

ActorCriticParams checkpoint_from_json(const nlohmann::json& j) {
  try {
    ActorCriticParams p(net_config_from_json(j.at("net")));
    auto flat = j.at("params").get<std::vector<double>>();
    if (flat.size() != p.size())
      throw ParseError("checkpoint has " + std::to_string(flat.size()) + " parameters, expected " +
                       std::to_string(p.size()));
    for (std::size_t i = 0; i < flat.size(); ++i) p.flat()(static_cast<Eigen::Index>(i)) = flat[i];
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("checkpoint: ") + e.what());
  }
}

}  // namespace clb
