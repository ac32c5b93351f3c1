#include "clb/ewc.hpp"

#include "clb/error.hpp"

namespace clb {

Eigen::VectorXd ewc_fisher(const ActorCriticParams& params, const Eigen::MatrixXd& X,
                           const std::vector<std::vector<bool>>& masks,
                           const std::vector<int>& actions) {
  const auto n = static_cast<std::size_t>(X.cols());
  if (n == 0) throw ValidationError("empty probe set for Fisher estimate");
  if (masks.size() != n || actions.size() != n)
    throw ValidationError("probe inputs have inconsistent lengths");
  auto fwd = forward_batch(params, X, masks);
  Eigen::VectorXd fisher = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(params.size()));
  BatchForward one;
  for (std::size_t i = 0; i < n; ++i) {
    auto c = static_cast<Eigen::Index>(i);
    one.activations.clear();
    for (const auto& a : fwd.activations) one.activations.push_back(a.col(c));
    one.logits = fwd.logits.col(c);
    one.log_probs = fwd.log_probs.col(c);
    one.values = fwd.values.col(c);
    LossSample s;
    s.action = actions[i];
    s.pg_coef = -1.0;  // loss = log π(a|x)
    auto g = backward(params, one, {masks[i]}, {s});
    fisher.array() += g.flat.array().square();
  }
  return fisher / static_cast<double>(n);
}

Gradients ewc_penalized_grads(const Gradients& base, const ActorCriticParams& params,
                              const EwcState& ewc) {
  if (base.flat.size() != params.flat().size())
    throw ValidationError("gradient size does not match parameters");
  Gradients out = base;
  for (const auto& a : ewc.anchors) {
    if (a.params.size() != params.flat().size() || a.fisher.size() != params.flat().size())
      throw ValidationError("EWC anchor shape does not match parameters");
    out.flat.array() += ewc.lambda * a.fisher.array() * (params.flat() - a.params).array();
  }
  return out;
}

double ewc_penalty(const ActorCriticParams& params, const EwcState& ewc) {
  double total = 0.0;
  for (const auto& a : ewc.anchors) {
    if (a.params.size() != params.flat().size() || a.fisher.size() != params.flat().size())
      throw ValidationError("EWC anchor shape does not match parameters");
    total += 0.5 * ewc.lambda *
             (a.fisher.array() * (params.flat() - a.params).array().square()).sum();
  }
  return total;
}

namespace {
std::vector<double> to_vec(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }
Eigen::VectorXd from_vec(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}
}  // namespace

nlohmann::json ewc_to_json(const EwcState& ewc) {
  nlohmann::json anchors = nlohmann::json::array();
  for (const auto& a : ewc.anchors)
    anchors.push_back({{"params", to_vec(a.params)}, {"fisher", to_vec(a.fisher)}});
  return {{"lambda", ewc.lambda}, {"anchors", anchors}};
}

EwcState ewc_from_json(const nlohmann::json& j) {
  try {
    EwcState s;
    s.lambda = j.at("lambda").get<double>();
    for (const auto& a : j.at("anchors")) {
      EwcAnchor anchor{from_vec(a.at("params").get<std::vector<double>>()),
                       from_vec(a.at("fisher").get<std::vector<double>>())};
      if (anchor.params.size() != anchor.fisher.size())
        throw ParseError("EWC anchor params and fisher lengths differ");
      s.anchors.push_back(std::move(anchor));
    }
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("ewc state: ") + e.what());
  }
}

}  // namespace clb
