#include "clb/vtrace.hpp"

#include <algorithm>
#include <cmath>

#include "clb/error.hpp"

namespace clb {

void VTraceConfig::validate() const {
  if (!(gamma > 0.0 && gamma <= 1.0)) throw ValidationError("gamma must be in (0, 1]");
  if (!(c_bar >= 1.0)) throw ValidationError("c_bar must be >= 1");
  if (!(rho_bar >= c_bar)) throw ValidationError("rho_bar must be >= c_bar");
}

VTraceResult vtrace_targets(std::span<const double> rewards,
                            std::span<const double> behavior_log_probs,
                            std::span<const double> target_log_probs,
                            std::span<const double> values, const VTraceConfig& cfg) {
  const std::size_t n = rewards.size();
  if (behavior_log_probs.size() != n || target_log_probs.size() != n || values.size() != n + 1)
    throw ValidationError("vtrace input lengths disagree");

  VTraceResult out;
  out.v.resize(n);
  out.rho.resize(n);
  out.pg_adv.resize(n);
  std::vector<double> c(n);
  for (std::size_t t = 0; t < n; ++t) {
    double log_ratio = target_log_probs[t] - behavior_log_probs[t];
    if (!std::isfinite(log_ratio)) throw ValidationError("non-finite importance log-ratio");
    double ratio = std::exp(log_ratio);
    out.rho[t] = std::min(cfg.rho_bar, ratio);
    c[t] = std::min(cfg.c_bar, ratio);
  }

  double next_v = values[n];
  for (std::size_t s = n; s-- > 0;) {
    double delta = out.rho[s] * (rewards[s] + cfg.gamma * values[s + 1] - values[s]);
    out.v[s] = values[s] + delta + cfg.gamma * c[s] * (next_v - values[s + 1]);
    out.pg_adv[s] = out.rho[s] * (rewards[s] + cfg.gamma * next_v - values[s]);
    next_v = out.v[s];
  }
  return out;
}

}  // namespace clb
