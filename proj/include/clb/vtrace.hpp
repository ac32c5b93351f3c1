#pragma once

#include <span>
#include <vector>

namespace clb {

struct VTraceConfig {
  double gamma = 0.99;
  double rho_bar = 1.0;
  double c_bar = 1.0;

  void validate() const;
};

struct VTraceResult {
  std::vector<double> v;       // value targets v_s
  std::vector<double> rho;     // truncated ρ_s
  std::vector<double> pg_adv;  // ρ_s (r_s + γ v_{s+1} − V(x_s))
};

// values has one more entry than rewards: V(x_0..x_{n-1}) then the bootstrap
// value (0 for a terminal segment). Log-probs are those of the taken actions.
VTraceResult vtrace_targets(std::span<const double> rewards,
                            std::span<const double> behavior_log_probs,
                            std::span<const double> target_log_probs,
                            std::span<const double> values, const VTraceConfig& cfg);

}  // namespace clb
