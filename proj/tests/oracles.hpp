#pragma once

// Independent reference implementations shared by the unit tests and the
// acceptance binary.

#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "clb/eval.hpp"
#include "clb/ewc.hpp"
#include "clb/nets.hpp"
#include "clb/rng.hpp"

namespace oracle {

inline double gaussian(clb::Rng& rng) {
  double u1 = rng.uniform();
  while (u1 <= 0.0) u1 = rng.uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * rng.uniform());
}

// Σ_{t=s}^{n-1} γ^{t-s} r_t + γ^{n-s}·bootstrap, summed forwards.
inline std::vector<double> n_step_returns(const std::vector<double>& rewards, double bootstrap,
                                          double gamma) {
  const std::size_t n = rewards.size();
  std::vector<double> out(n);
  for (std::size_t s = 0; s < n; ++s) {
    double total = 0.0, discount = 1.0;
    for (std::size_t t = s; t < n; ++t) {
      total += discount * rewards[t];
      discount *= gamma;
    }
    out[s] = total + discount * bootstrap;
  }
  return out;
}

// Off-policy V-Trace target from the explicit sum-of-products form
//   v_s = V_s + Σ_{t≥s} γ^{t−s} (Π_{i=s}^{t−1} c_i) ρ_t (r_t + γ V_{t+1} − V_t).
inline std::vector<double> vtrace_product_form(const std::vector<double>& rewards,
                                               const std::vector<double>& log_ratios,
                                               const std::vector<double>& values, double gamma,
                                               double rho_bar, double c_bar) {
  const std::size_t n = rewards.size();
  std::vector<double> out(n);
  for (std::size_t s = 0; s < n; ++s) {
    double v = values[s], discount = 1.0, trace = 1.0;
    for (std::size_t t = s; t < n; ++t) {
      const double ratio = std::exp(log_ratios[t]);
      const double rho = std::min(rho_bar, ratio);
      v += discount * trace * rho * (rewards[t] + gamma * values[t + 1] - values[t]);
      discount *= gamma;
      trace *= std::min(c_bar, ratio);
    }
    out[s] = v;
  }
  return out;
}

// ---- ranking metrics, straight from the definitions ----

inline double bf_reciprocal_rank(const clb::RankedResult& r) {
  for (std::size_t i = 0; i < r.ranked_unit_ids.size(); ++i) {
    if (r.relevant_ids.count(r.ranked_unit_ids[i])) return 1.0 / static_cast<double>(i + 1);
  }
  return 0.0;
}

inline double bf_average_precision(const clb::RankedResult& r) {
  if (r.relevant_ids.empty()) return 0.0;
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < r.ranked_unit_ids.size(); ++i) {
    if (!r.relevant_ids.count(r.ranked_unit_ids[i])) continue;
    ++hits;
    sum += static_cast<double>(hits) / static_cast<double>(i + 1);
  }
  return sum / static_cast<double>(r.relevant_ids.size());
}

inline bool bf_hit_at(const clb::RankedResult& r, std::size_t k) {
  for (std::size_t i = 0; i < r.ranked_unit_ids.size() && i < k; ++i) {
    if (r.relevant_ids.count(r.ranked_unit_ids[i])) return true;
  }
  return false;
}

inline double bf_mean(const std::vector<clb::RankedResult>& rs,
                      double (*per_bug)(const clb::RankedResult&)) {
  double sum = 0.0;
  for (const auto& r : rs) sum += per_bug(r);
  return sum / static_cast<double>(rs.size());
}

inline double bf_top(const std::vector<clb::RankedResult>& rs, std::size_t k) {
  std::size_t hits = 0;
  for (const auto& r : rs) hits += bf_hit_at(r, k);
  return static_cast<double>(hits) / static_cast<double>(rs.size());
}

// Small random case: up to 12 ranked ids drawn from a universe of 15, at
// least one relevant id (which need not be ranked).
inline clb::RankedResult random_result(clb::Rng& rng, const std::string& id) {
  std::vector<std::string> universe;
  for (int i = 0; i < 15; ++i) universe.push_back("u" + std::to_string(i));
  rng.shuffle(universe);
  clb::RankedResult r;
  r.bug_id = id;
  const auto m = rng.below(13);
  r.ranked_unit_ids.assign(universe.begin(), universe.begin() + static_cast<std::ptrdiff_t>(m));
  rng.shuffle(universe);
  const auto n_rel = 1 + rng.below(5);
  for (std::uint64_t i = 0; i < n_rel; ++i) r.relevant_ids.insert(universe[i]);
  return r;
}

// ---- finite-difference gradient check ----

inline clb::LossSample random_sample(clb::Rng& rng, const std::vector<bool>& mask) {
  clb::LossSample s;
  std::vector<int> open;
  for (std::size_t j = 0; j < mask.size(); ++j) {
    if (mask[j]) open.push_back(static_cast<int>(j));
  }
  s.action = open[rng.below(open.size())];
  s.value_target = gaussian(rng);
  s.value_weight = rng.uniform(0.1, 1.0);
  s.pg_coef = gaussian(rng);
  s.entropy_coef = rng.uniform(0.0, 0.1);
  if (rng.bernoulli(0.5)) {
    std::vector<double> logits(mask.size());
    double mx = -1e300;
    for (std::size_t j = 0; j < mask.size(); ++j) {
      logits[j] = mask[j] ? gaussian(rng) : -1e9;
      mx = std::max(mx, logits[j]);
    }
    double z = 0.0;
    for (double l : logits) z += std::exp(l - mx);
    for (auto& l : logits) l = l - mx - std::log(z);
    s.behavior_log_probs = logits;
    s.kl_coef = rng.uniform(0.0, 0.5);
    s.behavior_value = gaussian(rng);
    s.value_clone_coef = rng.uniform(0.0, 0.5);
  }
  return s;
}

struct GradCheck {
  double max_rel_error = 0.0;
  std::size_t coordinates = 0;
};

// Compares backward() with central differences of composite_loss on
// `n_coords` random coordinates. The relative error uses max(|a|, |b|, 1e-6)
// in the denominator so that coordinates with vanishing gradient are judged
// on an absolute scale.
inline GradCheck finite_difference_check(const clb::NetConfig& cfg, std::uint64_t seed,
                                         std::size_t batch = 4, std::size_t n_coords = 50,
                                         double h = 1e-5) {
  clb::Rng rng(seed);
  auto params = clb::init_params(cfg);
  // Non-zero biases so that every parameter family is exercised.
  for (Eigen::Index i = 0; i < params.flat().size(); ++i) {
    if (params.flat()[i] == 0.0) params.flat()[i] = 0.1 * gaussian(rng);
  }
  Eigen::MatrixXd X(static_cast<Eigen::Index>(cfg.input_dim), static_cast<Eigen::Index>(batch));
  for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = gaussian(rng);
  std::vector<std::vector<bool>> masks;
  std::vector<clb::LossSample> samples;
  for (std::size_t b = 0; b < batch; ++b) {
    std::vector<bool> mask(cfg.n_actions);
    for (std::size_t j = 0; j < mask.size(); ++j) mask[j] = rng.bernoulli(0.75);
    mask[rng.below(mask.size())] = true;
    samples.push_back(random_sample(rng, mask));
    masks.push_back(std::move(mask));
  }
  const auto grads = clb::backward(params, X, masks, samples);
  GradCheck out;
  for (std::size_t c = 0; c < n_coords; ++c) {
    const auto i = static_cast<Eigen::Index>(rng.below(params.size()));
    auto plus = params, minus = params;
    plus.flat()[i] += h;
    minus.flat()[i] -= h;
    const double numeric = (clb::composite_loss(plus, X, masks, samples) -
                            clb::composite_loss(minus, X, masks, samples)) /
                           (2.0 * h);
    const double analytic = grads.flat[i];
    const double denom = std::max({std::abs(numeric), std::abs(analytic), 1e-6});
    out.max_rel_error = std::max(out.max_rel_error, std::abs(numeric - analytic) / denom);
    ++out.coordinates;
  }
  return out;
}

// ---- Bernoulli policy Fisher ----

struct BernoulliFisher {
  double empirical = 0.0;
  double analytic = 0.0;
};

// Two-action policy with no hidden layer and a single constant input x = 1;
// the Fisher of the weight feeding logit 0 is p(1 − p) with p = π(0).
inline BernoulliFisher bernoulli_fisher(std::size_t n_samples, std::uint64_t seed) {
  clb::NetConfig cfg;
  cfg.input_dim = 1;
  cfg.hidden = {};
  cfg.n_actions = 2;
  clb::ActorCriticParams params(cfg);
  auto w = params.layout().weight(params.flat(), params.layout().policy_layer());
  w(0, 0) = 0.7;
  w(1, 0) = -0.3;
  const double p = 1.0 / (1.0 + std::exp(-(0.7 - -0.3)));

  clb::Rng rng(seed);
  Eigen::MatrixXd X = Eigen::MatrixXd::Ones(1, static_cast<Eigen::Index>(n_samples));
  std::vector<std::vector<bool>> masks(n_samples, std::vector<bool>{true, true});
  std::vector<int> actions(n_samples);
  for (auto& a : actions) a = rng.bernoulli(p) ? 0 : 1;
  const auto fisher = clb::ewc_fisher(params, X, masks, actions);
  const auto offset = static_cast<Eigen::Index>(&w(0, 0) - params.flat().data());
  return {fisher[offset], p * (1.0 - p)};
}

// ---- logistic pipeline data ----

// Columns LOC, MLOC, VG, PRE, Churn. LOC and VG are noise, MLOC is nearly a
// copy of LOC; the label depends on PRE and Churn only.
inline void churn_pre_dataset(std::uint64_t seed, std::size_t n, Eigen::MatrixXd& X,
                              Eigen::VectorXd& y) {
  clb::Rng rng(seed);
  X.resize(static_cast<Eigen::Index>(n), 5);
  y.resize(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const double loc = 200.0 + 50.0 * gaussian(rng);
    const double mloc = 0.8 * loc + 4.0 * gaussian(rng);
    const double vg = 10.0 + 3.0 * gaussian(rng);
    const double zpre = gaussian(rng), zchurn = gaussian(rng);
    X.row(i) << loc, mloc, vg, 2.0 + zpre, 30.0 + 10.0 * zchurn;
    const double score = -0.5 + 1.0 * zpre + 1.0 * zchurn;
    y[i] = rng.bernoulli(1.0 / (1.0 + std::exp(-score))) ? 1.0 : 0.0;
  }
}

inline const std::vector<std::string>& factor_names() {
  static const std::vector<std::string> names{"LOC", "MLOC", "VG", "PRE", "Churn"};
  return names;
}

}  // namespace oracle
