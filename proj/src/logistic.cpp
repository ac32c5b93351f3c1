#include "clb/logistic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "clb/error.hpp"

namespace clb {
namespace {

constexpr double kSeparationScore = 30.0;

double sigmoid(double s) { return 1.0 / (1.0 + std::exp(-s)); }

struct Design {
  Eigen::MatrixXd Z;  // n × (p+1), intercept column first
  std::vector<double> means;
  std::vector<double> scales;
};

Design make_design(const Eigen::MatrixXd& X, const std::vector<std::string>& names,
                   bool standardize) {
  const auto n = X.rows();
  const auto p = X.cols();
  Design d;
  d.Z.resize(n, p + 1);
  d.Z.col(0).setOnes();
  for (Eigen::Index j = 0; j < p; ++j) {
    const double mean = X.col(j).mean();
    const double var = (X.col(j).array() - mean).square().sum() / static_cast<double>(n - 1);
    const double sd = std::sqrt(var);
    if (!(sd > 1e-12 * std::max(1.0, std::abs(mean)))) {
      throw ValidationError("constant column '" + names[static_cast<std::size_t>(j)] + "'");
    }
    const double m = standardize ? mean : 0.0;
    const double s = standardize ? sd : 1.0;
    d.means.push_back(m);
    d.scales.push_back(s);
    d.Z.col(j + 1) = (X.col(j).array() - m) / s;
  }
  return d;
}

double bernoulli_ll(const Eigen::MatrixXd& Z, const Eigen::VectorXd& beta,
                    const Eigen::VectorXd& y) {
  const Eigen::VectorXd eta = Z * beta;
  double ll = 0.0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    // log σ(η) = -log1p(e^{-η}); log(1-σ(η)) = -log1p(e^{η})
    const double e = eta[i];
    const double log_p = e >= 0 ? -std::log1p(std::exp(-e)) : e - std::log1p(std::exp(e));
    const double log_q = e >= 0 ? -e - std::log1p(std::exp(-e)) : -std::log1p(std::exp(e));
    ll += y[i] * log_p + (1.0 - y[i]) * log_q;
  }
  return ll;
}

struct NewtonResult {
  Eigen::VectorXd beta;
  Eigen::MatrixXd information;  // at beta, including any penalty
  bool converged = false;
  bool separated = false;
  bool singular = false;
  int iterations = 0;
};

// Newton-Raphson on the (optionally ridge penalised, intercept excluded)
// log-likelihood.
NewtonResult newton(const Eigen::MatrixXd& Z, const Eigen::VectorXd& y, double ridge,
                    int max_iter, double tol) {
  const auto k = Z.cols();
  NewtonResult r;
  r.beta = Eigen::VectorXd::Zero(k);
  Eigen::MatrixXd penalty = Eigen::MatrixXd::Identity(k, k) * ridge;
  penalty(0, 0) = 0.0;

  for (int it = 0; it < max_iter; ++it) {
    const Eigen::VectorXd eta = Z * r.beta;
    const Eigen::VectorXd prob = eta.unaryExpr(&sigmoid);
    const Eigen::VectorXd w = prob.array() * (1.0 - prob.array());
    Eigen::VectorXd grad = Z.transpose() * (y - prob) - penalty * r.beta;
    Eigen::MatrixXd H = Z.transpose() * w.asDiagonal() * Z + penalty;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(H);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || ldlt.rcond() < 1e-13) {
      r.singular = true;
      r.information = H;
      r.iterations = it;
      return r;
    }
    const Eigen::VectorXd delta = ldlt.solve(grad);
    if (!delta.allFinite()) {
      r.singular = true;
      r.iterations = it;
      return r;
    }
    r.beta += delta;
    r.iterations = it + 1;
    if (ridge == 0.0 && (Z * r.beta).cwiseAbs().maxCoeff() > kSeparationScore) {
      r.separated = true;
      return r;
    }
    if (delta.cwiseAbs().maxCoeff() < tol) {
      r.converged = true;
      break;
    }
  }
  const Eigen::VectorXd eta = Z * r.beta;
  const Eigen::VectorXd prob = eta.unaryExpr(&sigmoid);
  const Eigen::VectorXd w = prob.array() * (1.0 - prob.array());
  r.information = Z.transpose() * w.asDiagonal() * Z + penalty;
  return r;
}

double two_sided_normal_p(double z) { return std::erfc(std::abs(z) / std::sqrt(2.0)); }

Eigen::MatrixXd drop_column(const Eigen::MatrixXd& Z, Eigen::Index j) {
  Eigen::MatrixXd out(Z.rows(), Z.cols() - 1);
  Eigen::Index c = 0;
  for (Eigen::Index k = 0; k < Z.cols(); ++k) {
    if (k != j) out.col(c++) = Z.col(k);
  }
  return out;
}

}  // namespace

LogisticModel fit_logistic(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                           const std::vector<std::string>& feature_names,
                           const FitOptions& options) {
  const auto n = X.rows();
  const auto p = X.cols();
  if (static_cast<std::size_t>(p) != feature_names.size()) {
    throw ValidationError("fit_logistic: feature name count does not match columns");
  }
  if (y.size() != n) throw ValidationError("fit_logistic: label count does not match rows");
  if (p < 1) throw ValidationError("fit_logistic: need at least one feature");
  if (!(n > p + 1)) throw ValidationError("fit_logistic: need n > p + 1 observations");
  for (Eigen::Index i = 0; i < n; ++i) {
    if (y[i] != 0.0 && y[i] != 1.0) throw ValidationError("fit_logistic: labels must be 0/1");
  }

  const Design d = make_design(X, feature_names, options.standardize);
  LogisticModel m;
  m.feature_names = feature_names;
  m.means = d.means;
  m.scales = d.scales;

  NewtonResult r = newton(d.Z, y, 0.0, options.max_iterations, options.tolerance);
  const bool fallback = r.separated || r.singular;
  if (fallback) {
    r = newton(d.Z, y, options.ridge, std::max(options.max_iterations, 200), options.tolerance);
    if (r.singular) throw RuntimeError("fit_logistic: ridge refit failed");
  }

  m.ridge_fallback = fallback;
  m.converged = r.converged && !fallback;
  m.iterations = r.iterations;
  m.weights.assign(r.beta.data(), r.beta.data() + r.beta.size());
  m.log_likelihood = bernoulli_ll(d.Z, r.beta, y);

  const Eigen::MatrixXd cov = r.information.ldlt().solve(
      Eigen::MatrixXd::Identity(r.information.rows(), r.information.cols()));
  for (Eigen::Index j = 0; j <= p; ++j) {
    const double se = std::sqrt(std::max(cov(j, j), 0.0));
    m.standard_errors.push_back(se);
    m.p_values.push_back(se > 0.0 ? two_sided_normal_p(r.beta[j] / se) : 1.0);
  }

  if (fallback) {
    // Wald tests are unreliable at separated optima; use drop-one likelihood ratios.
    for (Eigen::Index j = 1; j <= p; ++j) {
      const Eigen::MatrixXd Zj = drop_column(d.Z, j);
      const NewtonResult rj = newton(Zj, y, options.ridge, std::max(options.max_iterations, 200),
                                     options.tolerance);
      const double ll_j = bernoulli_ll(Zj, rj.beta, y);
      const double stat = std::max(0.0, 2.0 * (m.log_likelihood - ll_j));
      m.p_values[static_cast<std::size_t>(j)] = std::erfc(std::sqrt(stat / 2.0));
    }
  }
  for (auto& pv : m.p_values) pv = std::clamp(pv, 0.0, 1.0);
  return m;
}

namespace {

Eigen::MatrixXd model_design(const LogisticModel& model, const Eigen::MatrixXd& X) {
  if (static_cast<std::size_t>(X.cols()) != model.n_features()) {
    throw ValidationError("design matrix does not match the model's features");
  }
  Eigen::MatrixXd Z(X.rows(), X.cols() + 1);
  Z.col(0).setOnes();
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    const auto js = static_cast<std::size_t>(j);
    Z.col(j + 1) = (X.col(j).array() - model.means[js]) / model.scales[js];
  }
  return Z;
}

}  // namespace

double log_likelihood(const LogisticModel& model, const Eigen::MatrixXd& X,
                      const Eigen::VectorXd& y) {
  const Eigen::VectorXd beta =
      Eigen::Map<const Eigen::VectorXd>(model.weights.data(), static_cast<Eigen::Index>(model.weights.size()));
  return bernoulli_ll(model_design(model, X), beta, y);
}

Eigen::VectorXd log_likelihood_gradient(const LogisticModel& model, const Eigen::MatrixXd& X,
                                        const Eigen::VectorXd& y) {
  const Eigen::MatrixXd Z = model_design(model, X);
  const Eigen::VectorXd beta =
      Eigen::Map<const Eigen::VectorXd>(model.weights.data(), static_cast<Eigen::Index>(model.weights.size()));
  const Eigen::VectorXd prob = (Z * beta).unaryExpr(&sigmoid);
  return Z.transpose() * (y - prob);
}

std::vector<double> compute_vif(const Eigen::MatrixXd& X) {
  const auto n = X.rows();
  const auto p = X.cols();
  if (p < 2 || !(n > p)) throw ValidationError("compute_vif: need n > p >= 2");
  std::vector<double> vif;
  for (Eigen::Index j = 0; j < p; ++j) {
    Eigen::MatrixXd A(n, p);
    A.col(0).setOnes();
    Eigen::Index c = 1;
    for (Eigen::Index k = 0; k < p; ++k) {
      if (k != j) A.col(c++) = X.col(k);
    }
    const Eigen::VectorXd target = X.col(j);
    const Eigen::VectorXd coef = A.colPivHouseholderQr().solve(target);
    const double rss = (target - A * coef).squaredNorm();
    const double tss = (target.array() - target.mean()).square().sum();
    if (!(tss > 0.0)) throw ValidationError("compute_vif: constant column " + std::to_string(j));
    vif.push_back(rss <= 1e-10 * tss ? std::numeric_limits<double>::infinity() : tss / rss);
  }
  return vif;
}

LogisticModel select_features(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                              const std::vector<std::string>& feature_names,
                              const SelectionConfig& cfg) {
  if (!(cfg.p_threshold > 0.0 && cfg.p_threshold < 1.0)) {
    throw ValidationError("p_threshold must lie in (0, 1)");
  }
  if (!(cfg.vif_max > 1.0)) throw ValidationError("vif_max must exceed 1");
  FitOptions opts;
  opts.standardize = cfg.standardize;

  std::vector<Eigen::Index> active(static_cast<std::size_t>(X.cols()));
  for (std::size_t j = 0; j < active.size(); ++j) active[j] = static_cast<Eigen::Index>(j);

  auto subset = [&](const std::vector<Eigen::Index>& cols) {
    Eigen::MatrixXd S(X.rows(), static_cast<Eigen::Index>(cols.size()));
    std::vector<std::string> names;
    for (std::size_t c = 0; c < cols.size(); ++c) {
      S.col(static_cast<Eigen::Index>(c)) = X.col(cols[c]);
      names.push_back(feature_names[static_cast<std::size_t>(cols[c])]);
    }
    return std::make_pair(S, names);
  };

  for (;;) {
    // Significance: drop the single least significant feature until all pass.
    while (!active.empty()) {
      auto [S, names] = subset(active);
      const LogisticModel m = fit_logistic(S, y, names, opts);
      std::size_t worst = 0;
      double worst_p = -1.0;
      for (std::size_t j = 0; j < active.size(); ++j) {
        if (m.feature_p_value(j) > worst_p) {
          worst_p = m.feature_p_value(j);
          worst = j;
        }
      }
      if (worst_p < cfg.p_threshold) break;
      active.erase(active.begin() + static_cast<std::ptrdiff_t>(worst));
    }
    if (active.empty()) throw ValidationError("no significant features");

    // Collinearity: drop the single worst VIF offender, then re-check both.
    if (active.size() < 2) break;
    auto [S, names] = subset(active);
    const auto vif = compute_vif(S);
    const auto it = std::max_element(vif.begin(), vif.end());
    if (!(*it > cfg.vif_max)) break;
    active.erase(active.begin() + (it - vif.begin()));
  }
  auto [S, names] = subset(active);
  return fit_logistic(S, y, names, opts);
}

double predict_bug_probability(const LogisticModel& model, const FactorVector& f) {
  double score = model.weights.at(0);
  for (std::size_t j = 0; j < model.n_features(); ++j) {
    const double z = (f.get(model.feature_names[j]) - model.means[j]) / model.scales[j];
    score += model.weights[j + 1] * z;
  }
  return sigmoid(std::clamp(score, -kSeparationScore, kSeparationScore));
}

nlohmann::json model_to_json(const LogisticModel& m) {
  return {{"feature_names", m.feature_names},
          {"weights", m.weights},
          {"standard_errors", m.standard_errors},
          {"p_values", m.p_values},
          {"means", m.means},
          {"scales", m.scales},
          {"converged", m.converged},
          {"ridge_fallback", m.ridge_fallback},
          {"iterations", m.iterations},
          {"log_likelihood", m.log_likelihood}};
}

LogisticModel model_from_json(const nlohmann::json& j) {
  LogisticModel m;
  try {
    m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    m.weights = j.at("weights").get<std::vector<double>>();
    m.standard_errors = j.at("standard_errors").get<std::vector<double>>();
    m.p_values = j.at("p_values").get<std::vector<double>>();
    m.means = j.at("means").get<std::vector<double>>();
    m.scales = j.at("scales").get<std::vector<double>>();
    m.converged = j.at("converged").get<bool>();
    m.ridge_fallback = j.value("ridge_fallback", false);
    m.iterations = j.value("iterations", 0);
    m.log_likelihood = j.value("log_likelihood", 0.0);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("factor model: ") + e.what());
  }
  const auto p = m.feature_names.size();
  if (m.weights.size() != p + 1 || m.standard_errors.size() != p + 1 ||
      m.p_values.size() != p + 1 || m.means.size() != p || m.scales.size() != p) {
    throw ValidationError("factor model: coefficient lengths disagree");
  }
  for (const auto& name : m.feature_names) FactorVector{}.get(name);
  return m;
}

}  // namespace clb
