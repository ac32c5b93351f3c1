#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "clb/factors.hpp"

namespace clb {

// Coefficient vectors (weights, standard_errors, p_values) hold the intercept
// at index 0 followed by one entry per feature.
struct LogisticModel {
  std::vector<std::string> feature_names;
  std::vector<double> weights;
  std::vector<double> standard_errors;
  std::vector<double> p_values;
  std::vector<double> means;  // standardisation, one per feature
  std::vector<double> scales;
  bool converged = false;
  // Set when IRLS hit separation or a singular information matrix and the
  // ridge-penalised refit was used; p-values are then likelihood-ratio based.
  bool ridge_fallback = false;
  int iterations = 0;
  double log_likelihood = 0.0;

  std::size_t n_features() const { return feature_names.size(); }
  double feature_p_value(std::size_t j) const { return p_values[j + 1]; }
};

struct FitOptions {
  bool standardize = true;
  int max_iterations = 100;
  double tolerance = 1e-8;
  double ridge = 1e-4;
};

// Maximum-likelihood logistic regression by IRLS with Wald p-values. Requires
// n > p + 1 and no constant column (ValidationError names the column).
LogisticModel fit_logistic(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                           const std::vector<std::string>& feature_names,
                           const FitOptions& options = {});

// Log-likelihood of the model on raw (unstandardised) data.
double log_likelihood(const LogisticModel& model, const Eigen::MatrixXd& X,
                      const Eigen::VectorXd& y);

// Gradient of the log-likelihood w.r.t. (intercept, weights) in the model's
// standardised coordinates.
Eigen::VectorXd log_likelihood_gradient(const LogisticModel& model, const Eigen::MatrixXd& X,
                                        const Eigen::VectorXd& y);

// VIF_j = 1 / (1 - R²_j) of column j regressed on the others plus an
// intercept; +infinity when column j is an exact linear combination.
std::vector<double> compute_vif(const Eigen::MatrixXd& X);

struct SelectionConfig {
  double p_threshold = 0.05;
  double vif_max = 2.5;
  bool standardize = true;
};

// Backward elimination on p-values, then on VIF, repeated until neither
// removes anything. Throws ValidationError("no significant features") when
// every feature is eliminated.
LogisticModel select_features(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                              const std::vector<std::string>& feature_names,
                              const SelectionConfig& cfg = {});

double predict_bug_probability(const LogisticModel& model, const FactorVector& f);

nlohmann::json model_to_json(const LogisticModel& model);
LogisticModel model_from_json(const nlohmann::json& j);

}  // namespace clb
