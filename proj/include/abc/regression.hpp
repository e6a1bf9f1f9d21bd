#pragma once

#include <span>

#include <Eigen/Dense>

namespace abc {

/// Weighted local-linear fit  phi ~ alpha + (s_i - s_obs)' beta.
struct LocalLinearFit {
  Eigen::VectorXd alpha;  // one intercept per response column
  Eigen::MatrixXd beta;   // D x responses
};

/// Minimises sum_i w_i (y_i - alpha - x_i' beta)^2 over the rows with w_i > 0.
/// Throws abc::Error(singular_design) naming the first dependent column
/// ("intercept" or "stat_<k>", 1-based).
LocalLinearFit fit_local_linear(const Eigen::MatrixXd& stats_centered,
                                const Eigen::MatrixXd& responses,
                                std::span<const double> weights);

LocalLinearFit fit_local_linear(const Eigen::MatrixXd& stats_centered,
                                const Eigen::VectorXd& responses,
                                std::span<const double> weights);

}  // namespace abc
