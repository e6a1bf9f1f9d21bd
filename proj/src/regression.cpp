#include "abc/regression.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "abc/errors.hpp"

namespace abc {

namespace {

std::string column_name(Eigen::Index c) {
  return c == 0 ? std::string("intercept") : "stat_" + std::to_string(c);
}

}  // namespace

LocalLinearFit fit_local_linear(const Eigen::MatrixXd& stats_centered,
                                const Eigen::MatrixXd& responses,
                                std::span<const double> weights) {
  const Eigen::Index m = stats_centered.rows();
  const Eigen::Index d = stats_centered.cols();
  if (responses.rows() != m || static_cast<Eigen::Index>(weights.size()) != m)
    throw Error(ErrorCode::shape, "fit_local_linear: row counts differ");

  std::vector<Eigen::Index> rows;
  for (Eigen::Index i = 0; i < m; ++i) {
    if (weights[i] < 0.0) throw Error(ErrorCode::degenerate_weights, "negative kernel weight");
    if (weights[i] > 0.0) rows.push_back(i);
  }
  const auto n = static_cast<Eigen::Index>(rows.size());
  if (n < d + 1)
    throw Error(ErrorCode::singular_design, "fewer positively weighted rows (" + std::to_string(n) +
                                                ") than coefficients (" + std::to_string(d + 1) + ")");

  Eigen::MatrixXd design(n, d + 1);
  Eigen::MatrixXd rhs(n, responses.cols());
  for (Eigen::Index r = 0; r < n; ++r) {
    const double sw = std::sqrt(weights[rows[r]]);
    design(r, 0) = sw;
    design.row(r).tail(d) = sw * stats_centered.row(rows[r]);
    rhs.row(r) = sw * responses.row(rows[r]);
  }

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  if (qr.rank() < d + 1) {
    // Locate the first column that adds no rank to the ones before it.
    for (Eigen::Index c = 0; c <= d; ++c) {
      Eigen::ColPivHouseholderQR<Eigen::MatrixXd> prefix(design.leftCols(c + 1));
      prefix.setThreshold(qr.threshold());
      if (prefix.rank() < c + 1)
        throw Error(ErrorCode::singular_design, "design column '" + column_name(c) +
                                                    "' is linearly dependent on earlier columns");
    }
    throw Error(ErrorCode::singular_design, "weighted design is rank deficient");
  }
  const Eigen::MatrixXd coef = qr.solve(rhs);
  return {coef.row(0).transpose(), coef.bottomRows(d)};
}

LocalLinearFit fit_local_linear(const Eigen::MatrixXd& stats_centered,
                                const Eigen::VectorXd& responses,
                                std::span<const double> weights) {
  return fit_local_linear(stats_centered, Eigen::MatrixXd(responses), weights);
}

}  // namespace abc
