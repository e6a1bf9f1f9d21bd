#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "abc/ffnn.hpp"
#include "abc/rng.hpp"
#include "abc/simulators.hpp"
#include "abc/stats.hpp"

namespace abc {

/// M simulated (parameter, statistics) pairs.
struct ReferenceTable {
  Eigen::MatrixXd params;  // M x P
  Eigen::MatrixXd stats;   // M x D, column-major so each statistic is contiguous

  Eigen::Index rows() const { return params.rows(); }
};

/// Draws a parameter vector for one table row; the default is the prior.
using ParamSampler = std::function<std::vector<double>(Rng&)>;

/// Row i uses Rng(seed, i) for both its parameter draw and its simulation,
/// so the table does not depend on `workers`.
ReferenceTable build_reference_table(const GenerativeModel& model, std::size_t rows, std::uint64_t seed,
                                     int workers = 1, const ParamSampler& sampler = {});

struct DistanceSet {
  std::vector<double> scaled_distances;
  std::vector<double> mad;
  std::vector<std::string> warnings;
};

/// Euclidean distance after dividing each statistic by its column MAD
/// (constant columns use scale 1).
DistanceSet distances(const ReferenceTable& table, std::span<const double> s_obs);

struct Tolerance {
  double p_delta = 1.0;
  double delta = 0.0;
  std::vector<std::size_t> accepted;  // ascending row indices with distance <= delta
};

Tolerance select_tolerance(const DistanceSet& dists, double p_delta);

enum class Method { rejection, nw, locl, nch };

std::string to_string(Method m);
Method method_from_string(const std::string& s);

struct WeightedPosterior {
  Eigen::MatrixXd draws;        // accepted x P, rows paired with `rows`
  std::vector<double> weights;  // kernel weights (all 1 for plain rejection)
  std::vector<std::size_t> rows;
  Method method = Method::rejection;  // estimator that produced the draws
  std::vector<std::string> warnings;

  std::size_t size() const { return weights.size(); }
};

/// Epanechnikov weights of the accepted rows; uniform weights (with a warning)
/// when every accepted row sits exactly on the bandwidth.
std::vector<double> kernel_weights(const DistanceSet& dists, const Tolerance& tol,
                                   std::vector<std::string>* warnings = nullptr);

WeightedPosterior rejection_posterior(const ReferenceTable& table, const DistanceSet& dists,
                                      const Tolerance& tol, bool weighted);

/// Local-linear regression adjustment, marginally per parameter.
/// Falls back to the weighted rejection posterior on a singular design.
WeightedPosterior locl_posterior(const ReferenceTable& table, const DistanceSet& dists,
                                 const Tolerance& tol, std::span<const double> s_obs,
                                 std::span<const ResponseTransform> transforms);

/// phi* = m(s) + (phi - m(s_i)) sigma(s) / sigma(s_i), with m and log sigma^2
/// fitted by neural networks on the accepted rows.
WeightedPosterior nch_adjust(const ReferenceTable& table, const Tolerance& tol,
                             std::span<const double> weights, std::span<const double> s_obs,
                             std::span<const ResponseTransform> transforms,
                             std::span<const MeanVarNets> nets);

/// Fits the nets and applies nch_adjust; falls back to LocL if training diverges.
WeightedPosterior nch_posterior(const ReferenceTable& table, const DistanceSet& dists,
                                const Tolerance& tol, std::span<const double> s_obs,
                                std::span<const ResponseTransform> transforms,
                                const TrainConfig& config, Rng& rng,
                                std::vector<MeanVarNets>* fitted = nullptr);

/// One QuantileSet per parameter dimension.
std::vector<QuantileSet> posterior_quantiles(const WeightedPosterior& post, std::span<const double> probs);

/// Convenience: distances, tolerance and the requested estimator in one call.
WeightedPosterior run_estimator(Method method, const ReferenceTable& table, std::span<const double> s_obs,
                                double p_delta, std::span<const ResponseTransform> transforms,
                                const TrainConfig& config, Rng& rng);

}  // namespace abc
