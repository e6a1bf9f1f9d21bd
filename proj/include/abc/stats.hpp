#pragma once

#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace abc {

/// Unnormalised Epanechnikov weight 1 - (t/delta)^2 on [0, delta), zero beyond.
double epanechnikov(double t, double delta);
/// Batch form over a distance vector (SIMD dispatched).
std::vector<double> epanechnikov_weights(std::span<const double> distances, double delta);

double median(std::span<const double> values);
/// Median absolute deviation from the median, without the normal-consistency factor.
double mad_scale(std::span<const double> values);

/// Smallest sample x whose normalised cumulative weight (samples sorted by
/// value, ties pooled) reaches q.
double weighted_quantile(std::span<const double> samples, std::span<const double> weights,
                         double q);
/// Same convention, many probabilities, one sort.
std::vector<double> weighted_quantiles(std::span<const double> samples,
                                       std::span<const double> weights,
                                       std::span<const double> probs);
/// Equal-weight version of weighted_quantile.
double empirical_quantile(std::span<const double> samples, double q);

class ResponseTransform {
 public:
  enum class Kind { identity, log, logit };

  static ResponseTransform identity() { return {Kind::identity, 0.0, 0.0}; }
  static ResponseTransform log() { return {Kind::log, 0.0, 0.0}; }
  static ResponseTransform logit(double lower, double upper);

  Kind kind() const { return kind_; }
  double lower() const { return lower_; }
  double upper() const { return upper_; }

  bool in_domain(double x) const;
  /// Throws abc::Error(domain) outside the domain.
  double forward(double x) const;
  /// Result always lies strictly inside the domain.
  double inverse(double y) const;

  /// Image of the natural interval [lo, hi] (clamped to the domain).
  double forward_bound(double x) const;

  nlohmann::json to_json() const;
  static ResponseTransform from_json(const nlohmann::json& j);

  friend bool operator==(const ResponseTransform&, const ResponseTransform&) = default;

 private:
  ResponseTransform(Kind kind, double lower, double upper)
      : kind_(kind), lower_(lower), upper_(upper) {}

  Kind kind_;
  double lower_;
  double upper_;
};

struct QuantileSet {
  std::vector<double> probabilities;
  std::vector<double> values;
};

/// Upper-tail probability P(F(df1, df2) >= ratio).
double f_tail_p(double ratio, int df1, int df2);

/// Unbiased sample variance (n - 1 denominator).
double sample_variance(std::span<const double> values);

/// Two-sample Kolmogorov-Smirnov statistic between weighted samples.
double ks_statistic(std::span<const double> a, std::span<const double> wa,
                    std::span<const double> b, std::span<const double> wb);

}  // namespace abc
