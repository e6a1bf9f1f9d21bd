#include "abc/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <boost/math/special_functions/beta.hpp>

#include "abc/errors.hpp"
#include "abc/simd.hpp"

namespace abc {

double epanechnikov(double t, double delta) {
  if (!(delta > 0.0)) throw Error(ErrorCode::invalid_bandwidth, "delta must be positive");
  const double u = t / delta;
  return t < delta ? 1.0 - u * u : 0.0;
}

std::vector<double> epanechnikov_weights(std::span<const double> distances, double delta) {
  if (!(delta > 0.0)) throw Error(ErrorCode::invalid_bandwidth, "delta must be positive");
  std::vector<double> out(distances.size());
  simd::kernels().epanechnikov(distances.data(), delta, out.data(), distances.size());
  return out;
}

double median(std::span<const double> values) {
  if (values.empty()) throw Error(ErrorCode::empty_data, "median of an empty sample");
  std::vector<double> v(values.begin(), values.end());
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double upper = v[mid];
  if (v.size() % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

double mad_scale(std::span<const double> values) {
  if (values.empty()) throw Error(ErrorCode::empty_data, "MAD of an empty sample");
  const double m = median(values);
  std::vector<double> dev(values.size());
  std::transform(values.begin(), values.end(), dev.begin(),
                 [m](double x) { return std::abs(x - m); });
  return median(dev);
}

namespace {

void check_weighted(std::span<const double> samples, std::span<const double> weights) {
  if (samples.size() != weights.size())
    throw Error(ErrorCode::shape, "samples and weights differ in length");
  if (samples.empty()) throw Error(ErrorCode::empty_data, "quantile of an empty sample");
}

}  // namespace

std::vector<double> weighted_quantiles(std::span<const double> samples,
                                       std::span<const double> weights,
                                       std::span<const double> probs) {
  check_weighted(samples, weights);
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return samples[a] < samples[b]; });

  // Pool ties so the cumulative weight is a function of the sample value.
  std::vector<double> values;
  std::vector<double> cumulative;
  double total = 0.0;
  for (std::size_t idx : order) {
    const double w = weights[idx];
    if (w < 0.0 || !std::isfinite(w)) throw Error(ErrorCode::degenerate_weights, "negative weight");
    total += w;
    if (!values.empty() && values.back() == samples[idx]) {
      cumulative.back() = total;
    } else {
      values.push_back(samples[idx]);
      cumulative.push_back(total);
    }
  }
  if (!(total > 0.0)) throw Error(ErrorCode::degenerate_weights, "total weight is zero");

  std::vector<double> out;
  out.reserve(probs.size());
  for (double q : probs) {
    if (!(q > 0.0 && q <= 1.0)) throw Error(ErrorCode::domain, "quantile probability outside (0,1]");
    // Relative slack keeps q = k/n exact under rounding of q * total.
    const double target = q * total * (1.0 - 1e-12);
    auto it = std::lower_bound(cumulative.begin(), cumulative.end(), target);
    if (it == cumulative.end()) --it;
    out.push_back(values[static_cast<std::size_t>(it - cumulative.begin())]);
  }
  return out;
}

double weighted_quantile(std::span<const double> samples, std::span<const double> weights,
                         double q) {
  const double probs[1] = {q};
  return weighted_quantiles(samples, weights, probs).front();
}

double empirical_quantile(std::span<const double> samples, double q) {
  const std::vector<double> ones(samples.size(), 1.0);
  return weighted_quantile(samples, ones, q);
}

ResponseTransform ResponseTransform::logit(double lower, double upper) {
  if (!(lower < upper)) throw Error(ErrorCode::config, "logit transform needs lower < upper");
  return {Kind::logit, lower, upper};
}

bool ResponseTransform::in_domain(double x) const {
  switch (kind_) {
    case Kind::identity: return std::isfinite(x);
    case Kind::log: return x > 0.0 && std::isfinite(x);
    case Kind::logit: return x > lower_ && x < upper_;
  }
  return false;
}

double ResponseTransform::forward(double x) const {
  if (!in_domain(x)) throw Error(ErrorCode::domain, "value outside transform domain");
  switch (kind_) {
    case Kind::identity: return x;
    case Kind::log: return std::log(x);
    case Kind::logit: return std::log((x - lower_) / (upper_ - x));
  }
  return x;
}

double ResponseTransform::inverse(double y) const {
  switch (kind_) {
    case Kind::identity: return y;
    case Kind::log: {
      const double x = std::exp(y);
      if (x <= 0.0) return std::numeric_limits<double>::denorm_min();
      return std::min(x, std::numeric_limits<double>::max());
    }
    case Kind::logit: {
      // Written in the form that loses least precision on each side.
      const double width = upper_ - lower_;
      double x = y >= 0.0 ? upper_ - width / (1.0 + std::exp(y))
                          : lower_ + width / (1.0 + std::exp(-y));
      if (!(x > lower_)) x = std::nextafter(lower_, upper_);
      if (!(x < upper_)) x = std::nextafter(upper_, lower_);
      return x;
    }
  }
  return y;
}

double ResponseTransform::forward_bound(double x) const {
  constexpr double inf = std::numeric_limits<double>::infinity();
  switch (kind_) {
    case Kind::identity: return x;
    case Kind::log:
      if (x <= 0.0) return -inf;
      return std::isinf(x) ? inf : std::log(x);
    case Kind::logit:
      if (x <= lower_) return -inf;
      if (x >= upper_) return inf;
      return std::log((x - lower_) / (upper_ - x));
  }
  return x;
}

nlohmann::json ResponseTransform::to_json() const {
  switch (kind_) {
    case Kind::identity: return {{"kind", "identity"}};
    case Kind::log: return {{"kind", "log"}};
    case Kind::logit: return {{"kind", "logit"}, {"lower", lower_}, {"upper", upper_}};
  }
  return {};
}

ResponseTransform ResponseTransform::from_json(const nlohmann::json& j) {
  const std::string kind = j.is_string() ? j.get<std::string>() : j.at("kind").get<std::string>();
  if (kind == "identity") return identity();
  if (kind == "log") return log();
  if (kind == "logit") return logit(j.at("lower").get<double>(), j.at("upper").get<double>());
  throw Error(ErrorCode::config, "unknown transform kind '" + kind + "'");
}

double f_tail_p(double ratio, int df1, int df2) {
  if (df1 <= 0 || df2 <= 0) throw Error(ErrorCode::invalid_df, "degrees of freedom must be positive");
  if (!(ratio > 0.0)) throw Error(ErrorCode::domain, "F ratio must be positive");
  if (std::isinf(ratio)) return 0.0;
  // P(F >= r) = I_{d2/(d2 + d1 r)}(d2/2, d1/2), evaluated on the side that
  // avoids cancellation.
  const double a = 0.5 * df1;
  const double b = 0.5 * df2;
  const double x = df1 * ratio / (df1 * ratio + df2);
  return boost::math::ibetac(a, b, x);
}

double sample_variance(std::span<const double> values) {
  if (values.size() < 2) throw Error(ErrorCode::empty_data, "variance needs at least two values");
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / values.size();
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return ss / static_cast<double>(values.size() - 1);
}

double ks_statistic(std::span<const double> a, std::span<const double> wa,
                    std::span<const double> b, std::span<const double> wb) {
  check_weighted(a, wa);
  check_weighted(b, wb);
  struct Point {
    double x;
    double wa;
    double wb;
  };
  const double ta = std::accumulate(wa.begin(), wa.end(), 0.0);
  const double tb = std::accumulate(wb.begin(), wb.end(), 0.0);
  if (!(ta > 0.0) || !(tb > 0.0)) throw Error(ErrorCode::degenerate_weights, "total weight is zero");
  std::vector<Point> pts;
  pts.reserve(a.size() + b.size());
  for (std::size_t i = 0; i < a.size(); ++i) pts.push_back({a[i], wa[i] / ta, 0.0});
  for (std::size_t i = 0; i < b.size(); ++i) pts.push_back({b[i], 0.0, wb[i] / tb});
  std::sort(pts.begin(), pts.end(), [](const Point& p, const Point& q) { return p.x < q.x; });
  double fa = 0.0, fb = 0.0, d = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    fa += pts[i].wa;
    fb += pts[i].wb;
    if (i + 1 < pts.size() && pts[i + 1].x == pts[i].x) continue;
    d = std::max(d, std::abs(fa - fb));
  }
  return d;
}

}  // namespace abc
