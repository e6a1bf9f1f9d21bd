#include "abc/engine.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <thread>

#include "abc/errors.hpp"
#include "abc/regression.hpp"
#include "abc/simd.hpp"

namespace abc {

ReferenceTable build_reference_table(const GenerativeModel& model, std::size_t rows, std::uint64_t seed,
                                     int workers, const ParamSampler& sampler) {
  if (rows < 1) throw Error(ErrorCode::config, "reference table needs at least one row");
  const auto p = static_cast<Eigen::Index>(model.param_dim());
  const auto d = static_cast<Eigen::Index>(model.stat_dim());
  ReferenceTable table{Eigen::MatrixXd(static_cast<Eigen::Index>(rows), p),
                       Eigen::MatrixXd(static_cast<Eigen::Index>(rows), d)};

  std::atomic<std::size_t> next{0};
  std::mutex failure_mutex;
  std::size_t failed_row = rows;
  std::string failure;

  auto work = [&] {
    for (std::size_t i = next.fetch_add(1); i < rows; i = next.fetch_add(1)) {
      try {
        Rng rng(seed, i);
        const std::vector<double> phi = sampler ? sampler(rng) : model.prior_draw(rng);
        const std::vector<double> s = model.simulate(phi, rng);
        if (phi.size() != static_cast<std::size_t>(p) || s.size() != static_cast<std::size_t>(d))
          throw Error(ErrorCode::shape, "simulator returned a vector of the wrong length");
        const auto r = static_cast<Eigen::Index>(i);
        for (Eigen::Index k = 0; k < p; ++k) table.params(r, k) = phi[k];
        for (Eigen::Index k = 0; k < d; ++k) {
          if (!std::isfinite(s[k])) throw Error(ErrorCode::simulation, "non-finite statistic");
          table.stats(r, k) = s[k];
        }
      } catch (const std::exception& e) {
        std::lock_guard lock(failure_mutex);
        if (i < failed_row) {
          failed_row = i;
          failure = e.what();
        }
      }
    }
  };

  const int n_threads = std::max(1, std::min<int>(workers, static_cast<int>(rows)));
  if (n_threads == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(work);
  }
  if (failed_row < rows)
    throw Error(ErrorCode::simulation, "row " + std::to_string(failed_row) + ": " + failure);
  return table;
}

DistanceSet distances(const ReferenceTable& table, std::span<const double> s_obs) {
  const Eigen::Index m = table.stats.rows();
  const Eigen::Index d = table.stats.cols();
  if (static_cast<Eigen::Index>(s_obs.size()) != d)
    throw Error(ErrorCode::shape, "observed statistics length != table statistics");
  DistanceSet out;
  out.scaled_distances.assign(static_cast<std::size_t>(m), 0.0);
  const auto& kern = simd::kernels();
  for (Eigen::Index k = 0; k < d; ++k) {
    const double* col = table.stats.col(k).data();
    double mad = mad_scale(std::span<const double>(col, static_cast<std::size_t>(m)));
    if (!(mad > 0.0)) {
      out.warnings.push_back("statistic " + std::to_string(k + 1) + " has zero MAD; left unscaled");
      mad = 1.0;
    }
    out.mad.push_back(mad);
    kern.accumulate_scaled_sq(col, s_obs[k], 1.0 / mad, out.scaled_distances.data(), static_cast<std::size_t>(m));
  }
  for (double& v : out.scaled_distances) v = std::sqrt(v);
  return out;
}

Tolerance select_tolerance(const DistanceSet& dists, double p_delta) {
  if (!(p_delta > 0.0 && p_delta <= 1.0)) throw Error(ErrorCode::config, "p_delta must lie in (0, 1]");
  Tolerance tol;
  tol.p_delta = p_delta;
  tol.delta = empirical_quantile(dists.scaled_distances, p_delta);
  for (std::size_t i = 0; i < dists.scaled_distances.size(); ++i)
    if (dists.scaled_distances[i] <= tol.delta) tol.accepted.push_back(i);
  return tol;
}

std::string to_string(Method m) {
  switch (m) {
    case Method::rejection: return "rejection";
    case Method::nw: return "nw";
    case Method::locl: return "locl";
    case Method::nch: return "nch";
  }
  return "unknown";
}

Method method_from_string(const std::string& s) {
  if (s == "rejection") return Method::rejection;
  if (s == "nw") return Method::nw;
  if (s == "locl") return Method::locl;
  if (s == "nch") return Method::nch;
  throw Error(ErrorCode::config, "unknown method '" + s + "'");
}

std::vector<double> kernel_weights(const DistanceSet& dists, const Tolerance& tol,
                                   std::vector<std::string>* warnings) {
  std::vector<double> acc_dist;
  acc_dist.reserve(tol.accepted.size());
  for (std::size_t i : tol.accepted) acc_dist.push_back(dists.scaled_distances[i]);
  std::vector<double> w;
  if (tol.delta > 0.0) w = epanechnikov_weights(acc_dist, tol.delta);
  const bool any_positive = std::any_of(w.begin(), w.end(), [](double x) { return x > 0.0; });
  if (!any_positive) {
    if (warnings) warnings->push_back("all accepted rows lie on the bandwidth; using uniform weights");
    w.assign(acc_dist.size(), 1.0);
  }
  return w;
}

namespace {

void require_accepted(const Tolerance& tol) {
  if (tol.accepted.empty())
    throw Error(ErrorCode::empty_posterior, "no accepted rows; increase p_delta");
}

Eigen::MatrixXd accepted_rows(const Eigen::MatrixXd& m, const std::vector<std::size_t>& rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = m.row(static_cast<Eigen::Index>(rows[r]));
  return out;
}

void check_transforms(std::span<const ResponseTransform> transforms, Eigen::Index p) {
  if (static_cast<Eigen::Index>(transforms.size()) != p)
    throw Error(ErrorCode::shape, "one transform per parameter dimension is required");
}

// Keeps the original draw when the adjustment is an exact no-op so that the
// transform round trip cannot perturb it.
double back_transform(const ResponseTransform& t, double phi, double y, double y_adj) {
  return y_adj == y ? phi : t.inverse(y_adj);
}

}  // namespace

WeightedPosterior rejection_posterior(const ReferenceTable& table, const DistanceSet& dists,
                                      const Tolerance& tol, bool weighted) {
  require_accepted(tol);
  WeightedPosterior post;
  post.rows = tol.accepted;
  post.draws = accepted_rows(table.params, tol.accepted);
  post.method = weighted ? Method::nw : Method::rejection;
  post.weights = weighted ? kernel_weights(dists, tol, &post.warnings)
                          : std::vector<double>(tol.accepted.size(), 1.0);
  return post;
}

WeightedPosterior locl_posterior(const ReferenceTable& table, const DistanceSet& dists,
                                 const Tolerance& tol, std::span<const double> s_obs,
                                 std::span<const ResponseTransform> transforms) {
  require_accepted(tol);
  const Eigen::Index p = table.params.cols();
  const Eigen::Index d = table.stats.cols();
  check_transforms(transforms, p);
  if (static_cast<Eigen::Index>(s_obs.size()) != d) throw Error(ErrorCode::shape, "observed statistics length");

  auto fallback = [&](const std::string& why) {
    WeightedPosterior post = rejection_posterior(table, dists, tol, true);
    post.warnings.insert(post.warnings.begin(), "locl fell back to rejection: " + why);
    return post;
  };
  const auto n = static_cast<Eigen::Index>(tol.accepted.size());
  if (n < d + 2) return fallback("fewer than D + 2 accepted rows");

  WeightedPosterior post;
  post.method = Method::locl;
  post.rows = tol.accepted;
  post.weights = kernel_weights(dists, tol, &post.warnings);

  // Centered statistics; columns that are identically zero cannot change any
  // adjusted value and are left out of the fit.
  std::vector<Eigen::Index> keep;
  for (Eigen::Index k = 0; k < d; ++k) {
    bool all_zero = true;
    for (Eigen::Index r = 0; r < n && all_zero; ++r)
      all_zero = table.stats(static_cast<Eigen::Index>(tol.accepted[r]), k) - s_obs[k] == 0.0;
    if (!all_zero) keep.push_back(k);
  }
  Eigen::MatrixXd x(n, static_cast<Eigen::Index>(keep.size()));
  for (Eigen::Index r = 0; r < n; ++r)
    for (std::size_t c = 0; c < keep.size(); ++c)
      x(r, static_cast<Eigen::Index>(c)) =
          table.stats(static_cast<Eigen::Index>(tol.accepted[r]), keep[c]) - s_obs[keep[c]];

  const Eigen::MatrixXd phi = accepted_rows(table.params, tol.accepted);
  Eigen::MatrixXd y(n, p);
  for (Eigen::Index r = 0; r < n; ++r)
    for (Eigen::Index k = 0; k < p; ++k) y(r, k) = transforms[k].forward(phi(r, k));

  LocalLinearFit fit;
  try {
    fit = fit_local_linear(x, y, post.weights);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::singular_design) throw;
    return fallback(e.what());
  }

  post.draws.resize(n, p);
  for (Eigen::Index k = 0; k < p; ++k) {
    for (Eigen::Index r = 0; r < n; ++r) {
      double shift = 0.0;
      for (Eigen::Index c = 0; c < x.cols(); ++c) shift += x(r, c) * fit.beta(c, k);
      const double y_adj = y(r, k) - shift;
      post.draws(r, k) = back_transform(transforms[k], phi(r, k), y(r, k), y_adj);
    }
  }
  return post;
}

WeightedPosterior nch_adjust(const ReferenceTable& table, const Tolerance& tol,
                             std::span<const double> weights, std::span<const double> s_obs,
                             std::span<const ResponseTransform> transforms,
                             std::span<const MeanVarNets> nets) {
  require_accepted(tol);
  const Eigen::Index p = table.params.cols();
  const Eigen::Index d = table.stats.cols();
  check_transforms(transforms, p);
  if (static_cast<Eigen::Index>(nets.size()) != p) throw Error(ErrorCode::shape, "one net pair per parameter");
  if (static_cast<Eigen::Index>(s_obs.size()) != d) throw Error(ErrorCode::shape, "observed statistics length");
  if (weights.size() != tol.accepted.size()) throw Error(ErrorCode::shape, "weights length != accepted rows");

  const Eigen::MatrixXd stats = accepted_rows(table.stats, tol.accepted);
  const Eigen::MatrixXd phi = accepted_rows(table.params, tol.accepted);
  Eigen::MatrixXd obs(1, d);
  for (Eigen::Index k = 0; k < d; ++k) obs(0, k) = s_obs[k];

  WeightedPosterior post;
  post.method = Method::nch;
  post.rows = tol.accepted;
  post.weights.assign(weights.begin(), weights.end());
  post.draws.resize(phi.rows(), p);
  for (Eigen::Index k = 0; k < p; ++k) {
    const MeanVarNets& net = nets[static_cast<std::size_t>(k)];
    // Same batch code path for the observation and the rows, so rows equal
    // to the observation reproduce m(s) and sigma(s) bit for bit.
    const double m_obs = net.mean_net.predict_batch(obs)(0);
    const double lv_obs = net.logvar_net.predict_batch(obs)(0);
    const Eigen::VectorXd m_rows = net.mean_net.predict_batch(stats);
    const Eigen::VectorXd lv_rows = net.logvar_net.predict_batch(stats);
    const double sd_obs = std::max(std::exp(0.5 * lv_obs), std::numeric_limits<double>::min());
    for (Eigen::Index r = 0; r < phi.rows(); ++r) {
      const double y = transforms[k].forward(phi(r, k));
      const double sd_row = std::max(std::exp(0.5 * lv_rows(r)), std::numeric_limits<double>::min());
      const double ratio = sd_obs / sd_row;
      const double resid = y - m_rows(r);
      // Algebraically m(s) + resid * ratio, arranged to be exact when s_i = s.
      const double y_adj = y + (m_obs - m_rows(r)) + resid * (ratio - 1.0);
      post.draws(r, k) = back_transform(transforms[k], phi(r, k), y, std::isfinite(y_adj) ? y_adj : y);
    }
  }
  return post;
}

WeightedPosterior nch_posterior(const ReferenceTable& table, const DistanceSet& dists,
                                const Tolerance& tol, std::span<const double> s_obs,
                                std::span<const ResponseTransform> transforms,
                                const TrainConfig& config, Rng& rng,
                                std::vector<MeanVarNets>* fitted) {
  require_accepted(tol);
  const Eigen::Index p = table.params.cols();
  check_transforms(transforms, p);

  std::vector<std::string> warnings;
  const std::vector<double> weights = kernel_weights(dists, tol, &warnings);
  const Eigen::MatrixXd stats = accepted_rows(table.stats, tol.accepted);
  const Eigen::MatrixXd phi = accepted_rows(table.params, tol.accepted);

  const std::size_t n_weights =
      static_cast<std::size_t>(config.hidden_units) * (static_cast<std::size_t>(stats.cols()) + 2) + 1;
  if (tol.accepted.size() < 10 * n_weights)
    warnings.push_back("only " + std::to_string(tol.accepted.size()) + " accepted rows for " +
                       std::to_string(n_weights) + " network weights");

  std::vector<MeanVarNets> nets;
  try {
    for (Eigen::Index k = 0; k < p; ++k) {
      std::vector<double> y(static_cast<std::size_t>(phi.rows()));
      for (Eigen::Index r = 0; r < phi.rows(); ++r) y[static_cast<std::size_t>(r)] = transforms[k].forward(phi(r, k));
      MeanVarFit fit = fit_mean_var(stats, y, weights, config, rng, transforms[k]);
      warnings.insert(warnings.end(), fit.warnings.begin(), fit.warnings.end());
      nets.push_back(std::move(fit.nets));
    }
  } catch (const Error& e) {
    if (e.code() != ErrorCode::training_divergence) throw;
    WeightedPosterior post = locl_posterior(table, dists, tol, s_obs, transforms);
    post.warnings.insert(post.warnings.begin(), "nch fell back to locl: " + std::string(e.what()));
    return post;
  }

  WeightedPosterior post = nch_adjust(table, tol, weights, s_obs, transforms, nets);
  post.warnings = std::move(warnings);
  if (fitted) *fitted = std::move(nets);
  return post;
}

std::vector<QuantileSet> posterior_quantiles(const WeightedPosterior& post, std::span<const double> probs) {
  if (post.size() == 0) throw Error(ErrorCode::empty_posterior, "posterior has no draws");
  std::vector<QuantileSet> out;
  for (Eigen::Index k = 0; k < post.draws.cols(); ++k) {
    const Eigen::VectorXd col = post.draws.col(k);
    QuantileSet q;
    q.probabilities.assign(probs.begin(), probs.end());
    q.values = weighted_quantiles(std::span<const double>(col.data(), static_cast<std::size_t>(col.size())),
                                  post.weights, probs);
    out.push_back(std::move(q));
  }
  return out;
}

WeightedPosterior run_estimator(Method method, const ReferenceTable& table, std::span<const double> s_obs,
                                double p_delta, std::span<const ResponseTransform> transforms,
                                const TrainConfig& config, Rng& rng) {
  const DistanceSet dists = distances(table, s_obs);
  const Tolerance tol = select_tolerance(dists, p_delta);
  WeightedPosterior post;
  switch (method) {
    case Method::rejection: post = rejection_posterior(table, dists, tol, false); break;
    case Method::nw: post = rejection_posterior(table, dists, tol, true); break;
    case Method::locl: post = locl_posterior(table, dists, tol, s_obs, transforms); break;
    case Method::nch: post = nch_posterior(table, dists, tol, s_obs, transforms, config, rng); break;
  }
  post.warnings.insert(post.warnings.begin(), dists.warnings.begin(), dists.warnings.end());
  return post;
}

}  // namespace abc
