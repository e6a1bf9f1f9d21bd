#include "abc/adaptive.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>

#include "abc/errors.hpp"

namespace abc {

bool SupportRegion::contains(std::span<const double> natural) const {
  if (natural.size() != lower.size()) throw Error(ErrorCode::shape, "region dimension mismatch");
  for (std::size_t d = 0; d < natural.size(); ++d) {
    const ResponseTransform& t = transforms[d];
    double v;
    if (t.in_domain(natural[d])) {
      v = t.forward(natural[d]);
    } else {
      // Points on the edge of the transform's domain map to +/- infinity.
      v = t.forward_bound(natural[d]);
      if (!std::isinf(v)) return false;
    }
    if (v < lower[d] || v > upper[d]) return false;
  }
  return true;
}

std::vector<Interval> SupportRegion::natural_bounds() const {
  std::vector<Interval> out;
  for (std::size_t d = 0; d < lower.size(); ++d) {
    const ResponseTransform& t = transforms[d];
    auto back = [&](double v) {
      if (std::isinf(v)) {
        switch (t.kind()) {
          case ResponseTransform::Kind::identity: return v;
          case ResponseTransform::Kind::log: return v < 0 ? 0.0 : v;
          case ResponseTransform::Kind::logit: return v < 0 ? t.lower() : t.upper();
        }
      }
      return t.inverse(v);
    };
    out.push_back({back(lower[d]), back(upper[d])});
  }
  return out;
}

nlohmann::json SupportRegion::to_json() const {
  nlohmann::json dims = nlohmann::json::array();
  const auto natural = natural_bounds();
  for (std::size_t d = 0; d < lower.size(); ++d) {
    auto finite_or_null = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
    dims.push_back({{"transformed_lower", finite_or_null(lower[d])},
                    {"transformed_upper", finite_or_null(upper[d])},
                    {"lower", finite_or_null(natural[d].lower)},
                    {"upper", finite_or_null(natural[d].upper)},
                    {"transform", transforms[d].to_json()}});
  }
  return {{"margin", margin}, {"dimensions", dims}};
}

SupportRegion full_support(std::span<const ResponseTransform> transforms, std::span<const Interval> prior_support) {
  if (transforms.size() != prior_support.size()) throw Error(ErrorCode::shape, "transform/support count mismatch");
  SupportRegion region;
  region.transforms.assign(transforms.begin(), transforms.end());
  for (std::size_t d = 0; d < transforms.size(); ++d) {
    region.lower.push_back(transforms[d].forward_bound(prior_support[d].lower));
    region.upper.push_back(transforms[d].forward_bound(prior_support[d].upper));
  }
  return region;
}

SupportRegion estimate_support(const WeightedPosterior& post, double margin,
                               std::span<const ResponseTransform> transforms,
                               std::span<const Interval> prior_support,
                               const std::vector<bool>& anchor_lower) {
  if (post.size() == 0) throw Error(ErrorCode::empty_posterior, "cannot estimate the support of an empty posterior");
  if (margin < 0.0) throw Error(ErrorCode::config, "margin must be >= 0");
  const auto p = static_cast<std::size_t>(post.draws.cols());
  if (transforms.size() != p || prior_support.size() != p)
    throw Error(ErrorCode::shape, "one transform and prior interval per dimension");

  SupportRegion prior = full_support(transforms, prior_support);
  SupportRegion region;
  region.margin = margin;
  region.transforms.assign(transforms.begin(), transforms.end());
  for (std::size_t d = 0; d < p; ++d) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (std::size_t r = 0; r < post.size(); ++r) {
      if (!(post.weights[r] > 0.0)) continue;
      const double v = transforms[d].forward(post.draws(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(d)));
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    if (!(hi > lo))
      throw Error(ErrorCode::degenerate_region,
                  "dimension " + std::to_string(d + 1) + " has a single distinct draw; enlarge the first stage");
    const double pad = margin * (hi - lo);
    lo = std::max(lo - pad, prior.lower[d]);
    hi = std::min(hi + pad, prior.upper[d]);
    if (d < anchor_lower.size() && anchor_lower[d]) lo = prior.lower[d];
    if (!(lo <= hi)) throw Error(ErrorCode::degenerate_region, "region does not intersect the prior support");
    region.lower.push_back(lo);
    region.upper.push_back(hi);
  }
  return region;
}

namespace {
constexpr std::uint64_t kMaxAttemptsPerDraw = 100'000'000;
constexpr std::uint64_t kProbeKey = 0x70726F6265ULL;  // "probe"
}  // namespace

std::vector<double> draw_truncated_prior(const GenerativeModel& model, const SupportRegion& region, Rng& rng,
                                         std::uint64_t* attempts) {
  for (std::uint64_t a = 1; a <= kMaxAttemptsPerDraw; ++a) {
    std::vector<double> phi = model.prior_draw(rng);
    if (region.contains(phi)) {
      if (attempts) *attempts += a;
      return phi;
    }
  }
  throw Error(ErrorCode::low_mass, "truncated prior draw exceeded the attempt budget");
}

double probe_region_mass(const GenerativeModel& model, const SupportRegion& region, std::uint64_t seed,
                         std::size_t probes) {
  Rng rng(Rng::derive(seed, {kProbeKey}), 0);
  std::size_t inside = 0;
  for (std::size_t i = 0; i < probes; ++i)
    if (region.contains(model.prior_draw(rng))) ++inside;
  const double mass = static_cast<double>(inside) / static_cast<double>(probes);
  if (mass < kMinRegionMass)
    throw Error(ErrorCode::low_mass, "region holds an estimated prior mass of " + std::to_string(mass));
  return mass;
}

TruncatedSample sample_truncated_prior(const GenerativeModel& model, const SupportRegion& region,
                                       std::size_t count, std::uint64_t seed) {
  probe_region_mass(model, region, seed);
  TruncatedSample out;
  std::uint64_t attempts = 0;
  out.draws.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Rng rng(seed, i);
    out.draws.push_back(draw_truncated_prior(model, region, rng, &attempts));
  }
  out.acceptance_fraction = attempts ? static_cast<double>(count) / static_cast<double>(attempts) : 0.0;
  return out;
}

nlohmann::json AnchConfig::to_json() const {
  return {{"stage1_rows", stage1_rows}, {"stage2_rows", stage2_rows},   {"stage1_p_delta", stage1_p_delta},
          {"stage2_p_delta", stage2_p_delta}, {"margin", margin}, {"pool", pool},
          {"anchor_lower", anchor_lower}};
}

AnchConfig AnchConfig::from_json(const nlohmann::json& j) {
  AnchConfig c;
  c.stage1_rows = j.value("stage1_rows", c.stage1_rows);
  c.stage2_rows = j.value("stage2_rows", c.stage2_rows);
  if (j.contains("p_delta")) c.stage1_p_delta = c.stage2_p_delta = j.at("p_delta").get<double>();
  c.stage1_p_delta = j.value("stage1_p_delta", c.stage1_p_delta);
  c.stage2_p_delta = j.value("stage2_p_delta", c.stage2_p_delta);
  c.margin = j.value("margin", c.margin);
  c.pool = j.value("pool", c.pool);
  if (j.contains("anchor_lower")) c.anchor_lower = j.at("anchor_lower").get<std::vector<bool>>();
  if (c.stage1_rows < 1 || c.stage2_rows < 1) throw Error(ErrorCode::config, "ANCH stage sizes must be >= 1");
  if (c.margin < 0.0) throw Error(ErrorCode::config, "ANCH margin must be >= 0");
  return c;
}

std::uint64_t anch_stage_seed(std::uint64_t seed, int stage) {
  return Rng::derive(seed, {0x616E6368ULL, static_cast<std::uint64_t>(stage)});
}

nlohmann::json AnchResult::report() const {
  nlohmann::json stages_json = nlohmann::json::array();
  for (const auto& s : stages)
    stages_json.push_back({{"rows", s.rows}, {"p_delta", s.p_delta}, {"delta", s.delta},
                           {"accepted", s.accepted}, {"method", s.method}});
  nlohmann::json j = {{"stages", stages_json},
                      {"stage2_ran", stage2_ran},
                      {"truncation_acceptance", truncation_acceptance},
                      {"ks_statistic", ks_statistic},
                      {"warnings", warnings}};
  if (stage2_ran) j["region"] = region.to_json();
  return j;
}

AnchResult anch_run(const GenerativeModel& model, std::span<const double> s_obs, const AnchConfig& cfg,
                    const TrainConfig& train, std::span<const ResponseTransform> transforms,
                    std::uint64_t seed, int workers) {
  AnchResult out;

  auto run_stage = [&](int stage, const ReferenceTable& table, double p_delta) {
    const DistanceSet dists = distances(table, s_obs);
    const Tolerance tol = select_tolerance(dists, p_delta);
    Rng rng(Rng::derive(seed, {0x747261696EULL, static_cast<std::uint64_t>(stage)}), 0);
    WeightedPosterior post = nch_posterior(table, dists, tol, s_obs, transforms, train, rng);
    post.warnings.insert(post.warnings.begin(), dists.warnings.begin(), dists.warnings.end());
    out.stages.push_back({static_cast<std::size_t>(table.rows()), p_delta, tol.delta, tol.accepted.size(),
                          to_string(post.method)});
    for (const auto& w : post.warnings) out.warnings.push_back("stage " + std::to_string(stage) + ": " + w);
    return post;
  };

  const ReferenceTable t1 = build_reference_table(model, cfg.stage1_rows, anch_stage_seed(seed, 1), workers);
  out.stage1 = run_stage(1, t1, cfg.stage1_p_delta);
  out.final_posterior = out.stage1;

  const std::vector<Interval> prior = model.prior_support();
  try {
    out.region = estimate_support(out.stage1, cfg.margin, transforms, prior, cfg.anchor_lower);
    probe_region_mass(model, out.region, anch_stage_seed(seed, 2));
  } catch (const Error& e) {
    if (e.code() != ErrorCode::degenerate_region && e.code() != ErrorCode::low_mass) throw;
    out.warnings.push_back(std::string("stage 2 skipped: ") + e.what());
    return out;
  }

  std::atomic<std::uint64_t> attempts{0};
  const SupportRegion& region = out.region;
  const ParamSampler sampler = [&](Rng& rng) {
    std::uint64_t local = 0;
    auto phi = draw_truncated_prior(model, region, rng, &local);
    attempts.fetch_add(local, std::memory_order_relaxed);
    return phi;
  };
  const ReferenceTable t2 = build_reference_table(model, cfg.stage2_rows, anch_stage_seed(seed, 2), workers, sampler);
  out.truncation_acceptance = static_cast<double>(cfg.stage2_rows) / static_cast<double>(attempts.load());
  out.stage2 = run_stage(2, t2, cfg.stage2_p_delta);
  out.stage2_ran = true;
  out.final_posterior = out.stage2;

  for (Eigen::Index d = 0; d < out.stage1.draws.cols(); ++d) {
    const Eigen::VectorXd a = out.stage1.draws.col(d);
    const Eigen::VectorXd b = out.stage2.draws.col(d);
    out.ks_statistic.push_back(ks_statistic(std::span<const double>(a.data(), static_cast<std::size_t>(a.size())),
                                            out.stage1.weights,
                                            std::span<const double>(b.data(), static_cast<std::size_t>(b.size())),
                                            out.stage2.weights));
  }

  if (cfg.pool) {
    WeightedPosterior pooled = out.stage2;
    std::vector<Eigen::Index> keep;
    for (Eigen::Index r = 0; r < out.stage1.draws.rows(); ++r) {
      const Eigen::VectorXd row = out.stage1.draws.row(r).transpose();
      if (region.contains(std::span<const double>(row.data(), static_cast<std::size_t>(row.size())))) keep.push_back(r);
    }
    const Eigen::Index n2 = pooled.draws.rows();
    pooled.draws.conservativeResize(n2 + static_cast<Eigen::Index>(keep.size()), Eigen::NoChange);
    for (std::size_t i = 0; i < keep.size(); ++i) {
      pooled.draws.row(n2 + static_cast<Eigen::Index>(i)) = out.stage1.draws.row(keep[i]);
      pooled.weights.push_back(out.stage1.weights[static_cast<std::size_t>(keep[i])]);
      pooled.rows.push_back(out.stage1.rows[static_cast<std::size_t>(keep[i])]);
    }
    out.final_posterior = std::move(pooled);
  }
  return out;
}

}  // namespace abc
