#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "abc/engine.hpp"

namespace abc {

/// Axis-aligned box on the transformed parameter scale.
struct SupportRegion {
  std::vector<double> lower;
  std::vector<double> upper;
  double margin = 0.0;
  std::vector<ResponseTransform> transforms;

  bool contains(std::span<const double> natural) const;
  /// Bounds mapped back to the natural parameter scale.
  std::vector<Interval> natural_bounds() const;
  nlohmann::json to_json() const;
};

/// Bounding box of the positively weighted draws, widened by
/// margin * (max - min) on each side and clipped to the prior support.
/// `anchor_lower[d]` extends dimension d down to the prior's lower bound.
SupportRegion estimate_support(const WeightedPosterior& post, double margin,
                               std::span<const ResponseTransform> transforms,
                               std::span<const Interval> prior_support,
                               const std::vector<bool>& anchor_lower = {});

/// Region covering the whole prior support.
SupportRegion full_support(std::span<const ResponseTransform> transforms,
                           std::span<const Interval> prior_support);

struct TruncatedSample {
  std::vector<std::vector<double>> draws;
  double acceptance_fraction = 0.0;
};

inline constexpr double kMinRegionMass = 1e-4;
inline constexpr std::size_t kProbeDraws = 10000;

/// Prior draw conditioned on the region by rejection, drawing from `rng`.
/// `attempts` accumulates the number of prior draws used.
std::vector<double> draw_truncated_prior(const GenerativeModel& model, const SupportRegion& region, Rng& rng,
                                         std::uint64_t* attempts = nullptr);

/// Estimates the region's prior mass from a probe batch; throws
/// abc::Error(low_mass) below kMinRegionMass.
double probe_region_mass(const GenerativeModel& model, const SupportRegion& region, std::uint64_t seed,
                         std::size_t probes = kProbeDraws);

/// `count` truncated draws; draw i uses Rng(seed, i) like a table row.
TruncatedSample sample_truncated_prior(const GenerativeModel& model, const SupportRegion& region,
                                       std::size_t count, std::uint64_t seed);

struct AnchConfig {
  std::size_t stage1_rows = 1000;
  std::size_t stage2_rows = 1000;
  double stage1_p_delta = 0.75;
  double stage2_p_delta = 0.75;
  double margin = 0.05;
  bool pool = false;
  /// Per-dimension: extend the region down to the prior's lower bound.
  std::vector<bool> anchor_lower;

  nlohmann::json to_json() const;
  static AnchConfig from_json(const nlohmann::json& j);
};

struct StageReport {
  std::size_t rows = 0;
  double p_delta = 0.0;
  double delta = 0.0;
  std::size_t accepted = 0;
  std::string method;
};

struct AnchResult {
  WeightedPosterior stage1;
  WeightedPosterior stage2;
  WeightedPosterior final_posterior;  // stage 2, or pooled when enabled
  SupportRegion region;
  bool stage2_ran = false;
  double truncation_acceptance = 1.0;
  std::vector<StageReport> stages;
  std::vector<double> ks_statistic;  // per dimension, stage 1 vs stage 2
  std::vector<std::string> warnings;

  nlohmann::json report() const;
};

/// Table seed used by stage `stage` (1 or 2) of an ANCH run.
std::uint64_t anch_stage_seed(std::uint64_t seed, int stage);

AnchResult anch_run(const GenerativeModel& model, std::span<const double> s_obs, const AnchConfig& cfg,
                    const TrainConfig& train, std::span<const ResponseTransform> transforms,
                    std::uint64_t seed, int workers = 1);

}  // namespace abc
