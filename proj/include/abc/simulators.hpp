#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "abc/rng.hpp"
#include "abc/stats.hpp"

namespace abc {

/// Open interval of positive prior density on the natural parameter scale.
struct Interval {
  double lower;
  double upper;
};

/// Simulator contract: prior sampling plus summary statistics of synthetic data.
class GenerativeModel {
 public:
  virtual ~GenerativeModel() = default;

  virtual std::string id() const = 0;
  virtual std::size_t param_dim() const = 0;
  virtual std::size_t stat_dim() const = 0;
  virtual std::vector<std::string> param_names() const = 0;

  virtual std::vector<double> prior_draw(Rng& rng) const = 0;
  virtual std::vector<double> simulate(std::span<const double> params, Rng& rng) const = 0;

  virtual std::vector<Interval> prior_support() const = 0;
  /// Transforms that keep adjusted draws inside the prior support.
  virtual std::vector<ResponseTransform> default_transforms() const = 0;

  virtual nlohmann::json to_json() const = 0;
};

std::vector<double> prior_draw(const GenerativeModel& model, Rng& rng);

// ---------------------------------------------------------------------------
// Infinitely-many-sites coalescent

struct CoalescentConfig {
  int n = 100;
  double theta = 1.0;
};

/// Constant-size inter-coalescence times Y_2..Y_n (index 0 holds Y_2),
/// Y_j ~ Exponential(j(j-1)/2) in units of the population size.
std::vector<double> coalescent_intercoalescence_times(int n, Rng& rng);

/// Total tree length L_n = sum_{j=2..n} Exponential((j-1)/2).
double coalescent_tree_length(int n, Rng& rng);

/// Number of segregating sites ~ Poisson(theta * L_n / 2).
std::uint64_t simulate_infinite_sites(const CoalescentConfig& cfg, Rng& rng);

class InfiniteSitesModel final : public GenerativeModel {
 public:
  explicit InfiniteSitesModel(int n = 100, double prior_mean = 50.0);

  std::string id() const override { return "infinite_sites"; }
  std::size_t param_dim() const override { return 1; }
  std::size_t stat_dim() const override { return 1; }
  std::vector<std::string> param_names() const override { return {"theta"}; }
  std::vector<double> prior_draw(Rng& rng) const override;
  std::vector<double> simulate(std::span<const double> params, Rng& rng) const override;
  std::vector<Interval> prior_support() const override;
  std::vector<ResponseTransform> default_transforms() const override;
  nlohmann::json to_json() const override;

  int sample_size() const { return n_; }
  double prior_mean() const { return prior_mean_; }

 private:
  int n_;
  double prior_mean_;
};

// ---------------------------------------------------------------------------
// Exponential-growth microsatellite model

struct ExpansionConfig {
  double ancestral_size = 1500.0;  // N_A, haploid individuals
  double onset_years = 18000.0;    // t0
  double alpha = 0.0012;           // N_A / N_present, in (0, 1)
  int n = 100;                     // sampled lineages
  int loci = 50;
  double mu = 5e-4;  // per locus per generation
  double generation_years = 20.0;
};

/// Deterministic size history: N_A / alpha today, shrinking exponentially to
/// N_A at the onset, constant N_A further back. Times in generations.
class GrowthHistory {
 public:
  explicit GrowthHistory(const ExpansionConfig& cfg);

  double size_at(double t) const;
  /// Integrated inverse size, int_0^t du / N(u).
  double cumulative_rate(double t) const;
  /// Inverse of cumulative_rate.
  double time_at(double cumulative) const;

 private:
  double present_size_;
  double ancestral_size_;
  double onset_;  // generations
  double growth_rate_;
};

struct LocusSample {
  std::vector<int> repeats;  // per sampled lineage, relative to the ancestral count 0
  std::uint64_t mutations = 0;
};

/// One microsatellite locus: genealogy under the growth history, Poisson
/// mutations per branch, each a +/-1 repeat step.
LocusSample simulate_microsat_locus(const ExpansionConfig& cfg, Rng& rng);

inline constexpr std::size_t kExpansionStats = 7;

/// The seven summary statistics over loci (see README for definitions):
/// mean variance, mean heterozygosity, two imbalance indices, interlocus
/// statistic, expansion index, mean S1 - S0.
std::array<double, kExpansionStats> microsat_summaries(const std::vector<std::vector<int>>& loci);

std::array<double, kExpansionStats> simulate_expansion(const ExpansionConfig& cfg, Rng& rng);

/// Parameters (t0 years, N_A, alpha) with priors U(0, 1e5), U(0, 1e4) and
/// -log10(alpha) ~ U(1, 6).
class ExpansionModel final : public GenerativeModel {
 public:
  explicit ExpansionModel(const ExpansionConfig& base = {});

  std::string id() const override { return "expansion"; }
  std::size_t param_dim() const override { return 3; }
  std::size_t stat_dim() const override { return kExpansionStats; }
  std::vector<std::string> param_names() const override { return {"t0", "N_A", "alpha"}; }
  std::vector<double> prior_draw(Rng& rng) const override;
  std::vector<double> simulate(std::span<const double> params, Rng& rng) const override;
  std::vector<Interval> prior_support() const override;
  std::vector<ResponseTransform> default_transforms() const override;
  nlohmann::json to_json() const override;

 private:
  ExpansionConfig base_;
};

// ---------------------------------------------------------------------------
// G/G/1 queue

struct QueueConfig {
  double theta1 = 1.0;  // service time lower bound
  double theta2 = 5.0;  // service time upper bound
  double theta3 = 0.2;  // arrival rate
  int n = 50;
  int k = 20;
};

struct QueuePath {
  std::vector<double> interdeparture;
  std::vector<double> service;
  std::vector<double> interarrival;
};

QueuePath simulate_queue_path(const QueueConfig& cfg, Rng& rng);
/// Inter-departure times Y_1..Y_n.
std::vector<double> simulate_queue(const QueueConfig& cfg, Rng& rng);

/// [min, quantiles at i/(k-1) for i = 1..k-2, max], k in {5, 10, 20}.
std::vector<double> queue_summaries(std::span<const double> y, int k);

/// Parameters (theta1, theta2, theta3); theta1, theta2 - theta1 and theta3
/// are independent U(0, 10).
class QueueModel final : public GenerativeModel {
 public:
  explicit QueueModel(int n = 50, int k = 20);

  std::string id() const override { return "queue"; }
  std::size_t param_dim() const override { return 3; }
  std::size_t stat_dim() const override { return static_cast<std::size_t>(k_); }
  std::vector<std::string> param_names() const override { return {"theta1", "theta2", "theta3"}; }
  std::vector<double> prior_draw(Rng& rng) const override;
  std::vector<double> simulate(std::span<const double> params, Rng& rng) const override;
  std::vector<Interval> prior_support() const override;
  std::vector<ResponseTransform> default_transforms() const override;
  nlohmann::json to_json() const override;

 private:
  int n_;
  int k_;
};

/// Builds a model from {"id": ..., model-specific fields}.
std::unique_ptr<GenerativeModel> make_model(const nlohmann::json& spec);

using ModelFactory = std::function<std::unique_ptr<GenerativeModel>(const nlohmann::json&)>;

/// Makes `id` available to make_model (and so to experiment configs).
/// Built-in ids cannot be replaced.
void register_model(const std::string& id, ModelFactory factory);

}  // namespace abc
