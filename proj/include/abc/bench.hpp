#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "abc/adaptive.hpp"
#include "abc/engine.hpp"

namespace abc::bench {

inline constexpr const char* kVersion = "0.1.0";

// ---------------------------------------------------------------------------
// Exact rejection oracle for the infinitely-many-sites example

struct ExactOracleResult {
  std::vector<double> accepted;
  std::size_t trials = 0;
  double acceptance_fraction = 0.0;
};

/// Keeps theta draws whose simulated segregating-site count equals s_target.
/// Trial i uses Rng(seed, i). Throws abc::Error(empty_posterior) on zero acceptances.
ExactOracleResult exact_oracle_ex1(double prior_mean, int n, std::uint64_t s_target, std::size_t trials,
                                   std::uint64_t seed, int workers = 1);

// ---------------------------------------------------------------------------
// Aggregates

struct RmaeResult {
  std::vector<double> probabilities;
  std::vector<double> per_quantile;  // median over replicates of |Q - Q0| / |Q0|
  double sum = 0.0;
};

RmaeResult rmae(const std::vector<QuantileSet>& replicates, const QuantileSet& reference);

struct VarianceRatioRow {
  double probability = 0.0;
  double var_a = 0.0;
  double var_b = 0.0;
  double ratio = 0.0;  // var_a / var_b; +inf when var_b == 0
  double p_value = 0.0;
  int df1 = 0;
  int df2 = 0;
  bool infinite = false;
};

/// Per-quantile variance ratio of two replicate sets with the one-sided F-test.
std::vector<VarianceRatioRow> variance_ratios(const std::vector<QuantileSet>& a, const std::vector<QuantileSet>& b);

// ---------------------------------------------------------------------------
// Experiments

struct ExperimentConfig {
  nlohmann::json raw;
  nlohmann::json model;
  std::vector<double> observed_stats;
  std::optional<std::vector<double>> true_params;
  std::vector<std::string> methods;  // subset of rejection, nw, locl, nch, anch
  std::size_t rows = 2000;
  std::vector<double> p_delta{0.5};
  int replicates = 20;
  std::vector<double> quantiles{0.025, 0.25, 0.5, 0.75, 0.975};
  std::uint64_t seed = 1;
  std::string output_dir;
  TrainConfig train;
  AnchConfig anch;
  std::vector<ResponseTransform> transforms;  // empty = model defaults
  std::optional<std::size_t> exact_reference_trials;
  std::optional<std::vector<std::vector<double>>> reference_quantiles;  // per parameter
  std::vector<std::pair<std::string, std::string>> variance_ratio_pairs;
  bool write_posteriors = true;

  /// Validates before any simulation; throws abc::Error(config).
  static ExperimentConfig from_json(const nlohmann::json& j);
};

std::string config_hash(const nlohmann::json& raw);

struct CellResult {
  std::string method;
  std::size_t p_index = 0;
  double p_delta = 0.0;
  int replicate = 0;
  bool ok = false;
  std::string error;
  std::string method_used;
  std::vector<std::string> warnings;
  std::vector<QuantileSet> quantiles;
  std::optional<std::vector<QuantileSet>> stage1_quantiles;
  std::optional<nlohmann::json> anch_report;
  WeightedPosterior posterior;
  std::optional<WeightedPosterior> stage1_posterior;
};

struct ExperimentReport {
  nlohmann::json json;
  std::vector<CellResult> cells;
  std::filesystem::path run_dir;
  std::size_t failed_cells = 0;
};

/// Observed statistics: given directly, or simulated from the true parameters.
std::vector<double> observed_statistics(const ExperimentConfig& cfg, const GenerativeModel& model);

/// Runs the method x p_delta x replicate grid in memory. Each cell draws from
/// streams keyed by (method, p_delta index, replicate), so the results do not
/// depend on `workers`.
std::vector<CellResult> run_grid(const ExperimentConfig& cfg, int workers);

/// Reference quantiles per parameter, from the exact oracle or the config.
std::optional<std::vector<QuantileSet>> reference_quantiles(const ExperimentConfig& cfg, int workers);

/// Builds aggregates from per-cell quantile records (the same routine backs
/// the audit).
nlohmann::json aggregate(const ExperimentConfig& cfg, const std::vector<CellResult>& cells,
                         const std::optional<std::vector<QuantileSet>>& reference);

/// Variance-ratio rows for methods a vs b, one block per p_delta.
nlohmann::json variance_ratio_study(const ExperimentConfig& cfg, const std::string& method_a,
                                    const std::string& method_b, int workers);

/// Full run: grid, aggregates, CSVs and report.json under a run directory in
/// `output_root`.
ExperimentReport run_experiment(const ExperimentConfig& cfg, int workers, const std::filesystem::path& output_root);

struct AuditResult {
  bool consistent = true;
  std::vector<std::string> mismatches;
};

/// Recomputes every aggregate in report.json from the run's quantiles.csv.
AuditResult audit_report(const std::filesystem::path& report_path);

std::filesystem::path run_directory(const ExperimentConfig& cfg, const std::filesystem::path& output_root);

}  // namespace abc::bench
