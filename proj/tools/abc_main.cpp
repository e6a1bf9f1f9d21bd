#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "abc/bench.hpp"
#include "abc/csv.hpp"
#include "abc/errors.hpp"
#include "abc/simd.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json load_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw abc::Error(abc::ErrorCode::io, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw abc::Error(abc::ErrorCode::config, path.string() + ": " + e.what());
  }
}

// --out, then the config's output_dir, then ABC_OUTPUT_DIR, then ./abc-runs.
fs::path output_root(const std::string& flag, const json& cfg) {
  if (!flag.empty()) return flag;
  if (cfg.contains("output_dir") && cfg.at("output_dir").is_string()) return cfg.at("output_dir").get<std::string>();
  if (const char* env = std::getenv("ABC_OUTPUT_DIR"); env && *env) return env;
  return "abc-runs";
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw abc::Error(abc::ErrorCode::io, "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

int cmd_simulate(const fs::path& config_path, const std::string& out_flag, int workers) {
  const json raw = load_json(config_path);
  const auto model = abc::make_model(raw.at("model"));
  const std::size_t rows = raw.value("M", std::size_t{2000});
  const std::uint64_t seed = raw.value("seed", std::uint64_t{1});
  if (rows < 1) throw abc::Error(abc::ErrorCode::config, "M must be >= 1");

  const fs::path dir = output_root(out_flag, raw) /
                       ("sim-" + abc::bench::config_hash(raw).substr(0, 12) + "-s" + std::to_string(seed));
  fs::create_directories(dir);
  write_json(dir / "config.json", raw);
  const auto table = abc::build_reference_table(*model, rows, seed, workers);
  abc::csv::write_table(dir / "table.csv", table);
  std::cout << dir.string() << '\n';
  return 0;
}

int cmd_infer(const fs::path& config_path, const std::string& out_flag, int workers) {
  const json raw = load_json(config_path);
  abc::bench::ExperimentConfig cfg = abc::bench::ExperimentConfig::from_json(raw);
  cfg.replicates = 1;
  const auto model = abc::make_model(cfg.model);

  const fs::path dir = output_root(out_flag, raw) /
                       ("infer-" + abc::bench::config_hash(raw).substr(0, 12) + "-s" + std::to_string(cfg.seed));
  fs::create_directories(dir);
  write_json(dir / "config.json", raw);

  const auto cells = abc::bench::run_grid(cfg, workers);
  json summary = {{"observed_stats", abc::bench::observed_statistics(cfg, *model)},
                  {"param_names", model->param_names()},
                  {"results", json::array()}};
  int failed = 0;
  for (const auto& c : cells) {
    json entry = {{"method", c.method}, {"p_delta", c.p_delta}};
    if (!c.ok) {
      ++failed;
      entry["error"] = c.error;
      std::cerr << c.method << " p_delta=" << c.p_delta << ": " << c.error << '\n';
    } else {
      const std::string stem = c.method + "_p" + std::to_string(c.p_index);
      abc::csv::write_posterior(dir / (stem + ".csv"), c.posterior);
      if (c.stage1_posterior) abc::csv::write_posterior(dir / (stem + "_stage1.csv"), *c.stage1_posterior);
      if (c.anch_report) write_json(dir / (stem + "_anch.json"), *c.anch_report);
      entry["method_used"] = c.method_used;
      entry["accepted"] = c.posterior.size();
      entry["warnings"] = c.warnings;
      json q = json::array();
      for (const auto& qs : c.quantiles) q.push_back({{"probabilities", qs.probabilities}, {"values", qs.values}});
      entry["quantiles"] = q;
    }
    summary["results"].push_back(entry);
  }
  write_json(dir / "summary.json", summary);
  std::cout << dir.string() << '\n';
  return failed ? 1 : 0;
}

int cmd_bench(const fs::path& config_path, const std::string& out_flag, int workers) {
  const json raw = load_json(config_path);
  const auto cfg = abc::bench::ExperimentConfig::from_json(raw);
  const auto report = abc::bench::run_experiment(cfg, workers, output_root(out_flag, raw));
  for (const auto& c : report.cells)
    if (!c.ok) std::cerr << c.method << " p_delta=" << c.p_delta << " replicate " << c.replicate << ": " << c.error << '\n';
  std::cout << report.run_dir.string() << '\n';
  return report.failed_cells ? 1 : 0;
}

int cmd_audit(const fs::path& report_path) {
  const auto result = abc::bench::audit_report(report_path);
  for (const auto& m : result.mismatches) std::cerr << m << '\n';
  std::cout << (result.consistent ? "consistent" : "inconsistent") << '\n';
  return result.consistent ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Approximate Bayesian computation with regression adjustments"};
  app.require_subcommand(1);
  app.set_version_flag("--version", abc::bench::kVersion);

  std::string config, out, report;
  int workers = 1;
  std::string isa;
  app.add_option("--isa", isa, "Force the kernel set (scalar, avx2)");

  auto* sim = app.add_subcommand("simulate", "Build a reference table");
  sim->add_option("--config", config, "Config JSON")->required()->check(CLI::ExistingFile);
  sim->add_option("--out", out, "Output root directory");
  sim->add_option("--workers", workers, "Worker threads")->check(CLI::PositiveNumber);

  auto* inf = app.add_subcommand("infer", "Run each method once on the observed data");
  inf->add_option("--config", config, "Config JSON")->required()->check(CLI::ExistingFile);
  inf->add_option("--out", out, "Output root directory");
  inf->add_option("--workers", workers, "Worker threads")->check(CLI::PositiveNumber);

  auto* bench = app.add_subcommand("bench", "Run the method x tolerance x replicate grid");
  bench->add_option("--config", config, "Config JSON")->required()->check(CLI::ExistingFile);
  bench->add_option("--out", out, "Output root directory");
  bench->add_option("--workers", workers, "Worker threads")->check(CLI::PositiveNumber);

  auto* audit = app.add_subcommand("audit", "Recompute a report's aggregates from its CSVs");
  audit->add_option("--report", report, "report.json of a bench run")->required()->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    if (!isa.empty()) {
      if (isa == "scalar") abc::simd::set_active(abc::simd::Isa::scalar);
      else if (isa == "avx2") abc::simd::set_active(abc::simd::Isa::avx2);
      else throw abc::Error(abc::ErrorCode::config, "unknown ISA '" + isa + "'");
    }
    if (*sim) return cmd_simulate(config, out, workers);
    if (*inf) return cmd_infer(config, out, workers);
    if (*bench) return cmd_bench(config, out, workers);
    return cmd_audit(report);
  } catch (const abc::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
