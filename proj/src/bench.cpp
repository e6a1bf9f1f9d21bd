#include "abc/bench.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <stdexcept>
#include <thread>

#include "abc/csv.hpp"
#include "abc/errors.hpp"

namespace abc::bench {

namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kTableKey = 0x7461626CULL;     // "tabl"
constexpr std::uint64_t kObservedKey = 0x6F627376ULL;  // "obsv"
constexpr std::uint64_t kExactKey = 0x65786163ULL;     // "exac"
constexpr const char* kStage1 = "anch_stage1";

const std::set<std::string>& known_methods() {
  static const std::set<std::string> m{"rejection", "nw", "locl", "nch", "anch"};
  return m;
}

std::uint64_t method_key(const std::string& m) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : m) h = (h ^ c) * 1099511628211ULL;
  return h;
}

template <typename F>
void parallel_for(std::size_t count, int workers, F&& body) {
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) body(i);
  };
  const int n = std::max(1, std::min<int>(workers, static_cast<int>(count)));
  if (n == 1) {
    work();
    return;
  }
  std::vector<std::jthread> pool;
  for (int t = 0; t < n; ++t) pool.emplace_back(work);
}

double median_of(std::vector<double> v) { return median(v); }

}  // namespace

// ---------------------------------------------------------------------------

ExactOracleResult exact_oracle_ex1(double prior_mean, int n, std::uint64_t s_target, std::size_t trials,
                                   std::uint64_t seed, int workers) {
  if (trials == 0) throw Error(ErrorCode::config, "exact oracle needs trials >= 1");
  const InfiniteSitesModel model(n, prior_mean);
  std::vector<double> theta(trials);
  std::vector<char> hit(trials, 0);
  parallel_for(trials, workers, [&](std::size_t i) {
    Rng rng(seed, i);
    theta[i] = model.prior_draw(rng)[0];
    hit[i] = simulate_infinite_sites({n, theta[i]}, rng) == s_target;
  });
  ExactOracleResult out;
  out.trials = trials;
  for (std::size_t i = 0; i < trials; ++i)
    if (hit[i]) out.accepted.push_back(theta[i]);
  if (out.accepted.empty())
    throw Error(ErrorCode::empty_posterior, "exact oracle accepted nothing; increase the number of trials");
  out.acceptance_fraction = static_cast<double>(out.accepted.size()) / static_cast<double>(trials);
  return out;
}

RmaeResult rmae(const std::vector<QuantileSet>& replicates, const QuantileSet& reference) {
  if (replicates.empty()) throw Error(ErrorCode::empty_data, "RMAE needs at least one replicate");
  RmaeResult out;
  out.probabilities = reference.probabilities;
  for (std::size_t k = 0; k < reference.values.size(); ++k) {
    const double q0 = reference.values[k];
    if (q0 == 0.0)
      throw Error(ErrorCode::undefined_rmae,
                  "reference quantile at p=" + csv::format_double(reference.probabilities[k]) + " is zero");
    std::vector<double> rel;
    for (const auto& rep : replicates) {
      if (rep.values.size() != reference.values.size()) throw Error(ErrorCode::shape, "quantile count mismatch");
      rel.push_back(std::abs(rep.values[k] - q0) / std::abs(q0));
    }
    out.per_quantile.push_back(median_of(rel));
    out.sum += out.per_quantile.back();
  }
  return out;
}

std::vector<VarianceRatioRow> variance_ratios(const std::vector<QuantileSet>& a, const std::vector<QuantileSet>& b) {
  if (a.size() < 2 || b.size() < 2) throw Error(ErrorCode::empty_data, "variance ratios need >= 2 replicates per side");
  const std::size_t nq = a.front().values.size();
  std::vector<VarianceRatioRow> rows;
  for (std::size_t k = 0; k < nq; ++k) {
    std::vector<double> va, vb;
    for (const auto& q : a) va.push_back(q.values.at(k));
    for (const auto& q : b) vb.push_back(q.values.at(k));
    VarianceRatioRow row;
    row.probability = a.front().probabilities.at(k);
    row.var_a = sample_variance(va);
    row.var_b = sample_variance(vb);
    row.df1 = static_cast<int>(va.size()) - 1;
    row.df2 = static_cast<int>(vb.size()) - 1;
    if (row.var_b == 0.0) {
      row.infinite = row.var_a > 0.0;
      row.ratio = row.var_a > 0.0 ? std::numeric_limits<double>::infinity() : 1.0;
      row.p_value = row.var_a > 0.0 ? 0.0 : 0.5;
    } else if (row.var_a == 0.0) {
      row.ratio = 0.0;
      row.p_value = 1.0;
    } else {
      row.ratio = row.var_a / row.var_b;
      row.p_value = f_tail_p(row.ratio, row.df1, row.df2);
    }
    rows.push_back(row);
  }
  return rows;
}

// ---------------------------------------------------------------------------

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  try {
    c.raw = j;
    if (!j.is_object()) throw Error(ErrorCode::config, "config must be a JSON object");
    c.model = j.at("model");
    const auto model = make_model(c.model);

    c.methods = j.value("methods", std::vector<std::string>{});
    if (c.methods.empty()) throw Error(ErrorCode::config, "method list is empty");
    for (const auto& m : c.methods)
      if (!known_methods().count(m)) throw Error(ErrorCode::config, "unknown method '" + m + "'");

    const auto& obs = j.at("observed");
    if (obs.contains("stats")) {
      c.observed_stats = obs.at("stats").get<std::vector<double>>();
      if (c.observed_stats.size() != model->stat_dim())
        throw Error(ErrorCode::config, "observed stats length != model statistic count");
    } else if (obs.contains("params")) {
      c.true_params = obs.at("params").get<std::vector<double>>();
      if (c.true_params->size() != model->param_dim())
        throw Error(ErrorCode::config, "observed params length != model parameter count");
    } else {
      throw Error(ErrorCode::config, "observed needs 'stats' or 'params'");
    }

    c.rows = j.value("M", c.rows);
    if (c.rows < 1) throw Error(ErrorCode::config, "M must be >= 1");
    if (j.contains("p_delta")) {
      c.p_delta = j.at("p_delta").is_array() ? j.at("p_delta").get<std::vector<double>>()
                                              : std::vector<double>{j.at("p_delta").get<double>()};
    }
    if (c.p_delta.empty()) throw Error(ErrorCode::config, "p_delta sweep is empty");
    for (double p : c.p_delta)
      if (!(p > 0.0 && p <= 1.0)) throw Error(ErrorCode::config, "p_delta values must lie in (0, 1]");
    c.replicates = j.value("replicates", c.replicates);
    if (c.replicates < 1) throw Error(ErrorCode::config, "replicates must be >= 1");
    c.quantiles = j.value("quantiles", c.quantiles);
    for (double q : c.quantiles)
      if (!(q > 0.0 && q < 1.0)) throw Error(ErrorCode::config, "quantile probabilities must lie in (0, 1)");
    c.seed = j.value("seed", c.seed);
    c.output_dir = j.value("output_dir", std::string{});
    if (j.contains("train")) c.train = TrainConfig::from_json(j.at("train"));
    if (j.contains("anch")) {
      c.anch = AnchConfig::from_json(j.at("anch"));
    } else {
      c.anch.stage1_rows = std::max<std::size_t>(1, c.rows / 2);
      c.anch.stage2_rows = std::max<std::size_t>(1, c.rows - c.rows / 2);
    }
    if (j.contains("transforms")) {
      for (const auto& t : j.at("transforms")) c.transforms.push_back(ResponseTransform::from_json(t));
      if (c.transforms.size() != model->param_dim())
        throw Error(ErrorCode::config, "one transform per parameter is required");
    }
    if (j.contains("reference")) {
      const auto& ref = j.at("reference");
      if (ref.contains("exact_trials")) {
        if (model->id() != "infinite_sites")
          throw Error(ErrorCode::config, "the exact reference exists only for infinite_sites");
        c.exact_reference_trials = ref.at("exact_trials").get<std::size_t>();
      }
      if (ref.contains("quantiles")) {
        c.reference_quantiles = ref.at("quantiles").get<std::vector<std::vector<double>>>();
        if (c.reference_quantiles->size() != model->param_dim())
          throw Error(ErrorCode::config, "reference quantiles needed for every parameter");
        for (const auto& q : *c.reference_quantiles)
          if (q.size() != c.quantiles.size()) throw Error(ErrorCode::config, "reference quantile count mismatch");
      }
    }
    if (j.contains("variance_ratio")) {
      for (const auto& pair : j.at("variance_ratio")) {
        const auto a = pair.at("a").get<std::string>();
        const auto b = pair.at("b").get<std::string>();
        for (const auto& m : {a, b}) {
          const std::string base = m == kStage1 ? "anch" : m;
          if (std::find(c.methods.begin(), c.methods.end(), base) == c.methods.end())
            throw Error(ErrorCode::config, "variance_ratio method '" + m + "' is not in the method list");
        }
        c.variance_ratio_pairs.emplace_back(a, b);
      }
      if (c.replicates < 2) throw Error(ErrorCode::config, "variance ratios need replicates >= 2");
    }
    c.write_posteriors = j.value("write_posteriors", c.write_posteriors);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::config, e.what());
  }
  return c;
}

std::string config_hash(const nlohmann::json& raw) {
  const std::string text = raw.dump();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) h = (h ^ c) * 1099511628211ULL;
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::vector<double> observed_statistics(const ExperimentConfig& cfg, const GenerativeModel& model) {
  if (!cfg.true_params) return cfg.observed_stats;
  const std::uint64_t obs_seed = cfg.raw.at("observed").value("seed", Rng::derive(cfg.seed, {kObservedKey}));
  Rng rng(obs_seed, 0);
  return model.simulate(*cfg.true_params, rng);
}

namespace {

std::vector<ResponseTransform> effective_transforms(const ExperimentConfig& cfg, const GenerativeModel& model) {
  return cfg.transforms.empty() ? model.default_transforms() : cfg.transforms;
}

}  // namespace

std::vector<CellResult> run_grid(const ExperimentConfig& cfg, int workers) {
  const auto model = make_model(cfg.model);
  const std::vector<double> s_obs = observed_statistics(cfg, *model);
  const auto transforms = effective_transforms(cfg, *model);

  // Tables are shared by every method and p_delta within a replicate.
  const bool needs_table =
      std::any_of(cfg.methods.begin(), cfg.methods.end(), [](const std::string& m) { return m != "anch"; });
  std::vector<ReferenceTable> tables(needs_table ? static_cast<std::size_t>(cfg.replicates) : 0);
  std::vector<std::string> table_errors(tables.size());
  parallel_for(tables.size(), workers, [&](std::size_t r) {
    try {
      tables[r] = build_reference_table(*model, cfg.rows, Rng::derive(cfg.seed, {kTableKey, r}), 1);
    } catch (const std::exception& e) {
      table_errors[r] = std::string("reference table: ") + e.what();
    }
  });

  std::vector<CellResult> cells;
  for (const auto& m : cfg.methods)
    for (std::size_t p = 0; p < cfg.p_delta.size(); ++p)
      for (int r = 0; r < cfg.replicates; ++r) {
        CellResult c;
        c.method = m;
        c.p_index = p;
        c.p_delta = cfg.p_delta[p];
        c.replicate = r;
        cells.push_back(std::move(c));
      }

  parallel_for(cells.size(), workers, [&](std::size_t idx) {
    CellResult& c = cells[idx];
    const std::uint64_t cell_seed =
        Rng::derive(cfg.seed, {method_key(c.method), c.p_index, static_cast<std::uint64_t>(c.replicate)});
    try {
      if (c.method == "anch") {
        AnchConfig ac = cfg.anch;
        if (!cfg.raw.contains("anch") || !cfg.raw.at("anch").contains("p_delta")) {
          ac.stage1_p_delta = c.p_delta;
          ac.stage2_p_delta = c.p_delta;
        }
        const AnchResult res = anch_run(*model, s_obs, ac, cfg.train, transforms, cell_seed, 1);
        c.posterior = res.final_posterior;
        c.stage1_posterior = res.stage1;
        c.stage1_quantiles = posterior_quantiles(res.stage1, cfg.quantiles);
        c.anch_report = res.report();
        c.warnings = res.warnings;
        c.method_used = res.stage2_ran ? "anch" : "anch_stage1_only";
      } else {
        const auto& table_error = table_errors[static_cast<std::size_t>(c.replicate)];
        if (!table_error.empty()) throw std::runtime_error(table_error);
        Rng rng(cell_seed, 0);
        c.posterior = run_estimator(method_from_string(c.method), tables[static_cast<std::size_t>(c.replicate)],
                                    s_obs, c.p_delta, transforms, cfg.train, rng);
        c.warnings = c.posterior.warnings;
        c.method_used = to_string(c.posterior.method);
      }
      c.quantiles = posterior_quantiles(c.posterior, cfg.quantiles);
      c.ok = true;
    } catch (const std::exception& e) {
      c.ok = false;
      c.error = e.what();
    }
  });
  return cells;
}

std::optional<std::vector<QuantileSet>> reference_quantiles(const ExperimentConfig& cfg, int workers) {
  if (cfg.reference_quantiles) {
    std::vector<QuantileSet> out;
    for (const auto& v : *cfg.reference_quantiles) out.push_back({cfg.quantiles, v});
    return out;
  }
  if (cfg.exact_reference_trials) {
    const auto model = make_model(cfg.model);
    const auto& is = dynamic_cast<const InfiniteSitesModel&>(*model);
    const std::vector<double> s_obs = observed_statistics(cfg, *model);
    const double s = s_obs.at(0);
    if (s < 0.0 || s != std::floor(s)) throw Error(ErrorCode::config, "exact reference needs an integer observation");
    const ExactOracleResult ex = exact_oracle_ex1(is.prior_mean(), is.sample_size(), static_cast<std::uint64_t>(s),
                                                  *cfg.exact_reference_trials, Rng::derive(cfg.seed, {kExactKey}),
                                                  workers);
    const std::vector<double> ones(ex.accepted.size(), 1.0);
    return std::vector<QuantileSet>{{cfg.quantiles, weighted_quantiles(ex.accepted, ones, cfg.quantiles)}};
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Aggregation over per-replicate records

namespace {

struct Record {
  std::string method;
  std::size_t p_index;
  int replicate;
  std::vector<QuantileSet> quantiles;  // per parameter
};

std::vector<Record> records_from_cells(const std::vector<CellResult>& cells) {
  std::vector<Record> out;
  for (const auto& c : cells) {
    if (!c.ok) continue;
    out.push_back({c.method, c.p_index, c.replicate, c.quantiles});
    if (c.stage1_quantiles) out.push_back({kStage1, c.p_index, c.replicate, *c.stage1_quantiles});
  }
  return out;
}

// method -> p_index -> param -> replicate quantile sets
using Grouped = std::map<std::string, std::map<std::size_t, std::vector<std::vector<QuantileSet>>>>;

Grouped group(const std::vector<Record>& records, std::size_t params) {
  Grouped g;
  for (const auto& r : records) {
    auto& per_param = g[r.method][r.p_index];
    if (per_param.empty()) per_param.resize(params);
    for (std::size_t k = 0; k < params; ++k) per_param[k].push_back(r.quantiles.at(k));
  }
  return g;
}

std::vector<std::string> method_order(const ExperimentConfig& cfg) {
  std::vector<std::string> order;
  for (const auto& m : cfg.methods) {
    order.push_back(m);
    if (m == "anch") order.push_back(kStage1);
  }
  return order;
}

nlohmann::json number_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

nlohmann::json aggregate_records(const ExperimentConfig& cfg, const std::vector<Record>& records,
                                 const std::optional<std::vector<QuantileSet>>& reference, std::size_t params) {
  const Grouped g = group(records, params);
  nlohmann::json medians = nlohmann::json::array();
  nlohmann::json rmaes = nlohmann::json::array();
  nlohmann::json ratios = nlohmann::json::array();

  for (const auto& m : method_order(cfg)) {
    auto mit = g.find(m);
    if (mit == g.end()) continue;
    for (const auto& [p_index, per_param] : mit->second) {
      for (std::size_t k = 0; k < params; ++k) {
        const auto& reps = per_param[k];
        for (std::size_t q = 0; q < cfg.quantiles.size(); ++q) {
          std::vector<double> v;
          for (const auto& rep : reps) v.push_back(rep.values.at(q));
          medians.push_back({{"method", m}, {"p_delta", cfg.p_delta[p_index]}, {"param", k + 1},
                             {"probability", cfg.quantiles[q]}, {"median", median_of(v)},
                             {"replicates", reps.size()}});
        }
        if (reference) {
          nlohmann::json entry = {{"method", m}, {"p_delta", cfg.p_delta[p_index]}, {"param", k + 1},
                                  {"replicates", reps.size()}};
          try {
            const RmaeResult r = rmae(reps, (*reference)[k]);
            entry["probabilities"] = r.probabilities;
            entry["rmae"] = r.per_quantile;
            entry["sum"] = r.sum;
          } catch (const Error& e) {
            entry["error"] = e.what();
          }
          rmaes.push_back(entry);
        }
      }
    }
  }

  for (const auto& [a, b] : cfg.variance_ratio_pairs) {
    auto ait = g.find(a);
    auto bit = g.find(b);
    if (ait == g.end() || bit == g.end()) continue;
    for (const auto& [p_index, pa] : ait->second) {
      auto pb = bit->second.find(p_index);
      if (pb == bit->second.end()) continue;
      for (std::size_t k = 0; k < params; ++k) {
        nlohmann::json entry = {{"method_a", a}, {"method_b", b}, {"p_delta", cfg.p_delta[p_index]}, {"param", k + 1}};
        try {
          nlohmann::json rows = nlohmann::json::array();
          for (const auto& row : variance_ratios(pa[k], pb->second[k]))
            rows.push_back({{"probability", row.probability}, {"var_a", row.var_a}, {"var_b", row.var_b},
                            {"ratio", number_or_null(row.ratio)}, {"infinite", row.infinite},
                            {"p_value", row.p_value}, {"df1", row.df1}, {"df2", row.df2}});
          entry["rows"] = rows;
        } catch (const Error& e) {
          entry["error"] = e.what();
        }
        ratios.push_back(entry);
      }
    }
  }
  return {{"median_quantiles", medians}, {"rmae", rmaes}, {"variance_ratios", ratios},
          {"rmae_note", "RMAE uses absolute relative errors |Q - Q0| / |Q0|; sum over the quantiles"}};
}

std::size_t param_count(const ExperimentConfig& cfg) { return make_model(cfg.model)->param_dim(); }

}  // namespace

nlohmann::json aggregate(const ExperimentConfig& cfg, const std::vector<CellResult>& cells,
                         const std::optional<std::vector<QuantileSet>>& reference) {
  return aggregate_records(cfg, records_from_cells(cells), reference, param_count(cfg));
}

nlohmann::json variance_ratio_study(const ExperimentConfig& cfg, const std::string& method_a,
                                    const std::string& method_b, int workers) {
  ExperimentConfig c = cfg;
  c.methods.clear();
  for (const auto& m : {method_a, method_b}) {
    const std::string base = m == kStage1 ? "anch" : m;
    if (std::find(c.methods.begin(), c.methods.end(), base) == c.methods.end()) c.methods.push_back(base);
  }
  if (c.replicates < 2) throw Error(ErrorCode::config, "variance ratios need replicates >= 2");
  c.variance_ratio_pairs = {{method_a, method_b}};
  return aggregate(c, run_grid(c, workers), std::nullopt).at("variance_ratios");
}

// ---------------------------------------------------------------------------
// Files

fs::path run_directory(const ExperimentConfig& cfg, const fs::path& output_root) {
  return output_root / ("run-" + config_hash(cfg.raw).substr(0, 12) + "-s" + std::to_string(cfg.seed));
}

namespace {

std::string p_label(std::size_t p_index) { return "p" + std::to_string(p_index); }

csv::Document quantile_document(const ExperimentConfig& cfg, const std::vector<Record>& records) {
  csv::Document doc;
  doc.header = {"method", "p_index", "p_delta", "replicate", "param", "probability", "value"};
  for (const auto& r : records)
    for (std::size_t k = 0; k < r.quantiles.size(); ++k)
      for (std::size_t q = 0; q < r.quantiles[k].values.size(); ++q)
        doc.rows.push_back({r.method, std::to_string(r.p_index), csv::format_double(cfg.p_delta[r.p_index]),
                            std::to_string(r.replicate), std::to_string(k + 1),
                            csv::format_double(r.quantiles[k].probabilities[q]),
                            csv::format_double(r.quantiles[k].values[q])});
  return doc;
}

std::vector<Record> records_from_document(const csv::Document& doc, std::size_t params) {
  std::map<std::tuple<std::string, std::size_t, int>, std::vector<QuantileSet>> acc;
  std::vector<std::tuple<std::string, std::size_t, int>> order;
  for (const auto& row : doc.rows) {
    const auto key = std::make_tuple(row[0], static_cast<std::size_t>(std::stoul(row[1])), std::stoi(row[3]));
    auto [it, inserted] = acc.try_emplace(key);
    if (inserted) {
      it->second.resize(params);
      order.push_back(key);
    }
    const std::size_t k = std::stoul(row[4]) - 1;
    it->second.at(k).probabilities.push_back(csv::parse_double(row[5]));
    it->second.at(k).values.push_back(csv::parse_double(row[6]));
  }
  std::vector<Record> out;
  for (const auto& key : order) out.push_back({std::get<0>(key), std::get<1>(key), std::get<2>(key), acc[key]});
  return out;
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::io, "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

void write_aggregate_csvs(const fs::path& dir, const nlohmann::json& agg) {
  csv::Document med;
  med.header = {"method", "p_delta", "param", "probability", "median"};
  for (const auto& e : agg.at("median_quantiles"))
    med.rows.push_back({e.at("method").get<std::string>(), csv::format_double(e.at("p_delta").get<double>()),
                        std::to_string(e.at("param").get<int>()), csv::format_double(e.at("probability").get<double>()),
                        csv::format_double(e.at("median").get<double>())});
  csv::write(dir / "median_quantiles.csv", med);

  csv::Document rm;
  rm.header = {"method", "p_delta", "param", "probability", "rmae"};
  for (const auto& e : agg.at("rmae")) {
    if (e.contains("error")) continue;
    const auto probs = e.at("probabilities").get<std::vector<double>>();
    const auto vals = e.at("rmae").get<std::vector<double>>();
    const std::vector<std::string> prefix = {e.at("method").get<std::string>(),
                                             csv::format_double(e.at("p_delta").get<double>()),
                                             std::to_string(e.at("param").get<int>())};
    for (std::size_t q = 0; q < probs.size(); ++q) {
      auto row = prefix;
      row.push_back(csv::format_double(probs[q]));
      row.push_back(csv::format_double(vals[q]));
      rm.rows.push_back(row);
    }
    auto row = prefix;
    row.push_back("sum");
    row.push_back(csv::format_double(e.at("sum").get<double>()));
    rm.rows.push_back(row);
  }
  if (!agg.at("rmae").empty()) csv::write(dir / "rmae.csv", rm);

  csv::Document vr;
  vr.header = {"method_a", "method_b", "p_delta", "param", "probability", "var_a", "var_b", "ratio", "p_value",
               "df1", "df2"};
  for (const auto& e : agg.at("variance_ratios")) {
    if (e.contains("error")) continue;
    for (const auto& r : e.at("rows"))
      vr.rows.push_back({e.at("method_a").get<std::string>(), e.at("method_b").get<std::string>(),
                         csv::format_double(e.at("p_delta").get<double>()), std::to_string(e.at("param").get<int>()),
                         csv::format_double(r.at("probability").get<double>()),
                         csv::format_double(r.at("var_a").get<double>()),
                         csv::format_double(r.at("var_b").get<double>()),
                         r.at("ratio").is_null() ? "inf" : csv::format_double(r.at("ratio").get<double>()),
                         csv::format_double(r.at("p_value").get<double>()), std::to_string(r.at("df1").get<int>()),
                         std::to_string(r.at("df2").get<int>())});
  }
  if (!agg.at("variance_ratios").empty()) csv::write(dir / "variance_ratio.csv", vr);
}

}  // namespace

ExperimentReport run_experiment(const ExperimentConfig& cfg, int workers, const fs::path& output_root) {
  ExperimentReport report;
  report.run_dir = run_directory(cfg, output_root);
  fs::create_directories(report.run_dir);
  write_json(report.run_dir / "config.json", cfg.raw);

  const auto model = make_model(cfg.model);
  const std::vector<double> s_obs = observed_statistics(cfg, *model);
  const auto reference = reference_quantiles(cfg, workers);
  report.cells = run_grid(cfg, workers);
  const std::vector<Record> records = records_from_cells(report.cells);
  const nlohmann::json agg = aggregate_records(cfg, records, reference, model->param_dim());

  csv::write(report.run_dir / "quantiles.csv", quantile_document(cfg, records));
  if (reference) {
    csv::Document doc;
    doc.header = {"param", "probability", "value"};
    for (std::size_t k = 0; k < reference->size(); ++k)
      for (std::size_t q = 0; q < (*reference)[k].values.size(); ++q)
        doc.rows.push_back({std::to_string(k + 1), csv::format_double((*reference)[k].probabilities[q]),
                            csv::format_double((*reference)[k].values[q])});
    csv::write(report.run_dir / "reference.csv", doc);
  }
  write_aggregate_csvs(report.run_dir, agg);

  nlohmann::json cells = nlohmann::json::array();
  for (const auto& c : report.cells) {
    nlohmann::json cj = {{"method", c.method}, {"p_index", c.p_index}, {"p_delta", c.p_delta},
                         {"replicate", c.replicate}, {"status", c.ok ? "ok" : "failed"}};
    if (!c.ok) {
      cj["error"] = c.error;
      ++report.failed_cells;
    } else {
      cj["method_used"] = c.method_used;
      cj["accepted"] = c.posterior.size();
      cj["warnings"] = c.warnings;
      if (c.anch_report) cj["anch"] = *c.anch_report;
      if (cfg.write_posteriors) {
        const std::string stem = c.method + "_" + p_label(c.p_index) + "_r" + std::to_string(c.replicate);
        csv::write_posterior(report.run_dir / "posteriors" / (stem + ".csv"), c.posterior);
        if (c.stage1_posterior)
          csv::write_posterior(report.run_dir / "posteriors" / (stem + "_stage1.csv"), *c.stage1_posterior);
      }
    }
    cells.push_back(cj);
  }

  report.json = {{"provenance", {{"seed", cfg.seed}, {"config_hash", config_hash(cfg.raw)}, {"version", kVersion}}},
                 {"config", cfg.raw},
                 {"observed_stats", s_obs},
                 {"cells", cells},
                 {"failed_cells", report.failed_cells},
                 {"aggregates", agg}};
  write_json(report.run_dir / "report.json", report.json);
  return report;
}

AuditResult audit_report(const fs::path& report_path) {
  std::ifstream in(report_path);
  if (!in) throw Error(ErrorCode::io, "cannot open " + report_path.string());
  nlohmann::json report;
  try {
    in >> report;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::io, std::string("malformed report: ") + e.what());
  }
  const fs::path dir = report_path.parent_path();
  const ExperimentConfig cfg = ExperimentConfig::from_json(report.at("config"));
  const std::size_t params = param_count(cfg);

  std::optional<std::vector<QuantileSet>> reference;
  if (fs::exists(dir / "reference.csv")) {
    const csv::Document doc = csv::read(dir / "reference.csv");
    std::vector<QuantileSet> ref(params);
    for (const auto& row : doc.rows) {
      const std::size_t k = std::stoul(row[0]) - 1;
      ref.at(k).probabilities.push_back(csv::parse_double(row[1]));
      ref.at(k).values.push_back(csv::parse_double(row[2]));
    }
    reference = std::move(ref);
  }
  const std::vector<Record> records = records_from_document(csv::read(dir / "quantiles.csv"), params);
  const nlohmann::json recomputed = aggregate_records(cfg, records, reference, params);

  AuditResult out;
  const nlohmann::json& stored = report.at("aggregates");
  for (const char* key : {"median_quantiles", "rmae", "variance_ratios"}) {
    if (stored.at(key) != recomputed.at(key)) {
      out.consistent = false;
      out.mismatches.push_back(std::string(key) + " differs from recomputation");
    }
  }
  return out;
}

}  // namespace abc::bench
