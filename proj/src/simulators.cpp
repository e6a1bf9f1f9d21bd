#include "abc/simulators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <numeric>

#include "abc/errors.hpp"

namespace abc {

std::vector<double> prior_draw(const GenerativeModel& model, Rng& rng) { return model.prior_draw(rng); }

// ---------------------------------------------------------------------------

std::vector<double> coalescent_intercoalescence_times(int n, Rng& rng) {
  if (n < 2) throw Error(ErrorCode::config, "coalescent sample size must be >= 2");
  std::vector<double> y;
  y.reserve(static_cast<std::size_t>(n - 1));
  for (int j = 2; j <= n; ++j) y.push_back(rng.exponential(0.5 * j * (j - 1)));
  return y;
}

double coalescent_tree_length(int n, Rng& rng) {
  if (n < 2) throw Error(ErrorCode::config, "coalescent sample size must be >= 2");
  double length = 0.0;
  for (int j = 2; j <= n; ++j) length += rng.exponential(0.5 * (j - 1));
  return length;
}

std::uint64_t simulate_infinite_sites(const CoalescentConfig& cfg, Rng& rng) {
  if (cfg.theta < 0.0) throw Error(ErrorCode::config, "theta must be >= 0");
  const double length = coalescent_tree_length(cfg.n, rng);
  return rng.poisson(cfg.theta * length / 2.0);
}

InfiniteSitesModel::InfiniteSitesModel(int n, double prior_mean) : n_(n), prior_mean_(prior_mean) {
  if (n < 2) throw Error(ErrorCode::config, "infinite_sites: n must be >= 2");
  if (prior_mean < 0.0) throw Error(ErrorCode::config, "infinite_sites: prior mean must be >= 0");
}

std::vector<double> InfiniteSitesModel::prior_draw(Rng& rng) const {
  if (prior_mean_ == 0.0) return {0.0};
  return {rng.exponential(1.0 / prior_mean_)};
}

std::vector<double> InfiniteSitesModel::simulate(std::span<const double> params, Rng& rng) const {
  if (params.size() != 1) throw Error(ErrorCode::shape, "infinite_sites expects one parameter");
  return {static_cast<double>(simulate_infinite_sites({n_, params[0]}, rng))};
}

std::vector<Interval> InfiniteSitesModel::prior_support() const {
  return {{0.0, std::numeric_limits<double>::infinity()}};
}

std::vector<ResponseTransform> InfiniteSitesModel::default_transforms() const {
  return {ResponseTransform::log()};
}

nlohmann::json InfiniteSitesModel::to_json() const {
  return {{"id", id()}, {"n", n_}, {"prior_mean", prior_mean_}};
}

// ---------------------------------------------------------------------------

GrowthHistory::GrowthHistory(const ExpansionConfig& cfg)
    : present_size_(cfg.ancestral_size / cfg.alpha),
      ancestral_size_(cfg.ancestral_size),
      onset_(cfg.onset_years / cfg.generation_years),
      growth_rate_(0.0) {
  if (!(cfg.ancestral_size > 0.0)) throw Error(ErrorCode::config, "ancestral size must be positive");
  if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0)) throw Error(ErrorCode::config, "alpha must lie in (0,1)");
  if (!(cfg.generation_years > 0.0) || cfg.onset_years < 0.0)
    throw Error(ErrorCode::config, "invalid onset or generation time");
  if (onset_ > 0.0) growth_rate_ = -std::log(cfg.alpha) / onset_;
}

double GrowthHistory::size_at(double t) const {
  if (t >= onset_) return ancestral_size_;
  return present_size_ * std::exp(-growth_rate_ * t);
}

double GrowthHistory::cumulative_rate(double t) const {
  const double tg = std::min(t, onset_);
  const double rt = growth_rate_ * tg;
  double c = rt < 1e-12 ? tg / present_size_ : std::expm1(rt) / (growth_rate_ * present_size_);
  if (t > onset_) c += (t - onset_) / ancestral_size_;
  return c;
}

double GrowthHistory::time_at(double cumulative) const {
  const double at_onset = cumulative_rate(onset_);
  if (cumulative >= at_onset) return onset_ + (cumulative - at_onset) * ancestral_size_;
  const double x = cumulative * growth_rate_ * present_size_;
  if (growth_rate_ * onset_ < 1e-12) return cumulative * present_size_;
  return std::log1p(x) / growth_rate_;
}

LocusSample simulate_microsat_locus(const ExpansionConfig& cfg, Rng& rng) {
  const int n = cfg.n;
  if (n < 2) throw Error(ErrorCode::config, "expansion: n must be >= 2");
  const GrowthHistory history(cfg);

  const std::size_t nodes = 2 * static_cast<std::size_t>(n) - 1;
  std::vector<double> time(nodes, 0.0);
  std::vector<std::size_t> parent(nodes, nodes);
  std::vector<std::size_t> active(static_cast<std::size_t>(n));
  std::iota(active.begin(), active.end(), std::size_t{0});

  double cumulative = 0.0;
  std::size_t next = static_cast<std::size_t>(n);
  for (std::size_t k = active.size(); k >= 2; --k) {
    cumulative += rng.exponential(0.5 * static_cast<double>(k) * static_cast<double>(k - 1));
    const double t = history.time_at(cumulative);
    const std::size_t a = rng.index(k);
    std::size_t b = rng.index(k - 1);
    if (b >= a) ++b;
    time[next] = t;
    parent[active[a]] = next;
    parent[active[b]] = next;
    active[std::min(a, b)] = next;
    active[std::max(a, b)] = active[k - 1];
    active.pop_back();
    ++next;
  }

  LocusSample out;
  std::vector<int> repeat(nodes, 0);
  // Internal nodes were created in time order, so walking ids downwards
  // visits every parent before its children.
  for (std::size_t v = nodes - 1; v-- > 0;) {
    const std::size_t p = parent[v];
    const double branch = time[p] - time[v];
    const std::uint64_t hits = rng.poisson(cfg.mu * branch);
    int step = 0;
    if (hits > 0) {
      const std::uint64_t up = rng.binomial(hits, 0.5);
      step = static_cast<int>(2 * static_cast<std::int64_t>(up) - static_cast<std::int64_t>(hits));
    }
    out.mutations += hits;
    repeat[v] = repeat[p] + step;
  }
  out.repeats.assign(repeat.begin(), repeat.begin() + n);
  return out;
}

namespace {

struct LocusStats {
  double variance = 0.0;
  double heterozygosity = 0.0;
  double range = 0.0;
  double s1_minus_s0 = 0.0;
};

LocusStats locus_stats(const std::vector<int>& repeats) {
  LocusStats st;
  const auto n = static_cast<double>(repeats.size());
  const double mean = std::accumulate(repeats.begin(), repeats.end(), 0.0) / n;
  double ss = 0.0;
  for (int r : repeats) ss += (r - mean) * (r - mean);
  st.variance = repeats.size() > 1 ? ss / (n - 1.0) : 0.0;

  std::vector<int> sorted(repeats);
  std::sort(sorted.begin(), sorted.end());
  st.range = static_cast<double>(sorted.back() - sorted.front());

  std::vector<std::pair<int, double>> counts;
  for (int r : sorted) {
    if (counts.empty() || counts.back().first != r) counts.emplace_back(r, 0.0);
    counts.back().second += 1.0;
  }
  double homozygosity = 0.0;
  double same_pairs = 0.0;
  double one_step_pairs = 0.0;
  for (std::size_t a = 0; a < counts.size(); ++a) {
    const double c = counts[a].second;
    homozygosity += (c / n) * (c / n);
    same_pairs += c * (c - 1.0) / 2.0;
    if (a + 1 < counts.size() && counts[a + 1].first == counts[a].first + 1)
      one_step_pairs += c * counts[a + 1].second;
  }
  st.heterozygosity = 1.0 - homozygosity;
  const double pairs = n * (n - 1.0) / 2.0;
  st.s1_minus_s0 = pairs > 0.0 ? (one_step_pairs - same_pairs) / pairs : 0.0;
  return st;
}

// Variance implied by heterozygosity under the single-step model.
double heterozygosity_variance(double h) {
  const double inv = 1.0 / (1.0 - h);
  return 0.5 * (inv * inv - 1.0);
}

}  // namespace

std::array<double, kExpansionStats> microsat_summaries(const std::vector<std::vector<int>>& loci) {
  if (loci.empty()) throw Error(ErrorCode::empty_data, "no loci");
  const auto count = static_cast<double>(loci.size());
  std::vector<LocusStats> per;
  per.reserve(loci.size());
  for (const auto& l : loci) {
    if (l.empty()) throw Error(ErrorCode::empty_data, "locus without lineages");
    per.push_back(locus_stats(l));
  }

  double mean_v = 0.0, mean_h = 0.0, mean_vhet = 0.0, expansion = 0.0, shriver = 0.0;
  double log_ratio_sum = 0.0;
  int log_ratio_loci = 0;
  for (const auto& st : per) {
    const double vhet = heterozygosity_variance(st.heterozygosity);
    mean_v += st.variance;
    mean_h += st.heterozygosity;
    mean_vhet += vhet;
    if (st.variance > 0.0 && vhet > 0.0) {
      log_ratio_sum += std::log(st.variance / vhet);
      ++log_ratio_loci;
    }
    if (st.range > 0.0) expansion += st.variance / st.range;
    shriver += st.s1_minus_s0;
  }

  mean_v /= count;
  mean_h /= count;
  mean_vhet /= count;
  expansion /= count;
  shriver /= count;

  double across_var = 0.0;
  if (per.size() > 1) {
    for (const auto& st : per) across_var += (st.variance - mean_v) * (st.variance - mean_v);
    across_var /= count - 1.0;
  }

  std::array<double, kExpansionStats> out{};
  out[0] = mean_v;
  out[1] = mean_h;
  out[2] = log_ratio_loci > 0 ? log_ratio_sum / log_ratio_loci : 0.0;
  out[3] = (mean_v > 0.0 && mean_vhet > 0.0) ? std::log(mean_v / mean_vhet) : 0.0;
  out[4] = mean_v > 0.0 ? across_var / mean_v : 0.0;
  out[5] = expansion;
  out[6] = shriver;
  return out;
}

std::array<double, kExpansionStats> simulate_expansion(const ExpansionConfig& cfg, Rng& rng) {
  if (cfg.loci < 1) throw Error(ErrorCode::config, "expansion: loci must be >= 1");
  std::vector<std::vector<int>> loci;
  loci.reserve(static_cast<std::size_t>(cfg.loci));
  for (int l = 0; l < cfg.loci; ++l) loci.push_back(simulate_microsat_locus(cfg, rng).repeats);
  return microsat_summaries(loci);
}

ExpansionModel::ExpansionModel(const ExpansionConfig& base) : base_(base) {
  if (base.n < 2 || base.loci < 1 || base.mu < 0.0 || !(base.generation_years > 0.0))
    throw Error(ErrorCode::config, "invalid expansion configuration");
}

std::vector<double> ExpansionModel::prior_draw(Rng& rng) const {
  const double t0 = rng.uniform(0.0, 1e5);
  const double na = rng.uniform(0.0, 1e4);
  const double neg_log_alpha = rng.uniform(1.0, 6.0);
  return {t0, na, std::pow(10.0, -neg_log_alpha)};
}

std::vector<double> ExpansionModel::simulate(std::span<const double> params, Rng& rng) const {
  if (params.size() != 3) throw Error(ErrorCode::shape, "expansion expects three parameters");
  ExpansionConfig cfg = base_;
  cfg.onset_years = params[0];
  cfg.ancestral_size = params[1];
  cfg.alpha = params[2];
  const auto stats = simulate_expansion(cfg, rng);
  return {stats.begin(), stats.end()};
}

std::vector<Interval> ExpansionModel::prior_support() const {
  return {{0.0, 1e5}, {0.0, 1e4}, {1e-6, 1e-1}};
}

std::vector<ResponseTransform> ExpansionModel::default_transforms() const {
  return {ResponseTransform::logit(0.0, 1e5), ResponseTransform::logit(0.0, 1e4),
          ResponseTransform::logit(1e-6, 1e-1)};
}

nlohmann::json ExpansionModel::to_json() const {
  return {{"id", id()},          {"n", base_.n},   {"loci", base_.loci},
          {"mu", base_.mu},      {"generation_years", base_.generation_years}};
}

// ---------------------------------------------------------------------------

QueuePath simulate_queue_path(const QueueConfig& cfg, Rng& rng) {
  if (cfg.n < 1) throw Error(ErrorCode::config, "queue: n must be >= 1");
  if (cfg.theta1 < 0.0 || cfg.theta2 < cfg.theta1 || !(cfg.theta3 > 0.0))
    throw Error(ErrorCode::config, "queue: need 0 <= theta1 <= theta2 and theta3 > 0");
  QueuePath path;
  const auto n = static_cast<std::size_t>(cfg.n);
  path.interdeparture.reserve(n);
  path.service.reserve(n);
  path.interarrival.reserve(n);
  double arrivals = 0.0;    // sum_{i<=n} W_i
  double departures = 0.0;  // sum_{i<n} Y_i
  for (std::size_t i = 0; i < n; ++i) {
    const double u = cfg.theta1 + (cfg.theta2 - cfg.theta1) * rng.uniform();
    const double w = rng.exponential(cfg.theta3);
    arrivals += w;
    const double y = arrivals <= departures ? u : u + arrivals - departures;
    departures += y;
    path.service.push_back(u);
    path.interarrival.push_back(w);
    path.interdeparture.push_back(y);
  }
  return path;
}

std::vector<double> simulate_queue(const QueueConfig& cfg, Rng& rng) {
  return simulate_queue_path(cfg, rng).interdeparture;
}

std::vector<double> queue_summaries(std::span<const double> y, int k) {
  if (k != 5 && k != 10 && k != 20) throw Error(ErrorCode::config, "queue summaries: k must be 5, 10 or 20");
  if (y.empty()) throw Error(ErrorCode::empty_data, "queue summaries of an empty path");
  std::vector<double> probs;
  for (int i = 1; i <= k - 2; ++i) probs.push_back(static_cast<double>(i) / (k - 1));
  const std::vector<double> ones(y.size(), 1.0);
  const std::vector<double> q = weighted_quantiles(y, ones, probs);
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(k));
  out.push_back(*std::min_element(y.begin(), y.end()));
  out.insert(out.end(), q.begin(), q.end());
  out.push_back(*std::max_element(y.begin(), y.end()));
  return out;
}

QueueModel::QueueModel(int n, int k) : n_(n), k_(k) {
  if (n < 1) throw Error(ErrorCode::config, "queue: n must be >= 1");
  if (k != 5 && k != 10 && k != 20) throw Error(ErrorCode::config, "queue: k must be 5, 10 or 20");
}

std::vector<double> QueueModel::prior_draw(Rng& rng) const {
  const double t1 = rng.uniform(0.0, 10.0);
  const double gap = rng.uniform(0.0, 10.0);
  const double t3 = rng.uniform(0.0, 10.0);
  return {t1, t1 + gap, t3};
}

std::vector<double> QueueModel::simulate(std::span<const double> params, Rng& rng) const {
  if (params.size() != 3) throw Error(ErrorCode::shape, "queue expects three parameters");
  const auto y = simulate_queue({params[0], params[1], params[2], n_, k_}, rng);
  return queue_summaries(y, k_);
}

std::vector<Interval> QueueModel::prior_support() const { return {{0.0, 10.0}, {0.0, 20.0}, {0.0, 10.0}}; }

std::vector<ResponseTransform> QueueModel::default_transforms() const {
  return {ResponseTransform::logit(0.0, 10.0), ResponseTransform::logit(0.0, 20.0),
          ResponseTransform::logit(0.0, 10.0)};
}

nlohmann::json QueueModel::to_json() const { return {{"id", id()}, {"n", n_}, {"k", k_}}; }

// ---------------------------------------------------------------------------

namespace {

std::mutex& registry_mutex() {
  static std::mutex m;
  return m;
}

std::map<std::string, ModelFactory>& registry() {
  static std::map<std::string, ModelFactory> r;
  return r;
}

bool builtin(const std::string& id) { return id == "infinite_sites" || id == "expansion" || id == "queue"; }

}  // namespace

void register_model(const std::string& id, ModelFactory factory) {
  if (builtin(id)) throw Error(ErrorCode::config, "model id '" + id + "' is built in");
  if (!factory) throw Error(ErrorCode::config, "empty model factory");
  std::lock_guard lock(registry_mutex());
  registry()[id] = std::move(factory);
}

std::unique_ptr<GenerativeModel> make_model(const nlohmann::json& spec) {
  if (!spec.is_object() || !spec.contains("id")) throw Error(ErrorCode::config, "model needs an 'id'");
  const std::string id = spec.at("id").get<std::string>();
  if (id == "infinite_sites")
    return std::make_unique<InfiniteSitesModel>(spec.value("n", 100), spec.value("prior_mean", 50.0));
  if (id == "expansion") {
    ExpansionConfig cfg;
    cfg.n = spec.value("n", cfg.n);
    cfg.loci = spec.value("loci", cfg.loci);
    cfg.mu = spec.value("mu", cfg.mu);
    cfg.generation_years = spec.value("generation_years", cfg.generation_years);
    return std::make_unique<ExpansionModel>(cfg);
  }
  if (id == "queue") return std::make_unique<QueueModel>(spec.value("n", 50), spec.value("k", 20));
  ModelFactory factory;
  {
    std::lock_guard lock(registry_mutex());
    auto it = registry().find(id);
    if (it != registry().end()) factory = it->second;
  }
  if (factory) return factory(spec);
  throw Error(ErrorCode::config, "unknown model id '" + id + "'");
}

}  // namespace abc
