#include "abc/ffnn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "abc/errors.hpp"
#include "abc/optimizer.hpp"
#include "abc/simd.hpp"

namespace abc {

FfnnModel::FfnnModel(int hidden_units, int input_dim)
    : hidden_(hidden_units), input_dim_(input_dim) {
  if (hidden_units < 1) throw Error(ErrorCode::config, "hidden_units must be >= 1");
  if (input_dim < 1) throw Error(ErrorCode::shape, "input_dim must be >= 1");
  w1_.assign(static_cast<std::size_t>(hidden_units) * (input_dim + 1), 0.0);
  w2_.assign(static_cast<std::size_t>(hidden_units) + 1, 0.0);
}

std::vector<double> FfnnModel::parameters() const {
  std::vector<double> flat(w1_);
  flat.insert(flat.end(), w2_.begin(), w2_.end());
  return flat;
}

void FfnnModel::set_parameters(std::span<const double> flat) {
  if (flat.size() != parameter_count()) throw Error(ErrorCode::shape, "parameter vector length");
  std::copy(flat.begin(), flat.begin() + static_cast<std::ptrdiff_t>(w1_.size()), w1_.begin());
  std::copy(flat.begin() + static_cast<std::ptrdiff_t>(w1_.size()), flat.end(), w2_.begin());
}

nlohmann::json FfnnModel::to_json() const {
  return {{"hidden_units", hidden_}, {"input_dim", input_dim_}, {"w1", w1_}, {"w2", w2_}};
}

FfnnModel FfnnModel::from_json(const nlohmann::json& j) {
  FfnnModel m(j.at("hidden_units").get<int>(), j.at("input_dim").get<int>());
  const auto w1 = j.at("w1").get<std::vector<double>>();
  const auto w2 = j.at("w2").get<std::vector<double>>();
  if (w1.size() != m.w1_.size() || w2.size() != m.w2_.size())
    throw Error(ErrorCode::shape, "serialized network has inconsistent weight counts");
  m.w1_ = w1;
  m.w2_ = w2;
  return m;
}

double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double ffnn_forward(const FfnnModel& model, std::span<const double> s) {
  const int d = model.input_dim();
  if (static_cast<int>(s.size()) != d) throw Error(ErrorCode::shape, "input length != input_dim");
  const auto w2 = model.w2();
  double out = w2[0];
  for (int j = 0; j < model.hidden_units(); ++j) {
    double a = model.w1(j, 0);
    for (int k = 0; k < d; ++k) a += model.w1(j, k + 1) * s[k];
    out += w2[j + 1] * logistic(a);
  }
  return out;
}

namespace {

// Hidden activations (M x H, column-major) for a batch.
Eigen::MatrixXd hidden_layer(const FfnnModel& model, const Eigen::MatrixXd& inputs) {
  const auto& kern = simd::kernels();
  const Eigen::Index m = inputs.rows();
  const auto n = static_cast<std::size_t>(m);
  Eigen::MatrixXd z(m, model.hidden_units());
  for (int j = 0; j < model.hidden_units(); ++j) {
    double* a = z.col(j).data();
    std::fill(a, a + m, model.w1(j, 0));
    for (int k = 0; k < model.input_dim(); ++k) kern.axpy(model.w1(j, k + 1), inputs.col(k).data(), a, n);
    for (Eigen::Index i = 0; i < m; ++i) a[i] = logistic(a[i]);
  }
  return z;
}

Eigen::VectorXd output_layer(const FfnnModel& model, const Eigen::MatrixXd& z) {
  const auto& kern = simd::kernels();
  const auto w2 = model.w2();
  Eigen::VectorXd out = Eigen::VectorXd::Constant(z.rows(), w2[0]);
  for (int j = 0; j < model.hidden_units(); ++j)
    kern.axpy(w2[j + 1], z.col(j).data(), out.data(), static_cast<std::size_t>(z.rows()));
  return out;
}

void check_batch(const FfnnModel& model, const Eigen::MatrixXd& inputs) {
  if (inputs.cols() != model.input_dim()) throw Error(ErrorCode::shape, "input columns != input_dim");
}

}  // namespace

Eigen::VectorXd ffnn_forward_batch(const FfnnModel& model, const Eigen::MatrixXd& inputs) {
  check_batch(model, inputs);
  return output_layer(model, hidden_layer(model, inputs));
}

LossGradient ffnn_loss_and_gradient(const FfnnModel& model, const Eigen::MatrixXd& inputs,
                                    std::span<const double> responses,
                                    std::span<const double> weights, double lambda) {
  check_batch(model, inputs);
  const Eigen::Index m = inputs.rows();
  const auto n = static_cast<std::size_t>(m);
  if (responses.size() != n || weights.size() != n)
    throw Error(ErrorCode::shape, "responses/weights length != rows");
  const auto& kern = simd::kernels();
  const int h = model.hidden_units();
  const int d = model.input_dim();

  const Eigen::MatrixXd z = hidden_layer(model, inputs);
  const Eigen::VectorXd out = output_layer(model, z);

  // g_i = d loss / d out_i = -2 w_i r_i
  std::vector<double> resid(n), wr(n), g(n);
  for (std::size_t i = 0; i < n; ++i) resid[i] = responses[i] - out[static_cast<Eigen::Index>(i)];
  kern.multiply(weights.data(), resid.data(), wr.data(), n);
  double loss = kern.dot(wr.data(), resid.data(), n);
  for (std::size_t i = 0; i < n; ++i) g[i] = -2.0 * wr[i];

  LossGradient res;
  res.gradient.assign(model.parameter_count(), 0.0);
  const std::size_t w2_offset = static_cast<std::size_t>(h) * (d + 1);
  const auto w2 = model.w2();
  res.gradient[w2_offset] = std::accumulate(g.begin(), g.end(), 0.0);

  std::vector<double> delta(n);
  for (int j = 0; j < h; ++j) {
    const double* zj = z.col(j).data();
    res.gradient[w2_offset + 1 + j] = kern.dot(g.data(), zj, n);
    const double v = w2[j + 1];
    for (std::size_t i = 0; i < n; ++i) delta[i] = g[i] * v * zj[i] * (1.0 - zj[i]);
    const std::size_t row = static_cast<std::size_t>(j) * (d + 1);
    res.gradient[row] = std::accumulate(delta.begin(), delta.end(), 0.0);
    for (int k = 0; k < d; ++k) res.gradient[row + 1 + k] = kern.dot(delta.data(), inputs.col(k).data(), n);
  }

  const std::vector<double> params = model.parameters();
  double penalty = 0.0;
  for (std::size_t p = 0; p < params.size(); ++p) {
    penalty += params[p] * params[p];
    res.gradient[p] += 2.0 * lambda * params[p];
  }
  res.loss = loss + lambda * penalty;
  return res;
}

Standardization Standardization::fit(const Eigen::MatrixXd& inputs, std::span<const double> weights) {
  const Eigen::Index m = inputs.rows();
  if (static_cast<Eigen::Index>(weights.size()) != m) throw Error(ErrorCode::shape, "weights length != rows");
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (!(total > 0.0)) throw Error(ErrorCode::degenerate_weights, "total weight is zero");
  Standardization st;
  for (Eigen::Index k = 0; k < inputs.cols(); ++k) {
    double mean = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) mean += (weights[i] / total) * inputs(i, k);
    double var = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) {
      const double dev = inputs(i, k) - mean;
      var += (weights[i] / total) * dev * dev;
    }
    const double sd = std::sqrt(var);
    st.mean.push_back(mean);
    st.scale.push_back(sd > 0.0 && std::isfinite(sd) ? sd : 1.0);
  }
  return st;
}

Eigen::MatrixXd Standardization::apply(const Eigen::MatrixXd& inputs) const {
  if (mean.empty()) return inputs;
  if (inputs.cols() != static_cast<Eigen::Index>(mean.size()))
    throw Error(ErrorCode::shape, "standardization dimension mismatch");
  Eigen::MatrixXd out(inputs.rows(), inputs.cols());
  for (Eigen::Index k = 0; k < inputs.cols(); ++k)
    out.col(k) = (inputs.col(k).array() - mean[k]) / scale[k];
  return out;
}

std::vector<double> Standardization::apply(std::span<const double> s) const {
  std::vector<double> out(s.begin(), s.end());
  if (mean.empty()) return out;
  if (s.size() != mean.size()) throw Error(ErrorCode::shape, "standardization dimension mismatch");
  for (std::size_t k = 0; k < s.size(); ++k) out[k] = (s[k] - mean[k]) / scale[k];
  return out;
}

double TrainedNet::predict(std::span<const double> s) const {
  return ffnn_forward(net, input.apply(s));
}

Eigen::VectorXd TrainedNet::predict_batch(const Eigen::MatrixXd& inputs) const {
  return ffnn_forward_batch(net, input.apply(inputs));
}

nlohmann::json TrainedNet::to_json() const {
  return {{"network", net.to_json()},
          {"standardization", {{"mean", input.mean}, {"scale", input.scale}}}};
}

TrainedNet TrainedNet::from_json(const nlohmann::json& j) {
  TrainedNet t;
  t.net = FfnnModel::from_json(j.at("network"));
  t.input.mean = j.at("standardization").at("mean").get<std::vector<double>>();
  t.input.scale = j.at("standardization").at("scale").get<std::vector<double>>();
  return t;
}

nlohmann::json TrainConfig::to_json() const {
  return {{"hidden_units", hidden_units},
          {"lambda", lambda},
          {"max_iterations", max_iterations},
          {"gradient_tolerance", gradient_tolerance},
          {"restarts", restarts}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.hidden_units = j.value("hidden_units", c.hidden_units);
  c.lambda = j.value("lambda", c.lambda);
  c.max_iterations = j.value("max_iterations", c.max_iterations);
  c.gradient_tolerance = j.value("gradient_tolerance", c.gradient_tolerance);
  c.restarts = j.value("restarts", c.restarts);
  if (c.hidden_units < 1 || c.lambda < 0.0 || c.max_iterations < 1 || !(c.gradient_tolerance > 0.0) ||
      c.restarts < 1)
    throw Error(ErrorCode::config, "invalid training configuration");
  return c;
}

FfnnModel random_init(int hidden_units, int input_dim, Rng& rng) {
  FfnnModel model(hidden_units, input_dim);
  const double s1 = 1.0 / std::sqrt(static_cast<double>(input_dim + 1));
  const double s2 = 1.0 / std::sqrt(static_cast<double>(hidden_units + 1));
  for (double& w : model.w1()) w = (rng.uniform() - 0.5) * s1;
  for (double& w : model.w2()) w = (rng.uniform() - 0.5) * s2;
  return model;
}

TrainResult train_net(const Eigen::MatrixXd& stats, std::span<const double> responses,
                      std::span<const double> weights, const TrainConfig& config, Rng& rng) {
  const Eigen::Index m = stats.rows();
  if (m == 0) throw Error(ErrorCode::empty_data, "no training rows");
  if (static_cast<Eigen::Index>(responses.size()) != m || static_cast<Eigen::Index>(weights.size()) != m)
    throw Error(ErrorCode::shape, "responses/weights length != rows");
  const int d = static_cast<int>(stats.cols());

  TrainResult result;
  result.model.input = Standardization::fit(stats, weights);
  const Eigen::MatrixXd x = result.model.input.apply(stats);

  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  std::vector<double> w_norm(weights.size());
  for (std::size_t i = 0; i < weights.size(); ++i) w_norm[i] = weights[i] / total;
  const double lambda_norm = config.lambda / total;

  FfnnModel scratch(config.hidden_units, d);
  if (static_cast<double>(m) < 0.5 * static_cast<double>(scratch.parameter_count()))
    result.warnings.push_back("training rows (" + std::to_string(m) + ") below half the weight count (" +
                              std::to_string(scratch.parameter_count()) + ")");

  const Objective objective = [&](std::span<const double> p, std::span<double> grad) {
    scratch.set_parameters(p);
    const LossGradient lg = ffnn_loss_and_gradient(scratch, x, responses, w_norm, lambda_norm);
    std::copy(lg.gradient.begin(), lg.gradient.end(), grad.begin());
    return lg.loss;
  };

  double best = std::numeric_limits<double>::infinity();
  std::vector<double> best_params;
  for (int r = 0; r < config.restarts; ++r) {
    const FfnnModel init = random_init(config.hidden_units, d, rng);
    const MinimizeResult fit =
        minimize_bfgs(objective, init.parameters(), config.max_iterations, config.gradient_tolerance);
    RestartReport rep;
    rep.initial_loss = fit.initial_value * total;
    rep.final_loss = fit.value * total;
    rep.iterations = fit.iterations;
    rep.converged = fit.converged;
    rep.diverged = fit.diverged || !std::isfinite(fit.value);
    result.restarts.push_back(rep);
    if (!rep.diverged && fit.value < best) {
      best = fit.value;
      best_params = fit.x;
      result.best_restart = static_cast<std::size_t>(r);
    }
  }
  if (best_params.empty())
    throw Error(ErrorCode::training_divergence,
                "all " + std::to_string(config.restarts) + " restarts produced non-finite loss");
  result.model.net = FfnnModel(config.hidden_units, d);
  result.model.net.set_parameters(best_params);
  return result;
}

std::vector<double> log_squared_residuals(std::span<const double> responses,
                                          std::span<const double> fitted) {
  if (responses.size() != fitted.size()) throw Error(ErrorCode::shape, "residual length mismatch");
  constexpr double floor_sq = kResidualFloor * kResidualFloor;
  std::vector<double> out(responses.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double r = responses[i] - fitted[i];
    out[i] = std::log(std::max(r * r, floor_sq));
  }
  return out;
}

double MeanVarNets::sigma(std::span<const double> s) const {
  const double sd = std::exp(0.5 * logvar_net.predict(s));
  return std::max(sd, std::numeric_limits<double>::min());
}

nlohmann::json MeanVarNets::to_json() const {
  return {{"mean_net", mean_net.to_json()},
          {"logvar_net", logvar_net.to_json()},
          {"transform", transform.to_json()}};
}

MeanVarNets MeanVarNets::from_json(const nlohmann::json& j) {
  return {TrainedNet::from_json(j.at("mean_net")), TrainedNet::from_json(j.at("logvar_net")),
          ResponseTransform::from_json(j.at("transform"))};
}

MeanVarFit fit_mean_var(const Eigen::MatrixXd& stats, std::span<const double> responses,
                        std::span<const double> weights, const TrainConfig& config, Rng& rng,
                        const ResponseTransform& transform) {
  MeanVarFit out;
  TrainResult mean_fit = train_net(stats, responses, weights, config, rng);
  const Eigen::VectorXd fitted = mean_fit.model.predict_batch(stats);
  const std::vector<double> log_r2 =
      log_squared_residuals(responses, std::span<const double>(fitted.data(), static_cast<std::size_t>(fitted.size())));
  TrainResult var_fit = train_net(stats, log_r2, weights, config, rng);
  out.nets = {std::move(mean_fit.model), std::move(var_fit.model), transform};
  out.warnings = std::move(mean_fit.warnings);
  out.warnings.insert(out.warnings.end(), var_fit.warnings.begin(), var_fit.warnings.end());
  return out;
}

}  // namespace abc
