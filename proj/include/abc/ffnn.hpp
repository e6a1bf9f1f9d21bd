#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "abc/rng.hpp"
#include "abc/stats.hpp"

namespace abc {

/// Single-hidden-layer network with logistic hidden units and a linear output:
///   z_j = logistic(w1[j,0] + sum_k w1[j,k] s_k),  g(s) = w2[0] + sum_j w2[j] z_j
class FfnnModel {
 public:
  FfnnModel() = default;
  /// Zero-initialised network.
  FfnnModel(int hidden_units, int input_dim);

  int hidden_units() const { return hidden_; }
  int input_dim() const { return input_dim_; }
  std::size_t parameter_count() const { return w1_.size() + w2_.size(); }

  /// H x (D+1) row-major; column 0 is the bias.
  std::span<double> w1() { return w1_; }
  std::span<const double> w1() const { return w1_; }
  double& w1(int j, int k) { return w1_[static_cast<std::size_t>(j) * (input_dim_ + 1) + k]; }
  double w1(int j, int k) const { return w1_[static_cast<std::size_t>(j) * (input_dim_ + 1) + k]; }
  /// H + 1 entries; entry 0 is the output bias.
  std::span<double> w2() { return w2_; }
  std::span<const double> w2() const { return w2_; }

  /// Flat parameter vector: w1 (row-major) followed by w2.
  std::vector<double> parameters() const;
  void set_parameters(std::span<const double> flat);

  nlohmann::json to_json() const;
  static FfnnModel from_json(const nlohmann::json& j);

 private:
  int hidden_ = 0;
  int input_dim_ = 0;
  std::vector<double> w1_;
  std::vector<double> w2_;
};

double logistic(double x);

/// Network output for one input vector (no standardisation applied).
double ffnn_forward(const FfnnModel& model, std::span<const double> s);
/// Row-wise outputs for an M x D input matrix.
Eigen::VectorXd ffnn_forward_batch(const FfnnModel& model, const Eigen::MatrixXd& inputs);

struct LossGradient {
  double loss = 0.0;
  std::vector<double> gradient;
};

/// sum_i w_i (y_i - g(s_i))^2 + lambda ||w||^2 and its backpropagated gradient.
LossGradient ffnn_loss_and_gradient(const FfnnModel& model, const Eigen::MatrixXd& inputs,
                                    std::span<const double> responses,
                                    std::span<const double> weights, double lambda);

/// Per-coordinate affine map applied before the network.
struct Standardization {
  std::vector<double> mean;
  std::vector<double> scale;

  /// Weighted mean 0 / variance 1; zero-variance coordinates keep scale 1.
  static Standardization fit(const Eigen::MatrixXd& inputs, std::span<const double> weights);
  Eigen::MatrixXd apply(const Eigen::MatrixXd& inputs) const;
  std::vector<double> apply(std::span<const double> s) const;
};

/// A network together with the input standardisation it was trained on.
struct TrainedNet {
  FfnnModel net;
  Standardization input;

  double predict(std::span<const double> s) const;
  Eigen::VectorXd predict_batch(const Eigen::MatrixXd& inputs) const;

  nlohmann::json to_json() const;
  static TrainedNet from_json(const nlohmann::json& j);
};

struct TrainConfig {
  int hidden_units = 4;
  double lambda = 1e-3;
  int max_iterations = 100;
  /// Applies to the gradient of the criterion divided by the total weight.
  double gradient_tolerance = 1e-6;
  int restarts = 5;

  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

struct RestartReport {
  double initial_loss = 0.0;
  double final_loss = 0.0;
  int iterations = 0;
  bool converged = false;
  bool diverged = false;
};

struct TrainResult {
  TrainedNet model;
  std::vector<RestartReport> restarts;
  std::size_t best_restart = 0;
  std::vector<std::string> warnings;
};

/// Uniform(-0.5, 0.5) / sqrt(fan-in) initial weights.
FfnnModel random_init(int hidden_units, int input_dim, Rng& rng);

/// Best-of-restarts fit of the regularised weighted criterion.
/// Throws abc::Error(training_divergence) when every restart diverges.
TrainResult train_net(const Eigen::MatrixXd& stats, std::span<const double> responses,
                      std::span<const double> weights, const TrainConfig& config, Rng& rng);

/// Floor applied to |residual| before taking logs.
inline constexpr double kResidualFloor = 1e-8;

/// log(max((y - m)^2, floor^2)) per row.
std::vector<double> log_squared_residuals(std::span<const double> responses,
                                          std::span<const double> fitted);

struct MeanVarNets {
  TrainedNet mean_net;
  TrainedNet logvar_net;
  ResponseTransform transform = ResponseTransform::identity();

  double mean(std::span<const double> s) const { return mean_net.predict(s); }
  /// exp(logvar / 2), strictly positive.
  double sigma(std::span<const double> s) const;

  nlohmann::json to_json() const;
  static MeanVarNets from_json(const nlohmann::json& j);
};

struct MeanVarFit {
  MeanVarNets nets;
  std::vector<std::string> warnings;
};

/// Fits the conditional mean, then the log squared residuals, with the same
/// weights and configuration. `responses` are already on the transformed scale.
MeanVarFit fit_mean_var(const Eigen::MatrixXd& stats, std::span<const double> responses,
                        std::span<const double> weights, const TrainConfig& config, Rng& rng,
                        const ResponseTransform& transform = ResponseTransform::identity());

}  // namespace abc
