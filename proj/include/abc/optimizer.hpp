#pragma once

#include <functional>
#include <span>
#include <vector>

namespace abc {

/// f(x, grad) returns the objective and writes its gradient.
using Objective = std::function<double(std::span<const double>, std::span<double>)>;

struct MinimizeResult {
  std::vector<double> x;
  double initial_value = 0.0;
  double value = 0.0;
  double gradient_norm = 0.0;
  int iterations = 0;
  bool converged = false;
  bool diverged = false;
};

/// Quasi-Newton (BFGS, dense inverse Hessian) with Armijo backtracking.
/// Each accepted step strictly decreases the objective.
MinimizeResult minimize_bfgs(const Objective& f, std::vector<double> x0, int max_iterations,
                             double gradient_tolerance);

}  // namespace abc
