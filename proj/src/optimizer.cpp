#include "abc/optimizer.hpp"

#include <cmath>
#include <numeric>

namespace abc {

namespace {

double norm2(std::span<const double> v) {
  return std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
}

}  // namespace

MinimizeResult minimize_bfgs(const Objective& f, std::vector<double> x0, int max_iterations,
                             double gradient_tolerance) {
  const std::size_t n = x0.size();
  MinimizeResult res;
  std::vector<double> g(n), g_new(n), x_new(n), dir(n), s(n), y(n), hy(n);
  double fx = f(x0, g);
  res.initial_value = fx;
  res.x = std::move(x0);
  if (!std::isfinite(fx)) {
    res.value = fx;
    res.diverged = true;
    return res;
  }

  // Inverse Hessian approximation, row-major.
  std::vector<double> h(n * n, 0.0);
  auto reset_h = [&] {
    std::fill(h.begin(), h.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) h[i * n + i] = 1.0;
  };
  reset_h();

  constexpr double armijo = 1e-4;
  int it = 0;
  for (; it < max_iterations; ++it) {
    res.gradient_norm = norm2(g);
    if (res.gradient_norm <= gradient_tolerance) {
      res.converged = true;
      break;
    }
    for (std::size_t i = 0; i < n; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc -= h[i * n + j] * g[j];
      dir[i] = acc;
    }
    double slope = std::inner_product(g.begin(), g.end(), dir.begin(), 0.0);
    if (!(slope < 0.0)) {
      reset_h();
      for (std::size_t i = 0; i < n; ++i) dir[i] = -g[i];
      slope = -res.gradient_norm * res.gradient_norm;
    }

    double step = 1.0;
    double f_new = 0.0;
    bool accepted = false;
    for (int k = 0; k < 60; ++k) {
      for (std::size_t i = 0; i < n; ++i) x_new[i] = res.x[i] + step * dir[i];
      f_new = f(x_new, g_new);
      if (std::isfinite(f_new) && f_new <= fx + armijo * step * slope && f_new < fx) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      // No descent along this direction even for tiny steps: restart from
      // steepest descent once, otherwise we are at numerical precision.
      bool was_identity = true;
      for (std::size_t i = 0; i < n && was_identity; ++i)
        for (std::size_t j = 0; j < n; ++j)
          if (h[i * n + j] != (i == j ? 1.0 : 0.0)) {
            was_identity = false;
            break;
          }
      if (was_identity) break;
      reset_h();
      continue;
    }

    for (std::size_t i = 0; i < n; ++i) {
      s[i] = x_new[i] - res.x[i];
      y[i] = g_new[i] - g[i];
    }
    const double sy = std::inner_product(s.begin(), s.end(), y.begin(), 0.0);
    if (sy > 1e-12 * norm2(s) * norm2(y)) {
      for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) acc += h[i * n + j] * y[j];
        hy[i] = acc;
      }
      const double yhy = std::inner_product(y.begin(), y.end(), hy.begin(), 0.0);
      const double rho = 1.0 / sy;
      const double c = (1.0 + rho * yhy) * rho;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
          h[i * n + j] += c * s[i] * s[j] - rho * (hy[i] * s[j] + s[i] * hy[j]);
    }
    res.x.swap(x_new);
    g.swap(g_new);
    fx = f_new;
  }
  res.iterations = it;
  res.value = fx;
  res.gradient_norm = norm2(g);
  if (res.gradient_norm <= gradient_tolerance) res.converged = true;
  return res;
}

}  // namespace abc
