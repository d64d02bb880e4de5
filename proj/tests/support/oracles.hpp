#pragma once

// Test-only numerical oracles, independent of the library's quadrature path.

#include <cmath>
#include <functional>
#include <random>

#include "fofr/grid.hpp"

namespace testsupport {

namespace detail {

inline double simpson(const std::function<double(double)>& f, double a,
                      double b, double fa, double fm, double fb) {
  return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

inline double adaptive_step(const std::function<double(double)>& f, double a,
                            double b, double fa, double fm, double fb,
                            double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = simpson(f, a, m, fa, flm, fm);
  const double right = simpson(f, m, b, fm, frm, fb);
  if (depth <= 0 || std::abs(left + right - whole) <= 15.0 * tol)
    return left + right + (left + right - whole) / 15.0;
  return adaptive_step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) +
         adaptive_step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1);
}

}  // namespace detail

/// Adaptive Simpson quadrature of f over [a, b]. The interval is first cut
/// at an irrational fraction so periodic integrands cannot alias against the
/// bisection pattern.
inline double integrate(const std::function<double(double)>& f, double a,
                        double b, double tol = 1e-12) {
  const double split = a + 0.6180339887498949 * (b - a);
  double total = 0.0;
  for (const auto& [lo, hi] : {std::pair(a, split), std::pair(split, b)}) {
    const double flo = f(lo);
    const double fhi = f(hi);
    const double fm = f(0.5 * (lo + hi));
    const double whole = detail::simpson(f, lo, hi, flo, fm, fhi);
    total += detail::adaptive_step(f, lo, hi, flo, fm, fhi, whole, tol / 2.0, 40);
  }
  return total;
}

inline double integrate01(const std::function<double(double)>& f,
                          double tol = 1e-12) {
  return integrate(f, 0.0, 1.0, tol);
}

/// Evaluates a scalar function on a grid.
inline fofr::FunctionSample sample_function(
    const fofr::GridPtr& grid, const std::function<double(double)>& f) {
  Eigen::VectorXd values(grid->size());
  for (int i = 0; i < grid->size(); ++i) values(i) = f(grid->points()(i));
  return fofr::FunctionSample(grid, values);
}

/// Uniform(lo, hi) curve values from a caller-owned generator.
inline fofr::FunctionSample random_sample(const fofr::GridPtr& grid,
                                          std::mt19937_64& gen, double lo = -1.0,
                                          double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Eigen::VectorXd values(grid->size());
  for (int i = 0; i < grid->size(); ++i) values(i) = dist(gen);
  return fofr::FunctionSample(grid, values);
}

}  // namespace testsupport
