#pragma once

#include <functional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "fofr/fpca.hpp"

namespace fofr {

/// Series truncation. m1 == 0 marks the single truncation (full grid
/// resolution in s, m2 terms in t); otherwise an m1 x m2 double truncation.
struct Truncation {
  int m1 = 0;
  int m2 = 0;
  bool is_single() const { return m1 == 0; }
};

inline Truncation single_truncation(int m) { return Truncation{0, m}; }
inline Truncation double_truncation(int m1, int m2) { return Truncation{m1, m2}; }

inline bool operator==(Truncation a, Truncation b) {
  return a.m1 == b.m1 && a.m2 == b.m2;
}

/// Lexicographic (m1, m2) order; used to break ties toward parsimony.
inline bool truncation_less(Truncation a, Truncation b) {
  return std::pair(a.m1, a.m2) < std::pair(b.m1, b.m2);
}

inline std::string to_string(Truncation t) {
  std::ostringstream s;
  if (t.is_single())
    s << t.m2;
  else
    s << "(" << t.m1 << "," << t.m2 << ")";
  return s.str();
}

/// An estimated (or ground-truth) coefficient surface.
///
/// For a double truncation, `coeffs` is the (m1 x m2) coefficient table and
/// the surface equals sum_jk coeffs(j,k) * s_basis[j] (x) t_basis[k].
/// For a single truncation the s-direction stays at full grid resolution:
/// `coeffs` is (grid x m2) with column k holding the slope curve
/// g_k / kappa_k, and s_basis is empty.
struct CoefficientSurface {
  Surface surface;
  Truncation truncation;
  Eigen::MatrixXd coeffs;
  std::vector<FunctionSample> s_basis;
  std::vector<FunctionSample> t_basis;
};

struct FittedModel {
  CoefficientSurface coefficient;
  FunctionSample mean_x;
  FunctionSample mean_y;
  EigenSystem eigen;
  std::string warning;  // non-empty for degenerate requests (truncation 0)
};

namespace detail {

inline void check_fit_inputs(const std::vector<FunctionSample>& samples_x,
                             const std::vector<FunctionSample>& samples_y,
                             const EigenSystem& eigen, const char* where) {
  const GridPtr& g = common_grid(samples_x, where);
  require_same_grid(g, eigen.grid, where);
  if (samples_x.size() < 2) {
    std::ostringstream msg;
    msg << where << ": need at least 2 samples";
    throw DataError(msg.str());
  }
  if (samples_y.size() != samples_x.size()) {
    std::ostringstream msg;
    msg << where << ": X and Y sample counts differ";
    throw DataError(msg.str());
  }
  for (const FunctionSample& y : samples_y) require_same_grid(g, y.grid(), where);
}

inline Eigen::MatrixXd basis_matrix(const EigenSystem& eigen, int m) {
  Eigen::MatrixXd phi(eigen.grid->size(), m);
  for (int k = 0; k < m; ++k) phi.col(k) = eigen.eigenfunctions[k].values();
  return phi;
}

}  // namespace detail

/// Single-truncation estimator on a prebuilt eigensystem:
///   b(s,t) = sum_{k<=m} [ n^{-1} sum_i xi_{i,k} Y_i(s) ] / kappa_k * phi_k(t).
/// The eigensystem is used exactly as given (no sign normalization), so this
/// overload doubles as the entry point for sign-robustness checks and for
/// leave-one-out refits that share one decomposition across truncations.
inline FittedModel fit_single(const std::vector<FunctionSample>& samples_x,
                              const std::vector<FunctionSample>& samples_y,
                              const EigenSystem& eigen, int m) {
  detail::check_fit_inputs(samples_x, samples_y, eigen, "fit_single");
  if (m < 0) throw DataError("fit_single: truncation must be non-negative");
  if (m > eigen.rank()) detail::throw_truncation_error("fit_single", m, eigen);

  const GridPtr& g = eigen.grid;
  const int n = static_cast<int>(samples_x.size());
  FunctionSample mean_x = empirical_mean(samples_x);
  FunctionSample mean_y = empirical_mean(samples_y);

  std::string warning;
  Eigen::MatrixXd slope_curves(g->size(), m);
  Eigen::MatrixXd surface;
  if (m == 0) {
    warning = "fit_single: truncation 0 yields the zero coefficient surface";
    surface = Eigen::MatrixXd::Zero(g->size(), g->size());
  } else {
    const ScoreMatrix scores = compute_scores(samples_x, {}, eigen, m, 0);
    const Eigen::MatrixXd ymat = detail::sample_matrix(samples_y);
    for (int k = 0; k < m; ++k) {
      const Eigen::VectorXd g_k = ymat.transpose() * scores.xi.col(k) / n;
      slope_curves.col(k) = g_k / eigen.eigenvalue(k);
    }
    const Eigen::MatrixXd phi = detail::basis_matrix(eigen, m);
    surface = slope_curves * phi.transpose();
  }

  CoefficientSurface coefficient{
      Surface(g, g, std::move(surface)), single_truncation(m),
      std::move(slope_curves), {},
      std::vector<FunctionSample>(eigen.eigenfunctions.begin(),
                                  eigen.eigenfunctions.begin() + m)};
  return FittedModel{std::move(coefficient), std::move(mean_x),
                     std::move(mean_y), eigen, std::move(warning)};
}

/// Full single-truncation pipeline: empirical covariance, eigendecomposition
/// (data-mode sign convention), then the series estimator.
inline FittedModel fit_single(const std::vector<FunctionSample>& samples_x,
                              const std::vector<FunctionSample>& samples_y,
                              int m) {
  const GridPtr& g = detail::common_grid(samples_x, "fit_single");
  const Surface k_hat = empirical_covariance(samples_x);
  const EigenSystem eigen = fix_signs(eigendecompose(k_hat, g, g->size()));
  return fit_single(samples_x, samples_y, eigen, m);
}

/// Double-truncation estimator on a prebuilt eigensystem:
///   b(s,t) = sum_{j<=m1} sum_{k<=m2} b_{j,k} phi_j(s) phi_k(t),
///   b_{j,k} = n^{-1} sum_i eta_{i,j} xi_{i,k} / kappa_k.
inline FittedModel fit_double(const std::vector<FunctionSample>& samples_x,
                              const std::vector<FunctionSample>& samples_y,
                              const EigenSystem& eigen, int m1, int m2) {
  detail::check_fit_inputs(samples_x, samples_y, eigen, "fit_double");
  if (m1 < 0 || m2 < 0)
    throw DataError("fit_double: truncations must be non-negative");
  if (m1 > eigen.rank()) detail::throw_truncation_error("fit_double", m1, eigen);
  if (m2 > eigen.rank()) detail::throw_truncation_error("fit_double", m2, eigen);

  const GridPtr& g = eigen.grid;
  const int n = static_cast<int>(samples_x.size());
  FunctionSample mean_x = empirical_mean(samples_x);
  FunctionSample mean_y = empirical_mean(samples_y);

  std::string warning;
  Eigen::MatrixXd table(m1, m2);
  Eigen::MatrixXd surface;
  if (m1 == 0 || m2 == 0) {
    warning = "fit_double: truncation 0 yields the zero coefficient surface";
    surface = Eigen::MatrixXd::Zero(g->size(), g->size());
  } else {
    const ScoreMatrix scores = compute_scores(samples_x, samples_y, eigen, m2, m1);
    for (int j = 0; j < m1; ++j)
      for (int k = 0; k < m2; ++k)
        table(j, k) =
            (scores.eta.col(j).dot(scores.xi.col(k)) / n) / eigen.eigenvalue(k);
    const Eigen::MatrixXd phi1 = detail::basis_matrix(eigen, m1);
    const Eigen::MatrixXd phi2 = detail::basis_matrix(eigen, m2);
    surface = phi1 * table * phi2.transpose();
  }

  CoefficientSurface coefficient{
      Surface(g, g, std::move(surface)), double_truncation(m1, m2),
      std::move(table),
      std::vector<FunctionSample>(eigen.eigenfunctions.begin(),
                                  eigen.eigenfunctions.begin() + m1),
      std::vector<FunctionSample>(eigen.eigenfunctions.begin(),
                                  eigen.eigenfunctions.begin() + m2)};
  return FittedModel{std::move(coefficient), std::move(mean_x),
                     std::move(mean_y), eigen, std::move(warning)};
}

inline FittedModel fit_double(const std::vector<FunctionSample>& samples_x,
                              const std::vector<FunctionSample>& samples_y,
                              int m1, int m2) {
  const GridPtr& g = detail::common_grid(samples_x, "fit_double");
  const Surface k_hat = empirical_covariance(samples_x);
  const EigenSystem eigen = fix_signs(eigendecompose(k_hat, g, g->size()));
  return fit_double(samples_x, samples_y, eigen, m1, m2);
}

/// Assembles a ground-truth surface b = sum_{j<=J,k<=K} c(j,k) phi_j (x) phi_k
/// from a coefficient rule over an orthonormal basis (1-based indices).
inline CoefficientSurface population_coefficient(
    const std::function<double(int, int)>& coefficient,
    const std::vector<FunctionSample>& basis, int j_count, int k_count) {
  const GridPtr& g = detail::common_grid(basis, "population_coefficient");
  const int available = static_cast<int>(basis.size());
  if (j_count < 0 || k_count < 0 || j_count > available || k_count > available)
    throw DataError("population_coefficient: truncation exceeds basis size");
  const int used = std::max(j_count, k_count);
  for (int a = 0; a < used; ++a)
    for (int b = a; b < used; ++b) {
      const double ip = inner_product(basis[a], basis[b]);
      const double expected = (a == b) ? 1.0 : 0.0;
      if (std::abs(ip - expected) > 1e-6)
        throw DataError(
            "population_coefficient: basis is not orthonormal within 1e-6");
    }

  Eigen::MatrixXd table(j_count, k_count);
  for (int j = 0; j < j_count; ++j)
    for (int k = 0; k < k_count; ++k) table(j, k) = coefficient(j + 1, k + 1);

  Eigen::MatrixXd phi_j(g->size(), j_count);
  for (int j = 0; j < j_count; ++j) phi_j.col(j) = basis[j].values();
  Eigen::MatrixXd phi_k(g->size(), k_count);
  for (int k = 0; k < k_count; ++k) phi_k.col(k) = basis[k].values();

  Eigen::MatrixXd surface = phi_j * table * phi_k.transpose();
  return CoefficientSurface{
      Surface(g, g, std::move(surface)), double_truncation(j_count, k_count),
      std::move(table),
      std::vector<FunctionSample>(basis.begin(), basis.begin() + j_count),
      std::vector<FunctionSample>(basis.begin(), basis.begin() + k_count)};
}

/// Yhat(s) = mean_Y(s) + int b(s,t) {x_new(t) - mean_X(t)} dt.
inline FunctionSample predict(const FittedModel& model,
                              const FunctionSample& x_new) {
  require_same_grid(model.mean_x.grid(), x_new.grid(), "predict");
  return model.mean_y +
         apply_kernel(model.coefficient.surface, x_new - model.mean_x);
}

/// ||| estimate - truth |||^2.
inline double estimation_error(const CoefficientSurface& estimate,
                               const CoefficientSurface& truth) {
  const double d = surface_norm(estimate.surface - truth.surface);
  return d * d;
}

}  // namespace fofr
