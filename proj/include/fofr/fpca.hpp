#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "fofr/grid.hpp"

namespace fofr {

/// Spectral decomposition of an empirical covariance operator.
///
/// `eigenvalues` holds the full computed spectrum, non-increasing with
/// round-off negatives clamped to zero. `eigenfunctions` holds only the
/// usable components, i.e. those with eigenvalue >= rank_cutoff
/// (= 1e-12 * leading eigenvalue); they are orthonormal in the quadrature
/// inner product by construction. Truncation requests past rank() fail,
/// since the estimators divide by the eigenvalues.
struct EigenSystem {
  GridPtr grid;
  Eigen::VectorXd eigenvalues;
  std::vector<FunctionSample> eigenfunctions;
  double rank_cutoff = 0.0;

  int rank() const { return static_cast<int>(eigenfunctions.size()); }
  double eigenvalue(int k) const { return eigenvalues(k); }
};

/// PC scores. xi(i,k) = <X_i - mean(X), phi_k>; eta(i,j) = <Y_i, phi_j>.
/// The response coordinates integrate the raw (uncentered) Y_i.
struct ScoreMatrix {
  Eigen::MatrixXd xi;
  Eigen::MatrixXd eta;
  int n = 0;
};

namespace detail {

inline const GridPtr& common_grid(const std::vector<FunctionSample>& samples,
                                  const char* where) {
  if (samples.empty()) {
    std::ostringstream msg;
    msg << where << ": empty sample list";
    throw DataError(msg.str());
  }
  const GridPtr& g = samples.front().grid();
  for (const FunctionSample& s : samples)
    require_same_grid(g, s.grid(), where);
  return g;
}

/// Stacks samples into an (n x grid) matrix.
inline Eigen::MatrixXd sample_matrix(const std::vector<FunctionSample>& samples) {
  Eigen::MatrixXd m(samples.size(), samples.front().size());
  for (std::size_t i = 0; i < samples.size(); ++i)
    m.row(i) = samples[i].values().transpose();
  return m;
}

[[noreturn]] inline void throw_truncation_error(const char* where, int requested,
                                                const EigenSystem& system) {
  std::ostringstream msg;
  msg << where << ": requested truncation " << requested
      << " exceeds usable rank " << system.rank()
      << " (eigenvalue cut-off 1e-12 * leading eigenvalue = "
      << system.rank_cutoff << ")";
  throw NumericalError(msg.str());
}

}  // namespace detail

inline FunctionSample empirical_mean(const std::vector<FunctionSample>& samples) {
  const GridPtr& g = detail::common_grid(samples, "empirical_mean");
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(g->size());
  for (const FunctionSample& s : samples) acc += s.values();
  return FunctionSample(g, acc / static_cast<double>(samples.size()));
}

/// K(s,t) = n^{-1} sum_i {X_i(s) - mean(s)}{X_i(t) - mean(t)}; the result
/// is exactly symmetric (lower triangle computed once, then mirrored).
inline Surface empirical_covariance(const std::vector<FunctionSample>& samples) {
  const GridPtr& g = detail::common_grid(samples, "empirical_covariance");
  const int n = static_cast<int>(samples.size());
  if (n < 2) throw DataError("empirical_covariance: need at least 2 samples");
  const FunctionSample mean = empirical_mean(samples);
  Eigen::MatrixXd centered(g->size(), n);
  for (int i = 0; i < n; ++i)
    centered.col(i) = samples[i].values() - mean.values();
  Eigen::MatrixXd k = Eigen::MatrixXd::Zero(g->size(), g->size());
  k.selfadjointView<Eigen::Lower>().rankUpdate(centered, 1.0 / n);
  k.triangularView<Eigen::StrictlyUpper>() = k.transpose();
  return Surface(g, g, std::move(k));
}

/// Solves the discretized integral eigenproblem int K(s,t) phi(t) dt =
/// kappa phi(s). The weighted form M = W^{1/2} K W^{1/2} is handed to a
/// symmetric solver and eigenvectors are mapped back via phi = W^{-1/2} v,
/// which makes the eigenfunctions quadrature-orthonormal up to round-off.
/// Components with eigenvalue below 1e-12 * kappa_1 are dropped from the
/// retained set; `max_rank` additionally caps how many are kept.
inline EigenSystem eigendecompose(const Surface& k_hat, const GridPtr& grid,
                                  int max_rank) {
  require_same_grid(k_hat.grid_s(), grid, "eigendecompose");
  require_same_grid(k_hat.grid_t(), grid, "eigendecompose");
  const int n = grid->size();
  if (max_rank < 0 || max_rank > n)
    throw DataError("eigendecompose: max_rank must be in [0, grid size]");
  const Eigen::MatrixXd& k = k_hat.values();
  if ((k - k.transpose()).cwiseAbs().maxCoeff() > 1e-8)
    throw DataError("eigendecompose: input surface is asymmetric beyond 1e-8");

  const Eigen::VectorXd s = grid->weights().cwiseSqrt();
  Eigen::MatrixXd m = s.asDiagonal() * k * s.asDiagonal();
  m = 0.5 * (m + m.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m);
  if (solver.info() != Eigen::Success)
    throw NumericalError("eigendecompose: eigensolver failed to converge");

  EigenSystem system;
  system.grid = grid;
  system.eigenvalues.resize(n);
  for (int i = 0; i < n; ++i)
    system.eigenvalues(i) = std::max(0.0, solver.eigenvalues()(n - 1 - i));
  system.rank_cutoff = 1e-12 * system.eigenvalues(0);

  int usable = 0;
  while (usable < n && system.eigenvalues(usable) > 0.0 &&
         system.eigenvalues(usable) >= system.rank_cutoff)
    ++usable;
  usable = std::min(usable, max_rank);

  system.eigenfunctions.reserve(usable);
  for (int kk = 0; kk < usable; ++kk) {
    Eigen::VectorXd phi = solver.eigenvectors().col(n - 1 - kk).cwiseQuotient(s);
    system.eigenfunctions.emplace_back(grid, std::move(phi));
  }
  return system;
}

/// Simulation mode: flips each retained phi_k so that <phi_k, reference_k>
/// >= 0. Components beyond the reference list are left untouched.
inline EigenSystem fix_signs(EigenSystem system,
                             const std::vector<FunctionSample>& reference) {
  if (static_cast<int>(reference.size()) > system.rank())
    throw DataError("fix_signs: reference list longer than retained rank");
  for (std::size_t k = 0; k < reference.size(); ++k) {
    if (inner_product(system.eigenfunctions[k], reference[k]) < 0.0)
      system.eigenfunctions[k] = -1.0 * system.eigenfunctions[k];
  }
  return system;
}

/// Data mode: flips each phi_k so its first coordinate with magnitude above
/// 1e-8 is positive. A deterministic stand-in for the simulation-mode rule
/// when no true basis exists.
inline EigenSystem fix_signs(EigenSystem system) {
  for (FunctionSample& phi : system.eigenfunctions) {
    for (int i = 0; i < phi.size(); ++i) {
      if (std::abs(phi[i]) > 1e-8) {
        if (phi[i] < 0.0) phi = -1.0 * phi;
        break;
      }
    }
  }
  return system;
}

/// Computes xi(i,k) = <X_i - mean(X), phi_k> for k < m_x and
/// eta(i,j) = <Y_i, phi_j> for j < m_y. `samples_y` may be empty when
/// m_y == 0. Scores are evaluated one component at a time so that a larger
/// truncation extends a smaller one without perturbing shared columns.
inline ScoreMatrix compute_scores(const std::vector<FunctionSample>& samples_x,
                                  const std::vector<FunctionSample>& samples_y,
                                  const EigenSystem& system, int m_x, int m_y) {
  const GridPtr& g = detail::common_grid(samples_x, "compute_scores");
  require_same_grid(g, system.grid, "compute_scores");
  if (m_x < 0 || m_y < 0)
    throw DataError("compute_scores: truncations must be non-negative");
  if (m_x > system.rank())
    detail::throw_truncation_error("compute_scores", m_x, system);
  if (m_y > system.rank())
    detail::throw_truncation_error("compute_scores", m_y, system);
  const int n = static_cast<int>(samples_x.size());
  if (m_y > 0 && static_cast<int>(samples_y.size()) != n)
    throw DataError("compute_scores: X and Y sample counts differ");
  for (const FunctionSample& y : samples_y)
    require_same_grid(g, y.grid(), "compute_scores");

  const FunctionSample mean_x = empirical_mean(samples_x);
  Eigen::MatrixXd centered(n, g->size());
  for (int i = 0; i < n; ++i)
    centered.row(i) = (samples_x[i].values() - mean_x.values()).transpose();

  ScoreMatrix scores;
  scores.n = n;
  scores.xi.resize(n, m_x);
  for (int k = 0; k < m_x; ++k) {
    const Eigen::VectorXd wphi =
        g->weights().cwiseProduct(system.eigenfunctions[k].values());
    scores.xi.col(k) = centered * wphi;
  }
  scores.eta.resize(m_y > 0 ? n : 0, m_y);
  if (m_y > 0) {
    const Eigen::MatrixXd ymat = detail::sample_matrix(samples_y);
    for (int j = 0; j < m_y; ++j) {
      const Eigen::VectorXd wphi =
          g->weights().cwiseProduct(system.eigenfunctions[j].values());
      scores.eta.col(j) = ymat * wphi;
    }
  }
  return scores;
}

}  // namespace fofr
