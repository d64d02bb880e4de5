#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <utility>
#include <vector>

#include "fofr/parallel.hpp"
#include "fofr/regression.hpp"

namespace fofr {

/// Leave-one-out cross-validation scores over a candidate grid.
/// Candidates that exceed the usable rank of some leave-one-out fit are
/// marked infeasible (score NaN) and excluded from the argmin. Ties within
/// 1e-12 * max(1, |min|) resolve toward the lexicographically smallest
/// truncation; exact equality of criteria is not attainable in floating
/// point, so near-ties stand in for the equal-criteria case.
struct CvResult {
  std::vector<Truncation> candidates;
  std::vector<double> scores;
  std::vector<char> feasible;
  int best_index = -1;
  bool ties_broken = false;

  Truncation best() const { return candidates[best_index]; }
};

namespace detail {

inline void check_cv_inputs(const std::vector<FunctionSample>& samples_x,
                            const std::vector<FunctionSample>& samples_y,
                            const char* where) {
  const GridPtr& g = common_grid(samples_x, where);
  if (samples_x.size() < 3) {
    std::ostringstream msg;
    msg << where << ": need at least 3 samples";
    throw DataError(msg.str());
  }
  if (samples_y.size() != samples_x.size()) {
    std::ostringstream msg;
    msg << where << ": X and Y sample counts differ";
    throw DataError(msg.str());
  }
  for (const FunctionSample& y : samples_y) require_same_grid(g, y.grid(), where);
}

inline std::vector<FunctionSample> leave_one_out(
    const std::vector<FunctionSample>& samples, int skip) {
  std::vector<FunctionSample> subset;
  subset.reserve(samples.size() - 1);
  for (std::size_t i = 0; i < samples.size(); ++i)
    if (static_cast<int>(i) != skip) subset.push_back(samples[i]);
  return subset;
}

inline double quadrature_sq_norm(const Eigen::VectorXd& values,
                                 const Eigen::VectorXd& weights) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < values.size(); ++i)
    acc += weights(i) * (values(i) * values(i));
  return acc;
}

/// Picks the argmin among feasible candidates, resolving near-ties toward
/// the smallest truncation.
inline void select_best(CvResult& result, const char* where) {
  double best_score = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < result.scores.size(); ++i)
    if (result.feasible[i] && result.scores[i] < best_score)
      best_score = result.scores[i];
  if (!std::isfinite(best_score)) {
    std::ostringstream msg;
    msg << where << ": no feasible candidate (every entry exceeds the usable "
        << "rank of some leave-one-out fit)";
    throw NumericalError(msg.str());
  }
  const double band = 1e-12 * std::max(1.0, std::abs(best_score));
  int best = -1;
  int tied = 0;
  for (std::size_t i = 0; i < result.scores.size(); ++i) {
    if (!result.feasible[i] || result.scores[i] > best_score + band) continue;
    ++tied;
    if (best < 0 ||
        truncation_less(result.candidates[i], result.candidates[best]))
      best = static_cast<int>(i);
  }
  result.best_index = best;
  result.ties_broken = tied > 1;
}

inline void check_loo_prediction(const Eigen::VectorXd& in_loop,
                                 const FunctionSample& from_scratch,
                                 const char* where) {
  const double scale = 1.0 + from_scratch.values().cwiseAbs().maxCoeff();
  if ((in_loop - from_scratch.values()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
    std::ostringstream msg;
    msg << where << ": leave-one-out refit disagrees with a from-scratch fit "
        << "on the same subset";
    throw NumericalError(msg.str());
  }
}

}  // namespace detail

/// min_m sum_i int [ Y_i(s) - mean_{-i}Y(s)
///                   - int bhat_{(-i,m)}(s,t) {X_i(t) - mean_{-i}X(t)} dt ]^2 ds
/// with exact refits per fold: each fold recomputes the mean, covariance and
/// eigensystem on its n-1 samples and shares that decomposition across all
/// candidate truncations. The fold-0 model is cross-checked per run against
/// a from-scratch fit on the same subset.
inline CvResult cv_single(const std::vector<FunctionSample>& samples_x,
                          const std::vector<FunctionSample>& samples_y,
                          const std::vector<int>& candidates) {
  detail::check_cv_inputs(samples_x, samples_y, "cv_single");
  if (candidates.empty()) throw DataError("cv_single: no candidates");
  for (int m : candidates)
    if (m < 1) throw DataError("cv_single: candidates must be >= 1");
  const GridPtr& g = samples_x.front().grid();
  const int n = static_cast<int>(samples_x.size());
  const int max_m = *std::max_element(candidates.begin(), candidates.end());
  const int cap = std::min(max_m, g->size());

  std::vector<std::vector<double>> fold_errors(n);
  std::vector<int> fold_rank(n, 0);
  Eigen::VectorXd check_pred;
  int check_m = 0;

  parallel_for(n, [&](int i) {
    const std::vector<FunctionSample> sub_x = detail::leave_one_out(samples_x, i);
    const std::vector<FunctionSample> sub_y = detail::leave_one_out(samples_y, i);
    const int n_sub = n - 1;
    const FunctionSample mean_x = empirical_mean(sub_x);
    const FunctionSample mean_y = empirical_mean(sub_y);
    const EigenSystem eigen =
        eigendecompose(empirical_covariance(sub_x), g, cap);
    const int r = eigen.rank();
    fold_rank[i] = r;

    const ScoreMatrix scores = compute_scores(sub_x, {}, eigen, r, 0);
    const Eigen::MatrixXd ymat = detail::sample_matrix(sub_y);
    Eigen::MatrixXd slope_curves(g->size(), r);
    for (int k = 0; k < r; ++k)
      slope_curves.col(k) =
          (ymat.transpose() * scores.xi.col(k) / n_sub) / eigen.eigenvalue(k);

    const FunctionSample deviation = samples_x[i] - mean_x;
    Eigen::VectorXd residual = samples_y[i].values() - mean_y.values();
    std::vector<double> errs(r);
    for (int k = 0; k < r; ++k) {
      const double c_k = inner_product(eigen.eigenfunctions[k], deviation);
      residual -= c_k * slope_curves.col(k);
      errs[k] = detail::quadrature_sq_norm(residual, g->weights());
    }
    fold_errors[i] = std::move(errs);

    if (i == 0 && r >= 1) {
      // Prediction for a held-in sample, for the per-run refit consistency check.
      const FunctionSample dev1 = samples_x[1] - mean_x;
      Eigen::VectorXd pred = mean_y.values();
      for (int k = 0; k < r; ++k)
        pred += inner_product(eigen.eigenfunctions[k], dev1) *
                slope_curves.col(k);
      check_pred = std::move(pred);
      check_m = r;
    }
  });

  if (check_m >= 1) {
    const FittedModel scratch = fit_single(detail::leave_one_out(samples_x, 0),
                                           detail::leave_one_out(samples_y, 0),
                                           check_m);
    detail::check_loo_prediction(check_pred, predict(scratch, samples_x[1]),
                                 "cv_single");
  }

  const int min_rank = *std::min_element(fold_rank.begin(), fold_rank.end());
  CvResult result;
  result.candidates.reserve(candidates.size());
  for (int m : candidates) result.candidates.push_back(single_truncation(m));
  result.scores.assign(candidates.size(),
                       std::numeric_limits<double>::quiet_NaN());
  result.feasible.assign(candidates.size(), 0);
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    const int m = candidates[c];
    if (m > min_rank) continue;
    double acc = 0.0;
    for (int i = 0; i < n; ++i) acc += fold_errors[i][m - 1];
    result.scores[c] = acc;
    result.feasible[c] = 1;
  }
  detail::select_best(result, "cv_single");
  return result;
}

/// Double-truncation analogue over candidate pairs (m1, m2).
inline CvResult cv_double(const std::vector<FunctionSample>& samples_x,
                          const std::vector<FunctionSample>& samples_y,
                          const std::vector<std::pair<int, int>>& candidates) {
  detail::check_cv_inputs(samples_x, samples_y, "cv_double");
  if (candidates.empty()) throw DataError("cv_double: no candidates");
  for (const auto& [m1, m2] : candidates)
    if (m1 < 1 || m2 < 1) throw DataError("cv_double: candidates must be >= 1");
  const GridPtr& g = samples_x.front().grid();
  const int n = static_cast<int>(samples_x.size());
  int max_m1 = 0;
  int max_m2 = 0;
  for (const auto& [m1, m2] : candidates) {
    max_m1 = std::max(max_m1, m1);
    max_m2 = std::max(max_m2, m2);
  }
  const int cap = std::min(std::max(max_m1, max_m2), g->size());
  const int n_cand = static_cast<int>(candidates.size());

  std::vector<std::vector<double>> fold_errors(n);
  std::vector<int> fold_rank(n, 0);
  Eigen::VectorXd check_pred;
  std::pair<int, int> check_trunc{0, 0};

  parallel_for(n, [&](int i) {
    const std::vector<FunctionSample> sub_x = detail::leave_one_out(samples_x, i);
    const std::vector<FunctionSample> sub_y = detail::leave_one_out(samples_y, i);
    const int n_sub = n - 1;
    const FunctionSample mean_x = empirical_mean(sub_x);
    const FunctionSample mean_y = empirical_mean(sub_y);
    const EigenSystem eigen =
        eigendecompose(empirical_covariance(sub_x), g, cap);
    const int r = eigen.rank();
    fold_rank[i] = r;
    const int r1 = std::min(max_m1, r);
    const int r2 = std::min(max_m2, r);

    const ScoreMatrix scores = compute_scores(sub_x, sub_y, eigen, r2, r1);
    Eigen::MatrixXd table(r1, r2);
    for (int j = 0; j < r1; ++j)
      for (int k = 0; k < r2; ++k)
        table(j, k) = (scores.eta.col(j).dot(scores.xi.col(k)) / n_sub) /
                      eigen.eigenvalue(k);
    Eigen::MatrixXd phi = detail::basis_matrix(eigen, r1);

    const FunctionSample deviation = samples_x[i] - mean_x;
    Eigen::VectorXd c(r2);
    for (int k = 0; k < r2; ++k)
      c(k) = inner_product(eigen.eigenfunctions[k], deviation);
    const Eigen::VectorXd base = samples_y[i].values() - mean_y.values();

    std::vector<double> errs(n_cand, std::numeric_limits<double>::quiet_NaN());
    for (int idx = 0; idx < n_cand; ++idx) {
      const auto& [m1, m2] = candidates[idx];
      if (m1 > r || m2 > r) continue;
      const Eigen::VectorXd d = table.topLeftCorner(m1, m2) * c.head(m2);
      const Eigen::VectorXd residual = base - phi.leftCols(m1) * d;
      errs[idx] = detail::quadrature_sq_norm(residual, g->weights());
    }
    fold_errors[i] = std::move(errs);

    if (i == 0 && r >= 1) {
      std::pair<int, int> largest{0, 0};
      for (const auto& cand : candidates)
        if (cand.first <= r && cand.second <= r && cand > largest)
          largest = cand;
      if (largest.first >= 1) {
        const FunctionSample dev1 = samples_x[1] - mean_x;
        Eigen::VectorXd c1(largest.second);
        for (int k = 0; k < largest.second; ++k)
          c1(k) = inner_product(eigen.eigenfunctions[k], dev1);
        const Eigen::VectorXd d =
            table.topLeftCorner(largest.first, largest.second) * c1;
        check_pred = mean_y.values() + phi.leftCols(largest.first) * d;
        check_trunc = largest;
      }
    }
  });

  if (check_trunc.first >= 1) {
    const FittedModel scratch = fit_double(detail::leave_one_out(samples_x, 0),
                                           detail::leave_one_out(samples_y, 0),
                                           check_trunc.first, check_trunc.second);
    detail::check_loo_prediction(check_pred, predict(scratch, samples_x[1]),
                                 "cv_double");
  }

  const int min_rank = *std::min_element(fold_rank.begin(), fold_rank.end());
  CvResult result;
  result.candidates.reserve(candidates.size());
  for (const auto& [m1, m2] : candidates)
    result.candidates.push_back(double_truncation(m1, m2));
  result.scores.assign(candidates.size(),
                       std::numeric_limits<double>::quiet_NaN());
  result.feasible.assign(candidates.size(), 0);
  for (int c = 0; c < n_cand; ++c) {
    const auto& [m1, m2] = candidates[c];
    if (m1 > min_rank || m2 > min_rank) continue;
    double acc = 0.0;
    for (int i = 0; i < n; ++i) acc += fold_errors[i][c];
    result.scores[c] = acc;
    result.feasible[c] = 1;
  }
  detail::select_best(result, "cv_double");
  return result;
}

}  // namespace fofr
