#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "fofr/parallel.hpp"
#include "fofr/regression.hpp"

namespace fofr {

/// Monte Carlo study configuration.
///
/// The data generating process on the cosine basis phi_1 = 1,
/// phi_{j+1}(t) = sqrt(2) cos(j pi t):
///   X   = sum_{k<=n_components} k^{-alpha/2} U_k phi_k,   U_k ~ Unif[-sqrt3, sqrt3]
///   E   = noise_scale * sum_j j^{-noise_decay/2} Z_j phi_j,  Z_j ~ N(0,1)
///   Y   = int b(.,t) X(t) dt + E,
///   b   = b_scale * [ b_{1,1} = 0.3, b_{j,k} = 4 (-1)^{j+k} j^{-gamma} k^{-beta} ]
/// truncated at n_components in both directions. noise_scale = 0 gives a
/// noiseless design; b_scale = 0 a null model; n_components = 5 the exact
/// rank-5 design used by the recovery checks.
struct DgpConfig {
  double alpha = 1.2;
  double beta = 3.0;
  double gamma = 3.0;
  int n = 400;
  int grid_size = 101;  // curve discretization; reported in output metadata
  int n_components = 50;
  double noise_decay = 1.1;
  double noise_scale = 1.0;
  double b_scale = 1.0;
  int reps = 100;
  std::uint64_t seed = 0;
};

struct ConfigReport {
  std::vector<std::string> warnings;
  bool assumption_satisfied = false;          // alpha > 1, beta > alpha/2+1, gamma > 1/2
  bool double_rate_optimal_region = false;    // where the double truncation is rate optimal
};

inline ConfigReport validate(const DgpConfig& config) {
  if (config.n < 1) throw DataError("DgpConfig: n must be >= 1");
  if (config.grid_size < 2) throw DataError("DgpConfig: grid_size must be >= 2");
  if (config.n_components < 1)
    throw DataError("DgpConfig: n_components must be >= 1");
  if (config.n_components > config.grid_size)
    throw DataError("DgpConfig: n_components must not exceed grid_size");
  if (config.reps < 1) throw DataError("DgpConfig: reps must be >= 1");
  if (!(config.noise_decay > 0.0))
    throw DataError("DgpConfig: noise_decay must be positive");

  ConfigReport report;
  if (!(config.alpha > 1.0))
    report.warnings.push_back("alpha <= 1: eigenvalue decay outside the assumed range");
  if (!(config.beta > config.alpha / 2.0 + 1.0))
    report.warnings.push_back("beta <= alpha/2 + 1: smoothness assumption violated");
  if (!(config.gamma > 0.5))
    report.warnings.push_back("gamma <= 1/2: smoothness assumption violated");
  report.assumption_satisfied = report.warnings.empty();

  const double a = config.alpha;
  const double b = config.beta;
  const double c = config.gamma;
  if (c > a + 1.0)
    report.double_rate_optimal_region = b <= ((2.0 * c - 1.0) * a + 2.0 * c) / 2.0;
  else
    report.double_rate_optimal_region =
        b < ((2.0 * c - 1.0) * a + 2.0 * a + 2.0) / (2.0 * (2.0 * a - 2.0 * c + 3.0));
  return report;
}

/// phi_1 = 1, phi_{j+1}(t) = sqrt(2) cos(j pi t). On a uniform grid with
/// trapezoidal weights these are quadrature-orthonormal for count < grid size.
inline std::vector<FunctionSample> cosine_basis(const GridPtr& grid, int count) {
  if (count < 0 || count > grid->size())
    throw DataError("cosine_basis: count must be in [0, grid size]");
  std::vector<FunctionSample> basis;
  basis.reserve(count);
  const double pi = 3.14159265358979323846;
  for (int j = 0; j < count; ++j) {
    Eigen::VectorXd values(grid->size());
    if (j == 0) {
      values.setOnes();
    } else {
      for (int i = 0; i < grid->size(); ++i)
        values(i) = std::sqrt(2.0) * std::cos(j * pi * grid->points()(i));
    }
    basis.emplace_back(grid, std::move(values));
  }
  return basis;
}

/// b_{1,1} = 0.3 and b_{j,k} = 4 (-1)^{j+k} j^{-gamma} k^{-beta} otherwise
/// (1-based indices).
inline double dgp_coefficient(int j, int k, double gamma, double beta) {
  if (j == 1 && k == 1) return 0.3;
  const double sign = ((j + k) % 2 == 0) ? 1.0 : -1.0;
  return 4.0 * sign * std::pow(static_cast<double>(j), -gamma) *
         std::pow(static_cast<double>(k), -beta);
}

/// One reproducible substream per replication: replications can run on any
/// number of workers and still draw identical variates.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream)
      : gen_(mix(seed, stream)) {}

  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(gen_);
  }

  double normal() { return normal_(gen_); }

 private:
  static std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
  }

  static std::uint64_t mix(std::uint64_t seed, std::uint64_t stream) {
    return splitmix64(splitmix64(seed) ^ splitmix64(~stream));
  }

  std::mt19937_64 gen_;
  std::normal_distribution<double> normal_;
};

struct SimulatedDataset {
  std::vector<FunctionSample> x;
  std::vector<FunctionSample> y;
  CoefficientSurface truth;
};

/// Draws n pairs for one replication. Y is synthesized in coefficient space,
/// so int b(.,t) X(t) dt is exact rather than quadrature-approximated.
inline SimulatedDataset generate_dataset(const DgpConfig& config,
                                         std::uint64_t replication) {
  validate(config);
  const GridPtr grid = Grid::uniform(config.grid_size);
  const std::vector<FunctionSample> basis =
      cosine_basis(grid, config.n_components);
  const auto rule = [&config](int j, int k) {
    return config.b_scale *
           dgp_coefficient(j, k, config.gamma, config.beta);
  };
  CoefficientSurface truth = population_coefficient(
      rule, basis, config.n_components, config.n_components);

  const int n = config.n;
  const int nc = config.n_components;
  const double sqrt3 = std::sqrt(3.0);
  RngStream rng(config.seed, replication);

  Eigen::MatrixXd xi(n, nc);      // xi(i,k) = k^{-alpha/2} U_{i,k}
  Eigen::MatrixXd noise(n, nc);   // eps(i,j) = noise_scale * j^{-decay/2} Z_{i,j}
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < nc; ++k)
      xi(i, k) = std::pow(static_cast<double>(k + 1), -config.alpha / 2.0) *
                 rng.uniform(-sqrt3, sqrt3);
    for (int j = 0; j < nc; ++j)
      noise(i, j) = config.noise_scale *
                    std::pow(static_cast<double>(j + 1),
                             -config.noise_decay / 2.0) *
                    rng.normal();
  }
  const Eigen::MatrixXd y_coeffs = xi * truth.coeffs.transpose() + noise;

  Eigen::MatrixXd phi(grid->size(), nc);
  for (int k = 0; k < nc; ++k) phi.col(k) = basis[k].values();
  const Eigen::MatrixXd x_values = xi * phi.transpose();
  const Eigen::MatrixXd y_values = y_coeffs * phi.transpose();

  SimulatedDataset dataset{{}, {}, std::move(truth)};
  dataset.x.reserve(n);
  dataset.y.reserve(n);
  for (int i = 0; i < n; ++i) {
    dataset.x.emplace_back(grid, x_values.row(i).transpose());
    dataset.y.emplace_back(grid, y_values.row(i).transpose());
  }
  return dataset;
}

/// Per-truncation squared errors |||estimate - truth|||^2 across
/// replications, plus their means and the truncation with the best mean.
struct SweepResult {
  DgpConfig config;
  std::vector<Truncation> truncations;
  Eigen::MatrixXd errors;         // reps x truncations; NaN marks infeasible
  std::vector<double> mean_mise;  // over replications (NaN if never feasible)
  std::vector<int> reps_used;
  int optimal_index = -1;

  Truncation optimal() const { return truncations[optimal_index]; }
  double optimal_mise() const {
    return optimal_index >= 0 ? mean_mise[optimal_index]
                              : std::numeric_limits<double>::quiet_NaN();
  }
};

namespace detail {

inline double weighted_sq_distance(const Eigen::MatrixXd& a,
                                   const Eigen::MatrixXd& b,
                                   const Eigen::VectorXd& ws,
                                   const Eigen::VectorXd& wt) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    double row = 0.0;
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      const double d = a(i, j) - b(i, j);
      row += wt(j) * (d * d);
    }
    acc += ws(i) * row;
  }
  return acc;
}

inline void summarize_sweep(SweepResult& result) {
  const int reps = static_cast<int>(result.errors.rows());
  const int t_count = static_cast<int>(result.errors.cols());
  result.mean_mise.assign(t_count, std::numeric_limits<double>::quiet_NaN());
  result.reps_used.assign(t_count, 0);
  for (int t = 0; t < t_count; ++t) {
    double acc = 0.0;
    int used = 0;
    for (int r = 0; r < reps; ++r) {
      const double e = result.errors(r, t);
      if (std::isnan(e)) continue;
      acc += e;
      ++used;
    }
    result.reps_used[t] = used;
    if (used > 0) result.mean_mise[t] = acc / used;
  }
  result.optimal_index = -1;
  for (int t = 0; t < t_count; ++t) {
    if (result.reps_used[t] != reps) continue;  // missing reps disqualify
    if (result.optimal_index < 0 ||
        result.mean_mise[t] < result.mean_mise[result.optimal_index] ||
        (result.mean_mise[t] == result.mean_mise[result.optimal_index] &&
         truncation_less(result.truncations[t],
                         result.truncations[result.optimal_index])))
      result.optimal_index = t;
  }
}

template <class FitErrors>
SweepResult run_sweep(const DgpConfig& config,
                      std::vector<Truncation> truncations, int needed_rank,
                      const FitErrors& fit_errors) {
  if (truncations.empty()) throw DataError("mise_sweep: no truncations");
  SweepResult result;
  result.config = config;
  result.truncations = std::move(truncations);
  result.errors.setConstant(config.reps, result.truncations.size(),
                            std::numeric_limits<double>::quiet_NaN());
  parallel_for(config.reps, [&](int rep) {
    const SimulatedDataset data = generate_dataset(config, rep);
    const GridPtr& g = data.x.front().grid();
    const Surface k_hat = empirical_covariance(data.x);
    const EigenSystem eigen =
        eigendecompose(k_hat, g, std::min(needed_rank, g->size()));
    fit_errors(rep, data, eigen, result);
  });
  summarize_sweep(result);
  return result;
}

}  // namespace detail

/// Simulates |||bhat_m - b|||^2 for each requested single truncation and
/// reports the mean over replications ("optimal MISE" protocol).
inline SweepResult mise_sweep_single(const DgpConfig& config,
                                     const std::vector<int>& truncations) {
  std::vector<Truncation> ts;
  ts.reserve(truncations.size());
  int needed = 0;
  for (int m : truncations) {
    if (m < 1) throw DataError("mise_sweep_single: truncations must be >= 1");
    ts.push_back(single_truncation(m));
    needed = std::max(needed, m);
  }
  return detail::run_sweep(
      config, std::move(ts), needed,
      [&](int rep, const SimulatedDataset& data, const EigenSystem& eigen,
          SweepResult& result) {
        const GridPtr& g = eigen.grid;
        const int n = static_cast<int>(data.x.size());
        const int r = eigen.rank();
        const ScoreMatrix scores = compute_scores(data.x, {}, eigen, r, 0);
        const Eigen::MatrixXd ymat = detail::sample_matrix(data.y);
        Eigen::MatrixXd slope_curves(g->size(), r);
        for (int k = 0; k < r; ++k)
          slope_curves.col(k) =
              (ymat.transpose() * scores.xi.col(k) / n) / eigen.eigenvalue(k);
        const Eigen::MatrixXd phi = detail::basis_matrix(eigen, r);
        for (std::size_t t = 0; t < result.truncations.size(); ++t) {
          const int m = result.truncations[t].m2;
          if (m > r) continue;
          const Eigen::MatrixXd surface =
              slope_curves.leftCols(m) * phi.leftCols(m).transpose();
          result.errors(rep, t) = detail::weighted_sq_distance(
              surface, data.truth.surface.values(), g->weights(), g->weights());
        }
      });
}

/// Double-truncation analogue over (m1, m2) pairs.
inline SweepResult mise_sweep_double(
    const DgpConfig& config, const std::vector<std::pair<int, int>>& truncations) {
  std::vector<Truncation> ts;
  ts.reserve(truncations.size());
  int needed = 0;
  for (const auto& [m1, m2] : truncations) {
    if (m1 < 1 || m2 < 1)
      throw DataError("mise_sweep_double: truncations must be >= 1");
    ts.push_back(double_truncation(m1, m2));
    needed = std::max(needed, std::max(m1, m2));
  }
  return detail::run_sweep(
      config, std::move(ts), needed,
      [&](int rep, const SimulatedDataset& data, const EigenSystem& eigen,
          SweepResult& result) {
        const GridPtr& g = eigen.grid;
        const int n = static_cast<int>(data.x.size());
        const int r = eigen.rank();
        const ScoreMatrix scores = compute_scores(data.x, data.y, eigen, r, r);
        Eigen::MatrixXd table(r, r);
        for (int j = 0; j < r; ++j)
          for (int k = 0; k < r; ++k)
            table(j, k) = (scores.eta.col(j).dot(scores.xi.col(k)) / n) /
                          eigen.eigenvalue(k);
        const Eigen::MatrixXd phi = detail::basis_matrix(eigen, r);
        for (std::size_t t = 0; t < result.truncations.size(); ++t) {
          const auto [m1, m2] = result.truncations[t];
          if (m1 > r || m2 > r) continue;
          const Eigen::MatrixXd surface = phi.leftCols(m1) *
                                          table.topLeftCorner(m1, m2) *
                                          phi.leftCols(m2).transpose();
          result.errors(rep, t) = detail::weighted_sq_distance(
              surface, data.truth.surface.values(), g->weights(), g->weights());
        }
      });
}

/// Index of the per-replication best truncation (NaN entries skipped);
/// -1 where a replication has no feasible truncation.
inline std::vector<int> per_rep_optimal_indices(const SweepResult& result) {
  std::vector<int> best(result.errors.rows(), -1);
  for (Eigen::Index rep = 0; rep < result.errors.rows(); ++rep) {
    for (Eigen::Index t = 0; t < result.errors.cols(); ++t) {
      const double e = result.errors(rep, t);
      if (std::isnan(e)) continue;
      if (best[rep] < 0 || e < result.errors(rep, best[rep]))
        best[rep] = static_cast<int>(t);
    }
  }
  return best;
}

inline double theoretical_slope(double alpha, double beta) {
  return -(2.0 * beta - 1.0) / (alpha + 2.0 * beta);
}

struct SlopePoint {
  int n = 0;
  double mise = 0.0;
};

struct SlopeFit {
  double slope = 0.0;
  double std_error = 0.0;
  double intercept = 0.0;
  double theory_slope = 0.0;
  double gap = 0.0;
};

/// Ordinary least squares of log(optimal MISE) on log n, compared with the
/// theoretical rate exponent -(2 beta - 1)/(alpha + 2 beta).
inline SlopeFit slope_check(const std::vector<SlopePoint>& points, double alpha,
                            double beta) {
  std::vector<std::pair<double, double>> logs;
  for (const SlopePoint& p : points) {
    if (p.n < 1 || !(p.mise > 0.0) || !std::isfinite(p.mise)) continue;
    logs.emplace_back(std::log(static_cast<double>(p.n)), std::log(p.mise));
  }
  std::vector<double> xs;
  for (const auto& [x, y] : logs)
    if (std::find(xs.begin(), xs.end(), x) == xs.end()) xs.push_back(x);
  if (xs.size() < 3)
    throw NumericalError(
        "slope_check: need at least 3 distinct sample sizes with positive MISE");

  const double k = static_cast<double>(logs.size());
  double sx = 0.0, sy = 0.0;
  for (const auto& [x, y] : logs) {
    sx += x;
    sy += y;
  }
  const double mx = sx / k;
  const double my = sy / k;
  double sxx = 0.0, sxy = 0.0;
  for (const auto& [x, y] : logs) {
    sxx += (x - mx) * (x - mx);
    sxy += (x - mx) * (y - my);
  }
  SlopeFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double rss = 0.0;
  for (const auto& [x, y] : logs) {
    const double resid = y - (fit.intercept + fit.slope * x);
    rss += resid * resid;
  }
  fit.std_error = logs.size() > 2
                      ? std::sqrt(rss / (k - 2.0) / sxx)
                      : std::numeric_limits<double>::quiet_NaN();
  fit.theory_slope = theoretical_slope(alpha, beta);
  fit.gap = std::abs(fit.slope - fit.theory_slope);
  return fit;
}

}  // namespace fofr
