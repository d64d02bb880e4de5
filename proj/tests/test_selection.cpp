#include "fofr/selection.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "fofr/simulation.hpp"
#include "support/oracles.hpp"

using fofr::cv_double;
using fofr::cv_single;
using fofr::CvResult;
using fofr::DgpConfig;
using fofr::FunctionSample;
using fofr::generate_dataset;
using fofr::Grid;
using fofr::GridPtr;
using fofr::SimulatedDataset;

namespace {

DgpConfig rank5_config(int n, std::uint64_t seed) {
  DgpConfig config;
  config.n = n;
  config.n_components = 5;
  config.noise_scale = 0.0;
  config.seed = seed;
  return config;
}

std::vector<int> range(int lo, int hi) {
  std::vector<int> v;
  for (int m = lo; m <= hi; ++m) v.push_back(m);
  return v;
}

std::vector<std::pair<int, int>> grid2(int lo, int hi) {
  std::vector<std::pair<int, int>> v;
  for (int m1 = lo; m1 <= hi; ++m1)
    for (int m2 = lo; m2 <= hi; ++m2) v.emplace_back(m1, m2);
  return v;
}

}  // namespace

TEST(CvSingle, ConstantResponsesTieTowardSmallestCandidate) {
  DgpConfig config;
  config.n = 20;
  config.grid_size = 31;
  config.n_components = 5;
  config.seed = 3;
  const SimulatedDataset data = generate_dataset(config, 0);
  std::vector<FunctionSample> ys(
      data.x.size(),
      FunctionSample::constant(data.x.front().grid(), 1.25));
  const CvResult cv = cv_single(data.x, ys, {5, 2, 4, 3});
  EXPECT_EQ(cv.best().m2, 2);
  EXPECT_TRUE(cv.ties_broken);
}

TEST(CvSingle, NoiselessRank5SelectsFive) {
  const SimulatedDataset data = generate_dataset(rank5_config(200, 4), 0);
  const CvResult cv = cv_single(data.x, data.y, range(1, 10));
  EXPECT_EQ(cv.best().m2, 5);
  // Candidates 6..10 exceed every fold's rank and must be excluded.
  for (std::size_t i = 0; i < cv.candidates.size(); ++i) {
    EXPECT_EQ(cv.feasible[i] != 0, cv.candidates[i].m2 <= 5);
    if (cv.feasible[i]) {
      EXPECT_TRUE(std::isfinite(cv.scores[i]));
      EXPECT_GE(cv.scores[i], 0.0);
    } else {
      EXPECT_TRUE(std::isnan(cv.scores[i]));
    }
  }
}

TEST(CvSingle, TracksOracleOnNoisyDesign) {
  DgpConfig config;
  config.n = 400;
  config.seed = 5;
  const SimulatedDataset data = generate_dataset(config, 0);
  const CvResult cv = cv_single(data.x, data.y, range(1, 12));

  // Oracle: the truncation minimizing the true error for this dataset.
  const fofr::GridPtr& g = data.x.front().grid();
  const fofr::EigenSystem eigen = fofr::eigendecompose(
      fofr::empirical_covariance(data.x), g, 12);
  int best_m = 0;
  double best_err = std::numeric_limits<double>::infinity();
  for (int m = 1; m <= 12; ++m) {
    const fofr::FittedModel model = fofr::fit_single(data.x, data.y, eigen, m);
    const double err = fofr::estimation_error(model.coefficient, data.truth);
    if (err < best_err) {
      best_err = err;
      best_m = m;
    }
  }
  EXPECT_LE(std::abs(cv.best().m2 - best_m), 2);
}

TEST(CvSingle, MatchesManualLeaveOneOutSum) {
  DgpConfig config;
  config.n = 12;
  config.grid_size = 41;
  config.n_components = 5;
  config.seed = 6;
  const SimulatedDataset data = generate_dataset(config, 0);
  const CvResult cv = cv_single(data.x, data.y, {3});

  double manual = 0.0;
  for (std::size_t i = 0; i < data.x.size(); ++i) {
    std::vector<FunctionSample> xs, ys;
    for (std::size_t j = 0; j < data.x.size(); ++j) {
      if (j == i) continue;
      xs.push_back(data.x[j]);
      ys.push_back(data.y[j]);
    }
    const fofr::FittedModel model = fofr::fit_single(xs, ys, 3);
    const FunctionSample diff = fofr::predict(model, data.x[i]) - data.y[i];
    manual += inner_product(diff, diff);
  }
  EXPECT_NEAR(cv.scores[0], manual, 1e-10 * std::max(1.0, manual));
}

TEST(CvSingle, DeterministicAcrossRepeatsAndThreadCounts) {
  DgpConfig config;
  config.n = 40;
  config.grid_size = 51;
  config.seed = 7;
  const SimulatedDataset data = generate_dataset(config, 0);

  setenv("FOFREG_THREADS", "1", 1);
  const CvResult a = cv_single(data.x, data.y, range(1, 6));
  setenv("FOFREG_THREADS", "4", 1);
  const CvResult b = cv_single(data.x, data.y, range(1, 6));
  unsetenv("FOFREG_THREADS");
  ASSERT_EQ(a.scores.size(), b.scores.size());
  for (std::size_t i = 0; i < a.scores.size(); ++i)
    EXPECT_EQ(a.scores[i], b.scores[i]);
  EXPECT_EQ(a.best_index, b.best_index);
}

TEST(CvSingle, PureNoiseCriterionIncreasesWithTruncation) {
  // b = 0: the criterion has no bias term to pay off, so the median curve
  // over replications is non-decreasing beyond m = 1.
  const int reps = 20;
  const std::vector<int> candidates = range(1, 6);
  std::vector<std::vector<double>> curves;
  for (int rep = 0; rep < reps; ++rep) {
    DgpConfig config;
    config.n = 100;
    config.b_scale = 0.0;
    config.seed = 900 + rep;
    const SimulatedDataset data = generate_dataset(config, 0);
    const CvResult cv = cv_single(data.x, data.y, candidates);
    curves.push_back(cv.scores);
  }
  std::vector<double> median(candidates.size());
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    std::vector<double> column;
    for (const auto& curve : curves) column.push_back(curve[c]);
    std::sort(column.begin(), column.end());
    median[c] = column[reps / 2];
  }
  for (std::size_t c = 1; c < median.size(); ++c)
    EXPECT_GE(median[c], median[c - 1]);
}

TEST(CvSingle, InputValidation) {
  const SimulatedDataset data = generate_dataset(rank5_config(10, 8), 0);
  EXPECT_THROW(cv_single(data.x, data.y, {}), fofr::DataError);
  EXPECT_THROW(cv_single(data.x, data.y, {0}), fofr::DataError);
  const std::vector<FunctionSample> two = {data.x[0], data.x[1]};
  EXPECT_THROW(cv_single(two, two, {1}), fofr::DataError);
  // All candidates beyond the usable rank: nothing to select.
  EXPECT_THROW(cv_single(data.x, data.y, {9}), fofr::NumericalError);
}

TEST(CvDouble, ZeroResponsesTieTowardLexicographicSmallest) {
  DgpConfig config;
  config.n = 15;
  config.grid_size = 31;
  config.n_components = 4;
  config.seed = 9;
  const SimulatedDataset data = generate_dataset(config, 0);
  const std::vector<FunctionSample> ys(
      data.x.size(), FunctionSample::zero(data.x.front().grid()));
  const CvResult cv = cv_double(data.x, ys, grid2(1, 3));
  EXPECT_EQ(cv.best().m1, 1);
  EXPECT_EQ(cv.best().m2, 1);
  EXPECT_TRUE(cv.ties_broken);
}

TEST(CvDouble, NoiselessRank5SelectsFiveFive) {
  const SimulatedDataset data = generate_dataset(rank5_config(200, 4), 0);
  const CvResult cv = cv_double(data.x, data.y, grid2(1, 8));
  EXPECT_EQ(cv.best().m1, 5);
  EXPECT_EQ(cv.best().m2, 5);
}

TEST(CvDouble, TransposedCandidatesMatchOnSymmetricData) {
  // With Y = X the fitted response surface depends on (m1, m2) only through
  // min(m1, m2), so transposed candidates give equal criteria.
  DgpConfig config;
  config.n = 60;
  config.grid_size = 51;
  config.seed = 10;
  const SimulatedDataset data = generate_dataset(config, 0);
  const std::vector<std::pair<int, int>> candidates = {
      {2, 5}, {5, 2}, {1, 4}, {4, 1}, {3, 3}};
  const CvResult cv = cv_double(data.x, data.x, candidates);
  const double scale = std::max(1.0, std::abs(cv.scores[0]));
  EXPECT_NEAR(cv.scores[0], cv.scores[1], 1e-10 * scale);
  EXPECT_NEAR(cv.scores[2], cv.scores[3], 1e-10 * scale);
}

TEST(CvDouble, InfeasibleCandidatesExcluded) {
  const SimulatedDataset data = generate_dataset(rank5_config(80, 11), 0);
  const std::vector<std::pair<int, int>> candidates = {{2, 2}, {6, 2}, {2, 6}};
  const CvResult cv = cv_double(data.x, data.y, candidates);
  EXPECT_TRUE(cv.feasible[0]);
  EXPECT_FALSE(cv.feasible[1]);
  EXPECT_FALSE(cv.feasible[2]);
  EXPECT_EQ(cv.best_index, 0);
}
