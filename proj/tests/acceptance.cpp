// Acceptance suite: exercises every headline guarantee end to end and
// prints one PASS/FAIL line per criterion. Exits nonzero if any fail.
// argv[1] must point at the fofr CLI binary (used by the determinism check).

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "fofr/io.hpp"
#include "fofr/selection.hpp"
#include "fofr/simulation.hpp"

namespace {

using Clock = std::chrono::steady_clock;

int g_failures = 0;
std::string g_cli;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

void report(int index, const std::string& name, bool pass,
            const std::string& detail, double seconds) {
  std::printf("[%s] %d/8 %s — %s (%.1f s)\n", pass ? "PASS" : "FAIL", index,
              name.c_str(), detail.c_str(), seconds);
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(4);
  s << v;
  return s.str();
}

std::vector<int> range(int lo, int hi) {
  std::vector<int> v;
  for (int m = lo; m <= hi; ++m) v.push_back(m);
  return v;
}

fofr::DgpConfig study_config(double alpha, double beta, double gamma, int n,
                         int reps, std::uint64_t seed) {
  fofr::DgpConfig config;
  config.alpha = alpha;
  config.beta = beta;
  config.gamma = gamma;
  config.n = n;
  config.reps = reps;
  config.seed = seed;
  return config;
}

// --- criterion 1: eigensystem invariants on random datasets ---------------

void criterion_eigensystem() {
  const auto start = Clock::now();
  const int n_datasets = 20;
  std::vector<double> defects(n_datasets), residuals(n_datasets),
      score_devs(n_datasets);
  fofr::parallel_for(n_datasets, [&](int d) {
    fofr::DgpConfig config = study_config(1.2, 3.0, 3.0, 200, 1, 1001);
    config.grid_size = 201;
    const fofr::SimulatedDataset data = fofr::generate_dataset(config, d);
    const fofr::GridPtr& g = data.x.front().grid();
    const fofr::Surface k_hat = fofr::empirical_covariance(data.x);
    const fofr::EigenSystem eigen = fofr::eigendecompose(k_hat, g, 20);

    double defect = 0.0;
    for (int a = 0; a < 20; ++a)
      for (int b = 0; b < 20; ++b)
        defect = std::max(
            defect, std::abs(inner_product(eigen.eigenfunctions[a],
                                           eigen.eigenfunctions[b]) -
                             (a == b ? 1.0 : 0.0)));
    defects[d] = defect;

    double residual = 0.0;
    for (int k = 0; k < 20; ++k)
      residual = std::max(
          residual, l2_norm(apply_kernel(k_hat, eigen.eigenfunctions[k]) -
                            eigen.eigenvalue(k) * eigen.eigenfunctions[k]));
    residuals[d] = residual;

    const fofr::ScoreMatrix scores =
        fofr::compute_scores(data.x, {}, eigen, 20, 0);
    double dev = 0.0;
    for (int k = 0; k < 20; ++k)
      dev = std::max(dev, std::abs(scores.xi.col(k).sum() / scores.n));
    for (int l = 0; l < 20; ++l)
      for (int k = 0; k < 20; ++k) {
        const double moment = scores.xi.col(l).dot(scores.xi.col(k)) / scores.n;
        const double target = (l == k) ? eigen.eigenvalue(k) : 0.0;
        dev = std::max(dev, std::abs(moment - target));
      }
    score_devs[d] = dev;
  });
  const double defect = *std::max_element(defects.begin(), defects.end());
  const double residual = *std::max_element(residuals.begin(), residuals.end());
  const double score_dev =
      *std::max_element(score_devs.begin(), score_devs.end());
  const double elapsed = seconds_since(start);
  const bool pass = defect < 1e-8 && residual < 1e-7 && score_dev < 1e-8 &&
                    elapsed < 30.0;
  report(1, "eigensystem invariants (20 datasets, n=200, grid 201)", pass,
         "orthonormality defect " + fmt(defect) + ", eigen-residual " +
             fmt(residual) + ", score-identity deviation " + fmt(score_dev),
         elapsed);
}

// --- criterion 2: exact recovery on the noiseless rank-5 design -----------

void criterion_exact_recovery() {
  const auto start = Clock::now();
  fofr::DgpConfig config;
  config.n = 500;
  config.n_components = 5;
  config.noise_scale = 0.0;
  config.seed = 1729;
  const fofr::SimulatedDataset data = fofr::generate_dataset(config, 0);
  const fofr::FittedModel single = fofr::fit_single(data.x, data.y, 5);
  const fofr::FittedModel dbl = fofr::fit_double(data.x, data.y, 5, 5);
  const double err_single =
      fofr::estimation_error(single.coefficient, data.truth);
  const double err_double = fofr::estimation_error(dbl.coefficient, data.truth);
  const double elapsed = seconds_since(start);
  const bool pass = err_single < 1e-8 && err_double < 1e-8 && elapsed < 10.0;
  report(2, "exact recovery on the noiseless rank-5 design (n=500)", pass,
         "|||bhat-b|||^2 = " + fmt(err_single) + ", |||btilde-b|||^2 = " +
             fmt(err_double),
         elapsed);
}

// --- criteria 3 and 4: rate slopes -----------------------------------------

struct SlopeRun {
  fofr::SlopeFit fit;
  double seconds = 0.0;
};

SlopeRun slope_run(double alpha, double beta, double gamma,
                   std::uint64_t seed) {
  const auto start = Clock::now();
  std::vector<fofr::SlopePoint> points;
  for (int n : {400, 800, 1600, 3200}) {
    const fofr::DgpConfig config = study_config(alpha, beta, gamma, n, 100, seed);
    const fofr::SweepResult sweep = fofr::mise_sweep_single(config, range(1, 20));
    points.push_back({n, sweep.optimal_mise()});
  }
  return {fofr::slope_check(points, alpha, beta), seconds_since(start)};
}

void criterion_rate_slopes(const SlopeRun& gamma3_run) {
  const SlopeRun steep = slope_run(2.4, 3.0, 3.0, 2001);
  const bool pass_a =
      gamma3_run.fit.gap <= 0.2 && gamma3_run.seconds < 1200.0;
  const bool pass_b = steep.fit.gap <= 0.2 && steep.seconds < 1200.0;
  report(3, "rate slopes at oracle truncation (100 reps, n=400..3200)",
         pass_a && pass_b,
         "(1.2,3,3): fitted " + fmt(gamma3_run.fit.slope) + " vs theory " +
             fmt(gamma3_run.fit.theory_slope) + "; (2.4,3,3): fitted " +
             fmt(steep.fit.slope) + " vs theory " + fmt(steep.fit.theory_slope),
         gamma3_run.seconds + steep.seconds);
}

void criterion_gamma_insensitivity(const SlopeRun& gamma3_run) {
  const SlopeRun low = slope_run(1.2, 3.0, 2.5, 3001);
  const SlopeRun high = slope_run(1.2, 3.0, 4.0, 3002);
  const double s25 = low.fit.slope;
  const double s30 = gamma3_run.fit.slope;
  const double s40 = high.fit.slope;
  const double spread = std::max({std::abs(s25 - s30), std::abs(s25 - s40),
                                  std::abs(s30 - s40)});
  report(4, "single-truncation slope is gamma-insensitive", spread <= 0.1,
         "slopes " + fmt(s25) + " / " + fmt(s30) + " / " + fmt(s40) +
             " for gamma 2.5 / 3 / 4, max pairwise gap " + fmt(spread),
         low.seconds + high.seconds);
}

// --- criterion 5: double truncation beats single at high gamma -------------

void criterion_double_beats_single() {
  const auto start = Clock::now();
  const fofr::DgpConfig config = study_config(1.2, 3.0, 4.0, 2000, 100, 5001);
  const fofr::SweepResult single = fofr::mise_sweep_single(config, range(1, 20));
  std::vector<std::pair<int, int>> pairs;
  for (int m1 = 1; m1 <= 20; ++m1)
    for (int m2 = 1; m2 <= 20; ++m2) pairs.emplace_back(m1, m2);
  const fofr::SweepResult dbl = fofr::mise_sweep_double(config, pairs);
  const double ratio = single.optimal_mise() / dbl.optimal_mise();
  report(5, "double truncation beats single at gamma=4 (n=2000, 100 reps)",
         ratio > 1.2,
         "optimal MISE ratio single/double = " + fmt(ratio) + " (single " +
             fmt(single.optimal_mise()) + " at m=" +
             std::to_string(single.optimal().m2) + ", double " +
             fmt(dbl.optimal_mise()) + " at (" +
             std::to_string(dbl.optimal().m1) + "," +
             std::to_string(dbl.optimal().m2) + "))",
         seconds_since(start));
}

// --- criterion 6: cross-validation sanity -----------------------------------

void criterion_cv_sanity(const std::string& data_dir) {
  const auto start = Clock::now();
  const int reps = 20;
  std::vector<int> cv_choice(reps), oracle_choice(reps);
  for (int rep = 0; rep < reps; ++rep) {
    const fofr::DgpConfig config = study_config(1.2, 3.0, 3.0, 400, 1, 6001);
    const fofr::SimulatedDataset data = fofr::generate_dataset(config, rep);
    const fofr::CvResult cv = fofr::cv_single(data.x, data.y, range(1, 20));
    cv_choice[rep] = cv.best().m2;

    const fofr::GridPtr& g = data.x.front().grid();
    const fofr::EigenSystem eigen =
        fofr::eigendecompose(fofr::empirical_covariance(data.x), g, 20);
    int best_m = 0;
    double best_err = std::numeric_limits<double>::infinity();
    for (int m = 1; m <= std::min(20, eigen.rank()); ++m) {
      const fofr::FittedModel model = fofr::fit_single(data.x, data.y, eigen, m);
      const double err = fofr::estimation_error(model.coefficient, data.truth);
      if (err < best_err) {
        best_err = err;
        best_m = m;
      }
    }
    oracle_choice[rep] = best_m;
  }
  int within = 0;
  for (int rep = 0; rep < reps; ++rep)
    if (std::abs(cv_choice[rep] - oracle_choice[rep]) <= 2) ++within;

  const auto [x_data, y_data] =
      fofr::io::read_xy(data_dir + "/rank5_x.csv", data_dir + "/rank5_y.csv");
  const fofr::CvResult fixture_cv =
      fofr::cv_single(x_data.samples, y_data.samples, range(1, 8));
  const bool fixture_ok = fixture_cv.best().m2 == 5;

  const bool pass = within >= 16 && fixture_ok;
  report(6, "cross-validation tracks the oracle truncation", pass,
         std::to_string(within) + "/20 replications within +-2 of the oracle; "
         "rank-5 fixture selects m=" + std::to_string(fixture_cv.best().m2),
         seconds_since(start));
}

// --- criterion 7: sign robustness -------------------------------------------

void criterion_sign_robustness() {
  const auto start = Clock::now();
  const fofr::DgpConfig config = study_config(1.2, 3.0, 3.0, 200, 1, 7001);
  const fofr::SimulatedDataset data = fofr::generate_dataset(config, 0);
  const fofr::GridPtr& g = data.x.front().grid();
  const fofr::EigenSystem eigen =
      fofr::eigendecompose(fofr::empirical_covariance(data.x), g, 10);

  double worst = 0.0;
  std::mt19937_64 gen(77);
  for (int trial = 0; trial < 5; ++trial) {
    fofr::EigenSystem flipped = eigen;
    for (auto& phi : flipped.eigenfunctions)
      if (gen() & 1u) phi = -1.0 * phi;
    const fofr::FittedModel s_a = fofr::fit_single(data.x, data.y, eigen, 8);
    const fofr::FittedModel s_b = fofr::fit_single(data.x, data.y, flipped, 8);
    const fofr::FittedModel d_a = fofr::fit_double(data.x, data.y, eigen, 7, 8);
    const fofr::FittedModel d_b = fofr::fit_double(data.x, data.y, flipped, 7, 8);
    worst = std::max(worst, surface_norm(s_a.coefficient.surface -
                                         s_b.coefficient.surface));
    worst = std::max(worst, surface_norm(d_a.coefficient.surface -
                                         d_b.coefficient.surface));
  }
  report(7, "estimators invariant under eigenfunction sign flips",
         worst < 1e-12, "max surface-norm change " + fmt(worst),
         seconds_since(start));
}

// --- criterion 8: CLI determinism --------------------------------------------

int run_command(const std::string& cmd) {
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void criterion_cli_determinism() {
  const auto start = Clock::now();
  const std::filesystem::path root =
      std::filesystem::temp_directory_path() / "fofr_acceptance_determinism";
  std::filesystem::remove_all(root);
  std::filesystem::create_directories(root);
  const std::string args =
      " simulate --alpha 1.2 --beta 3 --gamma 3 --n 200 --reps 6 --seed 123"
      " --grid-size 51 --components 40 --max-truncation 6 --out ";
  bool ok = true;
  ok &= run_command("FOFREG_THREADS=1 " + g_cli + args + (root / "a").string() +
                    " > /dev/null 2>&1") == 0;
  ok &= run_command("FOFREG_THREADS=1 " + g_cli + args + (root / "b").string() +
                    " > /dev/null 2>&1") == 0;
  ok &= run_command("FOFREG_THREADS=4 " + g_cli + args + (root / "c").string() +
                    " > /dev/null 2>&1") == 0;
  bool identical = ok;
  for (const std::string name :
       {"mise_table.csv", "optimal_truncations.csv", "slopes.csv",
        "metadata.txt"}) {
    const std::string a = read_file((root / "a" / name).string());
    identical &= !a.empty();
    identical &= a == read_file((root / "b" / name).string());
    identical &= a == read_file((root / "c" / name).string());
  }
  std::filesystem::remove_all(root);
  report(8, "cli simulate is byte-deterministic across runs and thread counts",
         identical, ok ? "all four output files identical over 3 runs"
                       : "cli invocation failed",
         seconds_since(start));
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::fprintf(stderr, "usage: acceptance_tests <path-to-fofr-binary>\n");
    return 2;
  }
  g_cli = argv[1];
  const std::string data_dir = FOFR_TEST_DATA_DIR;

  criterion_eigensystem();
  criterion_exact_recovery();
  const SlopeRun gamma3_run = slope_run(1.2, 3.0, 3.0, 1001);
  criterion_rate_slopes(gamma3_run);
  criterion_gamma_insensitivity(gamma3_run);
  criterion_double_beats_single();
  criterion_cv_sanity(data_dir);
  criterion_sign_robustness();
  criterion_cli_determinism();

  if (g_failures == 0) {
    std::printf("acceptance: all 8 criteria passed\n");
    return 0;
  }
  std::printf("acceptance: %d criteria FAILED\n", g_failures);
  return 1;
}
