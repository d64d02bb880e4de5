// fofr: function-on-function linear regression via FPCA series estimators.
// Subcommands: fit, cv, slice, simulate. Exit codes: 0 success, 1 usage,
// 2 data error, 3 numerical error.

#include <CLI11.hpp>

#include <cmath>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "fofr/io.hpp"
#include "fofr/selection.hpp"
#include "fofr/simulation.hpp"

namespace {

using fofr::io::format_value;

struct FitArgs {
  std::string x_path, y_path, out_dir;
  std::string estimator = "single";
  std::string truncation;
  std::string cv_range;
  int grid_size = 0;
};

struct SliceArgs {
  std::string surface_path;
  std::string axis;
  double at = 0.0;
  std::string out_path;
};

struct SimulateArgs {
  std::string config_path, out_dir;
  std::string estimator = "both";
  std::vector<int> n_values;  // defaults to 400,800,1600,3200 when not given
  double alpha = 0.0, beta = 0.0, gamma = 0.0;
  double noise_decay = 1.1, noise_scale = 1.0, b_scale = 1.0;
  int reps = 100, grid_size = 101, n_components = 50, max_truncation = 20;
  std::uint64_t seed = 0;
  bool seed_given = false;
};

std::pair<int, int> parse_truncation(const std::string& text, bool is_double) {
  int m1 = 0, m2 = 0;
  const std::size_t comma = text.find(',');
  if (comma != std::string::npos && !is_double)
    throw std::invalid_argument("--truncation M1,M2 requires --estimator double");
  try {
    if (comma == std::string::npos) {
      m2 = std::stoi(text);
      m1 = is_double ? m2 : 0;
    } else {
      m1 = std::stoi(text.substr(0, comma));
      m2 = std::stoi(text.substr(comma + 1));
    }
  } catch (const std::exception&) {
    throw std::invalid_argument("--truncation: cannot parse '" + text + "'");
  }
  if (m2 < 1 || (is_double && m1 < 1))
    throw std::invalid_argument("--truncation: levels must be >= 1");
  return {m1, m2};
}

std::vector<int> parse_range(const std::string& text) {
  const std::size_t dots = text.find("..");
  int lo = 0, hi = 0;
  try {
    if (dots == std::string::npos) {
      lo = hi = std::stoi(text);
    } else {
      lo = std::stoi(text.substr(0, dots));
      hi = std::stoi(text.substr(dots + 2));
    }
  } catch (const std::exception&) {
    throw std::invalid_argument("--cv: cannot parse range '" + text + "'");
  }
  if (lo < 1 || hi < lo)
    throw std::invalid_argument("--cv: range '" + text + "' must satisfy 1 <= lo <= hi");
  std::vector<int> values;
  for (int m = lo; m <= hi; ++m) values.push_back(m);
  return values;
}

// "A..B" for the single truncation; "A..B" or "A..BxC..D" for the double.
std::pair<std::vector<int>, std::vector<int>> parse_cv_ranges(
    const std::string& text, bool is_double) {
  const std::size_t cross = text.find('x');
  if (cross == std::string::npos) {
    const std::vector<int> r = parse_range(text);
    return {r, r};
  }
  if (!is_double)
    throw std::invalid_argument("--cv AxB grids require --estimator double");
  return {parse_range(text.substr(0, cross)),
          parse_range(text.substr(cross + 1))};
}

std::string join_path(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

void write_cv_table(const std::string& path, const fofr::CvResult& cv) {
  const bool single = cv.candidates.front().is_single();
  std::vector<std::vector<std::string>> rows;
  for (std::size_t i = 0; i < cv.candidates.size(); ++i) {
    std::vector<std::string> row;
    if (single) {
      row.push_back(std::to_string(cv.candidates[i].m2));
    } else {
      row.push_back(std::to_string(cv.candidates[i].m1));
      row.push_back(std::to_string(cv.candidates[i].m2));
    }
    row.push_back(format_value(cv.scores[i]));
    row.push_back(cv.feasible[i] ? "1" : "0");
    row.push_back(static_cast<int>(i) == cv.best_index ? "1" : "0");
    rows.push_back(std::move(row));
  }
  fofr::io::write_csv(path,
                      single ? "m,score,feasible,selected"
                             : "m1,m2,score,feasible,selected",
                      rows);
}

fofr::CvResult run_cv_search(const std::vector<fofr::FunctionSample>& x,
                             const std::vector<fofr::FunctionSample>& y,
                             const std::string& range_text, bool is_double) {
  const auto [r1, r2] = parse_cv_ranges(range_text, is_double);
  if (!is_double) return fofr::cv_single(x, y, r2);
  std::vector<std::pair<int, int>> candidates;
  for (int m1 : r1)
    for (int m2 : r2) candidates.emplace_back(m1, m2);
  return fofr::cv_double(x, y, candidates);
}

int run_fit(const FitArgs& args, bool fit_outputs) {
  const bool is_double = args.estimator == "double";
  if (fit_outputs && args.truncation.empty() == args.cv_range.empty())
    throw std::invalid_argument(
        "fit: exactly one of --truncation and --cv is required");
  if (!fit_outputs && args.cv_range.empty())
    throw std::invalid_argument("cv: --cv RANGE is required");

  auto [x_data, y_data] = fofr::io::read_xy(args.x_path, args.y_path);
  if (args.grid_size > 0) {
    const fofr::GridPtr target = fofr::Grid::uniform(args.grid_size);
    x_data = fofr::io::resample(x_data, target);
    y_data = fofr::io::resample(y_data, target);
  }
  const std::vector<fofr::FunctionSample>& x = x_data.samples;
  const std::vector<fofr::FunctionSample>& y = y_data.samples;

  std::optional<fofr::CvResult> cv;
  int m1 = 0, m2 = 0;
  if (!args.cv_range.empty()) {
    cv = run_cv_search(x, y, args.cv_range, is_double);
    m1 = cv->best().m1;
    m2 = cv->best().m2;
  } else {
    std::tie(m1, m2) = parse_truncation(args.truncation, is_double);
  }

  std::vector<std::pair<std::string, std::string>> meta;
  meta.emplace_back("command", fit_outputs ? "fit" : "cv");
  meta.emplace_back("x_file", args.x_path);
  meta.emplace_back("y_file", args.y_path);
  meta.emplace_back("n", std::to_string(x.size()));
  meta.emplace_back("grid_size", std::to_string(x.front().grid()->size()));
  meta.emplace_back("axis_min", format_value(x_data.axis.lo));
  meta.emplace_back("axis_max", format_value(x_data.axis.hi));
  meta.emplace_back("estimator", args.estimator);
  if (cv) {
    meta.emplace_back("cv_candidates", args.cv_range);
    meta.emplace_back("cv_selected", fofr::to_string(cv->best()));
    meta.emplace_back("cv_ties_broken", cv->ties_broken ? "1" : "0");
    write_cv_table(join_path(args.out_dir, "cv_scores.csv"), *cv);
  }

  if (!fit_outputs) {
    fofr::io::write_key_values(join_path(args.out_dir, "metadata.txt"), meta);
    std::cout << "selected " << fofr::to_string(cv->best()) << "\n";
    return 0;
  }

  const fofr::FittedModel model = is_double ? fofr::fit_double(x, y, m1, m2)
                                            : fofr::fit_single(x, y, m2);
  if (!model.warning.empty()) std::cerr << "warning: " << model.warning << "\n";

  fofr::io::write_surface(join_path(args.out_dir, "surface.csv"),
                          model.coefficient.surface, y_data.axis, x_data.axis);
  if (is_double) {
    std::vector<std::vector<std::string>> rows;
    for (int j = 0; j < model.coefficient.coeffs.rows(); ++j)
      for (int k = 0; k < model.coefficient.coeffs.cols(); ++k)
        rows.push_back({std::to_string(j + 1), std::to_string(k + 1),
                        format_value(model.coefficient.coeffs(j, k))});
    fofr::io::write_csv(join_path(args.out_dir, "coefficients.csv"),
                        "j,k,coefficient", rows);
  }
  {
    std::vector<std::vector<std::string>> rows;
    for (int k = 0; k < model.eigen.eigenvalues.size(); ++k)
      rows.push_back({std::to_string(k + 1),
                      format_value(model.eigen.eigenvalues(k))});
    fofr::io::write_csv(join_path(args.out_dir, "scree.csv"), "k,eigenvalue",
                        rows);
  }
  meta.emplace_back("truncation", fofr::to_string(model.coefficient.truncation));
  meta.emplace_back("usable_rank", std::to_string(model.eigen.rank()));
  meta.emplace_back("rank_cutoff", format_value(model.eigen.rank_cutoff));
  if (!model.warning.empty()) meta.emplace_back("warning", model.warning);
  fofr::io::write_key_values(join_path(args.out_dir, "metadata.txt"), meta);
  return 0;
}

int run_slice(const SliceArgs& args) {
  const fofr::io::LoadedSurface loaded = fofr::io::read_surface(args.surface_path);
  const bool along_s = args.axis == "s";  // fixed s => slice varies in t
  const std::vector<double>& fixed_coords =
      along_s ? loaded.s_native : loaded.t_native;
  if (args.at < fixed_coords.front() || args.at > fixed_coords.back()) {
    std::ostringstream msg;
    msg << "slice: --at " << args.at << " outside the " << args.axis
        << " axis range [" << fixed_coords.front() << ", "
        << fixed_coords.back() << "]";
    throw std::invalid_argument(msg.str());
  }
  std::size_t nearest = 0;
  for (std::size_t i = 1; i < fixed_coords.size(); ++i)
    if (std::abs(fixed_coords[i] - args.at) <
        std::abs(fixed_coords[nearest] - args.at))
      nearest = i;

  const std::vector<double>& run_coords =
      along_s ? loaded.t_native : loaded.s_native;
  std::ostringstream out;
  out << (along_s ? "t" : "s") << ",value\n";
  for (std::size_t i = 0; i < run_coords.size(); ++i) {
    const double v = along_s
                         ? loaded.surface.values()(nearest, i)
                         : loaded.surface.values()(i, nearest);
    out << format_value(run_coords[i]) << "," << format_value(v) << "\n";
  }
  if (args.out_path.empty())
    std::cout << out.str();
  else
    fofr::io::write_text_atomic(args.out_path, out.str());
  return 0;
}

void merge_config_file(SimulateArgs& args, const CLI::App* sub) {
  if (args.config_path.empty()) return;
  const std::map<std::string, std::string> config =
      fofr::io::read_config(args.config_path);
  fofr::io::require_config_keys(
      config,
      {"alpha", "beta", "gamma", "n", "reps", "seed", "grid_size", "estimator",
       "max_truncation", "n_components", "noise_decay", "noise_scale",
       "b_scale"},
      args.config_path);
  const auto given = [&](const std::string& flag) {
    return sub->count(flag) > 0;
  };
  const auto fetch = [&](const std::string& key) -> const std::string* {
    const auto it = config.find(key);
    return it == config.end() ? nullptr : &it->second;
  };
  const auto parse_double = [&](const std::string& key, double& out) {
    if (const std::string* v = fetch(key)) out = std::stod(*v);
  };
  const auto parse_int = [&](const std::string& key, int& out) {
    if (const std::string* v = fetch(key)) out = std::stoi(*v);
  };
  try {
    if (!given("--alpha")) parse_double("alpha", args.alpha);
    if (!given("--beta")) parse_double("beta", args.beta);
    if (!given("--gamma")) parse_double("gamma", args.gamma);
    if (!given("--reps")) parse_int("reps", args.reps);
    if (!given("--grid-size")) parse_int("grid_size", args.grid_size);
    if (!given("--components")) parse_int("n_components", args.n_components);
    if (!given("--max-truncation")) parse_int("max_truncation", args.max_truncation);
    if (!given("--noise-decay")) parse_double("noise_decay", args.noise_decay);
    if (!given("--noise-scale")) parse_double("noise_scale", args.noise_scale);
    if (!given("--b-scale")) parse_double("b_scale", args.b_scale);
    if (!given("--estimator"))
      if (const std::string* v = fetch("estimator")) args.estimator = *v;
    if (!given("--seed"))
      if (const std::string* v = fetch("seed")) {
        args.seed = std::stoull(*v);
        args.seed_given = true;
      }
    if (!given("--n"))
      if (const std::string* v = fetch("n")) {
        args.n_values.clear();
        std::stringstream ss(*v);
        std::string item;
        while (std::getline(ss, item, ','))
          args.n_values.push_back(std::stoi(item));
      }
  } catch (const std::invalid_argument&) {
    throw std::invalid_argument(args.config_path + ": malformed numeric value");
  } catch (const std::out_of_range&) {
    throw std::invalid_argument(args.config_path + ": numeric value out of range");
  }
}

int run_simulate(SimulateArgs& args, const CLI::App* sub) {
  merge_config_file(args, sub);
  if (args.n_values.empty()) args.n_values = {400, 800, 1600, 3200};
  if (args.reps < 1)
    throw std::invalid_argument("simulate: reps must be >= 1");
  if (!(args.alpha > 0.0) || !(args.beta > 0.0) || !(args.gamma > 0.0))
    throw std::invalid_argument("simulate: alpha, beta, gamma must be given and positive");
  if (!args.seed_given)
    throw std::invalid_argument("simulate: seed must be given (--seed or config seed)");
  if (args.estimator != "single" && args.estimator != "double" &&
      args.estimator != "both")
    throw std::invalid_argument("simulate: estimator must be single, double or both");
  if (args.max_truncation < 1)
    throw std::invalid_argument("simulate: max_truncation must be >= 1");

  fofr::DgpConfig base;
  base.alpha = args.alpha;
  base.beta = args.beta;
  base.gamma = args.gamma;
  base.grid_size = args.grid_size;
  base.n_components = args.n_components;
  base.noise_decay = args.noise_decay;
  base.noise_scale = args.noise_scale;
  base.b_scale = args.b_scale;
  base.reps = args.reps;
  base.seed = args.seed;
  base.n = args.n_values.front();
  const fofr::ConfigReport report = fofr::validate(base);
  for (const std::string& w : report.warnings)
    std::cerr << "warning: " << w << "\n";

  std::vector<int> single_grid;
  for (int m = 1; m <= args.max_truncation; ++m) single_grid.push_back(m);
  std::vector<std::pair<int, int>> double_grid;
  for (int m1 = 1; m1 <= args.max_truncation; ++m1)
    for (int m2 = 1; m2 <= args.max_truncation; ++m2)
      double_grid.emplace_back(m1, m2);

  const bool run_single = args.estimator != "double";
  const bool run_double = args.estimator != "single";

  std::vector<std::vector<std::string>> mise_rows;
  std::vector<std::vector<std::string>> optimal_rows;
  std::vector<fofr::SlopePoint> single_points, double_points;

  for (const int n : args.n_values) {
    if (n < 3) throw std::invalid_argument("simulate: sample sizes must be >= 3");
    fofr::DgpConfig config = base;
    config.n = n;
    std::vector<std::pair<std::string, fofr::SweepResult>> sweeps;
    if (run_single)
      sweeps.emplace_back("single", fofr::mise_sweep_single(config, single_grid));
    if (run_double)
      sweeps.emplace_back("double", fofr::mise_sweep_double(config, double_grid));
    for (const auto& [name, sweep] : sweeps) {
      for (std::size_t t = 0; t < sweep.truncations.size(); ++t)
        mise_rows.push_back({name, std::to_string(n),
                             std::to_string(sweep.truncations[t].m1),
                             std::to_string(sweep.truncations[t].m2),
                             format_value(sweep.mean_mise[t]),
                             std::to_string(sweep.reps_used[t])});
      if (sweep.optimal_index >= 0) {
        const fofr::Truncation best = sweep.optimal();
        optimal_rows.push_back({name, std::to_string(n),
                                std::to_string(best.m1), std::to_string(best.m2),
                                format_value(sweep.optimal_mise())});
        (name == "single" ? single_points : double_points)
            .push_back({n, sweep.optimal_mise()});
      }
    }
  }

  fofr::io::write_csv(join_path(args.out_dir, "mise_table.csv"),
                      "estimator,n,m_s,m_t,mise,reps_used", mise_rows);
  fofr::io::write_csv(join_path(args.out_dir, "optimal_truncations.csv"),
                      "estimator,n,m_s,m_t,mise", optimal_rows);

  const std::string nan = format_value(std::nan(""));
  std::vector<std::vector<std::string>> slope_rows;
  const auto add_slope = [&](const std::string& name,
                             const std::vector<fofr::SlopePoint>& points) {
    const double theory = fofr::theoretical_slope(args.alpha, args.beta);
    if (points.size() >= 3) {
      const fofr::SlopeFit fit = fofr::slope_check(points, args.alpha, args.beta);
      slope_rows.push_back({name, format_value(fit.slope),
                            format_value(fit.std_error),
                            format_value(fit.theory_slope),
                            format_value(fit.gap)});
    } else {
      slope_rows.push_back({name, nan, nan, format_value(theory), nan});
    }
  };
  if (run_single) add_slope("single", single_points);
  if (run_double) add_slope("double", double_points);
  fofr::io::write_csv(join_path(args.out_dir, "slopes.csv"),
                      "estimator,fitted_slope,std_error,theory_slope,gap",
                      slope_rows);

  std::vector<std::pair<std::string, std::string>> meta;
  meta.emplace_back("command", "simulate");
  meta.emplace_back("alpha", format_value(args.alpha));
  meta.emplace_back("beta", format_value(args.beta));
  meta.emplace_back("gamma", format_value(args.gamma));
  {
    std::ostringstream ns;
    for (std::size_t i = 0; i < args.n_values.size(); ++i) {
      if (i > 0) ns << ",";
      ns << args.n_values[i];
    }
    meta.emplace_back("n", ns.str());
  }
  meta.emplace_back("reps", std::to_string(args.reps));
  meta.emplace_back("seed", std::to_string(args.seed));
  meta.emplace_back("grid_size", std::to_string(args.grid_size));
  meta.emplace_back("n_components", std::to_string(args.n_components));
  meta.emplace_back("noise_decay", format_value(args.noise_decay));
  meta.emplace_back("noise_scale", format_value(args.noise_scale));
  meta.emplace_back("b_scale", format_value(args.b_scale));
  meta.emplace_back("estimator", args.estimator);
  meta.emplace_back("max_truncation", std::to_string(args.max_truncation));
  meta.emplace_back("theory_slope",
                    format_value(fofr::theoretical_slope(args.alpha, args.beta)));
  meta.emplace_back("assumption_satisfied",
                    report.assumption_satisfied ? "1" : "0");
  meta.emplace_back("double_rate_optimal_region",
                    report.double_rate_optimal_region ? "1" : "0");
  for (std::size_t i = 0; i < report.warnings.size(); ++i)
    meta.emplace_back("warning_" + std::to_string(i + 1), report.warnings[i]);
  fofr::io::write_key_values(join_path(args.out_dir, "metadata.txt"), meta);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"PCA-based estimation for functional linear regression with "
               "functional responses"};
  app.require_subcommand(1);

  FitArgs fit_args;
  CLI::App* fit = app.add_subcommand(
      "fit", "Estimate the coefficient surface b(s,t) from X/Y curve files");
  fit->add_option("--x", fit_args.x_path, "Predictor CSV")->required();
  fit->add_option("--y", fit_args.y_path, "Response CSV")->required();
  fit->add_option("--estimator", fit_args.estimator, "single|double")
      ->check(CLI::IsMember({"single", "double"}));
  fit->add_option("--truncation", fit_args.truncation, "M (single) or M1,M2 (double)");
  fit->add_option("--cv", fit_args.cv_range,
                  "Candidate range A..B (or A..BxC..D for double); selects by "
                  "leave-one-out cross-validation");
  fit->add_option("--grid-size", fit_args.grid_size,
                  "Resample curves onto a uniform grid of this size");
  fit->add_option("--out", fit_args.out_dir, "Output directory")->required();

  FitArgs cv_args;
  CLI::App* cv = app.add_subcommand(
      "cv", "Cross-validate truncation levels without writing a fit");
  cv->add_option("--x", cv_args.x_path, "Predictor CSV")->required();
  cv->add_option("--y", cv_args.y_path, "Response CSV")->required();
  cv->add_option("--estimator", cv_args.estimator, "single|double")
      ->check(CLI::IsMember({"single", "double"}));
  cv->add_option("--cv", cv_args.cv_range, "Candidate range A..B or A..BxC..D")
      ->required();
  cv->add_option("--grid-size", cv_args.grid_size,
                 "Resample curves onto a uniform grid of this size");
  cv->add_option("--out", cv_args.out_dir, "Output directory")->required();

  SliceArgs slice_args;
  CLI::App* slice = app.add_subcommand(
      "slice", "Extract a 1-D slice of a surface CSV at a fixed coordinate");
  slice->add_option("--surface", slice_args.surface_path, "Surface CSV")
      ->required();
  slice->add_option("--axis", slice_args.axis, "Axis held fixed: s or t")
      ->required()
      ->check(CLI::IsMember({"s", "t"}));
  slice->add_option("--at", slice_args.at, "Coordinate on that axis (native units)")
      ->required();
  slice->add_option("--out", slice_args.out_path,
                    "Output CSV (stdout when omitted)");

  SimulateArgs sim_args;
  CLI::App* simulate = app.add_subcommand(
      "simulate", "Monte Carlo MISE study with rate-slope verification");
  simulate->add_option("--config", sim_args.config_path, "key=value config file");
  simulate->add_option("--alpha", sim_args.alpha, "Eigenvalue decay exponent");
  simulate->add_option("--beta", sim_args.beta, "Smoothness of b in t");
  simulate->add_option("--gamma", sim_args.gamma, "Smoothness of b in s");
  simulate
      ->add_option("--n", sim_args.n_values,
                   "Sample sizes (comma separated; default 400,800,1600,3200)")
      ->delimiter(',');
  simulate->add_option("--reps", sim_args.reps,
                       "Monte Carlo replications (default 100)");
  simulate
      ->add_option("--seed", sim_args.seed, "RNG seed (one substream per replication)")
      ->each([&](const std::string&) { sim_args.seed_given = true; });
  simulate->add_option("--grid-size", sim_args.grid_size, "Curve grid size");
  simulate->add_option("--components", sim_args.n_components,
                       "Series length of the data generating process");
  simulate->add_option("--max-truncation", sim_args.max_truncation,
                       "Sweep truncations 1..M (and their pairs)");
  simulate->add_option("--noise-decay", sim_args.noise_decay,
                       "Noise eigenvalue decay exponent");
  simulate->add_option("--noise-scale", sim_args.noise_scale, "Noise amplitude");
  simulate->add_option("--b-scale", sim_args.b_scale,
                       "Scale applied to the coefficient rule");
  simulate->add_option("--estimator", sim_args.estimator, "single|double|both")
      ->check(CLI::IsMember({"single", "double", "both"}));
  simulate->add_option("--out", sim_args.out_dir, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (fit->parsed()) return run_fit(fit_args, true);
    if (cv->parsed()) return run_fit(cv_args, false);
    if (slice->parsed()) return run_slice(slice_args);
    return run_simulate(sim_args, simulate);
  } catch (const fofr::NumericalError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const fofr::DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
