#pragma once

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "fofr/grid.hpp"

namespace fofr::io {

/// Affine map between a dataset's native axis (years, hours, ...) and the
/// unit interval the estimators live on. Stored in output metadata; all
/// file headers carry native coordinates.
struct AffineAxis {
  double lo = 0.0;
  double hi = 1.0;
  double to_unit(double x) const { return (x - lo) / (hi - lo); }
  double from_unit(double u) const { return lo + u * (hi - lo); }
};

/// 17 significant digits: round-trips any double exactly.
inline std::string format_value(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace detail {

inline std::string location(const std::string& file, int row, int col) {
  std::ostringstream s;
  s << file << ":" << row << ":" << col;
  return s.str();
}

inline std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  for (char c : line) {
    if (c == ',') {
      cells.push_back(cell);
      cell.clear();
    } else {
      cell += c;
    }
  }
  cells.push_back(cell);
  return cells;
}

inline double parse_cell(const std::string& cell, const std::string& file,
                         int row, int col) {
  if (cell.empty())
    throw DataError(location(file, row, col) +
                    ": missing value; complete cases are required, drop or "
                    "impute incomplete rows before ingestion");
  const char* begin = cell.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (end != begin + cell.size())
    throw DataError(location(file, row, col) + ": cannot parse '" + cell +
                    "' as a number");
  if (!std::isfinite(v))
    throw DataError(location(file, row, col) + ": non-finite value");
  return v;
}

}  // namespace detail

/// Writes via a temporary file and renames, so readers never observe a
/// partially written file.
inline void write_text_atomic(const std::string& path,
                              const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError(tmp.string() + ": cannot open for writing");
    out << content;
    out.close();
    if (!out) throw DataError(tmp.string() + ": write failed");
  }
  fs::rename(tmp, target);
}

inline void write_csv(const std::string& path, const std::string& header,
                      const std::vector<std::vector<std::string>>& rows) {
  std::ostringstream out;
  out << header << "\n";
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i > 0) out << ",";
      out << row[i];
    }
    out << "\n";
  }
  write_text_atomic(path, out.str());
}

inline void write_key_values(
    const std::string& path,
    const std::vector<std::pair<std::string, std::string>>& entries) {
  std::ostringstream out;
  for (const auto& [key, value] : entries) out << key << "=" << value << "\n";
  write_text_atomic(path, out.str());
}

/// A dataset file: header row of native grid points, one row per curve.
struct LoadedDataset {
  GridPtr grid;
  AffineAxis axis;
  std::vector<double> native_points;
  std::vector<FunctionSample> samples;
};

inline LoadedDataset read_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(path + ": cannot open file");
  std::string line;
  int row = 0;

  if (!std::getline(in, line)) throw DataError(path + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  ++row;
  const std::vector<std::string> header = detail::split_line(line);
  const int n_cols = static_cast<int>(header.size());
  if (n_cols < 2)
    throw DataError(detail::location(path, 1, 1) +
                    ": header must list at least 2 grid points");
  std::vector<double> native(n_cols);
  for (int c = 0; c < n_cols; ++c)
    native[c] = detail::parse_cell(header[c], path, 1, c + 1);
  for (int c = 1; c < n_cols; ++c)
    if (!(native[c] > native[c - 1]))
      throw DataError(detail::location(path, 1, c + 1) +
                      ": grid points must be strictly increasing");

  const AffineAxis axis{native.front(), native.back()};
  Eigen::VectorXd unit(n_cols);
  for (int c = 0; c < n_cols; ++c) unit(c) = axis.to_unit(native[c]);
  const GridPtr grid = Grid::from_points(std::move(unit));

  LoadedDataset data{grid, axis, std::move(native), {}};
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    ++row;
    if (line.empty())
      throw DataError(detail::location(path, row, 1) + ": blank line");
    const std::vector<std::string> cells = detail::split_line(line);
    if (static_cast<int>(cells.size()) != n_cols) {
      std::ostringstream msg;
      msg << detail::location(path, row, static_cast<int>(cells.size()))
          << ": expected " << n_cols << " values, found " << cells.size();
      throw DataError(msg.str());
    }
    Eigen::VectorXd values(n_cols);
    for (int c = 0; c < n_cols; ++c)
      values(c) = detail::parse_cell(cells[c], path, row, c + 1);
    data.samples.emplace_back(grid, std::move(values));
  }
  if (data.samples.empty()) throw DataError(path + ": no data rows");
  return data;
}

/// Loads a predictor/response pair. The two files must carry identical grid
/// headers and row counts; row i of each refers to the same unit. The
/// response samples are rebound onto the predictor's grid object.
inline std::pair<LoadedDataset, LoadedDataset> read_xy(
    const std::string& x_path, const std::string& y_path) {
  LoadedDataset x = read_dataset(x_path);
  LoadedDataset y = read_dataset(y_path);
  if (x.native_points.size() != y.native_points.size() ||
      !std::equal(x.native_points.begin(), x.native_points.end(),
                  y.native_points.begin()))
    throw DataError(y_path + ": grid header differs from " + x_path);
  if (x.samples.size() != y.samples.size()) {
    std::ostringstream msg;
    msg << y_path << ": row count " << y.samples.size() << " differs from "
        << x_path << " (" << x.samples.size() << ")";
    throw DataError(msg.str());
  }
  std::vector<FunctionSample> rebound;
  rebound.reserve(y.samples.size());
  for (const FunctionSample& s : y.samples)
    rebound.emplace_back(x.grid, s.values());
  y.grid = x.grid;
  y.samples = std::move(rebound);
  return {std::move(x), std::move(y)};
}

/// Linear interpolation of every curve onto `target` (ingestion-time
/// resampling; the estimation modules never resample).
inline LoadedDataset resample(const LoadedDataset& data, const GridPtr& target) {
  const Eigen::VectorXd& src = data.grid->points();
  const Eigen::VectorXd& dst = target->points();
  LoadedDataset out{target, data.axis, {}, {}};
  out.native_points.reserve(dst.size());
  for (Eigen::Index i = 0; i < dst.size(); ++i)
    out.native_points.push_back(data.axis.from_unit(dst(i)));
  out.samples.reserve(data.samples.size());
  for (const FunctionSample& s : data.samples) {
    Eigen::VectorXd values(dst.size());
    Eigen::Index seg = 0;
    for (Eigen::Index i = 0; i < dst.size(); ++i) {
      const double u = dst(i);
      while (seg + 2 < src.size() && src(seg + 1) < u) ++seg;
      const double t = (u - src(seg)) / (src(seg + 1) - src(seg));
      values(i) = (1.0 - t) * s.values()(seg) + t * s.values()(seg + 1);
    }
    out.samples.emplace_back(target, std::move(values));
  }
  return out;
}

inline void write_dataset(const std::string& path,
                          const std::vector<FunctionSample>& samples,
                          const AffineAxis& axis) {
  if (samples.empty()) throw DataError("write_dataset: no samples");
  const GridPtr& g = samples.front().grid();
  std::ostringstream out;
  for (int c = 0; c < g->size(); ++c) {
    if (c > 0) out << ",";
    out << format_value(axis.from_unit(g->points()(c)));
  }
  out << "\n";
  for (const FunctionSample& s : samples) {
    require_same_grid(g, s.grid(), "write_dataset");
    for (int c = 0; c < g->size(); ++c) {
      if (c > 0) out << ",";
      out << format_value(s.values()(c));
    }
    out << "\n";
  }
  write_text_atomic(path, out.str());
}

struct LoadedSurface {
  Surface surface;
  AffineAxis s_axis;
  AffineAxis t_axis;
  std::vector<double> s_native;
  std::vector<double> t_native;
};

/// Matrix CSV with s/t headers: first row is "s,<t coords...>", each data
/// row starts with its s coordinate. Coordinates are native-axis values.
inline void write_surface(const std::string& path, const Surface& surface,
                          const AffineAxis& s_axis, const AffineAxis& t_axis) {
  std::ostringstream out;
  out << "s";
  const Eigen::VectorXd& ts = surface.grid_t()->points();
  for (Eigen::Index j = 0; j < ts.size(); ++j)
    out << "," << format_value(t_axis.from_unit(ts(j)));
  out << "\n";
  const Eigen::VectorXd& ss = surface.grid_s()->points();
  for (Eigen::Index i = 0; i < ss.size(); ++i) {
    out << format_value(s_axis.from_unit(ss(i)));
    for (Eigen::Index j = 0; j < ts.size(); ++j)
      out << "," << format_value(surface.values()(i, j));
    out << "\n";
  }
  write_text_atomic(path, out.str());
}

inline LoadedSurface read_surface(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(path + ": cannot open file");
  std::string line;
  if (!std::getline(in, line)) throw DataError(path + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  int row = 1;
  const std::vector<std::string> header = detail::split_line(line);
  if (header.size() < 3)
    throw DataError(detail::location(path, 1, 1) +
                    ": surface header must list at least 2 t coordinates");
  std::vector<double> t_native(header.size() - 1);
  for (std::size_t c = 1; c < header.size(); ++c)
    t_native[c - 1] = detail::parse_cell(header[c], path, 1, static_cast<int>(c) + 1);

  std::vector<double> s_native;
  std::vector<Eigen::VectorXd> rows;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    ++row;
    if (line.empty())
      throw DataError(detail::location(path, row, 1) + ": blank line");
    const std::vector<std::string> cells = detail::split_line(line);
    if (cells.size() != header.size()) {
      std::ostringstream msg;
      msg << detail::location(path, row, static_cast<int>(cells.size()))
          << ": expected " << header.size() << " values, found " << cells.size();
      throw DataError(msg.str());
    }
    s_native.push_back(detail::parse_cell(cells[0], path, row, 1));
    Eigen::VectorXd values(t_native.size());
    for (std::size_t c = 1; c < cells.size(); ++c)
      values(c - 1) = detail::parse_cell(cells[c], path, row, static_cast<int>(c) + 1);
    rows.push_back(std::move(values));
  }
  if (s_native.size() < 2)
    throw DataError(path + ": surface needs at least 2 rows");
  for (std::size_t i = 1; i < s_native.size(); ++i)
    if (!(s_native[i] > s_native[i - 1]))
      throw DataError(path + ": s coordinates must be strictly increasing");
  for (std::size_t j = 1; j < t_native.size(); ++j)
    if (!(t_native[j] > t_native[j - 1]))
      throw DataError(path + ": t coordinates must be strictly increasing");

  const AffineAxis s_axis{s_native.front(), s_native.back()};
  const AffineAxis t_axis{t_native.front(), t_native.back()};
  Eigen::VectorXd s_unit(s_native.size());
  for (std::size_t i = 0; i < s_native.size(); ++i)
    s_unit(i) = s_axis.to_unit(s_native[i]);
  Eigen::VectorXd t_unit(t_native.size());
  for (std::size_t j = 0; j < t_native.size(); ++j)
    t_unit(j) = t_axis.to_unit(t_native[j]);
  Eigen::MatrixXd values(s_native.size(), t_native.size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    values.row(i) = rows[i].transpose();

  return LoadedSurface{
      Surface(Grid::from_points(std::move(s_unit)),
              Grid::from_points(std::move(t_unit)), std::move(values)),
      s_axis, t_axis, std::move(s_native), std::move(t_native)};
}

/// key=value run configuration; '#' starts a comment, blank lines ignored.
inline std::map<std::string, std::string> read_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError(path + ": cannot open file");
  std::map<std::string, std::string> config;
  std::string line;
  int row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    const auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t");
      if (b == std::string::npos) return std::string();
      const auto e = s.find_last_not_of(" \t");
      return s.substr(b, e - b + 1);
    };
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument(detail::location(path, row, 1) +
                                  ": expected key=value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw std::invalid_argument(detail::location(path, row, 1) +
                                  ": empty key");
    if (!config.emplace(key, value).second)
      throw std::invalid_argument(detail::location(path, row, 1) +
                                  ": duplicate key '" + key + "'");
  }
  return config;
}

inline void require_config_keys(const std::map<std::string, std::string>& config,
                                const std::set<std::string>& allowed,
                                const std::string& context) {
  for (const auto& [key, value] : config)
    if (!allowed.count(key))
      throw std::invalid_argument(context + ": unknown key '" + key + "'");
}

}  // namespace fofr::io
