#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <memory>
#include <sstream>
#include <utility>

#include "fofr/errors.hpp"

namespace fofr {

class Grid;
using GridPtr = std::shared_ptr<const Grid>;

/// Quadrature grid on I = [0,1]: strictly increasing abscissas with
/// t_0 = 0 and t_{N-1} = 1, plus positive weights summing to one.
/// The default weights are trapezoidal (exact for piecewise-linear
/// integrands, O(h^2) otherwise). A two-point grid is legal.
class Grid {
 public:
  /// Builds trapezoidal weights from the abscissas.
  explicit Grid(Eigen::VectorXd points)
      : Grid(std::move(points), Eigen::VectorXd()) {}

  Grid(Eigen::VectorXd points, Eigen::VectorXd weights)
      : points_(std::move(points)), weights_(std::move(weights)) {
    if (weights_.size() == 0 && points_.size() >= 2) {
      const Eigen::Index n = points_.size();
      weights_.resize(n);
      weights_(0) = 0.5 * (points_(1) - points_(0));
      for (Eigen::Index i = 1; i + 1 < n; ++i)
        weights_(i) = 0.5 * (points_(i + 1) - points_(i - 1));
      weights_(n - 1) = 0.5 * (points_(n - 1) - points_(n - 2));
    }
    check();
  }

  /// Uniform grid with `size` points.
  static GridPtr uniform(int size) {
    if (size < 2) throw DataError("Grid::uniform: size must be at least 2");
    Eigen::VectorXd pts(size);
    for (int i = 0; i < size; ++i)
      pts(i) = static_cast<double>(i) / (size - 1);
    return std::make_shared<const Grid>(std::move(pts));
  }

  static GridPtr from_points(Eigen::VectorXd points) {
    return std::make_shared<const Grid>(std::move(points));
  }

  int size() const { return static_cast<int>(points_.size()); }
  const Eigen::VectorXd& points() const { return points_; }
  const Eigen::VectorXd& weights() const { return weights_; }

  friend bool operator==(const Grid& a, const Grid& b) {
    return a.points_.size() == b.points_.size() &&
           (a.points_.array() == b.points_.array()).all() &&
           (a.weights_.array() == b.weights_.array()).all();
  }

 private:
  void check() const {
    if (points_.size() < 2) throw DataError("Grid: need at least 2 points");
    if (points_(0) != 0.0 || points_(points_.size() - 1) != 1.0)
      throw DataError("Grid: points must start at 0 and end at 1");
    for (Eigen::Index i = 1; i < points_.size(); ++i)
      if (!(points_(i) > points_(i - 1)))
        throw DataError("Grid: points must be strictly increasing");
    if (weights_.size() != points_.size())
      throw DataError("Grid: weights length must match points");
    if (!(weights_.array() > 0.0).all())
      throw DataError("Grid: all weights must be positive");
    if (std::abs(weights_.sum() - 1.0) > 1e-12)
      throw DataError("Grid: weights must sum to 1 within 1e-12");
  }

  Eigen::VectorXd points_;
  Eigen::VectorXd weights_;
};

inline bool same_grid(const GridPtr& a, const GridPtr& b) {
  return a == b || (a && b && *a == *b);
}

inline void require_same_grid(const GridPtr& a, const GridPtr& b,
                              const char* where) {
  if (!same_grid(a, b)) {
    std::ostringstream msg;
    msg << where << ": operands live on different grids";
    throw GridMismatchError(msg.str());
  }
}

/// One curve observed on a shared grid; values are finite by construction.
class FunctionSample {
 public:
  FunctionSample(GridPtr grid, Eigen::VectorXd values)
      : grid_(std::move(grid)), values_(std::move(values)) {
    if (!grid_) throw DataError("FunctionSample: null grid");
    if (values_.size() != grid_->size())
      throw DataError("FunctionSample: values length must match grid");
    if (!values_.allFinite())
      throw DataError("FunctionSample: values must be finite");
  }

  static FunctionSample zero(GridPtr grid) {
    const int n = grid->size();
    return FunctionSample(std::move(grid), Eigen::VectorXd::Zero(n));
  }

  static FunctionSample constant(GridPtr grid, double c) {
    const int n = grid->size();
    return FunctionSample(std::move(grid), Eigen::VectorXd::Constant(n, c));
  }

  const GridPtr& grid() const { return grid_; }
  const Eigen::VectorXd& values() const { return values_; }
  int size() const { return static_cast<int>(values_.size()); }
  double operator[](int i) const { return values_(i); }

 private:
  GridPtr grid_;
  Eigen::VectorXd values_;
};

inline FunctionSample operator+(const FunctionSample& f,
                                const FunctionSample& g) {
  require_same_grid(f.grid(), g.grid(), "FunctionSample::operator+");
  return FunctionSample(f.grid(), f.values() + g.values());
}

inline FunctionSample operator-(const FunctionSample& f,
                                const FunctionSample& g) {
  require_same_grid(f.grid(), g.grid(), "FunctionSample::operator-");
  return FunctionSample(f.grid(), f.values() - g.values());
}

inline FunctionSample operator*(double c, const FunctionSample& f) {
  return FunctionSample(f.grid(), c * f.values());
}

inline FunctionSample operator*(const FunctionSample& f, double c) {
  return c * f;
}

/// A bivariate function on (grid_s, grid_t); rows indexed by s, columns by t.
class Surface {
 public:
  Surface(GridPtr grid_s, GridPtr grid_t, Eigen::MatrixXd values)
      : grid_s_(std::move(grid_s)),
        grid_t_(std::move(grid_t)),
        values_(std::move(values)) {
    if (!grid_s_ || !grid_t_) throw DataError("Surface: null grid");
    if (values_.rows() != grid_s_->size() || values_.cols() != grid_t_->size())
      throw DataError("Surface: matrix dimensions must match the grids");
    if (!values_.allFinite()) throw DataError("Surface: values must be finite");
  }

  static Surface zero(GridPtr grid_s, GridPtr grid_t) {
    const int r = grid_s->size();
    const int c = grid_t->size();
    return Surface(std::move(grid_s), std::move(grid_t),
                   Eigen::MatrixXd::Zero(r, c));
  }

  const GridPtr& grid_s() const { return grid_s_; }
  const GridPtr& grid_t() const { return grid_t_; }
  const Eigen::MatrixXd& values() const { return values_; }
  double operator()(int i, int j) const { return values_(i, j); }

 private:
  GridPtr grid_s_;
  GridPtr grid_t_;
  Eigen::MatrixXd values_;
};

inline Surface operator+(const Surface& a, const Surface& b) {
  require_same_grid(a.grid_s(), b.grid_s(), "Surface::operator+");
  require_same_grid(a.grid_t(), b.grid_t(), "Surface::operator+");
  return Surface(a.grid_s(), a.grid_t(), a.values() + b.values());
}

inline Surface operator-(const Surface& a, const Surface& b) {
  require_same_grid(a.grid_s(), b.grid_s(), "Surface::operator-");
  require_same_grid(a.grid_t(), b.grid_t(), "Surface::operator-");
  return Surface(a.grid_s(), a.grid_t(), a.values() - b.values());
}

inline Surface operator*(double c, const Surface& a) {
  return Surface(a.grid_s(), a.grid_t(), c * a.values());
}

/// <f,g> = sum_i w_i f(t_i) g(t_i). Summation runs in ascending index order
/// so that results are deterministic and bit-for-bit symmetric in (f,g).
inline double inner_product(const FunctionSample& f, const FunctionSample& g) {
  require_same_grid(f.grid(), g.grid(), "inner_product");
  const Eigen::VectorXd& w = f.grid()->weights();
  const Eigen::VectorXd& a = f.values();
  const Eigen::VectorXd& b = g.values();
  double acc = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) acc += w(i) * (a(i) * b(i));
  return acc;
}

inline double l2_norm(const FunctionSample& f) {
  return std::sqrt(std::max(0.0, inner_product(f, f)));
}

/// |||R||| = { sum_ij w^s_i w^t_j R(s_i,t_j)^2 }^{1/2}.
inline double surface_norm(const Surface& r) {
  const Eigen::VectorXd& ws = r.grid_s()->weights();
  const Eigen::VectorXd& wt = r.grid_t()->weights();
  const Eigen::MatrixXd& v = r.values();
  double acc = 0.0;
  for (Eigen::Index i = 0; i < v.rows(); ++i) {
    double row = 0.0;
    for (Eigen::Index j = 0; j < v.cols(); ++j) row += wt(j) * (v(i, j) * v(i, j));
    acc += ws(i) * row;
  }
  return std::sqrt(std::max(0.0, acc));
}

/// (T_R h)(s) = int R(s,t) h(t) dt on grid_s; linear in h.
inline FunctionSample apply_kernel(const Surface& r, const FunctionSample& h) {
  require_same_grid(r.grid_t(), h.grid(), "apply_kernel");
  const Eigen::VectorXd wh = r.grid_t()->weights().cwiseProduct(h.values());
  return FunctionSample(r.grid_s(), r.values() * wh);
}

/// (f (x) g)(s,t) = f(s) g(t). The grids may differ.
inline Surface tensor(const FunctionSample& f, const FunctionSample& g) {
  return Surface(f.grid(), g.grid(), f.values() * g.values().transpose());
}

}  // namespace fofr
