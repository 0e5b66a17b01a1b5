#include "haarweight/dyadic.hpp"

#include <bit>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "haarweight/errors.hpp"

namespace haarweight {

namespace {

void require_dim(int dim) {
  if (dim < 1 || dim > kMaxDim) throw ParameterError(fmt::format("dimension {} not in [1, {}]", dim, kMaxDim));
}

// Per-axis coordinates of a linear index at `level`, axis 0 most significant.
std::array<std::int64_t, kMaxDim> decode(int dim, int level, std::size_t linear) {
  std::array<std::int64_t, kMaxDim> idx{};
  const std::size_t mask = (std::size_t{1} << level) - 1;
  for (int k = dim - 1; k >= 0; --k) {
    idx[k] = static_cast<std::int64_t>(linear & mask);
    linear >>= level;
  }
  return idx;
}

std::size_t encode(int dim, int level, const std::array<std::int64_t, kMaxDim>& idx) {
  std::size_t linear = 0;
  for (int k = 0; k < dim; ++k) linear = (linear << level) | static_cast<std::size_t>(idx[k]);
  return linear;
}

}  // namespace

DyadicCube DyadicCube::root(int dim) {
  require_dim(dim);
  return DyadicCube{dim, 0, {}};
}

double DyadicCube::side() const { return std::ldexp(1.0, -level); }
double DyadicCube::measure() const { return std::ldexp(1.0, -level * dim); }

DyadicCube DyadicCube::child(unsigned c) const {
  DyadicCube out{dim, level + 1, {}};
  for (int k = 0; k < dim; ++k) out.index[k] = 2 * index[k] + ((c >> k) & 1u);
  return out;
}

DyadicCube DyadicCube::parent() const {
  if (level == 0) throw DomainError("root cube has no parent");
  return ancestor(level - 1);
}

DyadicCube DyadicCube::ancestor(int target_level) const {
  if (target_level < 0 || target_level > level)
    throw ParameterError(fmt::format("ancestor level {} not in [0, {}]", target_level, level));
  DyadicCube out{dim, target_level, {}};
  for (int k = 0; k < dim; ++k) out.index[k] = index[k] >> (level - target_level);
  return out;
}

bool DyadicCube::contains(const DyadicCube& other) const {
  if (other.dim != dim || other.level < level) return false;
  return other.ancestor(level) == *this;
}

bool DyadicCube::contains_point(std::span<const double> point) const {
  if (static_cast<int>(point.size()) != dim) throw ShapeError("point dimension mismatch");
  const double s = side();
  for (int k = 0; k < dim; ++k) {
    const double lo = static_cast<double>(index[k]) * s;
    if (point[k] < lo || point[k] >= lo + s) return false;
  }
  return true;
}

std::vector<HaarSignature> admissible_signatures(int dim) {
  require_dim(dim);
  std::vector<HaarSignature> out;
  for (unsigned m = 0; m + 1 < (1u << dim); ++m) out.push_back(HaarSignature{m});
  return out;
}

DyadicGrid::DyadicGrid(int dim, int finest_level) : dim_(dim), finest_level_(finest_level) {
  require_dim(dim);
  if (finest_level < 0 || finest_level * dim > 30)
    throw ParameterError(fmt::format("finest level {} out of range for d = {}", finest_level, dim));
}

double DyadicGrid::cell_measure() const { return std::ldexp(1.0, -finest_level_ * dim_); }

std::size_t DyadicGrid::cubes_at(int level) const { return std::size_t{1} << (level * dim_); }

std::size_t DyadicGrid::level_offset(int level) const {
  // sum_{l < level} 2^{l d} = (2^{level d} - 1) / (2^d - 1)
  return ((std::size_t{1} << (level * dim_)) - 1) / ((std::size_t{1} << dim_) - 1);
}

std::size_t DyadicGrid::linear_index(const DyadicCube& cube) const {
  if (cube.dim != dim_) throw ShapeError("cube dimension does not match grid");
  if (cube.level < 0 || cube.level > finest_level_)
    throw DomainError(fmt::format("cube level {} outside [0, {}]", cube.level, finest_level_));
  for (int k = 0; k < dim_; ++k)
    if (cube.index[k] < 0 || cube.index[k] >= (std::int64_t{1} << cube.level))
      throw DomainError("cube index outside the root cube");
  return encode(dim_, cube.level, cube.index);
}

std::size_t DyadicGrid::cube_id(const DyadicCube& cube) const {
  return level_offset(cube.level) + linear_index(cube);
}

DyadicCube DyadicGrid::cube(int level, std::size_t linear) const {
  return DyadicCube{dim_, level, decode(dim_, level, linear)};
}

int DyadicGrid::level_of(std::size_t id) const {
  int level = 0;
  while (level < finest_level_ && id >= level_offset(level + 1)) ++level;
  return level;
}

DyadicCube DyadicGrid::cube_from_id(std::size_t id) const {
  const int level = level_of(id);
  return cube(level, id - level_offset(level));
}

std::size_t DyadicGrid::child_linear(int level, std::size_t linear, unsigned c) const {
  auto idx = decode(dim_, level, linear);
  for (int k = 0; k < dim_; ++k) idx[k] = 2 * idx[k] + ((c >> k) & 1u);
  return encode(dim_, level + 1, idx);
}

std::size_t DyadicGrid::child_id(std::size_t id, unsigned c) const {
  const int level = level_of(id);
  return level_offset(level + 1) + child_linear(level, id - level_offset(level), c);
}

std::size_t DyadicGrid::parent_id(std::size_t id) const {
  const int level = level_of(id);
  if (level == 0) throw DomainError("root cube has no parent");
  auto idx = decode(dim_, level, id - level_offset(level));
  for (int k = 0; k < dim_; ++k) idx[k] >>= 1;
  return level_offset(level - 1) + encode(dim_, level - 1, idx);
}

std::size_t DyadicGrid::ancestor_linear(std::size_t cell, int level) const {
  auto idx = decode(dim_, finest_level_, cell);
  for (int k = 0; k < dim_; ++k) idx[k] >>= (finest_level_ - level);
  return encode(dim_, level, idx);
}

int DyadicGrid::haar_sign(int signature, unsigned c) const {
  const unsigned full = child_count() - 1;
  const unsigned oscillating = ~static_cast<unsigned>(signature) & full;
  return (std::popcount(c & oscillating) & 1) ? -1 : 1;
}

std::vector<std::size_t> DyadicGrid::cells_of(const DyadicCube& cube) const {
  linear_index(cube);
  const int depth = finest_level_ - cube.level;
  const std::size_t per_axis = std::size_t{1} << depth;
  std::vector<std::size_t> out;
  out.reserve(std::size_t{1} << (depth * dim_));
  std::array<std::int64_t, kMaxDim> idx{};
  const std::size_t total = std::size_t{1} << (depth * dim_);
  for (std::size_t t = 0; t < total; ++t) {
    const auto local = decode(dim_, depth, t);
    for (int k = 0; k < dim_; ++k)
      idx[k] = cube.index[k] * static_cast<std::int64_t>(per_axis) + local[k];
    out.push_back(encode(dim_, finest_level_, idx));
  }
  return out;
}

GridFunction::GridFunction(const DyadicGrid& grid, int components)
    : grid_(grid), values_(Matrix::Zero(components, static_cast<Eigen::Index>(grid.cell_count()))) {
  if (components < 1) throw ShapeError("grid function needs at least one component");
}

GridFunction::GridFunction(const DyadicGrid& grid, Matrix values) : grid_(grid), values_(std::move(values)) {
  if (values_.rows() < 1 || static_cast<std::size_t>(values_.cols()) != grid.cell_count())
    throw ShapeError(fmt::format("expected n x {} values, got {} x {}", grid.cell_count(), values_.rows(),
                                 values_.cols()));
}

GridFunction& GridFunction::operator+=(const GridFunction& other) {
  if (!(other.grid_ == grid_) || other.components() != components()) throw ShapeError("grid function shape mismatch");
  values_ += other.values_;
  return *this;
}

GridFunction& GridFunction::operator-=(const GridFunction& other) {
  if (!(other.grid_ == grid_) || other.components() != components()) throw ShapeError("grid function shape mismatch");
  values_ -= other.values_;
  return *this;
}

GridFunction operator+(GridFunction lhs, const GridFunction& rhs) { return lhs += rhs; }
GridFunction operator-(GridFunction lhs, const GridFunction& rhs) { return lhs -= rhs; }

HaarCoefficients::HaarCoefficients(const DyadicGrid& grid, int components)
    : grid_(grid),
      detail_(Matrix::Zero(components,
                           static_cast<Eigen::Index>(grid.cube_count(grid.finest_level() - 1) *
                                                     static_cast<std::size_t>(grid.signature_count())))),
      root_(Vector::Zero(components)) {
  if (components < 1) throw ShapeError("coefficients need at least one component");
}

double haar_eval(const DyadicCube& cube, HaarSignature eps, std::span<const double> point) {
  const int d = cube.dim;
  if (static_cast<int>(point.size()) != d) throw ShapeError("point dimension mismatch");
  for (double x : point)
    if (!(x >= 0.0 && x < 1.0)) throw DomainError(fmt::format("point coordinate {} outside [0,1)", x));
  if (eps.mask + 1 >= (1u << d)) throw ParameterError("all-ones signature is not admissible");
  if (!cube.contains_point(point)) return 0.0;
  const double s = cube.side();
  double value = 1.0;
  for (int k = 0; k < d; ++k) {
    const double factor = 1.0 / std::sqrt(s);
    if ((eps.mask >> k) & 1u) {
      value *= factor;
    } else {
      const double mid = (static_cast<double>(cube.index[k]) + 0.5) * s;
      value *= point[k] < mid ? factor : -factor;
    }
  }
  return value;
}

HaarCoefficients haar_transform(const GridFunction& f) {
  const DyadicGrid& grid = f.grid();
  const int L = grid.finest_level();
  const int n = f.components();
  HaarCoefficients out(grid, n);

  // Means of f over the cubes of the current level, bottom-up.
  Matrix means = f.values();
  const int sigs = grid.signature_count();
  for (int level = L - 1; level >= 0; --level) {
    const std::size_t count = grid.cubes_at(level);
    Matrix coarse(n, static_cast<Eigen::Index>(count));
    const double scale = std::sqrt(std::ldexp(1.0, -level * grid.dim())) / grid.child_count();
    for (std::size_t i = 0; i < count; ++i) {
      const std::size_t id = grid.level_offset(level) + i;
      Vector sum = Vector::Zero(n);
      for (unsigned c = 0; c < grid.child_count(); ++c) {
        const auto child = means.col(static_cast<Eigen::Index>(grid.child_linear(level, i, c)));
        sum += child;
        for (int s = 0; s < sigs; ++s) out.detail(id, s) += (scale * grid.haar_sign(s, c)) * child;
      }
      coarse.col(static_cast<Eigen::Index>(i)) = sum / grid.child_count();
    }
    means = std::move(coarse);
  }
  out.root_scaling() = means.col(0);
  return out;
}

GridFunction haar_reconstruct(const HaarCoefficients& c) {
  const DyadicGrid& grid = c.grid();
  const int L = grid.finest_level();
  const int n = c.components();
  const int sigs = grid.signature_count();

  Matrix means = c.root_scaling();
  for (int level = 0; level < L; ++level) {
    const std::size_t count = grid.cubes_at(level);
    Matrix fine(n, static_cast<Eigen::Index>(grid.cubes_at(level + 1)));
    const double inv_sqrt = 1.0 / std::sqrt(std::ldexp(1.0, -level * grid.dim()));
    for (std::size_t i = 0; i < count; ++i) {
      const std::size_t id = grid.level_offset(level) + i;
      for (unsigned ch = 0; ch < grid.child_count(); ++ch) {
        Vector v = means.col(static_cast<Eigen::Index>(i));
        for (int s = 0; s < sigs; ++s) v += (inv_sqrt * grid.haar_sign(s, ch)) * c.detail(id, s);
        fine.col(static_cast<Eigen::Index>(grid.child_linear(level, i, ch))) = v;
      }
    }
    means = std::move(fine);
  }
  return GridFunction(grid, std::move(means));
}

void require_exponent(double p) {
  if (!(p > 1.0) || !std::isfinite(p)) throw ParameterError(fmt::format("exponent p = {} not in (1, inf)", p));
}

double conjugate_exponent(double p) {
  require_exponent(p);
  return p / (p - 1.0);
}

double lp_norm(const GridFunction& f, double p) {
  require_exponent(p);
  const auto norms = f.values().colwise().norm();
  double sum = 0.0;
  for (Eigen::Index c = 0; c < norms.size(); ++c) sum += std::pow(norms(c), p);
  return std::pow(sum * f.grid().cell_measure(), 1.0 / p);
}

}  // namespace haarweight
