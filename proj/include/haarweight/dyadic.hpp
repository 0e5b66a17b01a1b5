#pragma once

// Truncated dyadic geometry of the root cube [0,1)^d and the exact finite
// Haar transform of piecewise-constant vector functions.

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace haarweight {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline constexpr int kMaxDim = 3;

/// A dyadic cube of [0,1)^d addressed by (level, per-axis index).
struct DyadicCube {
  int dim = 1;
  int level = 0;
  std::array<std::int64_t, kMaxDim> index{};

  static DyadicCube root(int dim);

  double side() const;
  double measure() const;

  /// Bit k of `child` selects the upper half along axis k.
  DyadicCube child(unsigned child) const;
  DyadicCube parent() const;
  DyadicCube ancestor(int target_level) const;

  /// True when `other` is this cube or one of its dyadic descendants.
  bool contains(const DyadicCube& other) const;
  bool contains_point(std::span<const double> point) const;

  friend bool operator==(const DyadicCube&, const DyadicCube&) = default;
};

/// Signature eps in {0,1}^d minus the all-ones tuple. Bit k of `mask` is eps_k;
/// eps_k = 0 is the oscillating factor, eps_k = 1 the normalized indicator.
struct HaarSignature {
  unsigned mask = 0;

  friend bool operator==(const HaarSignature&, const HaarSignature&) = default;
};

std::vector<HaarSignature> admissible_signatures(int dim);

/// Index arithmetic for the tree of cubes of [0,1)^d down to a finest level L.
///
/// Cubes of one level are numbered row-major with axis 0 most significant; a
/// cube id is `level_offset(level) + linear_index`. Finest cells are the cubes
/// of level L, numbered the same way.
class DyadicGrid {
 public:
  DyadicGrid(int dim, int finest_level);

  int dim() const { return dim_; }
  int finest_level() const { return finest_level_; }
  std::size_t cell_count() const { return cubes_at(finest_level_); }
  double cell_measure() const;

  std::size_t cubes_at(int level) const;
  std::size_t level_offset(int level) const;
  /// Number of cubes with level <= max_level.
  std::size_t cube_count(int max_level) const { return level_offset(max_level + 1); }

  std::size_t linear_index(const DyadicCube& cube) const;
  std::size_t cube_id(const DyadicCube& cube) const;
  DyadicCube cube(int level, std::size_t linear) const;
  DyadicCube cube_from_id(std::size_t id) const;
  int level_of(std::size_t id) const;

  std::size_t child_linear(int level, std::size_t linear, unsigned child) const;
  std::size_t child_id(std::size_t id, unsigned child) const;
  std::size_t parent_id(std::size_t id) const;
  /// Linear index at `level` of the cube containing finest cell `cell`.
  std::size_t ancestor_linear(std::size_t cell, int level) const;

  unsigned child_count() const { return 1u << dim_; }
  int signature_count() const { return static_cast<int>(child_count()) - 1; }
  /// Sign of h_I^eps on child `child` of I, relative to |I|^{-1/2}.
  int haar_sign(int signature, unsigned child) const;

  /// Finest cells of `cube`, in increasing order.
  std::vector<std::size_t> cells_of(const DyadicCube& cube) const;

  friend bool operator==(const DyadicGrid&, const DyadicGrid&) = default;

 private:
  int dim_;
  int finest_level_;
};

/// Vector-valued function, constant on each finest cell. Column c holds the
/// value on cell c.
class GridFunction {
 public:
  GridFunction(const DyadicGrid& grid, int components);
  GridFunction(const DyadicGrid& grid, Matrix values);

  const DyadicGrid& grid() const { return grid_; }
  int components() const { return static_cast<int>(values_.rows()); }
  const Matrix& values() const { return values_; }
  Matrix& values() { return values_; }

  auto cell(std::size_t c) { return values_.col(static_cast<Eigen::Index>(c)); }
  auto cell(std::size_t c) const { return values_.col(static_cast<Eigen::Index>(c)); }

  GridFunction& operator+=(const GridFunction& other);
  GridFunction& operator-=(const GridFunction& other);

 private:
  DyadicGrid grid_;
  Matrix values_;
};

GridFunction operator+(GridFunction lhs, const GridFunction& rhs);
GridFunction operator-(GridFunction lhs, const GridFunction& rhs);

/// Haar coefficients of a GridFunction: one R^n vector per (cube of level < L,
/// signature), plus the coefficient against the normalized root indicator.
class HaarCoefficients {
 public:
  HaarCoefficients(const DyadicGrid& grid, int components);

  const DyadicGrid& grid() const { return grid_; }
  int components() const { return static_cast<int>(detail_.rows()); }

  std::size_t cube_count() const { return grid_.cube_count(grid_.finest_level() - 1); }
  std::size_t slot_count() const { return detail_.cols(); }
  std::size_t slot(std::size_t cube_id, int signature) const {
    return cube_id * static_cast<std::size_t>(grid_.signature_count()) +
           static_cast<std::size_t>(signature);
  }

  auto detail(std::size_t cube_id, int signature) {
    return detail_.col(static_cast<Eigen::Index>(slot(cube_id, signature)));
  }
  auto detail(std::size_t cube_id, int signature) const {
    return detail_.col(static_cast<Eigen::Index>(slot(cube_id, signature)));
  }
  auto detail(const DyadicCube& cube, HaarSignature eps) {
    return detail(grid_.cube_id(cube), static_cast<int>(eps.mask));
  }

  const Matrix& details() const { return detail_; }
  Matrix& details() { return detail_; }
  const Vector& root_scaling() const { return root_; }
  Vector& root_scaling() { return root_; }

  /// Sum of squared Euclidean norms of all detail coefficients.
  double detail_norm_squared() const { return detail_.squaredNorm(); }

 private:
  DyadicGrid grid_;
  Matrix detail_;
  Vector root_;
};

/// Tensor-product Haar function h_I^eps at `point`; zero outside `cube`.
double haar_eval(const DyadicCube& cube, HaarSignature eps, std::span<const double> point);

HaarCoefficients haar_transform(const GridFunction& f);
GridFunction haar_reconstruct(const HaarCoefficients& c);

/// (sum_cells |f(cell)|^p |cell|)^{1/p} with the Euclidean norm on R^n.
double lp_norm(const GridFunction& f, double p);

/// Throws ParameterError unless 1 < p < infinity.
void require_exponent(double p);

/// Conjugate exponent p / (p - 1).
double conjugate_exponent(double p);

/// Means over every cube of level <= max_level of a per-cell quantity,
/// indexed by cube id. T is a scalar or an Eigen dense type.
template <class T>
std::vector<T> cube_means(const DyadicGrid& grid, std::span<const T> cells, int max_level) {
  const int finest = grid.finest_level();
  std::vector<T> all(grid.cube_count(finest));
  const std::size_t base = grid.level_offset(finest);
  for (std::size_t c = 0; c < cells.size(); ++c) all[base + c] = cells[c];
  const double inv = 1.0 / static_cast<double>(grid.child_count());
  for (int level = finest - 1; level >= 0; --level) {
    const std::size_t off = grid.level_offset(level);
    const std::size_t child_off = grid.level_offset(level + 1);
    for (std::size_t i = 0; i < grid.cubes_at(level); ++i) {
      T sum = all[child_off + grid.child_linear(level, i, 0)];
      for (unsigned c = 1; c < grid.child_count(); ++c)
        sum = sum + all[child_off + grid.child_linear(level, i, c)];
      all[off + i] = sum * inv;
    }
  }
  all.resize(grid.cube_count(max_level));
  return all;
}

}  // namespace haarweight
