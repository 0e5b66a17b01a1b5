#pragma once

// Shared fixtures and brute-force oracles for the unit tests.

#include <cmath>
#include <random>
#include <vector>

#include "haarweight/dyadic.hpp"
#include "haarweight/weight.hpp"

namespace testing {

using haarweight::DyadicCube;
using haarweight::DyadicGrid;
using haarweight::GridFunction;
using haarweight::Matrix;
using haarweight::Vector;

inline GridFunction random_function(const DyadicGrid& grid, int n, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  GridFunction f(grid, n);
  for (Eigen::Index k = 0; k < f.values().size(); ++k) f.values().data()[k] = normal(rng);
  return f;
}

inline Matrix random_spd(int n, std::mt19937_64& rng, double spread = 1.0) {
  std::normal_distribution<double> normal;
  Matrix g(n, n);
  for (Eigen::Index k = 0; k < g.size(); ++k) g.data()[k] = spread * normal(rng);
  return g * g.transpose() + 0.5 * Matrix::Identity(n, n);
}

inline haarweight::MatrixWeight random_weight(const DyadicGrid& grid, int n, std::mt19937_64& rng) {
  std::vector<Matrix> cells;
  for (std::size_t c = 0; c < grid.cell_count(); ++c) cells.push_back(random_spd(n, rng));
  return haarweight::MatrixWeight(grid, std::move(cells));
}

inline haarweight::MatrixWeight scalar_weight(const DyadicGrid& grid, const std::vector<double>& values) {
  std::vector<Matrix> cells;
  for (double v : values) cells.push_back(Matrix::Constant(1, 1, v));
  return haarweight::MatrixWeight(grid, std::move(cells));
}

/// Midpoint of finest cell `c`.
inline std::vector<double> cell_center(const DyadicGrid& grid, std::size_t c) {
  const DyadicCube cube = grid.cube(grid.finest_level(), c);
  std::vector<double> x(grid.dim());
  for (int k = 0; k < grid.dim(); ++k) x[k] = (static_cast<double>(cube.index[k]) + 0.5) * cube.side();
  return x;
}

/// Eigenvalue-free oracle for A^{1/2}: Denman-Beavers iteration.
inline Matrix sqrt_oracle(const Matrix& a) {
  Matrix y = a, z = Matrix::Identity(a.rows(), a.cols());
  for (int i = 0; i < 100; ++i) {
    const Matrix yi = y.inverse(), zi = z.inverse();
    y = 0.5 * (y + zi);
    z = 0.5 * (z + yi);
  }
  return y;
}

}  // namespace testing
