#pragma once

// Centered minimum-volume enclosing ellipsoids of symmetric point sets.

#include <cstddef>
#include <cstdint>

#include "haarweight/dyadic.hpp"

namespace haarweight {

struct MveeResult {
  /// X = sum_i u_i g_i g_i^T; the ellipsoid is {x : x^T (n X)^{-1} x <= 1}.
  Matrix moment;
  Vector weights;
  /// Newton steps taken.
  int iterations = 0;
  /// kappa_max / n - 1 at exit, kappa_i = g_i^T X^{-1} g_i.
  double residual = 0.0;
};

/// Minimum-volume ellipsoid centered at 0 enclosing the columns of `points`
/// and their negatives, by a log-barrier path on the shape matrix. Stops once
/// every point lies in the (1 + tol)-enlarged ellipsoid; throws FitError after
/// `max_iterations` Newton steps.
MveeResult centered_mvee(const Matrix& points, double tol, int max_iterations);

/// Deterministic quasi-uniform unit directions on a half-sphere of R^n
/// (circle angles for n = 2, Fibonacci lattice for n = 3, seeded Gaussian
/// directions otherwise). Columns of the result.
Matrix hemisphere_directions(int n, std::size_t count);

/// Independent Gaussian unit directions from `seed`.
Matrix random_directions(int n, std::size_t count, std::uint64_t seed);

/// Default fit-set size max(500, 50 n^2).
std::size_t default_direction_count(int n);

}  // namespace haarweight
