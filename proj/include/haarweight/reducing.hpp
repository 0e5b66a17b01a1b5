#pragma once

// Reducing operators V_I, V_I' and the matrix A_p characteristic.
//
// V_I represents the norm rho_I(e) = (m_I |W^{1/p} e|^p)^{1/p}:
//   rho_I(e) <= |V_I e| <= kappa * rho_I(e),  kappa <= sqrt(n) (1 + fit slack).
// V_I' is the same construction for W^{-1/p} at the conjugate exponent.

#include <cstddef>
#include <string>
#include <vector>

#include "haarweight/dyadic.hpp"
#include "haarweight/weight.hpp"

namespace haarweight {

/// ExactScalar: n = 1. ExactProportional: the cells of the cube are positive
/// multiples of one matrix, so the norm is already ellipsoidal.
enum class ReducingMethod { ExactP2, ExactScalar, ExactProportional, Ellipsoid };

std::string to_string(ReducingMethod method);

struct ReducingOptions {
  double fit_tol = 1e-6;
  /// Fit-set size; 0 selects max(500, 50 n^2).
  std::size_t directions = 0;
  int max_iterations = 5000;
};

/// One reducing operator with its certified slack.
struct ReducedOperator {
  Matrix v;
  ReducingMethod method = ReducingMethod::ExactP2;
  double kappa = 1.0;
};

/// V_I, V_I^{-1} and V_I' for every cube of level <= max_depth, by cube id.
class ReducingFamily {
 public:
  ReducingFamily(const DyadicGrid& grid, double p, int max_depth, std::vector<ReducedOperator> primal,
                 std::vector<ReducedOperator> dual);

  const DyadicGrid& grid() const { return grid_; }
  double p() const { return p_; }
  int max_depth() const { return max_depth_; }
  int n() const { return static_cast<int>(primal_.front().v.rows()); }
  std::size_t size() const { return primal_.size(); }
  bool covers(std::size_t cube_id) const { return cube_id < primal_.size(); }

  const Matrix& v(std::size_t id) const { return primal_[id].v; }
  const Matrix& v_inv(std::size_t id) const { return inverse_[id]; }
  const Matrix& v_dual(std::size_t id) const { return dual_[id].v; }
  const ReducedOperator& primal(std::size_t id) const { return primal_[id]; }
  const ReducedOperator& dual(std::size_t id) const { return dual_[id]; }

  /// Largest slack over all primal and dual entries.
  double slack() const;

 private:
  DyadicGrid grid_;
  double p_;
  int max_depth_;
  std::vector<ReducedOperator> primal_;
  std::vector<ReducedOperator> dual_;
  std::vector<Matrix> inverse_;
};

/// rho_I(e) for a unit vector e.
double direction_norm(const MatrixWeight& w, const DyadicCube& cube, double p, const Vector& e);

Matrix reducing_operator(const MatrixWeight& w, const DyadicCube& cube, double p, const ReducingOptions& opts = {});
Matrix dual_reducing_operator(const MatrixWeight& w, const DyadicCube& cube, double p,
                              const ReducingOptions& opts = {});

/// Represents e -> (m_I |B e|^q)^{1/q} for per-cell matrices `b` over the
/// cells of one cube.
ReducedOperator reduce_norm(const std::vector<const Matrix*>& b, double q, const ReducingOptions& opts);

ReducingFamily build_reducing_family(const MatrixWeight& w, double p, int max_depth,
                                     const ReducingOptions& opts = {});

/// Default scan depth L - 2 (clamped at 0).
int default_max_depth(const DyadicGrid& grid);

/// sup over cubes of level <= max_depth of ||V_I V_I'||^p.
double ap_characteristic(const ReducingFamily& family, int max_depth);
double ap_characteristic(const MatrixWeight& w, double p, int max_depth, const ReducingOptions& opts = {});

/// sup_I (m_I w_e)(m_I w_e^{1-p'})^{p-1} for w_e = |W^{1/p} e|^p.
double scalar_ap_characteristic(const MatrixWeight& w, const Vector& e, double p, int max_depth);

struct DualityReport {
  double min_ratio = 1.0;
  double max_ratio = 1.0;
  /// Combined slack of the two families.
  double kappa = 1.0;
  bool within = true;
};

/// Compares V_I'(W^{1-p'}, p') against V_I(W, p) on sampled directions.
DualityReport duality_check(const MatrixWeight& w, double p, int max_depth, const ReducingOptions& opts = {});

}  // namespace haarweight
