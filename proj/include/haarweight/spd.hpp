#pragma once

// Symmetric positive definite matrix calculus.

#include <Eigen/Dense>

namespace haarweight {

inline constexpr double kEigenFloor = 1e-12;
inline constexpr double kSymmetryTol = 1e-12;

/// Throws MatrixDomainError unless `a` is symmetric (relative 1e-12) with
/// smallest eigenvalue >= 1e-12.
void require_spd(const Eigen::MatrixXd& a);

/// a^s through the symmetric eigendecomposition.
Eigen::MatrixXd spd_power(const Eigen::MatrixXd& a, double s);

/// Same as spd_power without the validation pass; `a` must already be SPD.
Eigen::MatrixXd spd_power_unchecked(const Eigen::MatrixXd& a, double s);

/// Largest singular value.
double spectral_norm(const Eigen::MatrixXd& a);

}  // namespace haarweight
