#include "haarweight/spd.hpp"

#include <cmath>

#include <fmt/format.h>

#include "haarweight/errors.hpp"

namespace haarweight {

void require_spd(const Eigen::MatrixXd& a) {
  if (a.rows() != a.cols() || a.rows() == 0) throw MatrixDomainError("matrix is not square");
  if (!a.allFinite()) throw MatrixDomainError("matrix has non-finite entries");
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  const double asym = (a - a.transpose()).cwiseAbs().maxCoeff();
  if (asym > kSymmetryTol * scale) throw MatrixDomainError(fmt::format("matrix not symmetric (defect {:.3e})", asym));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a, Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues().minCoeff();
  if (!(lo >= kEigenFloor)) throw MatrixDomainError(fmt::format("smallest eigenvalue {:.3e} below floor", lo));
}

Eigen::MatrixXd spd_power_unchecked(const Eigen::MatrixXd& a, double s) {
  if (a.rows() == 1) return Eigen::MatrixXd::Constant(1, 1, std::pow(a(0, 0), s));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
  const Eigen::VectorXd lam = es.eigenvalues().array().pow(s);
  const Eigen::MatrixXd& q = es.eigenvectors();
  Eigen::MatrixXd out = q * lam.asDiagonal() * q.transpose();
  return 0.5 * (out + out.transpose());
}

Eigen::MatrixXd spd_power(const Eigen::MatrixXd& a, double s) {
  require_spd(a);
  if (!std::isfinite(s)) throw ParameterError("non-finite matrix exponent");
  return spd_power_unchecked(a, s);
}

double spectral_norm(const Eigen::MatrixXd& a) {
  if (a.size() == 1) return std::abs(a(0, 0));
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
  return svd.singularValues()(0);
}

}  // namespace haarweight
