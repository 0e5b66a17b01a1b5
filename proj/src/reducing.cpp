#include "haarweight/reducing.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "haarweight/ellipsoid.hpp"
#include "haarweight/errors.hpp"
#include "haarweight/spd.hpp"

namespace haarweight {

namespace {

constexpr double kExactSlack = 1.0 + 1e-9;
constexpr double kProportionalTol = 1e-13;
constexpr std::uint64_t kDualitySeed = 0xd0a1u;
constexpr std::size_t kDualityDirections = 64;

ReducedOperator reduce_with(const std::vector<const Matrix*>& b, double q, const Matrix& dirs,
                            const ReducingOptions& opts) {
  const int n = static_cast<int>(b.front()->rows());
  const double count = static_cast<double>(b.size());
  if (n == 1) {
    double acc = 0.0;
    for (const Matrix* m : b) acc += std::pow(std::abs((*m)(0, 0)), q);
    return {Matrix::Constant(1, 1, std::pow(acc / count, 1.0 / q)), ReducingMethod::ExactScalar, kExactSlack};
  }

  // Cells that are positive multiples s_c B0 of one matrix give the exactly
  // ellipsoidal norm (m_I s^q)^{1/q} |B0 e|.
  const Matrix& b0 = *b.front();
  const double norm0 = b0.norm();
  double sum = 0.0;
  bool proportional = true;
  for (const Matrix* m : b) {
    const double s = m->norm() / norm0;
    if ((*m - s * b0).norm() > kProportionalTol * m->norm()) {
      proportional = false;
      break;
    }
    sum += std::pow(s, q);
  }
  if (proportional)
    return {std::pow(sum / count, 1.0 / q) * b0, ReducingMethod::ExactProportional, kExactSlack};

  const Eigen::Index m = dirs.cols();
  Vector acc = Vector::Zero(m);
  Matrix grad = Matrix::Zero(n, m);
  for (const Matrix* cell : b) {
    const Matrix img = (*cell) * dirs;
    const Vector r = img.colwise().norm().transpose();
    acc += r.array().pow(q).matrix();
    grad += (*cell) * (img * r.array().pow(q - 2.0).matrix().asDiagonal());
  }
  const Vector rho = (acc / count).array().pow(1.0 / q).matrix();
  // grad rho(e) = m_I(|B e|^{q-2} B^2 e) / rho^{q-1}; it lies on the dual-norm sphere.
  Matrix points = grad / count;
  for (Eigen::Index i = 0; i < m; ++i) points.col(i) /= std::pow(rho(i), q - 1.0);

  const MveeResult fit = centered_mvee(points, opts.fit_tol, opts.max_iterations);
  const Matrix v0 = spd_power_unchecked(static_cast<double>(n) * fit.moment, 0.5);
  const Vector t = (v0 * dirs).colwise().norm().transpose().cwiseQuotient(rho);
  const double scale = std::max(1.0, 1.0 / t.minCoeff());
  return {scale * v0, ReducingMethod::Ellipsoid, scale * t.maxCoeff()};
}

std::vector<const Matrix*> cube_cells(const MatrixWeight& b, const DyadicCube& cube) {
  std::vector<const Matrix*> out;
  for (std::size_t c : b.grid().cells_of(cube)) out.push_back(&b.cell(c));
  return out;
}

Matrix fit_directions(int n, const ReducingOptions& opts) {
  return hemisphere_directions(n, opts.directions ? opts.directions : default_direction_count(n));
}

void require_depth(const DyadicGrid& grid, int max_depth) {
  if (max_depth < 0 || max_depth > grid.finest_level())
    throw ParameterError(fmt::format("depth {} not in [0, {}]", max_depth, grid.finest_level()));
}

}  // namespace

std::string to_string(ReducingMethod method) {
  switch (method) {
    case ReducingMethod::ExactP2: return "exact-p2";
    case ReducingMethod::ExactScalar: return "exact-scalar";
    case ReducingMethod::ExactProportional: return "exact-proportional";
    case ReducingMethod::Ellipsoid: return "ellipsoid";
  }
  return "unknown";
}

ReducingFamily::ReducingFamily(const DyadicGrid& grid, double p, int max_depth, std::vector<ReducedOperator> primal,
                               std::vector<ReducedOperator> dual)
    : grid_(grid), p_(p), max_depth_(max_depth), primal_(std::move(primal)), dual_(std::move(dual)) {
  if (primal_.size() != grid.cube_count(max_depth) || dual_.size() != primal_.size())
    throw ShapeError("reducing family does not cover the cubes up to its depth");
  inverse_.reserve(primal_.size());
  for (const auto& entry : primal_) inverse_.push_back(entry.v.inverse());
}

double ReducingFamily::slack() const {
  double k = 1.0;
  for (const auto& e : primal_) k = std::max(k, e.kappa);
  for (const auto& e : dual_) k = std::max(k, e.kappa);
  return k;
}

double direction_norm(const MatrixWeight& w, const DyadicCube& cube, double p, const Vector& e) {
  require_exponent(p);
  if (e.size() != w.n()) throw ShapeError("direction has the wrong dimension");
  double acc = 0.0;
  const auto cells = w.grid().cells_of(cube);
  for (std::size_t c : cells) acc += std::pow((spd_power_unchecked(w.cell(c), 1.0 / p) * e).norm(), p);
  return std::pow(acc / static_cast<double>(cells.size()), 1.0 / p);
}

ReducedOperator reduce_norm(const std::vector<const Matrix*>& b, double q, const ReducingOptions& opts) {
  if (b.empty()) throw ShapeError("no cells to reduce over");
  return reduce_with(b, q, fit_directions(static_cast<int>(b.front()->rows()), opts), opts);
}

Matrix reducing_operator(const MatrixWeight& w, const DyadicCube& cube, double p, const ReducingOptions& opts) {
  require_exponent(p);
  if (p == 2.0) return spd_power_unchecked(weight_average(w, cube), 0.5);
  const MatrixWeight b = pointwise_power(w, 1.0 / p);
  return reduce_norm(cube_cells(b, cube), p, opts).v;
}

Matrix dual_reducing_operator(const MatrixWeight& w, const DyadicCube& cube, double p,
                              const ReducingOptions& opts) {
  require_exponent(p);
  if (p == 2.0) return spd_power_unchecked(weight_average(pointwise_power(w, -1.0), cube), 0.5);
  const MatrixWeight b = pointwise_power(w, -1.0 / p);
  return reduce_norm(cube_cells(b, cube), conjugate_exponent(p), opts).v;
}

ReducingFamily build_reducing_family(const MatrixWeight& w, double p, int max_depth, const ReducingOptions& opts) {
  require_exponent(p);
  const DyadicGrid& grid = w.grid();
  require_depth(grid, max_depth);
  const std::size_t count = grid.cube_count(max_depth);
  std::vector<ReducedOperator> primal;
  std::vector<ReducedOperator> dual;
  primal.reserve(count);
  dual.reserve(count);

  if (p == 2.0) {
    const auto avg = weight_averages(w, max_depth);
    const auto avg_inv = weight_averages(pointwise_power(w, -1.0), max_depth);
    for (std::size_t id = 0; id < count; ++id) {
      primal.push_back({spd_power_unchecked(avg[id], 0.5), ReducingMethod::ExactP2, kExactSlack});
      dual.push_back({spd_power_unchecked(avg_inv[id], 0.5), ReducingMethod::ExactP2, kExactSlack});
    }
    return ReducingFamily(grid, p, max_depth, std::move(primal), std::move(dual));
  }

  const MatrixWeight b = pointwise_power(w, 1.0 / p);
  const MatrixWeight b_dual = pointwise_power(w, -1.0 / p);
  const double q_dual = conjugate_exponent(p);
  const Matrix dirs = fit_directions(w.n(), opts);
  for (std::size_t id = 0; id < count; ++id) {
    const DyadicCube cube = grid.cube_from_id(id);
    primal.push_back(reduce_with(cube_cells(b, cube), p, dirs, opts));
    dual.push_back(reduce_with(cube_cells(b_dual, cube), q_dual, dirs, opts));
  }
  return ReducingFamily(grid, p, max_depth, std::move(primal), std::move(dual));
}

int default_max_depth(const DyadicGrid& grid) { return std::max(0, grid.finest_level() - 2); }

double ap_characteristic(const ReducingFamily& family, int max_depth) {
  if (max_depth > family.max_depth()) throw CoverageError("family does not reach the requested depth");
  double best = 0.0;
  for (std::size_t id = 0; id < family.grid().cube_count(max_depth); ++id)
    best = std::max(best, std::pow(spectral_norm(family.v(id) * family.v_dual(id)), family.p()));
  return best;
}

double ap_characteristic(const MatrixWeight& w, double p, int max_depth, const ReducingOptions& opts) {
  return ap_characteristic(build_reducing_family(w, p, max_depth, opts), max_depth);
}

double scalar_ap_characteristic(const MatrixWeight& w, const Vector& e, double p, int max_depth) {
  require_exponent(p);
  const DyadicGrid& grid = w.grid();
  require_depth(grid, max_depth);
  if (e.size() != w.n()) throw ShapeError("direction has the wrong dimension");
  const double pc = conjugate_exponent(p);
  std::vector<double> we;
  std::vector<double> we_dual;
  we.reserve(grid.cell_count());
  for (const Matrix& m : w.cells()) {
    const double v = std::pow((spd_power_unchecked(m, 1.0 / p) * e).norm(), p);
    we.push_back(v);
    we_dual.push_back(std::pow(v, 1.0 - pc));
  }
  const auto a = cube_means<double>(grid, we, max_depth);
  const auto b = cube_means<double>(grid, we_dual, max_depth);
  double best = 0.0;
  for (std::size_t id = 0; id < a.size(); ++id) best = std::max(best, a[id] * std::pow(b[id], p - 1.0));
  return best;
}

DualityReport duality_check(const MatrixWeight& w, double p, int max_depth, const ReducingOptions& opts) {
  const double pc = conjugate_exponent(p);
  const ReducingFamily direct = build_reducing_family(w, p, max_depth, opts);
  const ReducingFamily swapped = build_reducing_family(pointwise_power(w, 1.0 - pc), pc, max_depth, opts);
  const Matrix dirs = random_directions(w.n(), kDualityDirections, kDualitySeed);
  DualityReport report;
  report.min_ratio = std::numeric_limits<double>::infinity();
  report.max_ratio = 0.0;
  report.kappa = std::max(direct.slack(), swapped.slack());
  for (std::size_t id = 0; id < direct.size(); ++id) {
    const Vector num = (swapped.v_dual(id) * dirs).colwise().norm().transpose();
    const Vector den = (direct.v(id) * dirs).colwise().norm().transpose();
    const Vector ratio = num.cwiseQuotient(den);
    report.min_ratio = std::min(report.min_ratio, ratio.minCoeff());
    report.max_ratio = std::max(report.max_ratio, ratio.maxCoeff());
  }
  const double k2 = report.kappa * report.kappa;
  report.within = report.min_ratio >= 1.0 / k2 && report.max_ratio <= k2;
  return report;
}

}  // namespace haarweight
