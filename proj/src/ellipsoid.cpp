#include "haarweight/ellipsoid.hpp"

#include <algorithm>
#include <limits>
#include <utility>
#include <vector>
#include <cmath>
#include <numbers>
#include <random>

#include <fmt/format.h>

#include "haarweight/errors.hpp"

namespace haarweight {

namespace {

constexpr double kPathGrowth = 10.0;
constexpr int kNewtonPerStage = 100;
constexpr double kCentered = 1e-16;
constexpr double kStall = 1e-10;

struct Barrier {
  // Barrier F = -log det A - sum_i log(1 - s_i) / t on the shape parameters.
  // Features a_ik with g_i^T A(theta) g_i = sum_k a_ik theta_k over the
  // n(n+1)/2 upper-triangle parameters of A.
  Matrix features;
  std::vector<std::pair<int, int>> index;
  int n;

  Matrix shape(const Vector& theta) const {
    Matrix a(n, n);
    for (std::size_t k = 0; k < index.size(); ++k) {
      const auto [r, c] = index[k];
      a(r, c) = a(c, r) = theta(static_cast<Eigen::Index>(k));
    }
    return a;
  }

  // Minimizer of F(theta + alpha dir) over the feasible segment (F is convex
  // along the line).
  double line_search(const Vector& theta, const Vector& dir, double t) const {
    const Vector slack = Vector::Ones(features.rows()) - features * theta;
    const Vector rate = features * dir;
    const Matrix a = shape(theta);
    const Matrix d = shape(dir);
    double hi = 4.0;
    for (Eigen::Index i = 0; i < rate.size(); ++i)
      if (rate(i) > 0.0) hi = std::min(hi, slack(i) / rate(i));
    Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> ges(d, a, Eigen::EigenvaluesOnly);
    const double mu = ges.eigenvalues().minCoeff();
    if (mu < 0.0) hi = std::min(hi, -1.0 / mu);
    hi *= 0.999;
    // Safeguarded Newton on the directional derivative.
    double lo = 0.0;
    double alpha = std::min(1.0, 0.5 * hi);
    for (int k = 0; k < 50; ++k) {
      const Vector q = rate.cwiseQuotient(slack - alpha * rate);
      const Matrix id = (a + alpha * d).inverse() * d;
      const double g = q.sum() / t - id.trace();
      const double h = q.squaredNorm() / t + (id * id).trace();
      if (g > 0.0) hi = alpha; else lo = alpha;
      if (std::abs(g) <= 1e-13 * h * std::max(alpha, 1e-300) || hi - lo <= 1e-14 * hi) break;
      const double next = alpha - g / h;
      alpha = next > lo && next < hi ? next : 0.5 * (lo + hi);
    }
    return alpha;
  }
};

Barrier make_barrier(const Matrix& points) {
  Barrier b;
  b.n = static_cast<int>(points.rows());
  for (int r = 0; r < b.n; ++r)
    for (int c = r; c < b.n; ++c) b.index.emplace_back(r, c);
  b.features.resize(points.cols(), static_cast<Eigen::Index>(b.index.size()));
  for (std::size_t k = 0; k < b.index.size(); ++k) {
    const auto [r, c] = b.index[k];
    const double mult = r == c ? 1.0 : 2.0;
    b.features.col(static_cast<Eigen::Index>(k)) = mult * points.row(r).cwiseProduct(points.row(c)).transpose();
  }
  return b;
}

}  // namespace

MveeResult centered_mvee(const Matrix& points, double tol, int max_iterations) {
  const Eigen::Index n = points.rows();
  const Eigen::Index m = points.cols();
  if (m < n) throw ShapeError("fewer points than dimensions");
  const double dn = static_cast<double>(n);
  const Barrier bar = make_barrier(points);
  const Eigen::Index dof = bar.features.cols();

  // Central path of the primal problem
  //   min -log det A  subject to  g_i^T A g_i <= 1,
  // whose multipliers lambda_i = 1 / (t (1 - s_i)) give A^{-1} = sum lambda_i g_i g_i^T.
  // Start from the inverse uniform moment, scaled so that max_i s_i = 1/2.
  const Matrix start = (points * points.transpose() / static_cast<double>(m)).inverse();
  const double worst = (points.transpose() * start).cwiseProduct(points.transpose()).rowwise().sum().maxCoeff();
  Vector theta(dof);
  for (std::size_t k = 0; k < bar.index.size(); ++k)
    theta(static_cast<Eigen::Index>(k)) = 0.5 * start(bar.index[k].first, bar.index[k].second) / worst;

  MveeResult out;
  double t = static_cast<double>(m);
  for (;;) {
    double last_dec2 = std::numeric_limits<double>::infinity();
    for (int step = 0; step < kNewtonPerStage; ++step) {
      if (out.iterations++ >= max_iterations)
        throw FitError(fmt::format("ellipsoid fit stalled after {} Newton steps", max_iterations), out.residual);
      const Matrix a_inv = bar.shape(theta).inverse();
      const Vector inv_slack = (Vector::Ones(m) - bar.features * theta).cwiseInverse();
      Vector grad = bar.features.transpose() * inv_slack / t;
      Matrix hess = bar.features.transpose() * inv_slack.cwiseAbs2().asDiagonal() * bar.features / t;
      std::vector<Matrix> p(static_cast<std::size_t>(dof));
      for (Eigen::Index k = 0; k < dof; ++k) {
        Matrix e = Matrix::Zero(n, n);
        const auto [r, c] = bar.index[static_cast<std::size_t>(k)];
        e(r, c) = e(c, r) = 1.0;
        p[static_cast<std::size_t>(k)] = a_inv * e;
        grad(k) -= p[static_cast<std::size_t>(k)].trace();
      }
      for (Eigen::Index k = 0; k < dof; ++k)
        for (Eigen::Index l = 0; l < dof; ++l)
          hess(k, l) += (p[static_cast<std::size_t>(k)] * p[static_cast<std::size_t>(l)]).trace();
      const Vector dir = -hess.ldlt().solve(grad);
      // Newton decrement of the self-concordant t F.
      const double dec2 = -t * grad.dot(dir);
      // Stop at the target or once roundoff stalls quadratic convergence.
      if (!(dec2 > kCentered) || (dec2 < kStall && dec2 > 0.25 * last_dec2)) break;
      last_dec2 = dec2;
      const double alpha = bar.line_search(theta, dir, t);
      theta += alpha * dir;
    }

    const Vector lambda = (Vector::Ones(m) - bar.features * theta).cwiseInverse() / t;
    out.weights = lambda / lambda.sum();
    out.moment = points * out.weights.asDiagonal() * points.transpose();
    const Matrix x_inv = out.moment.inverse();
    const double k_max = (points.transpose() * x_inv).cwiseProduct(points.transpose()).rowwise().sum().maxCoeff();
    out.residual = k_max / dn - 1.0;
    if (out.residual <= tol) break;
    t *= kPathGrowth;
  }
  return out;
}

std::size_t default_direction_count(int n) {
  return std::max<std::size_t>(500, 50 * static_cast<std::size_t>(n) * static_cast<std::size_t>(n));
}

Matrix hemisphere_directions(int n, std::size_t count) {
  Matrix out(n, static_cast<Eigen::Index>(count));
  if (n == 1) {
    out.setOnes();
  } else if (n == 2) {
    for (std::size_t i = 0; i < count; ++i) {
      const double a = std::numbers::pi * (static_cast<double>(i) + 0.5) / static_cast<double>(count);
      out.col(static_cast<Eigen::Index>(i)) << std::cos(a), std::sin(a);
    }
  } else if (n == 3) {
    const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
    for (std::size_t i = 0; i < count; ++i) {
      const double z = (static_cast<double>(i) + 0.5) / static_cast<double>(count);
      const double r = std::sqrt(1.0 - z * z);
      const double phi = golden * static_cast<double>(i);
      out.col(static_cast<Eigen::Index>(i)) << r * std::cos(phi), r * std::sin(phi), z;
    }
  } else {
    out = random_directions(n, count, 0x5eedu + static_cast<std::uint64_t>(n));
  }
  return out;
}

Matrix random_directions(int n, std::size_t count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix out(n, static_cast<Eigen::Index>(count));
  for (std::size_t i = 0; i < count; ++i) {
    Vector v(n);
    do {
      for (int k = 0; k < n; ++k) v(k) = normal(rng);
    } while (v.norm() < 1e-12);
    out.col(static_cast<Eigen::Index>(i)) = v.normalized();
  }
  return out;
}

}  // namespace haarweight
