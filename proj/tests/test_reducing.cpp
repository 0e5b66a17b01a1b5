#include <cmath>
#include <random>

#include <doctest.h>

#include "haarweight/ellipsoid.hpp"
#include "haarweight/errors.hpp"
#include "haarweight/reducing.hpp"
#include "haarweight/spd.hpp"
#include "support.hpp"

using namespace haarweight;

namespace {

// rho_I(e) by direct summation of |W^{1/p} e|^p over the cells of I.
double rho_oracle(const MatrixWeight& w, const DyadicCube& cube, double p, const Vector& e) {
  const auto cells = w.grid().cells_of(cube);
  double s = 0.0;
  for (std::size_t c : cells) s += std::pow((spd_power(w.cell(c), 1.0 / p) * e).norm(), p);
  return std::pow(s / static_cast<double>(cells.size()), 1.0 / p);
}

Vector unit(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  Vector e(n);
  for (int k = 0; k < n; ++k) e(k) = normal(rng);
  return e.normalized();
}

MatrixWeight two_cell() { return testing::scalar_weight(DyadicGrid(1, 1), {1.0, 4.0}); }

}  // namespace

TEST_CASE("direction_norm examples and oracle") {
  const DyadicGrid grid(2, 3);
  Vector e = Vector::Zero(2);
  e(0) = 1.0;
  for (double p : {1.5, 2.0, 3.0})
    CHECK(direction_norm(MatrixWeight::identity(grid, 2), grid.cube(1, 2), p, e) == doctest::Approx(1.0));
  CHECK(direction_norm(two_cell(), DyadicCube::root(1), 2.0, Vector::Ones(1)) ==
        doctest::Approx(std::sqrt(2.5)).epsilon(1e-14));
  std::mt19937_64 rng(1);
  const MatrixWeight w = testing::random_weight(grid, 2, rng);
  for (int rep = 0; rep < 10; ++rep) {
    const Vector u = unit(2, rng);
    const DyadicCube cube = grid.cube_from_id(rep % grid.cube_count(3));
    CHECK(direction_norm(w, cube, 3.0, u) == doctest::Approx(rho_oracle(w, cube, 3.0, u)).epsilon(1e-12));
  }
  const Matrix a = testing::random_spd(2, rng);
  const Vector u = unit(2, rng);
  CHECK(direction_norm(MatrixWeight::constant(grid, a), DyadicCube::root(2), 2.0, u) ==
        doctest::Approx((spd_power(a, 0.5) * u).norm()).epsilon(1e-13));
}

TEST_CASE("p = 2 reducing operators are matrix-average square roots") {
  const MatrixWeight w = two_cell();
  CHECK(reducing_operator(w, DyadicCube::root(1), 2.0)(0, 0) == doctest::Approx(1.5811388300841898).epsilon(1e-14));
  CHECK(dual_reducing_operator(w, DyadicCube::root(1), 2.0)(0, 0) ==
        doctest::Approx(0.7905694150420949).epsilon(1e-14));
  const DyadicGrid grid(1, 3);
  Matrix d = Matrix::Zero(2, 2);
  d.diagonal() << 1, 9;
  Matrix r = Matrix::Zero(2, 2);
  r.diagonal() << 1, 3;
  CHECK((reducing_operator(MatrixWeight::constant(grid, d), DyadicCube::root(1), 2.0) - r).norm() < 1e-14);

  std::mt19937_64 rng(2);
  const DyadicGrid g2(2, 3);
  const MatrixWeight rw = testing::random_weight(g2, 3, rng);
  const ReducingFamily fam = build_reducing_family(rw, 2.0, 2);
  const MatrixWeight inv = pointwise_power(rw, -1.0);
  for (std::size_t id = 0; id < fam.size(); ++id) {
    const DyadicCube cube = g2.cube_from_id(id);
    const Matrix v = testing::sqrt_oracle(weight_average(rw, cube));
    const Matrix vd = testing::sqrt_oracle(weight_average(inv, cube));
    CHECK((fam.v(id) - v).norm() < 1e-10 * v.norm());
    CHECK((fam.v_dual(id) - vd).norm() < 1e-10 * vd.norm());
    CHECK((fam.v(id) * fam.v_inv(id) - Matrix::Identity(3, 3)).norm() < 1e-10);
    CHECK(fam.primal(id).method == ReducingMethod::ExactP2);
  }
  const Matrix a = testing::random_spd(2, rng);
  const Matrix ainv = spd_power(a, -0.5);
  CHECK((dual_reducing_operator(MatrixWeight::constant(g2, a), DyadicCube::root(2), 2.0) - ainv).norm() <
        1e-12 * ainv.norm());
}

TEST_CASE("ellipsoidal balls are reproduced at p != 2") {
  const DyadicGrid grid(1, 3);
  for (int n = 2; n <= 3; ++n) {
    CHECK((reducing_operator(MatrixWeight::identity(grid, n), DyadicCube::root(1), 3.0) -
           Matrix::Identity(n, n))
              .norm() < 1e-8);
    std::mt19937_64 rng(n);
    const Matrix a = testing::random_spd(n, rng);
    const Matrix expected = spd_power(a, 1.0 / 3.0);
    const Matrix got = reducing_operator(MatrixWeight::constant(grid, a), DyadicCube::root(1), 3.0);
    CHECK((got - expected).norm() < 1e-12 * expected.norm());
  }
  // A genuinely non-ellipsoidal ball still goes through the fit.
  std::vector<Matrix> cells;
  for (std::size_t c = 0; c < grid.cell_count(); ++c) {
    Matrix d = Matrix::Identity(2, 2);
    d(c % 2, c % 2) = 1.0 + static_cast<double>(c);
    cells.push_back(d);
  }
  const ReducingFamily fam = build_reducing_family(MatrixWeight(grid, cells), 3.0, 1);
  CHECK(fam.primal(0).method == ReducingMethod::Ellipsoid);
  CHECK(to_string(fam.primal(0).method) == "ellipsoid");
}

TEST_CASE("John sandwich on fresh directions") {
  std::mt19937_64 rng(4);
  const DyadicGrid grid(1, 4);
  for (int n = 2; n <= 3; ++n) {
    const MatrixWeight w = testing::random_weight(grid, n, rng);
    const ReducingFamily fam = build_reducing_family(w, 3.0, 2);
    const Matrix dirs = random_directions(n, 300, 99);
    for (std::size_t id = 0; id < fam.size(); ++id) {
      const DyadicCube cube = grid.cube_from_id(id);
      CHECK(fam.primal(id).kappa <= std::sqrt(n) * (1 + 1e-3));
      double lo = INFINITY, hi = 0.0;
      for (Eigen::Index k = 0; k < dirs.cols(); ++k) {
        const Vector e = dirs.col(k);
        const double r = (fam.v(id) * e).norm() / rho_oracle(w, cube, 3.0, e);
        lo = std::min(lo, r);
        hi = std::max(hi, r);
      }
      CHECK(lo >= 1.0 / (1 + 1e-3));
      CHECK(hi <= std::sqrt(n) * (1 + 1e-3));
    }
  }
}

TEST_CASE("reducing products are bounded below by one") {
  std::mt19937_64 rng(12);
  const DyadicGrid grid(1, 4);
  for (int n = 1; n <= 3; ++n)
    for (double p : {1.5, 2.0, 3.0}) {
      const ReducingFamily fam = build_reducing_family(testing::random_weight(grid, n, rng), p, 3);
      for (std::size_t id = 0; id < fam.size(); ++id)
        CHECK(spectral_norm(fam.v(id) * fam.v_dual(id)) >= 1.0 - 1e-8);
    }
}

TEST_CASE("characteristic examples") {
  CHECK(ap_characteristic(two_cell(), 2.0, 1) == doctest::Approx(1.5625).epsilon(1e-12));
  const DyadicGrid grid(2, 3);
  CHECK(ap_characteristic(MatrixWeight::identity(grid, 2), 2.0, 2) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(ap_characteristic(MatrixWeight::identity(grid, 2), 3.0, 2) == doctest::Approx(1.0).epsilon(1e-6));
  std::mt19937_64 rng(13);
  CHECK(ap_characteristic(MatrixWeight::constant(grid, testing::random_spd(2, rng)), 2.0, 2) ==
        doctest::Approx(1.0).epsilon(1e-10));
  CHECK_THROWS_AS(ap_characteristic(two_cell(), 2.0, 2), ParameterError);
}

TEST_CASE("scalar characteristic") {
  std::mt19937_64 rng(14);
  const DyadicGrid grid(1, 5);
  Vector e = Vector::Zero(2);
  e(0) = 1.0;
  CHECK(scalar_ap_characteristic(MatrixWeight::identity(grid, 2), e, 3.0, 3) == doctest::Approx(1.0));
  // Brute-force scalar oracle at n = 1.
  const MatrixWeight w = testing::random_weight(grid, 1, rng);
  for (double p : {2.0, 3.0}) {
    const double pp = p / (p - 1.0);
    double sup = 0.0;
    for (std::size_t id = 0; id < grid.cube_count(3); ++id) {
      const auto cells = grid.cells_of(grid.cube_from_id(id));
      double a = 0.0, b = 0.0;
      for (std::size_t c : cells) {
        a += w.cell(c)(0, 0);
        b += std::pow(w.cell(c)(0, 0), 1.0 - pp);
      }
      a /= cells.size();
      b /= cells.size();
      sup = std::max(sup, a * std::pow(b, p - 1.0));
    }
    const double s = scalar_ap_characteristic(w, Vector::Ones(1), p, 3);
    CHECK(s == doctest::Approx(sup).epsilon(1e-12));
    CHECK(ap_characteristic(w, p, 3) == doctest::Approx(s).epsilon(1e-9));
  }
  WeightFamily rot;
  rot.kind = FamilyKind::Rotating;
  rot.n = 2;
  rot.level = 8;
  rot.alpha = 0.5;
  rot.omega = 6.0;
  const MatrixWeight rw = make_weight(rot);
  CHECK(scalar_ap_characteristic(rw, e, 2.0, 6) <= 4.0 * ap_characteristic(rw, 2.0, 6));
}

TEST_CASE("characteristic grows with the power exponent") {
  WeightFamily pw;
  pw.kind = FamilyKind::Power;
  pw.level = 10;
  double last = 0.0;
  for (double a : {0.0, 0.2, 0.4, 0.5, 0.6, 0.8}) {
    pw.alpha = a;
    const double chi = ap_characteristic(make_weight(pw), 2.0, 8);
    CHECK(std::isfinite(chi));
    CHECK(chi >= last);
    last = chi;
  }
  last = 0.0;
  for (double a : {0.0, -0.2, -0.4, -0.6}) {
    pw.alpha = a;
    const double chi = ap_characteristic(make_weight(pw), 2.0, 8);
    CHECK(chi >= last);
    last = chi;
  }
}

TEST_CASE("duality between W and W^{1-p'}") {
  std::mt19937_64 rng(15);
  const DyadicGrid grid(1, 4);
  const MatrixWeight id = MatrixWeight::identity(grid, 2);
  const DualityReport ri = duality_check(id, 3.0, 2);
  CHECK(ri.min_ratio == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(ri.max_ratio == doctest::Approx(1.0).epsilon(1e-6));
  const MatrixWeight w = testing::random_weight(grid, 2, rng);
  const DualityReport r2 = duality_check(w, 2.0, 3);
  CHECK(std::abs(r2.min_ratio - 1.0) < 1e-8);
  CHECK(std::abs(r2.max_ratio - 1.0) < 1e-8);
  const DualityReport r3 = duality_check(w, 3.0, 2);
  CHECK(r3.within);
  CHECK(r3.min_ratio >= 1.0 / (r3.kappa * r3.kappa));
  CHECK(r3.max_ratio <= r3.kappa * r3.kappa);
}

TEST_CASE("centered mvee of a symmetric box") {
  // The MVEE of the square [-1,1]^2 is the disc of radius sqrt 2.
  Matrix pts(2, 2);
  pts << 1, 1, 1, -1;
  const MveeResult r = centered_mvee(pts, 1e-9, 500);
  CHECK((2.0 * r.moment - Matrix::Identity(2, 2) * 2.0).norm() < 1e-6);
  CHECK(r.residual <= 1e-9);
}

TEST_CASE("direction sets") {
  for (int n = 2; n <= 4; ++n) {
    const Matrix h = hemisphere_directions(n, 200);
    CHECK(h.cols() == 200);
    for (Eigen::Index k = 0; k < h.cols(); ++k) CHECK(h.col(k).norm() == doctest::Approx(1.0));
  }
  CHECK(default_direction_count(2) == 500);
  CHECK(default_direction_count(4) == 800);
  const Matrix a = random_directions(3, 10, 5), b = random_directions(3, 10, 5);
  CHECK(a == b);
}
