#include <cmath>
#include <random>

#include <doctest.h>

#include "haarweight/errors.hpp"
#include "haarweight/spd.hpp"
#include "haarweight/weight.hpp"
#include "support.hpp"

using namespace haarweight;

TEST_CASE("spd_power examples") {
  CHECK((spd_power(Matrix::Identity(3, 3), -0.5) - Matrix::Identity(3, 3)).norm() < 1e-15);
  Matrix d = Matrix::Zero(2, 2);
  d.diagonal() << 4, 9;
  Matrix r = Matrix::Zero(2, 2);
  r.diagonal() << 2, 3;
  CHECK((spd_power(d, 0.5) - r).norm() < 1e-14);
}

TEST_CASE("spd_power against independent oracles") {
  std::mt19937_64 rng(5);
  for (int n = 1; n <= 4; ++n)
    for (int rep = 0; rep < 10; ++rep) {
      const Matrix a = testing::random_spd(n, rng);
      const Matrix third = spd_power(a, 1.0 / 3.0);
      CHECK((third * third * third - a).norm() < 1e-10 * a.norm());
      CHECK((spd_power(a, 0.5) - testing::sqrt_oracle(a)).norm() < 1e-10 * a.norm());
      CHECK((spd_power(a, -1.0) - a.inverse()).norm() < 1e-10 * a.inverse().norm());
      CHECK((spd_power(a, 1.0) - a).norm() < 1e-12 * a.norm());
    }
}

TEST_CASE("spd_power group law") {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  for (int n = 1; n <= 4; ++n)
    for (int rep = 0; rep < 20; ++rep) {
      const Matrix a = testing::random_spd(n, rng);
      const double s = u(rng), t = u(rng);
      const Matrix lhs = spd_power(a, s) * spd_power(a, t);
      const Matrix rhs = spd_power(a, s + t);
      CHECK((lhs - rhs).norm() < 1e-9 * rhs.norm());
    }
}

TEST_CASE("spd validation is a hard error") {
  Matrix ns(2, 2);
  ns << 1, 0.5, 0.4, 1;
  CHECK_THROWS_AS(spd_power(ns, 0.5), MatrixDomainError);
  Matrix indefinite(2, 2);
  indefinite << 1, 2, 2, 1;
  CHECK_THROWS_AS(spd_power(indefinite, 0.5), MatrixDomainError);
  Matrix tiny = Matrix::Identity(2, 2);
  tiny(1, 1) = 1e-13;
  CHECK_THROWS_AS(require_spd(tiny), MatrixDomainError);
  const DyadicGrid grid(1, 1);
  CHECK_THROWS_AS(MatrixWeight(grid, {Matrix::Identity(2, 2), indefinite}), MatrixDomainError);
}

TEST_CASE("weight averages on the two-cell weight") {
  const DyadicGrid grid(1, 1);
  const MatrixWeight w = testing::scalar_weight(grid, {1.0, 4.0});
  CHECK(weight_average(w, DyadicCube::root(1))(0, 0) == doctest::Approx(2.5).epsilon(1e-15));
  CHECK(weight_average(pointwise_power(w, -1.0), DyadicCube::root(1))(0, 0) ==
        doctest::Approx(0.625).epsilon(1e-15));
}

TEST_CASE("weight averages match direct sums") {
  std::mt19937_64 rng(8);
  const DyadicGrid grid(2, 3);
  const MatrixWeight w = testing::random_weight(grid, 2, rng);
  const auto avg = weight_averages(w, 3);
  for (std::size_t id = 0; id < avg.size(); ++id) {
    const auto cells = grid.cells_of(grid.cube_from_id(id));
    Matrix s = Matrix::Zero(2, 2);
    for (std::size_t c : cells) s += w.cell(c);
    s /= static_cast<double>(cells.size());
    CHECK((avg[id] - s).norm() < 1e-12);
    CHECK((weight_average(w, grid.cube_from_id(id)) - s).norm() < 1e-12);
  }
  const MatrixWeight cst = MatrixWeight::constant(grid, avg[0]);
  for (const Matrix& m : weight_averages(cst, 3)) CHECK((m - avg[0]).norm() < 1e-13);
}

TEST_CASE("averages are Loewner monotone between ordered weights") {
  std::mt19937_64 rng(9);
  const DyadicGrid grid(1, 4);
  std::vector<Matrix> lo, hi;
  for (std::size_t c = 0; c < grid.cell_count(); ++c) {
    const Matrix a = testing::random_spd(2, rng);
    lo.push_back(a);
    hi.push_back(a + testing::random_spd(2, rng));
  }
  const auto ma = weight_averages(MatrixWeight(grid, lo), 4);
  const auto mb = weight_averages(MatrixWeight(grid, hi), 4);
  for (std::size_t id = 0; id < ma.size(); ++id) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(mb[id] - ma[id]);
    CHECK(eig.eigenvalues().minCoeff() > 0.0);
  }
}

TEST_CASE("weighted norms") {
  std::mt19937_64 rng(10);
  const DyadicGrid grid(2, 3);
  const GridFunction f = testing::random_function(grid, 2, rng);
  for (double p : {1.5, 2.0, 3.0}) {
    CHECK(weighted_lp_norm(MatrixWeight::identity(grid, 2), f, p) == lp_norm(f, p));
  }
  const GridFunction s = testing::random_function(grid, 1, rng);
  const MatrixWeight c = MatrixWeight::constant(grid, Matrix::Constant(1, 1, 7.0));
  CHECK(weighted_lp_norm(c, s, 3.0) == doctest::Approx(std::cbrt(7.0) * lp_norm(s, 3.0)).epsilon(1e-13));

  Matrix d = Matrix::Zero(2, 2);
  d.diagonal() << 1, 16;
  Matrix v(2, grid.cell_count());
  v.row(0).setZero();
  v.row(1).setOnes();
  CHECK(weighted_lp_norm(MatrixWeight::constant(grid, d), GridFunction(grid, v), 2.0) ==
        doctest::Approx(4.0).epsilon(1e-14));
  CHECK_THROWS_AS(weighted_lp_norm(MatrixWeight::identity(grid, 3), f, 2.0), ShapeError);
}

TEST_CASE("family weights") {
  WeightFamily cst;
  cst.kind = FamilyKind::Constant;
  cst.dim = 2;
  cst.n = 2;
  cst.level = 3;
  cst.constant = Matrix::Identity(2, 2);
  const MatrixWeight cw = make_weight(cst);
  for (const Matrix& m : cw.cells()) CHECK(m == Matrix::Identity(2, 2));

  WeightFamily pw;
  pw.kind = FamilyKind::Power;
  pw.level = 4;
  pw.alpha = 0.0;
  const MatrixWeight flat = make_weight(pw);
  for (const Matrix& m : flat.cells()) CHECK(m(0, 0) == doctest::Approx(1.0).epsilon(1e-15));

  // Cell averages of |x|^alpha on [k h, (k+1) h): closed form.
  pw.alpha = 0.5;
  const MatrixWeight w = make_weight(pw);
  const double h = 1.0 / 16;
  for (std::size_t c = 0; c < 16; ++c) {
    const double a = c * h, b = (c + 1) * h;
    const double exact = (std::pow(b, 1.5) - std::pow(a, 1.5)) / (1.5 * h);
    CHECK(w.cell(c)(0, 0) == doctest::Approx(exact).epsilon(1e-12));
  }
  CHECK_FALSE(w.out_of_range());
  pw.alpha = 1.5;
  CHECK(make_weight(pw).out_of_range());
  pw.p = 3.0;
  CHECK_FALSE(make_weight(pw).out_of_range());
  pw.alpha = -1.0;
  CHECK_THROWS_AS(make_weight(pw), ParameterError);
}

TEST_CASE("rotating weight structure") {
  WeightFamily rot;
  rot.kind = FamilyKind::Rotating;
  rot.n = 3;
  rot.level = 5;
  rot.alpha = 0.5;
  rot.omega = 6.0;
  const MatrixWeight w = make_weight(rot);
  for (std::size_t c = 0; c < w.grid().cell_count(); ++c) {
    const Matrix& m = w.cell(c);
    CHECK((m - m.transpose()).norm() == 0.0);
    CHECK(m(2, 2) == 1.0);
    CHECK(m(0, 2) == 0.0);
    // Trace and determinant of R diag(r, 1) R^T averaged: trace is the mean of r + 1.
    CHECK(m.block(0, 0, 2, 2).trace() > 1.0);
  }
  rot.n = 1;
  CHECK_THROWS(make_weight(rot));
}

TEST_CASE("block random weight is deterministic and seed dependent") {
  WeightFamily blk;
  blk.kind = FamilyKind::BlockRandom;
  blk.dim = 2;
  blk.n = 3;
  blk.level = 4;
  blk.sigma = 1.0;
  blk.seed = 42;
  const MatrixWeight a = make_weight(blk), b = make_weight(blk);
  bool same = true;
  for (std::size_t c = 0; c < a.grid().cell_count(); ++c) same = same && a.cell(c) == b.cell(c);
  CHECK(same);
  blk.seed = 43;
  CHECK(make_weight(blk).cell(0) != a.cell(0));
}

TEST_CASE("family json round trip") {
  WeightFamily f;
  f.kind = FamilyKind::Rotating;
  f.dim = 2;
  f.n = 2;
  f.level = 3;
  f.alpha = 0.4;
  f.omega = 3.0;
  f.center = {0.1, 0.2, 0.0};
  f.label = "rot";
  const WeightFamily g = family_from_json(to_json(f), 2, 2, 3);
  CHECK(g.kind == f.kind);
  CHECK(g.alpha == f.alpha);
  CHECK(g.omega == f.omega);
  CHECK(g.center == f.center);
  CHECK(g.label == f.label);
  CHECK_THROWS_AS(family_kind_from_string("nope"), ConfigError);
}
