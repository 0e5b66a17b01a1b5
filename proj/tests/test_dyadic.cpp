#include <cmath>
#include <random>
#include <vector>

#include <doctest.h>

#include "haarweight/dyadic.hpp"
#include "haarweight/errors.hpp"
#include "support.hpp"

using namespace haarweight;

TEST_CASE("cube geometry") {
  const DyadicCube root = DyadicCube::root(2);
  CHECK(root.measure() == 1.0);
  const DyadicCube c = root.child(1).child(2);
  CHECK(c.level == 2);
  CHECK(c.index[0] == 2);
  CHECK(c.index[1] == 1);
  CHECK(c.measure() == doctest::Approx(1.0 / 16));
  CHECK(c.parent() == root.child(1));
  CHECK(c.ancestor(0) == root);
  CHECK(root.contains(c));
  CHECK_FALSE(c.contains(root));
  const double inside[2] = {0.55, 0.3};
  const double outside[2] = {0.3, 0.3};
  CHECK(c.contains_point(inside));
  CHECK_FALSE(c.contains_point(outside));
}

TEST_CASE("children partition their parent") {
  for (int d = 1; d <= 3; ++d) {
    const DyadicGrid grid(d, 3);
    for (int level = 0; level < 3; ++level)
      for (std::size_t i = 0; i < grid.cubes_at(level); ++i) {
        const DyadicCube cube = grid.cube(level, i);
        double sum = 0.0;
        std::vector<std::size_t> cells;
        for (unsigned ch = 0; ch < grid.child_count(); ++ch) {
          sum += cube.child(ch).measure();
          for (std::size_t c : grid.cells_of(cube.child(ch))) cells.push_back(c);
        }
        CHECK(sum == cube.measure());
        std::sort(cells.begin(), cells.end());
        CHECK(cells == grid.cells_of(cube));
      }
  }
}

TEST_CASE("cube ids round-trip") {
  const DyadicGrid grid(2, 4);
  for (std::size_t id = 0; id < grid.cube_count(4); ++id) {
    const DyadicCube cube = grid.cube_from_id(id);
    CHECK(grid.cube_id(cube) == id);
    CHECK(grid.level_of(id) == cube.level);
    if (cube.level > 0) CHECK(grid.parent_id(id) == grid.cube_id(cube.parent()));
    if (cube.level < 4)
      for (unsigned ch = 0; ch < 4; ++ch) CHECK(grid.child_id(id, ch) == grid.cube_id(cube.child(ch)));
  }
}

TEST_CASE("admissible signatures") {
  CHECK(admissible_signatures(1).size() == 1);
  CHECK(admissible_signatures(2).size() == 3);
  CHECK(admissible_signatures(3).size() == 7);
  for (auto s : admissible_signatures(3)) CHECK(s.mask != 7u);
}

TEST_CASE("haar_eval point values") {
  const DyadicCube unit = DyadicCube::root(1);
  const double a[1] = {0.25}, b[1] = {0.75};
  CHECK(haar_eval(unit, {0}, a) == 1.0);
  CHECK(haar_eval(unit, {0}, b) == -1.0);
  const double q[2] = {0.25, 0.75};
  CHECK(haar_eval(DyadicCube::root(2), {0}, q) == -1.0);
  // Outside the cube the function vanishes.
  const double far[1] = {0.8};
  CHECK(haar_eval(unit.child(0), {0}, far) == 0.0);
  const double bad[1] = {1.0};
  CHECK_THROWS_AS(haar_eval(unit, {0}, bad), DomainError);
}

TEST_CASE("transform of the two-cell function") {
  const DyadicGrid grid(1, 1);
  Matrix v(1, 2);
  v << 1, 3;
  const HaarCoefficients c = haar_transform(GridFunction(grid, v));
  CHECK(c.root_scaling()(0) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(c.detail(0, 0)(0) == doctest::Approx(-1.0).epsilon(1e-15));
}

TEST_CASE("transform of the zero function is zero") {
  const DyadicGrid grid(2, 3);
  const HaarCoefficients c = haar_transform(GridFunction(grid, 2));
  CHECK(c.details().isZero(0.0));
  CHECK(c.root_scaling().isZero(0.0));
}

TEST_CASE("identity function detail converges to -1/4") {
  for (int level = 1; level <= 10; ++level) {
    const DyadicGrid grid(1, level);
    GridFunction f(grid, 1);
    // Cell averages of x.
    for (std::size_t c = 0; c < grid.cell_count(); ++c) f.cell(c)(0) = (c + 0.5) * grid.cell_measure();
    const double got = haar_transform(f).detail(0, 0)(0);
    CHECK(std::abs(got + 0.25) <= std::ldexp(1.0, -level));
  }
}

TEST_CASE("coefficients equal brute-force inner products") {
  std::mt19937_64 rng(11);
  for (int d = 1; d <= 3; ++d) {
    const int L = d == 3 ? 2 : 3;
    const DyadicGrid grid(d, L);
    const GridFunction f = testing::random_function(grid, 2, rng);
    const HaarCoefficients c = haar_transform(f);
    for (int level = 0; level < L; ++level)
      for (std::size_t i = 0; i < grid.cubes_at(level); ++i) {
        const DyadicCube cube = grid.cube(level, i);
        for (HaarSignature eps : admissible_signatures(d)) {
          Vector ip = Vector::Zero(2);
          for (std::size_t cell = 0; cell < grid.cell_count(); ++cell)
            ip += f.cell(cell) * haar_eval(cube, eps, testing::cell_center(grid, cell)) * grid.cell_measure();
          CHECK((c.detail(grid.cube_id(cube), static_cast<int>(eps.mask)) - ip).norm() < 1e-12);
        }
      }
    Vector mean = f.values().rowwise().mean();
    CHECK((c.root_scaling() - mean).norm() < 1e-12);
  }
}

TEST_CASE("orthonormality of the finite Haar system") {
  for (int d = 1; d <= 2; ++d) {
    const int L = d == 1 ? 6 : 4;
    const DyadicGrid grid(d, L);
    // Rows of B are sampled basis functions (root indicator first).
    std::vector<Vector> rows;
    rows.push_back(Vector::Ones(static_cast<Eigen::Index>(grid.cell_count())));
    for (int level = 0; level < L; ++level)
      for (std::size_t i = 0; i < grid.cubes_at(level); ++i)
        for (HaarSignature eps : admissible_signatures(d)) {
          Vector r(static_cast<Eigen::Index>(grid.cell_count()));
          for (std::size_t c = 0; c < grid.cell_count(); ++c)
            r(static_cast<Eigen::Index>(c)) = haar_eval(grid.cube(level, i), eps, testing::cell_center(grid, c));
          rows.push_back(r);
        }
    Matrix b(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(grid.cell_count()));
    for (std::size_t k = 0; k < rows.size(); ++k) b.row(static_cast<Eigen::Index>(k)) = rows[k];
    const Matrix gram = b * b.transpose() * grid.cell_measure();
    CHECK(gram.rows() == static_cast<Eigen::Index>(grid.cell_count()));
    CHECK((gram - Matrix::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("round trip and Parseval on random functions") {
  std::mt19937_64 rng(7);
  for (int d = 1; d <= 3; ++d)
    for (int L = 0; L <= (d == 1 ? 8 : d == 2 ? 5 : 3); ++L) {
      const DyadicGrid grid(d, L);
      for (int rep = 0; rep < 5; ++rep) {
        const GridFunction f = testing::random_function(grid, 3, rng);
        const HaarCoefficients c = haar_transform(f);
        CHECK((haar_reconstruct(c).values() - f.values()).cwiseAbs().maxCoeff() < 1e-10);
        const double energy = c.detail_norm_squared() + c.root_scaling().squaredNorm();
        CHECK(std::abs(energy - std::pow(lp_norm(f, 2.0), 2)) < 1e-10 * std::max(1.0, energy));
      }
    }
}

TEST_CASE("reconstruction of basis elements") {
  const DyadicGrid grid(2, 3);
  HaarCoefficients c(grid, 1);
  c.root_scaling()(0) = 2.5;
  const GridFunction constant = haar_reconstruct(c);
  CHECK((constant.values().array() - 2.5).abs().maxCoeff() < 1e-15);

  HaarCoefficients single(grid, 1);
  const DyadicCube cube = grid.cube(1, 2);
  single.detail(cube, {1}) = Vector::Constant(1, 0.7);
  const GridFunction g = haar_reconstruct(single);
  for (std::size_t cell = 0; cell < grid.cell_count(); ++cell)
    CHECK(g.cell(cell)(0) == doctest::Approx(0.7 * haar_eval(cube, {1}, testing::cell_center(grid, cell))));
}

TEST_CASE("lp_norm closed forms") {
  const DyadicGrid grid(1, 1);
  Matrix v(1, 2);
  v << 1, 3;
  CHECK(lp_norm(GridFunction(grid, v), 3.0) == doctest::Approx(std::cbrt(14.0)).epsilon(1e-14));
  CHECK(lp_norm(GridFunction(grid, v), 3.0) == doctest::Approx(2.4101).epsilon(1e-4));

  const DyadicGrid g2(2, 2);
  Matrix cst(2, g2.cell_count());
  cst.row(0).setConstant(3.0);
  cst.row(1).setConstant(4.0);
  CHECK(lp_norm(GridFunction(g2, cst), 1.7) == doctest::Approx(5.0).epsilon(1e-14));

  HaarCoefficients h(g2, 1);
  h.detail(3, 2)(0) = 1.0;
  CHECK(lp_norm(haar_reconstruct(h), 2.0) == doctest::Approx(1.0).epsilon(1e-14));

  CHECK_THROWS_AS(lp_norm(GridFunction(grid, v), 1.0), ParameterError);
  CHECK_THROWS_AS(lp_norm(GridFunction(grid, v), INFINITY), ParameterError);
}

TEST_CASE("cube_means matches direct averages") {
  std::mt19937_64 rng(3);
  const DyadicGrid grid(2, 3);
  std::vector<double> cells(grid.cell_count());
  std::uniform_real_distribution<double> u(0, 1);
  for (auto& x : cells) x = u(rng);
  const auto means = cube_means<double>(grid, cells, 3);
  for (std::size_t id = 0; id < means.size(); ++id) {
    double s = 0.0;
    const auto in = grid.cells_of(grid.cube_from_id(id));
    for (std::size_t c : in) s += cells[c];
    CHECK(means[id] == doctest::Approx(s / in.size()).epsilon(1e-14));
  }
}

TEST_CASE("shape errors") {
  const DyadicGrid a(1, 2), b(1, 3);
  CHECK_THROWS_AS(GridFunction(a, 1) + GridFunction(b, 1), ShapeError);
  CHECK_THROWS_AS(DyadicGrid(4, 1), ParameterError);
  CHECK_THROWS_AS(DyadicGrid(1, -1), ParameterError);
}
