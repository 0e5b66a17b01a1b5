#include "haarweight/weight.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include <fmt/format.h>

#include "haarweight/errors.hpp"
#include "haarweight/spd.hpp"

namespace haarweight {

namespace {

constexpr int kQuadraturePoints = 16;

void require_matching(const MatrixWeight& w, const GridFunction& f) {
  if (!(w.grid() == f.grid()) || w.n() != f.components())
    throw ShapeError(fmt::format("weight (n = {}, L = {}) and function (n = {}, L = {}) do not match", w.n(),
                                 w.grid().finest_level(), f.components(), f.grid().finest_level()));
}

// Midpoint tensor quadrature of `g` over cell `c`, g taking a point in R^d.
template <class G>
auto cell_quadrature(const DyadicGrid& grid, std::size_t c, G&& g) {
  const DyadicCube cube = grid.cube(grid.finest_level(), c);
  const int d = grid.dim();
  const double h = cube.side();
  const double step = h / kQuadraturePoints;
  int total = 1;
  for (int k = 0; k < d; ++k) total *= kQuadraturePoints;
  std::array<double, kMaxDim> x{};
  using Value = decltype(g(x));
  Value sum{};
  bool first = true;
  for (int q = 0; q < total; ++q) {
    int r = q;
    for (int k = 0; k < d; ++k) {
      x[k] = static_cast<double>(cube.index[k]) * h + (r % kQuadraturePoints + 0.5) * step;
      r /= kQuadraturePoints;
    }
    if (first) {
      sum = g(x);
      first = false;
    } else {
      sum = sum + g(x);
    }
  }
  return Value(sum * (1.0 / total));
}

double distance(const std::array<double, kMaxDim>& x, const std::array<double, kMaxDim>& c, int d) {
  double s = 0.0;
  for (int k = 0; k < d; ++k) s += (x[k] - c[k]) * (x[k] - c[k]);
  return std::sqrt(s);
}

// Exact mean of |x - x0|^alpha over [a, b).
double power_interval_mean(double a, double b, double x0, double alpha) {
  auto antiderivative = [alpha](double t) {
    const double mag = std::pow(std::abs(t), alpha + 1.0) / (alpha + 1.0);
    return t < 0 ? -mag : mag;
  };
  return (antiderivative(b - x0) - antiderivative(a - x0)) / (b - a);
}

double power_cell_mean(const DyadicGrid& grid, std::size_t c, const WeightFamily& fam) {
  if (grid.dim() == 1) {
    const DyadicCube cube = grid.cube(grid.finest_level(), c);
    const double a = static_cast<double>(cube.index[0]) * cube.side();
    return power_interval_mean(a, a + cube.side(), fam.center[0], fam.alpha);
  }
  return cell_quadrature(grid, c, [&](const std::array<double, kMaxDim>& x) {
    return std::pow(distance(x, fam.center, grid.dim()), fam.alpha);
  });
}

Matrix rotating_sample(const std::array<double, kMaxDim>& x, const WeightFamily& fam, int d) {
  const double theta = fam.omega * x[0];
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  const double r = std::pow(distance(x, fam.center, d), fam.alpha);
  Matrix m = Matrix::Identity(fam.n, fam.n);
  m(0, 0) = c * c * r + s * s;
  m(1, 1) = s * s * r + c * c;
  m(0, 1) = m(1, 0) = c * s * (r - 1.0);
  return m;
}

Matrix goe_sample(std::mt19937_64& rng, int n) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = normal(rng);
  return 0.5 * (a + a.transpose());
}

Matrix symmetric_exp(const Matrix& x) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(x);
  const Vector lam = es.eigenvalues().array().exp();
  Matrix out = es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
  return 0.5 * (out + out.transpose());
}

bool alpha_in_range(const WeightFamily& fam) {
  const double p = fam.p.value_or(2.0);
  return fam.alpha > -fam.dim && fam.alpha < fam.dim * (p - 1.0);
}

}  // namespace

MatrixWeight::MatrixWeight(const DyadicGrid& grid, std::vector<Matrix> cells, nlohmann::json metadata)
    : grid_(grid), n_(0), cells_(std::move(cells)), metadata_(std::move(metadata)) {
  if (cells_.size() != grid.cell_count())
    throw ShapeError(fmt::format("expected {} cell matrices, got {}", grid.cell_count(), cells_.size()));
  n_ = static_cast<int>(cells_.front().rows());
  for (std::size_t c = 0; c < cells_.size(); ++c) {
    if (cells_[c].rows() != n_ || cells_[c].cols() != n_) throw ShapeError("cell matrices differ in size");
    try {
      require_spd(cells_[c]);
    } catch (const MatrixDomainError& e) {
      throw MatrixDomainError(fmt::format("cell {}: {}", c, e.what()));
    }
  }
}

MatrixWeight MatrixWeight::constant(const DyadicGrid& grid, const Matrix& a) {
  return MatrixWeight(grid, std::vector<Matrix>(grid.cell_count(), a), {{"family", "constant"}});
}

MatrixWeight MatrixWeight::identity(const DyadicGrid& grid, int n) {
  return constant(grid, Matrix::Identity(n, n));
}

MatrixWeight pointwise_power(const MatrixWeight& w, double s) {
  std::vector<Matrix> cells;
  cells.reserve(w.cells().size());
  for (const Matrix& m : w.cells()) cells.push_back(spd_power_unchecked(m, s));
  nlohmann::json meta = w.metadata();
  meta["pointwise_power"] = s;
  return MatrixWeight(w.grid(), std::move(cells), std::move(meta));
}

Matrix weight_average(const MatrixWeight& w, const DyadicCube& cube) {
  const auto cells = w.grid().cells_of(cube);
  Matrix sum = Matrix::Zero(w.n(), w.n());
  for (std::size_t c : cells) sum += w.cell(c);
  return sum / static_cast<double>(cells.size());
}

std::vector<Matrix> weight_averages(const MatrixWeight& w, int max_level) {
  return cube_means<Matrix>(w.grid(), w.cells(), max_level);
}

double applied_lp_norm(const MatrixWeight& b, const GridFunction& f, double p) {
  require_exponent(p);
  require_matching(b, f);
  double sum = 0.0;
  for (std::size_t c = 0; c < f.grid().cell_count(); ++c) sum += std::pow((b.cell(c) * f.cell(c)).norm(), p);
  return std::pow(sum * f.grid().cell_measure(), 1.0 / p);
}

double weighted_lp_norm(const MatrixWeight& w, const GridFunction& f, double p) {
  require_exponent(p);
  require_matching(w, f);
  return applied_lp_norm(pointwise_power(w, 1.0 / p), f, p);
}

MatrixWeight make_weight(const WeightFamily& fam) {
  const DyadicGrid grid(fam.dim, fam.level);
  if (fam.n < 1) throw ParameterError("matrix dimension must be positive");
  std::vector<Matrix> cells;
  cells.reserve(grid.cell_count());
  bool in_range = true;

  switch (fam.kind) {
    case FamilyKind::Constant: {
      if (fam.constant.rows() != fam.n || fam.constant.cols() != fam.n)
        throw ShapeError("constant family matrix has the wrong size");
      cells.assign(grid.cell_count(), fam.constant);
      break;
    }
    case FamilyKind::Power: {
      if (fam.alpha <= -fam.dim) throw ParameterError(fmt::format("power exponent {} is not locally integrable", fam.alpha));
      in_range = alpha_in_range(fam);
      for (std::size_t c = 0; c < grid.cell_count(); ++c) {
        const double v = fam.alpha == 0.0 ? 1.0 : power_cell_mean(grid, c, fam);
        cells.push_back(v * Matrix::Identity(fam.n, fam.n));
      }
      break;
    }
    case FamilyKind::Rotating: {
      if (fam.n < 2) throw ParameterError("rotating family needs n >= 2");
      if (fam.alpha <= -fam.dim) throw ParameterError(fmt::format("power exponent {} is not locally integrable", fam.alpha));
      in_range = alpha_in_range(fam);
      for (std::size_t c = 0; c < grid.cell_count(); ++c)
        cells.push_back(cell_quadrature(
            grid, c, [&](const std::array<double, kMaxDim>& x) { return rotating_sample(x, fam, grid.dim()); }));
      break;
    }
    case FamilyKind::BlockRandom: {
      std::seed_seq seq{static_cast<std::uint32_t>(fam.seed), static_cast<std::uint32_t>(fam.seed >> 32), 0xb10c5u};
      std::mt19937_64 rng(seq);
      const int L = fam.level;
      const double amp = L > 0 ? fam.sigma / std::sqrt(static_cast<double>(L)) : 0.0;
      std::vector<Matrix> logs(1, Matrix::Zero(fam.n, fam.n));
      for (int level = 1; level <= L; ++level) {
        std::vector<Matrix> next(grid.cubes_at(level));
        for (std::size_t i = 0; i < next.size(); ++i) {
          const auto idx = grid.cube(level, i);
          const std::size_t parent = grid.linear_index(idx.parent());
          next[i] = logs[parent] + amp * goe_sample(rng, fam.n);
        }
        logs = std::move(next);
      }
      for (const Matrix& x : logs) cells.push_back(symmetric_exp(x));
      break;
    }
  }
  for (const Matrix& m : cells)
    if (!m.allFinite()) throw ParameterError("family produced a non-finite cell value");

  nlohmann::json meta = to_json(fam);
  meta["out_of_range"] = !in_range;
  return MatrixWeight(grid, std::move(cells), std::move(meta));
}

std::string to_string(FamilyKind kind) {
  switch (kind) {
    case FamilyKind::Constant: return "constant";
    case FamilyKind::Power: return "power";
    case FamilyKind::Rotating: return "rotating";
    case FamilyKind::BlockRandom: return "block_random";
  }
  return "unknown";
}

FamilyKind family_kind_from_string(const std::string& name) {
  if (name == "constant") return FamilyKind::Constant;
  if (name == "power") return FamilyKind::Power;
  if (name == "rotating") return FamilyKind::Rotating;
  if (name == "block_random") return FamilyKind::BlockRandom;
  throw ConfigError(fmt::format("unknown weight family '{}'", name));
}

nlohmann::json to_json(const WeightFamily& fam) {
  nlohmann::json j{{"family", to_string(fam.kind)}, {"d", fam.dim}, {"n", fam.n}, {"L", fam.level}};
  if (!fam.label.empty()) j["label"] = fam.label;
  switch (fam.kind) {
    case FamilyKind::Power:
    case FamilyKind::Rotating:
      j["alpha"] = fam.alpha;
      j["center"] = std::vector<double>(fam.center.begin(), fam.center.begin() + fam.dim);
      if (fam.kind == FamilyKind::Rotating) j["omega"] = fam.omega;
      break;
    case FamilyKind::BlockRandom:
      j["sigma"] = fam.sigma;
      j["seed"] = fam.seed;
      break;
    case FamilyKind::Constant: {
      std::vector<std::vector<double>> rows;
      for (Eigen::Index r = 0; r < fam.constant.rows(); ++r) {
        rows.emplace_back();
        for (Eigen::Index c = 0; c < fam.constant.cols(); ++c) rows.back().push_back(fam.constant(r, c));
      }
      j["matrix"] = rows;
      break;
    }
  }
  if (fam.p) j["p"] = *fam.p;
  return j;
}

WeightFamily family_from_json(const nlohmann::json& j, int dim, int n, int level) {
  try {
    WeightFamily fam;
    fam.kind = family_kind_from_string(j.at("family").get<std::string>());
    fam.dim = j.value("d", dim);
    fam.n = j.value("n", n);
    fam.level = j.value("L", level);
    fam.label = j.value("label", std::string{});
    fam.alpha = j.value("alpha", 0.0);
    fam.omega = j.value("omega", 0.0);
    fam.sigma = j.value("sigma", 0.0);
    fam.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("center")) {
      const auto c = j.at("center").get<std::vector<double>>();
      if (static_cast<int>(c.size()) != fam.dim) throw ConfigError("center has the wrong dimension");
      for (int k = 0; k < fam.dim; ++k) fam.center[k] = c[k];
    }
    if (j.contains("p")) fam.p = j.at("p").get<double>();
    if (fam.kind == FamilyKind::Constant) {
      if (j.contains("matrix")) {
        const auto rows = j.at("matrix").get<std::vector<std::vector<double>>>();
        fam.constant = Matrix(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.size()));
        for (std::size_t r = 0; r < rows.size(); ++r) {
          if (rows[r].size() != rows.size()) throw ConfigError("constant matrix must be square");
          for (std::size_t c = 0; c < rows.size(); ++c)
            fam.constant(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
        }
        fam.n = static_cast<int>(rows.size());
      } else {
        fam.constant = Matrix::Identity(fam.n, fam.n);
      }
    }
    return fam;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(fmt::format("weight family: {}", e.what()));
  }
}

}  // namespace haarweight
