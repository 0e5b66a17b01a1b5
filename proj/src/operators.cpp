#include "haarweight/operators.hpp"

#include <cmath>

#include <fmt/format.h>

#include "haarweight/errors.hpp"

namespace haarweight {

namespace {

void require_same_grid(const DyadicGrid& a, const DyadicGrid& b) {
  if (!(a == b)) throw ShapeError("operands live on different grids");
}

// Pointwise B(cell) h(cell).
GridFunction apply_pointwise(const MatrixWeight& b, GridFunction h) {
  require_same_grid(b.grid(), h.grid());
  for (std::size_t c = 0; c < h.grid().cell_count(); ++c) h.cell(c) = b.cell(c) * h.cell(c);
  return h;
}

HaarCoefficients inverse_details(const ReducingFamily& v, const HaarCoefficients& f) {
  HaarCoefficients out = multiplier_apply(HaarMultiplier(v, MultiplierMode::Inverse), f);
  out.root_scaling().setZero();
  return out;
}

}  // namespace

HaarCoefficients multiplier_apply(const HaarMultiplier& m, const HaarCoefficients& f) {
  const ReducingFamily& fam = m.family();
  require_same_grid(fam.grid(), f.grid());
  if (fam.n() != f.components()) throw ShapeError("multiplier and coefficients differ in dimension");
  HaarCoefficients out(f.grid(), f.components());
  out.root_scaling() = f.root_scaling();
  const int sigs = f.grid().signature_count();
  for (std::size_t id = 0; id < f.cube_count(); ++id) {
    if (!fam.covers(id)) {
      for (int s = 0; s < sigs; ++s)
        if (!f.detail(id, s).isZero(0.0))
          throw CoverageError(fmt::format("no symbol for cube {} carrying a coefficient", id));
      continue;
    }
    const Matrix& sym = m.symbol(id);
    for (int s = 0; s < sigs; ++s) out.detail(id, s) = sym * f.detail(id, s);
  }
  return out;
}

GridFunction t_operator(const MatrixWeight& w, const ReducingFamily& v, const HaarCoefficients& f, double p) {
  require_exponent(p);
  return apply_pointwise(pointwise_power(w, 1.0 / p), haar_reconstruct(inverse_details(v, f)));
}

std::vector<GridFunction> t_blocks(const MatrixWeight& weight_power, const ReducingFamily& v,
                                   const HaarCoefficients& f, const GenerationTree& g) {
  require_same_grid(g.grid(), f.grid());
  const HaarCoefficients mapped = inverse_details(v, f);
  std::vector<GridFunction> out;
  for (int j = 1; j <= g.generations(); ++j) {
    HaarCoefficients part(f.grid(), f.components());
    for (std::size_t id : g.layer(j))
      for (int s = 0; s < f.grid().signature_count(); ++s) part.detail(id, s) = mapped.detail(id, s);
    out.push_back(apply_pointwise(weight_power, haar_reconstruct(part)));
  }
  return out;
}

GridFunction t_block(const MatrixWeight& w, const ReducingFamily& v, const HaarCoefficients& f,
                     const GenerationTree& g, int j, double p) {
  require_exponent(p);
  if (j < 1) throw ParameterError(fmt::format("no generation block {}", j));
  require_same_grid(g.grid(), f.grid());
  if (j > g.generations()) return GridFunction(f.grid(), f.components());
  const HaarCoefficients mapped = inverse_details(v, f);
  HaarCoefficients part(f.grid(), f.components());
  for (std::size_t id : g.layer(j))
    for (int s = 0; s < f.grid().signature_count(); ++s) part.detail(id, s) = mapped.detail(id, s);
  return apply_pointwise(pointwise_power(w, 1.0 / p), haar_reconstruct(part));
}

double cross_integral(const GridFunction& a, const GridFunction& b, double p) {
  require_exponent(p);
  require_same_grid(a.grid(), b.grid());
  const auto na = a.values().colwise().norm();
  const auto nb = b.values().colwise().norm();
  double sum = 0.0;
  for (Eigen::Index c = 0; c < na.size(); ++c) sum += std::pow(na(c) * nb(c), 0.5 * p);
  return sum * a.grid().cell_measure();
}

double cross_term(const MatrixWeight& w, const ReducingFamily& v, const HaarCoefficients& f, const GenerationTree& g,
                  int j, int k, double p) {
  return cross_integral(t_block(w, v, f, g, k, p), t_block(w, v, f, g, j, p), p);
}

double stopped_region_integral(const GridFunction& h, const GenerationTree& g, int k, double p) {
  require_exponent(p);
  require_same_grid(h.grid(), g.grid());
  if (k < 0 || k > g.generations()) return 0.0;
  double sum = 0.0;
  for (const auto& s : g.stopping(k))
    for (std::size_t c : h.grid().cells_of(h.grid().cube_from_id(s.id))) sum += std::pow(h.cell(c).norm(), p);
  return sum * h.grid().cell_measure();
}

}  // namespace haarweight
