#include "haarweight/analysis.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/distributions/students_t.hpp>
#include <fmt/format.h>

#include "haarweight/errors.hpp"
#include "haarweight/operators.hpp"
#include "haarweight/spd.hpp"

namespace haarweight {

std::string to_string(Spectrum s) {
  switch (s) {
    case Spectrum::Flat: return "flat";
    case Spectrum::Geometric: return "geometric";
    case Spectrum::Spike: return "spike";
  }
  return "flat";
}

Spectrum spectrum_from_string(const std::string& name) {
  if (name == "flat") return Spectrum::Flat;
  if (name == "geometric") return Spectrum::Geometric;
  if (name == "spike") return Spectrum::Spike;
  throw ConfigError(fmt::format("unknown spectrum '{}'", name));
}

FunctionGenerator::FunctionGenerator(std::vector<Spectrum> spectra, std::uint64_t seed)
    : spectra_(std::move(spectra)), rng_(seed) {
  if (spectra_.empty()) throw ParameterError("function generator needs at least one spectrum");
}

HaarCoefficients FunctionGenerator::next(const DyadicGrid& grid, int n) {
  const Spectrum s = upcoming();
  ++count_;
  HaarCoefficients c(grid, n);
  const int levels = grid.finest_level();
  if (levels == 0) return c;
  std::normal_distribution<double> normal;
  auto gaussian = [&](auto&& col, double scale) {
    for (Eigen::Index k = 0; k < col.size(); ++k) col(k) = scale * normal(rng_);
  };
  const int sigs = grid.signature_count();
  switch (s) {
    case Spectrum::Flat:
    case Spectrum::Geometric:
      for (std::size_t id = 0; id < c.cube_count(); ++id) {
        const double scale = s == Spectrum::Flat ? 1.0 : std::ldexp(1.0, -grid.level_of(id));
        for (int e = 0; e < sigs; ++e) gaussian(c.detail(id, e), scale);
      }
      break;
    case Spectrum::Spike: {
      const int level = std::uniform_int_distribution<int>(0, levels - 1)(rng_);
      const auto lin = std::uniform_int_distribution<std::size_t>(0, grid.cubes_at(level) - 1)(rng_);
      const int e = std::uniform_int_distribution<int>(0, sigs - 1)(rng_);
      gaussian(c.detail(grid.level_offset(level) + lin, e), 1.0);
      break;
    }
  }
  return c;
}

namespace {

// Per-cube sum over signatures of |coefficient|^2 / |I|, accumulated along
// ancestor chains and read off at the finest cells.
GridFunction accumulate_square(const HaarCoefficients& mapped) {
  const DyadicGrid& grid = mapped.grid();
  GridFunction out(grid, 1);
  const int levels = grid.finest_level();
  if (levels == 0) return out;
  std::vector<double> acc(mapped.cube_count(), 0.0);
  const int sigs = grid.signature_count();
  for (std::size_t id = 0; id < acc.size(); ++id) {
    double q = 0.0;
    for (int e = 0; e < sigs; ++e) q += mapped.detail(id, e).squaredNorm();
    q /= grid.cube_from_id(id).measure();
    acc[id] = q + (id == 0 ? 0.0 : acc[grid.parent_id(id)]);
  }
  const std::size_t base = grid.level_offset(levels - 1);
  for (std::size_t c = 0; c < grid.cell_count(); ++c)
    out.cell(c)(0) = std::sqrt(acc[base + grid.ancestor_linear(c, levels - 1)]);
  return out;
}

}  // namespace

GridFunction square_function(const HaarCoefficients& f, const ReducingFamily& v) {
  return accumulate_square(multiplier_apply(HaarMultiplier(v, MultiplierMode::Forward), f));
}

double square_norm(const HaarCoefficients& f, const ReducingFamily& v, double p) {
  return lp_norm(square_function(f, v), p);
}

GridFunction dual_square_function(const HaarCoefficients& f, const ReducingFamily& v) {
  return accumulate_square(multiplier_apply(HaarMultiplier(v, MultiplierMode::Inverse), f));
}

double dual_square_norm(const HaarCoefficients& f, const ReducingFamily& v, double p) {
  return lp_norm(dual_square_function(f, v), conjugate_exponent(p));
}

double p2_sequence_norm(const HaarCoefficients& f, const MatrixWeight& w) {
  if (!(f.grid() == w.grid()) || f.components() != w.n()) throw ShapeError("coefficients and weight do not match");
  const int levels = f.grid().finest_level();
  if (levels == 0) return 0.0;
  const std::vector<Matrix> avg = weight_averages(w, levels - 1);
  double sum = 0.0;
  for (std::size_t id = 0; id < f.cube_count(); ++id)
    for (int e = 0; e < f.grid().signature_count(); ++e) {
      const auto c = f.detail(id, e);
      sum += c.dot(avg[id] * c);
    }
  return std::sqrt(sum);
}

double block_energy_ratio(const HaarCoefficients& f, const GenerationTree& g, double p) {
  HaarCoefficients detail = f;
  detail.root_scaling().setZero();
  const double whole = std::pow(lp_norm(haar_reconstruct(detail), p), p);
  if (whole == 0.0) throw ParameterError("block energy of the zero function");
  double sum = 0.0;
  for (int j = 1; j <= g.generations(); ++j) sum += std::pow(lp_norm(delta_projection(f, g, j), p), p);
  return sum / whole;
}

nlohmann::json EquivalenceReport::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& s : samples)
    rows.push_back({{"index", s.index},
                    {"spectrum", to_string(s.spectrum)},
                    {"weighted", s.weighted},
                    {"square", s.square},
                    {"ratio", s.ratio}});
  return {{"weight", weight},
          {"p", p},
          {"characteristic", characteristic},
          {"skipped", skipped},
          {"min_ratio", min_ratio},
          {"median_ratio", median_ratio},
          {"max_ratio", max_ratio},
          {"max_inverse_ratio", max_inverse_ratio},
          {"exponent_direct", exponent_direct},
          {"exponent_inverse", exponent_inverse},
          {"samples", rows}};
}

EquivalenceReport mainthm_ratios(const MatrixWeight& w, const ReducingFamily& v, double characteristic, double p,
                                 FunctionGenerator& gen, std::size_t count) {
  require_exponent(p);
  if (count == 0) throw ParameterError("mainthm_ratios needs at least one function");
  EquivalenceReport r;
  r.weight = w.metadata();
  r.p = p;
  r.characteristic = characteristic;
  r.exponent_direct = (1.0 + std::ceil(p)) / p;
  r.exponent_inverse = (2.0 + std::ceil(conjugate_exponent(p))) / p;
  const MatrixWeight root = pointwise_power(w, 1.0 / p);
  for (std::size_t i = 0; i < count; ++i) {
    RatioSample s;
    s.index = i;
    s.spectrum = gen.upcoming();
    HaarCoefficients f = gen.next(w.grid(), w.n());
    f.root_scaling().setZero();
    if (f.details().isZero(0.0)) {
      ++r.skipped;
      continue;
    }
    s.weighted = applied_lp_norm(root, haar_reconstruct(f), p);
    s.square = square_norm(f, v, p);
    s.ratio = s.weighted / s.square;
    r.samples.push_back(s);
  }
  if (r.samples.empty()) return r;
  std::vector<double> ratios;
  for (const auto& s : r.samples) ratios.push_back(s.ratio);
  std::sort(ratios.begin(), ratios.end());
  r.min_ratio = ratios.front();
  r.max_ratio = ratios.back();
  const std::size_t m = ratios.size();
  r.median_ratio = m % 2 ? ratios[m / 2] : 0.5 * (ratios[m / 2 - 1] + ratios[m / 2]);
  r.max_inverse_ratio = 1.0 / r.min_ratio;
  return r;
}

EquivalenceReport mainthm_ratios(const MatrixWeight& w, double p, FunctionGenerator& gen, std::size_t count,
                                 const ReducingOptions& opts) {
  const int depth = std::max(0, w.grid().finest_level() - 1);
  const ReducingFamily v = build_reducing_family(w, p, depth, opts);
  return mainthm_ratios(w, v, ap_characteristic(v, default_max_depth(w.grid())), p, gen, count);
}

LinearFit fit_line(std::span<const double> x, std::span<const double> y, double confidence) {
  if (x.size() != y.size()) throw ShapeError("regression inputs differ in length");
  const std::size_t m = x.size();
  if (m < 3) throw ParameterError("regression needs at least three points");
  if (!(confidence > 0.0 && confidence < 1.0)) throw ParameterError("confidence must lie in (0, 1)");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(m);
  my /= static_cast<double>(m);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0.0) throw ParameterError("regression abscissae are all equal");
  LinearFit fit;
  fit.points = m;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double rss = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double r = y[i] - fit.intercept - fit.slope * x[i];
    rss += r * r;
  }
  const double dof = static_cast<double>(m - 2);
  fit.slope_stderr = std::sqrt(rss / dof / sxx);
  const boost::math::students_t t(dof);
  const double half = boost::math::quantile(t, 0.5 + 0.5 * confidence) * fit.slope_stderr;
  fit.slope_low = fit.slope - half;
  fit.slope_high = fit.slope + half;
  return fit;
}

SharpnessPoint sharpness_point(const MatrixWeight& w, const std::string& label) {
  SharpnessPoint pt;
  pt.label = label;
  const DyadicGrid& grid = w.grid();
  const int n = w.n();
  try {
    pt.characteristic = ap_characteristic(w, 2.0, default_max_depth(grid));
    if (grid.finest_level() == 0) throw ParameterError("no detail coefficients on a level-0 grid");
    HaarCoefficients probe(grid, n);
    const auto dim = static_cast<Eigen::Index>(probe.slot_count()) * n;
    // Column k of A is the transform of W times the k-th basis function.
    Matrix a(dim, dim);
    for (Eigen::Index k = 0; k < dim; ++k) {
      probe.details().setZero();
      probe.details()(k % n, k / n) = 1.0;
      GridFunction g = haar_reconstruct(probe);
      for (std::size_t c = 0; c < grid.cell_count(); ++c) g.cell(c) = w.cell(c) * g.cell(c);
      const HaarCoefficients back = haar_transform(g);
      a.col(k) = back.details().reshaped();
    }
    a = 0.5 * (a + a.transpose()).eval();
    const std::vector<Matrix> avg = weight_averages(w, grid.finest_level() - 1);
    Matrix scale = Matrix::Zero(dim, dim);
    const int sigs = grid.signature_count();
    for (std::size_t id = 0; id < avg.size(); ++id) {
      const Matrix s = spd_power(avg[id], -0.5);
      for (int e = 0; e < sigs; ++e) {
        const auto at = static_cast<Eigen::Index>(probe.slot(id, e)) * n;
        scale.block(at, at, n, n) = s;
      }
    }
    const Matrix c = scale * a * scale;
    Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (c + c.transpose()), Eigen::EigenvaluesOnly);
    if (eig.info() != Eigen::Success) throw Error("eigensolve did not converge");
    const double lo = eig.eigenvalues().minCoeff();
    const double hi = eig.eigenvalues().maxCoeff();
    if (!(lo > 0.0)) throw Error("generalized eigenvalues not positive");
    pt.max_ratio = std::sqrt(hi);
    pt.max_inverse_ratio = 1.0 / std::sqrt(lo);
  } catch (const Error& e) {
    pt.ok = false;
    pt.note = e.what();
  }
  return pt;
}

nlohmann::json SharpnessReport::to_json() const {
  auto fit_json = [](const LinearFit& f) {
    return nlohmann::json{{"slope", f.slope},
                          {"intercept", f.intercept},
                          {"slope_stderr", f.slope_stderr},
                          {"slope_low", f.slope_low},
                          {"slope_high", f.slope_high},
                          {"points", f.points}};
  };
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& p : points)
    rows.push_back({{"label", p.label},
                    {"characteristic", p.characteristic},
                    {"max_ratio", p.max_ratio},
                    {"max_inverse_ratio", p.max_inverse_ratio},
                    {"ok", p.ok},
                    {"note", p.note}});
  return {{"points", rows}, {"direct", fit_json(direct)}, {"inverse", fit_json(inverse)}};
}

SharpnessReport sharpness_fit(std::vector<SharpnessPoint> points) {
  SharpnessReport r;
  r.points = std::move(points);
  std::vector<double> x, yd, yi;
  for (const auto& pt : r.points) {
    if (!pt.ok) continue;
    x.push_back(std::log(pt.characteristic));
    yd.push_back(std::log(pt.max_ratio));
    yi.push_back(std::log(pt.max_inverse_ratio));
  }
  if (x.size() >= 3) {
    r.direct = fit_line(x, yd);
    r.inverse = fit_line(x, yi);
  }
  return r;
}

SharpnessReport sharpness_probe(std::span<const MatrixWeight> weights, std::span<const std::string> labels) {
  if (weights.size() != labels.size()) throw ShapeError("one label per weight expected");
  std::vector<SharpnessPoint> points;
  for (std::size_t i = 0; i < weights.size(); ++i) points.push_back(sharpness_point(weights[i], labels[i]));
  return sharpness_fit(std::move(points));
}

}  // namespace haarweight
