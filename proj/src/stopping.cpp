#include "haarweight/stopping.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "haarweight/errors.hpp"
#include "haarweight/spd.hpp"

namespace haarweight {

namespace {

constexpr double kBracketLow = 1.0;
constexpr double kBracketHigh = 1e6;
constexpr int kBisectionSteps = 100;

void require_config(const ReducingFamily& v, const StoppingConfig& cfg) {
  if (!(cfg.lambda1 > 1.0) || !(cfg.lambda2 > 1.0)) throw ParameterError("stopping thresholds must exceed 1");
  if (cfg.p != v.p()) throw ParameterError(fmt::format("stopping exponent {} differs from family exponent {}", cfg.p, v.p()));
  if (cfg.root.dim != v.grid().dim()) throw ShapeError("root cube dimension does not match the grid");
  if (cfg.floor_level < cfg.root.level || cfg.floor_level > v.max_depth())
    throw CoverageError(fmt::format("floor level {} outside [{}, {}]", cfg.floor_level, cfg.root.level, v.max_depth()));
  if (cfg.max_generation < 1) throw ParameterError("max_generation must be at least 1");
}

// Values of the two stopping conditions for descendant j of i.
std::pair<double, double> conditions(const ReducingFamily& v, std::size_t j, std::size_t i) {
  const double p = v.p();
  const double upper = std::pow(spectral_norm(v.v(j) * v.v_inv(i)), p);
  const double lower = std::pow(spectral_norm(v.v_inv(j) * v.v(i)), conjugate_exponent(p));
  return {upper, lower};
}

FireReason fire(const std::pair<double, double>& c, const StoppingConfig& cfg) {
  unsigned r = 0;
  if (c.first > cfg.lambda1) r |= 1u;
  if (c.second > cfg.lambda2) r |= 2u;
  return static_cast<FireReason>(r);
}

// Per cube above the floor: path maxima of each condition over the floor
// cubes it contains, sorted descending.
struct PathMaxima {
  std::vector<std::vector<double>> upper;
  std::vector<std::vector<double>> lower;
};

PathMaxima path_maxima(const ReducingFamily& v, int floor_level) {
  const DyadicGrid& grid = v.grid();
  PathMaxima out;
  for (std::size_t i = 0; i < grid.cube_count(floor_level - 1); ++i) {
    std::vector<std::size_t> ids{i};
    std::vector<double> m1{0.0};
    std::vector<double> m2{0.0};
    for (int level = grid.level_of(i) + 1; level <= floor_level; ++level) {
      std::vector<std::size_t> next_ids;
      std::vector<double> n1;
      std::vector<double> n2;
      for (std::size_t k = 0; k < ids.size(); ++k)
        for (unsigned c = 0; c < grid.child_count(); ++c) {
          const std::size_t j = grid.child_id(ids[k], c);
          const auto cond = conditions(v, j, i);
          next_ids.push_back(j);
          n1.push_back(std::max(m1[k], cond.first));
          n2.push_back(std::max(m2[k], cond.second));
        }
      ids = std::move(next_ids);
      m1 = std::move(n1);
      m2 = std::move(n2);
    }
    std::sort(m1.begin(), m1.end(), std::greater<>());
    std::sort(m2.begin(), m2.end(), std::greater<>());
    out.upper.push_back(std::move(m1));
    out.lower.push_back(std::move(m2));
  }
  return out;
}

// Fraction of floor cubes whose path maximum exceeds `threshold`.
double stopped_fraction(const std::vector<double>& desc, double threshold) {
  const auto it = std::partition_point(desc.begin(), desc.end(), [&](double m) { return m > threshold; });
  return static_cast<double>(it - desc.begin()) / static_cast<double>(desc.size());
}

template <class Pred>
double log_bisect(Pred&& ok, const char* name) {
  if (ok(kBracketLow)) return kBracketLow;
  if (!ok(kBracketHigh)) throw CalibrationError(fmt::format("{} exceeds {:g}", name, kBracketHigh));
  double lo = std::log(kBracketLow);
  double hi = std::log(kBracketHigh);
  for (int k = 0; k < kBisectionSteps; ++k) {
    const double mid = 0.5 * (lo + hi);
    (ok(std::exp(mid)) ? hi : lo) = mid;
  }
  return std::exp(hi);
}

}  // namespace

std::string to_string(FireReason reason) {
  switch (reason) {
    case FireReason::None: return "none";
    case FireReason::Upper: return "upper";
    case FireReason::Lower: return "lower";
    case FireReason::Both: return "both";
  }
  return "unknown";
}

std::vector<StoppingCube> stopping_children(const DyadicCube& cube, const ReducingFamily& v, const StoppingConfig& cfg) {
  require_config(v, cfg);
  const DyadicGrid& grid = v.grid();
  const std::size_t i = grid.cube_id(cube);
  std::vector<StoppingCube> out;
  if (cube.level >= cfg.floor_level) return out;

  std::vector<std::size_t> stack;
  for (unsigned c = grid.child_count(); c-- > 0;) stack.push_back(grid.child_id(i, c));
  while (!stack.empty()) {
    const std::size_t j = stack.back();
    stack.pop_back();
    const FireReason r = fire(conditions(v, j, i), cfg);
    if (r != FireReason::None) {
      out.push_back({j, r});
    } else if (grid.level_of(j) < cfg.floor_level) {
      for (unsigned c = grid.child_count(); c-- > 0;) stack.push_back(grid.child_id(j, c));
    }
  }
  return out;
}

GenerationTree::GenerationTree(const DyadicGrid& grid, StoppingConfig cfg)
    : grid_(grid),
      cfg_(std::move(cfg)),
      generation_(grid.finest_level() > 0 ? grid.cube_count(grid.finest_level() - 1) : 0, 0),
      owner_(generation_.size(), 0) {}

const std::vector<StoppingCube>& GenerationTree::stopping(int j) const {
  if (j < 0 || j >= static_cast<int>(stopping_.size())) throw ParameterError(fmt::format("no generation {}", j));
  return stopping_[static_cast<std::size_t>(j)];
}

const std::vector<std::size_t>& GenerationTree::layer(int j) const {
  if (j < 1 || j > generations()) throw ParameterError(fmt::format("no layer {}", j));
  return layers_[static_cast<std::size_t>(j - 1)];
}

bool GenerationTree::floor_affected(int j) const {
  if (j < 0 || j >= static_cast<int>(stopping_.size())) return false;
  return std::any_of(stopping_[j].begin(), stopping_[j].end(),
                     [&](const StoppingCube& s) { return grid_.level_of(s.id) == cfg_.floor_level; });
}

nlohmann::json GenerationTree::to_json() const {
  auto cube_json = [&](std::size_t id) {
    const DyadicCube c = grid_.cube_from_id(id);
    return nlohmann::json{{"level", c.level},
                          {"index", std::vector<std::int64_t>(c.index.begin(), c.index.begin() + c.dim)}};
  };
  nlohmann::json gens = nlohmann::json::array();
  for (std::size_t j = 0; j < stopping_.size(); ++j) {
    nlohmann::json cubes = nlohmann::json::array();
    for (const auto& s : stopping_[j]) {
      auto c = cube_json(s.id);
      c["reason"] = to_string(s.reason);
      cubes.push_back(std::move(c));
    }
    nlohmann::json g{{"j", j}, {"stopping", std::move(cubes)}, {"decay_ratio", decay_ratio(*this, static_cast<int>(j))}};
    if (j >= 1) g["layer_size"] = layers_[j - 1].size();
    gens.push_back(std::move(g));
  }
  return {{"p", cfg_.p},
          {"lambda1", cfg_.lambda1},
          {"lambda2", cfg_.lambda2},
          {"floor_level", cfg_.floor_level},
          {"max_generation", cfg_.max_generation},
          {"root", cube_json(grid_.cube_id(cfg_.root))},
          {"generations", std::move(gens)}};
}

GenerationTree build_generations(const ReducingFamily& v, const StoppingConfig& cfg) {
  require_config(v, cfg);
  const DyadicGrid& grid = v.grid();
  const int L = grid.finest_level();
  GenerationTree tree(grid, cfg);
  std::vector<char> stops(grid.cube_count(L), 0);

  std::vector<StoppingCube> current{{grid.cube_id(cfg.root), FireReason::None}};
  tree.stopping_.push_back(current);
  for (int j = 1; !current.empty(); ++j) {
    std::vector<StoppingCube> next;
    for (const auto& s : current) {
      auto kids = stopping_children(grid.cube_from_id(s.id), v, cfg);
      next.insert(next.end(), kids.begin(), kids.end());
    }
    const bool absorb = j == cfg.max_generation;
    for (const auto& s : next) stops[s.id] = 1;

    std::vector<std::size_t> layer;
    for (const auto& s : current) {
      if (grid.level_of(s.id) >= L) continue;
      std::vector<std::size_t> stack{s.id};
      while (!stack.empty()) {
        const std::size_t c = stack.back();
        stack.pop_back();
        if (c != s.id && stops[c] && !absorb) continue;
        tree.generation_[c] = j;
        tree.owner_[c] = s.id;
        layer.push_back(c);
        if (grid.level_of(c) + 1 < L)
          for (unsigned k = grid.child_count(); k-- > 0;) stack.push_back(grid.child_id(c, k));
      }
    }
    std::sort(layer.begin(), layer.end());
    tree.layers_.push_back(std::move(layer));
    tree.stopping_.push_back(next);
    current = absorb ? std::vector<StoppingCube>{} : std::move(next);
  }
  return tree;
}

double decay_ratio(const GenerationTree& g, int j) {
  if (j < 0) throw ParameterError("generation index must be non-negative");
  if (j > g.generations()) return 0.0;
  double measure = 0.0;
  for (const auto& s : g.stopping(j)) measure += g.grid().cube_from_id(s.id).measure();
  return measure / g.config().root.measure();
}

GridFunction delta_projection(const HaarCoefficients& f, const GenerationTree& g, int j) {
  if (!(f.grid() == g.grid())) throw ShapeError("coefficients and generation tree live on different grids");
  HaarCoefficients part(f.grid(), f.components());
  if (j >= 1 && j <= g.generations())
    for (std::size_t id : g.layer(j))
      for (int s = 0; s < f.grid().signature_count(); ++s) part.detail(id, s) = f.detail(id, s);
  return haar_reconstruct(part);
}

StoppingConstants calibrate_constants(std::span<const CalibrationSample> suite, int floor_level, double target_decay) {
  if (!(target_decay > 0.0 && target_decay < 1.0)) throw ParameterError("target decay must lie in (0, 1)");
  if (suite.empty()) throw CalibrationError("empty calibration suite");
  const double share = 0.5 * target_decay;

  std::vector<PathMaxima> maxima;
  for (const auto& sample : suite) {
    if (floor_level > sample.family->max_depth()) throw CoverageError("calibration family does not reach the floor");
    maxima.push_back(path_maxima(*sample.family, floor_level));
  }

  auto ok_upper = [&](double c) {
    for (const auto& m : maxima)
      for (const auto& desc : m.upper)
        if (stopped_fraction(desc, 4.0 * c) > share) return false;
    return true;
  };
  auto ok_lower = [&](double c) {
    for (std::size_t s = 0; s < suite.size(); ++s) {
      const double p = suite[s].family->p();
      const double lambda = 4.0 * c * std::pow(suite[s].characteristic, conjugate_exponent(p) / p);
      for (const auto& desc : maxima[s].lower)
        if (stopped_fraction(desc, lambda) > share) return false;
    }
    return true;
  };
  return {log_bisect(ok_upper, "first stopping constant"), log_bisect(ok_lower, "second stopping constant")};
}

Lambdas lambdas_from(const StoppingConstants& c, double characteristic, double p) {
  return {4.0 * c.c1, 4.0 * c.c2 * std::pow(characteristic, conjugate_exponent(p) / p)};
}

Lambdas calibrate_lambdas(const MatrixWeight& w, double p, double target_decay, std::span<const MatrixWeight> suite,
                          const ReducingOptions& opts) {
  const int floor_level = std::max(0, w.grid().finest_level() - 1);
  std::vector<ReducingFamily> families;
  std::vector<CalibrationSample> samples;
  families.reserve(suite.size());
  for (const auto& s : suite) {
    if (!(s.grid() == w.grid()) || s.n() != w.n()) throw ShapeError("calibration suite must share (d, n, L)");
    families.push_back(build_reducing_family(s, p, floor_level, opts));
  }
  for (const auto& f : families)
    samples.push_back({&f, ap_characteristic(f, default_max_depth(f.grid()))});
  const StoppingConstants c = calibrate_constants(samples, floor_level, target_decay);
  return lambdas_from(c, ap_characteristic(w, p, default_max_depth(w.grid()), opts), p);
}

}  // namespace haarweight
