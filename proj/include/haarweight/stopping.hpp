#pragma once

// Stopping times driven by the reducing operators: a strict descendant J of I
// stops when ||V_J V_I^{-1}||^p > lambda1 or ||V_J^{-1} V_I||^{p'} > lambda2.

#include <cstddef>
#include <span>
#include <vector>

#include <json.hpp>

#include "haarweight/dyadic.hpp"
#include "haarweight/reducing.hpp"

namespace haarweight {

struct StoppingConfig {
  double p = 2.0;
  double lambda1 = 4.0;
  double lambda2 = 4.0;
  DyadicCube root{};
  /// The last generation keeps its whole subtree once this many layers exist.
  int max_generation = 64;
  /// Descent never examines cubes below this level.
  int floor_level = 0;
};

/// Bit 0: first condition fired, bit 1: second condition fired.
enum class FireReason : unsigned { None = 0, Upper = 1, Lower = 2, Both = 3 };

struct StoppingCube {
  std::size_t id = 0;
  FireReason reason = FireReason::None;
};

/// Maximal strict descendants of `cube` (down to the floor) satisfying either
/// condition, in depth-first order.
std::vector<StoppingCube> stopping_children(const DyadicCube& cube, const ReducingFamily& v, const StoppingConfig& cfg);

/// Generations J^0 = {root}, J^1, ... and layers F^1, F^2, ... where F^j is
/// the union of F(I) over I in J^{j-1}, F(I) being the cubes of D(I) not
/// inside a stopping child of I. Layers cover every cube of D(root) with
/// level < L exactly once.
class GenerationTree {
 public:
  GenerationTree(const DyadicGrid& grid, StoppingConfig cfg);

  const DyadicGrid& grid() const { return grid_; }
  const StoppingConfig& config() const { return cfg_; }

  /// Number of layers F^1..F^G.
  int generations() const { return static_cast<int>(layers_.size()); }
  /// J^j for 0 <= j <= generations().
  const std::vector<StoppingCube>& stopping(int j) const;
  /// F^j for 1 <= j <= generations().
  const std::vector<std::size_t>& layer(int j) const;

  /// Layer index of a cube id (level < L), 0 outside D(root).
  int generation_of(std::size_t id) const { return generation_[id]; }
  /// The stopping cube I with id in F(I).
  std::size_t owner(std::size_t id) const { return owner_[id]; }

  /// True when some cube of J^j sits at the floor level.
  bool floor_affected(int j) const;

  nlohmann::json to_json() const;

 private:
  friend GenerationTree build_generations(const ReducingFamily& v, const StoppingConfig& cfg);

  DyadicGrid grid_;
  StoppingConfig cfg_;
  std::vector<std::vector<StoppingCube>> stopping_;
  std::vector<std::vector<std::size_t>> layers_;
  std::vector<int> generation_;
  std::vector<std::size_t> owner_;
};

GenerationTree build_generations(const ReducingFamily& v, const StoppingConfig& cfg);

/// |union J^j| / |root|.
double decay_ratio(const GenerationTree& g, int j);

/// Sum over F^j of the Haar terms of `f`.
GridFunction delta_projection(const HaarCoefficients& f, const GenerationTree& g, int j);

/// Empirical constants behind lambda1 = 4 c1 and lambda2 = 4 c2 ||W||^{p'/p}.
struct StoppingConstants {
  double c1 = 1.0;
  double c2 = 1.0;
};

struct CalibrationSample {
  const ReducingFamily* family = nullptr;
  /// Measured ||W||_{A_p} of the weight behind `family`.
  double characteristic = 1.0;
};

/// Smallest constants in [1, 1e6] (log bisection) for which, on every sample
/// and every cube I above the floor, each condition alone stops at most a
/// target_decay / 2 fraction of I. Throws CalibrationError when 1e6 is not
/// enough.
StoppingConstants calibrate_constants(std::span<const CalibrationSample> suite, int floor_level, double target_decay);

struct Lambdas {
  double lambda1 = 4.0;
  double lambda2 = 4.0;
};

Lambdas lambdas_from(const StoppingConstants& c, double characteristic, double p);

/// Calibrates on `suite` (same d, n, L as `w`) and returns the thresholds for
/// `w`, using characteristics over the default scan depth.
Lambdas calibrate_lambdas(const MatrixWeight& w, double p, double target_decay, std::span<const MatrixWeight> suite,
                          const ReducingOptions& opts = {});

std::string to_string(FireReason reason);

}  // namespace haarweight
