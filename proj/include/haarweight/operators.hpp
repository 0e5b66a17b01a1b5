#pragma once

// Constant Haar multipliers built from reducing operators and the operator
// T f = W^{1/p} M^{-1} f with its generation blocks T_j.

#include <vector>

#include "haarweight/dyadic.hpp"
#include "haarweight/reducing.hpp"
#include "haarweight/stopping.hpp"
#include "haarweight/weight.hpp"

namespace haarweight {

enum class MultiplierMode { Forward, Inverse };

/// f_I^eps -> V_I f_I^eps (forward) or V_I^{-1} f_I^eps (inverse). Holds a
/// reference to the family, which must outlive the multiplier.
class HaarMultiplier {
 public:
  HaarMultiplier(const ReducingFamily& family, MultiplierMode mode) : family_(&family), mode_(mode) {}

  MultiplierMode mode() const { return mode_; }
  const ReducingFamily& family() const { return *family_; }
  const Matrix& symbol(std::size_t cube_id) const {
    return mode_ == MultiplierMode::Forward ? family_->v(cube_id) : family_->v_inv(cube_id);
  }

 private:
  const ReducingFamily* family_;
  MultiplierMode mode_;
};

/// Root scaling passes through unchanged. Throws CoverageError when a nonzero
/// coefficient sits on a cube the family does not cover.
HaarCoefficients multiplier_apply(const HaarMultiplier& m, const HaarCoefficients& f);

/// sum_{I, eps} W^{1/p} V_I^{-1} f_I^eps h_I^eps; the root scaling term is
/// not part of T.
GridFunction t_operator(const MatrixWeight& w, const ReducingFamily& v, const HaarCoefficients& f, double p);

/// The part of T supported on the layer F^j; zero beyond the last layer.
GridFunction t_block(const MatrixWeight& w, const ReducingFamily& v, const HaarCoefficients& f,
                     const GenerationTree& g, int j, double p);

/// T_1 f, ..., T_G f in one pass. `weight_power` is W^{1/p}.
std::vector<GridFunction> t_blocks(const MatrixWeight& weight_power, const ReducingFamily& v,
                                   const HaarCoefficients& f, const GenerationTree& g);

/// Integral of |a|^{p/2} |b|^{p/2}.
double cross_integral(const GridFunction& a, const GridFunction& b, double p);

/// Integral of |T_k f|^{p/2} |T_j f|^{p/2}.
double cross_term(const MatrixWeight& w, const ReducingFamily& v, const HaarCoefficients& f, const GenerationTree& g,
                  int j, int k, double p);

/// Integral of |h|^p over the union of the stopping cubes J^k.
double stopped_region_integral(const GridFunction& h, const GenerationTree& g, int k, double p);

}  // namespace haarweight
