#pragma once

// Square functions, the two-sided weighted equivalence, the dual inequality,
// and the regression tools used by the experiment sweeps.

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "haarweight/dyadic.hpp"
#include "haarweight/reducing.hpp"
#include "haarweight/stopping.hpp"
#include "haarweight/weight.hpp"

namespace haarweight {

/// Coefficient profiles of random mean-zero test functions.
/// Flat: iid Gaussian on every slot. Geometric: Gaussian scaled by 2^{-level}.
/// Spike: one Gaussian Haar term on a random cube and signature.
enum class Spectrum { Flat, Geometric, Spike };

std::string to_string(Spectrum s);
Spectrum spectrum_from_string(const std::string& name);

/// Seeded stream of mean-zero Haar expansions cycling through `spectra`.
class FunctionGenerator {
 public:
  FunctionGenerator(std::vector<Spectrum> spectra, std::uint64_t seed);

  HaarCoefficients next(const DyadicGrid& grid, int n);
  /// Spectrum of the function the next call returns.
  Spectrum upcoming() const { return spectra_[count_ % spectra_.size()]; }

 private:
  std::vector<Spectrum> spectra_;
  std::mt19937_64 rng_;
  std::size_t count_ = 0;
};

/// (sum_{I contains x, eps} |V_I f_I^eps|^2 / |I|)^{1/2} as a one-component
/// GridFunction. The root scaling coefficient is ignored.
GridFunction square_function(const HaarCoefficients& f, const ReducingFamily& v);
double square_norm(const HaarCoefficients& f, const ReducingFamily& v, double p);

/// Square function with V_I^{-1} in place of V_I, measured in L^{p'}.
GridFunction dual_square_function(const HaarCoefficients& f, const ReducingFamily& v);
double dual_square_norm(const HaarCoefficients& f, const ReducingFamily& v, double p);

/// (sum_{I, eps} |(m_I W)^{1/2} f_I^eps|^2)^{1/2}.
double p2_sequence_norm(const HaarCoefficients& f, const MatrixWeight& w);

/// sum_j ||Delta_j f||_p^p / ||f - scaling part||_p^p.
double block_energy_ratio(const HaarCoefficients& f, const GenerationTree& g, double p);

struct RatioSample {
  std::size_t index = 0;
  Spectrum spectrum = Spectrum::Flat;
  double weighted = 0.0;
  double square = 0.0;
  /// weighted / square.
  double ratio = 0.0;
};

struct EquivalenceReport {
  nlohmann::json weight;
  double p = 2.0;
  double characteristic = 1.0;
  std::vector<RatioSample> samples;
  std::size_t skipped = 0;
  double min_ratio = 0.0;
  double median_ratio = 0.0;
  double max_ratio = 0.0;
  double max_inverse_ratio = 0.0;
  /// (1 + ceil p) / p and (2 + ceil p') / p.
  double exponent_direct = 0.0;
  double exponent_inverse = 0.0;

  nlohmann::json to_json() const;
};

/// r(f) = ||f||_{L^p(W)} / ||S f||_p over `count` generated functions. Zero
/// functions are skipped and counted. `v` must cover every level below L.
EquivalenceReport mainthm_ratios(const MatrixWeight& w, const ReducingFamily& v, double characteristic, double p,
                                 FunctionGenerator& gen, std::size_t count);

/// Builds the family to depth L - 1 and measures the characteristic over the
/// default scan depth.
EquivalenceReport mainthm_ratios(const MatrixWeight& w, double p, FunctionGenerator& gen, std::size_t count,
                                 const ReducingOptions& opts = {});

/// Ordinary least squares y = intercept + slope x with a two-sided Student-t
/// interval on the slope.
struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_stderr = 0.0;
  double slope_low = 0.0;
  double slope_high = 0.0;
  std::size_t points = 0;
};

LinearFit fit_line(std::span<const double> x, std::span<const double> y, double confidence = 0.95);

/// Extreme p = 2 ratios of one weight, optimized over all mean-zero f.
struct SharpnessPoint {
  std::string label;
  double characteristic = 1.0;
  double max_ratio = 0.0;
  double max_inverse_ratio = 0.0;
  bool ok = true;
  std::string note;
};

struct SharpnessReport {
  std::vector<SharpnessPoint> points;
  /// log max ratio and log max inverse ratio against log characteristic.
  LinearFit direct;
  LinearFit inverse;

  nlohmann::json to_json() const;
};

/// Each ratio squared is a generalized Rayleigh quotient c^T A c / c^T B c on
/// the detail coefficients (A from the weighted norm, B block diagonal with
/// m_I W); the extremes come from one dense symmetric eigensolve per weight.
SharpnessPoint sharpness_point(const MatrixWeight& w, const std::string& label);
/// Fits the slopes over the points marked ok (needs three).
SharpnessReport sharpness_fit(std::vector<SharpnessPoint> points);
SharpnessReport sharpness_probe(std::span<const MatrixWeight> weights, std::span<const std::string> labels);

}  // namespace haarweight
