#pragma once

// Matrix weights: SPD-valued functions constant on the finest cells.

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "haarweight/dyadic.hpp"

namespace haarweight {

class MatrixWeight {
 public:
  /// Validates every cell matrix (symmetry and eigenvalue floor).
  MatrixWeight(const DyadicGrid& grid, std::vector<Matrix> cells, nlohmann::json metadata = nlohmann::json::object());

  static MatrixWeight constant(const DyadicGrid& grid, const Matrix& a);
  static MatrixWeight identity(const DyadicGrid& grid, int n);

  const DyadicGrid& grid() const { return grid_; }
  int n() const { return n_; }
  const std::vector<Matrix>& cells() const { return cells_; }
  const Matrix& cell(std::size_t c) const { return cells_[c]; }

  const nlohmann::json& metadata() const { return metadata_; }
  nlohmann::json& metadata() { return metadata_; }
  /// Set by make_weight when the family parameters leave the documented A_p range.
  bool out_of_range() const { return metadata_.value("out_of_range", false); }

 private:
  DyadicGrid grid_;
  int n_;
  std::vector<Matrix> cells_;
  nlohmann::json metadata_;
};

/// Cellwise W(cell)^s.
MatrixWeight pointwise_power(const MatrixWeight& w, double s);

Matrix weight_average(const MatrixWeight& w, const DyadicCube& cube);
/// m_I W for every cube of level <= max_level, indexed by cube id.
std::vector<Matrix> weight_averages(const MatrixWeight& w, int max_level);

/// ||f||_{L^p(W)}.
double weighted_lp_norm(const MatrixWeight& w, const GridFunction& f, double p);
/// (sum_cells |B(cell) f(cell)|^p |cell|)^{1/p}; with B = W^{1/p} this is the
/// weighted norm, avoiding a repeated cellwise power.
double applied_lp_norm(const MatrixWeight& b, const GridFunction& f, double p);

enum class FamilyKind { Constant, Power, Rotating, BlockRandom };

/// Parametrized generator of test weights on a (d, n, L) grid.
///
/// Power:       |x - center|^alpha Id, cell averages.
/// Rotating:    R(omega x_1) diag(|x - center|^alpha, 1) R(omega x_1)^T in the
///              leading 2x2 block, identity elsewhere; cell averages.
/// BlockRandom: exp(sigma / sqrt(L) * sum_{l=1..L} G_l), one GOE sample per
///              cube of every level, fixed by `seed`.
/// Constant:    the matrix `constant`.
struct WeightFamily {
  FamilyKind kind = FamilyKind::Constant;
  int dim = 1;
  int n = 1;
  int level = 1;
  double alpha = 0.0;
  std::array<double, kMaxDim> center{};
  double omega = 0.0;
  double sigma = 0.0;
  Matrix constant;
  std::uint64_t seed = 0;
  /// Exponent used only for the A_p range flag; 2 when unset.
  std::optional<double> p;
  std::string label;
};

MatrixWeight make_weight(const WeightFamily& family);

std::string to_string(FamilyKind kind);
FamilyKind family_kind_from_string(const std::string& name);
nlohmann::json to_json(const WeightFamily& family);
WeightFamily family_from_json(const nlohmann::json& j, int dim, int n, int level);

}  // namespace haarweight
