#pragma once

// File formats for grid functions, weights, reducing families and reports.
//
// Text files start with one "# <kind> <json header>" line followed by a CSV
// table; binary files start with a 4-byte tag, a length-prefixed JSON header
// and little-endian doubles. Cells are in row-major index order.

#include <filesystem>
#include <string>

#include <json.hpp>

#include "haarweight/analysis.hpp"
#include "haarweight/dyadic.hpp"
#include "haarweight/reducing.hpp"
#include "haarweight/weight.hpp"

namespace haarweight {

enum class FileFormat { Csv, Binary };

/// Binary when the extension is .bin, CSV otherwise.
FileFormat format_for(const std::filesystem::path& path);

/// Shortest decimal form that reads back to the same double.
std::string format_double(double x);

void write_grid_function(const GridFunction& f, const std::filesystem::path& path);
GridFunction read_grid_function(const std::filesystem::path& path);

/// Per cell the lower triangle a00, a10, a11, a20, ... of the matrix.
void write_weight(const MatrixWeight& w, const std::filesystem::path& path);
/// Validates every cell; a non-SPD cell raises MatrixDomainError.
MatrixWeight read_weight(const std::filesystem::path& path);

/// Rows: level, index, method, kappa, V entries, V' entries (row-major).
std::string reducing_family_csv(const ReducingFamily& v);

/// One row per test function.
std::string ratio_csv(const EquivalenceReport& r);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace haarweight
