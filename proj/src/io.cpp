#include "haarweight/io.hpp"

#include <bit>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <vector>

#include <fmt/format.h>

#include "haarweight/errors.hpp"

namespace haarweight {

namespace {

constexpr char kFunctionTag[4] = {'H', 'W', 'G', 'F'};
constexpr char kWeightTag[4] = {'H', 'W', 'M', 'W'};

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

struct Parsed {
  nlohmann::json header;
  std::vector<std::vector<double>> rows;
};

double parse_double(const std::string& s, const std::filesystem::path& path) {
  double x = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw ConfigError(fmt::format("{}: '{}' is not a number", path.string(), s));
  return x;
}

Parsed read_csv(const std::filesystem::path& path, const std::string& kind) {
  std::istringstream in(read_text(path));
  std::string line;
  const std::string prefix = "# " + kind + " ";
  if (!std::getline(in, line) || line.rfind(prefix, 0) != 0)
    throw ConfigError(fmt::format("{}: missing '# {}' header", path.string(), kind));
  Parsed out;
  try {
    out.header = nlohmann::json::parse(line.substr(prefix.size()));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(fmt::format("{}: bad header: {}", path.string(), e.what()));
  }
  std::getline(in, line);  // column names
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream cells(line);
    std::string cell;
    bool first = true;
    while (std::getline(cells, cell, ',')) {
      if (!first) row.push_back(parse_double(cell, path));
      first = false;
    }
    out.rows.push_back(std::move(row));
  }
  return out;
}

void write_binary(const std::filesystem::path& path, const char (&tag)[4], const nlohmann::json& header,
                  const std::vector<double>& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError(fmt::format("cannot write {}", path.string()));
  const std::string h = header.dump();
  const auto len = static_cast<std::uint32_t>(h.size());
  out.write(tag, 4);
  out.write(reinterpret_cast<const char*>(&len), sizeof len);
  out.write(h.data(), static_cast<std::streamsize>(h.size()));
  out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size() * sizeof(double)));
}

std::pair<nlohmann::json, std::vector<double>> read_binary(const std::filesystem::path& path, const char (&tag)[4]) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(fmt::format("cannot read {}", path.string()));
  char got[4];
  std::uint32_t len = 0;
  in.read(got, 4);
  in.read(reinterpret_cast<char*>(&len), sizeof len);
  if (!in || !std::equal(got, got + 4, tag)) throw ConfigError(fmt::format("{}: wrong file tag", path.string()));
  std::string h(len, '\0');
  in.read(h.data(), len);
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(h);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(fmt::format("{}: bad header: {}", path.string(), e.what()));
  }
  std::vector<double> data;
  double x = 0.0;
  while (in.read(reinterpret_cast<char*>(&x), sizeof x)) data.push_back(x);
  return {header, data};
}

DyadicGrid header_grid(const nlohmann::json& h, int& n) {
  try {
    n = h.at("n").get<int>();
    return DyadicGrid(h.at("d").get<int>(), h.at("L").get<int>());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(fmt::format("header lacks d, n or L: {}", e.what()));
  }
}

std::size_t triangle(int n) { return static_cast<std::size_t>(n * (n + 1) / 2); }

}  // namespace

FileFormat format_for(const std::filesystem::path& path) {
  return path.extension() == ".bin" ? FileFormat::Binary : FileFormat::Csv;
}

std::string format_double(double x) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, ptr);
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError(fmt::format("cannot write {}", path.string()));
  out << text;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(fmt::format("cannot read {}", path.string()));
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_grid_function(const GridFunction& f, const std::filesystem::path& path) {
  const nlohmann::json header{{"d", f.grid().dim()}, {"n", f.components()}, {"L", f.grid().finest_level()}};
  if (format_for(path) == FileFormat::Binary) {
    write_binary(path, kFunctionTag, header, std::vector<double>(f.values().data(), f.values().data() + f.values().size()));
    return;
  }
  std::string text = "# grid_function " + header.dump() + "\ncell";
  for (int k = 0; k < f.components(); ++k) text += fmt::format(",c{}", k);
  text += '\n';
  for (std::size_t c = 0; c < f.grid().cell_count(); ++c) {
    text += std::to_string(c);
    for (int k = 0; k < f.components(); ++k) text += ',' + format_double(f.cell(c)(k));
    text += '\n';
  }
  write_text(path, text);
}

GridFunction read_grid_function(const std::filesystem::path& path) {
  int n = 0;
  if (format_for(path) == FileFormat::Binary) {
    auto [header, data] = read_binary(path, kFunctionTag);
    const DyadicGrid grid = header_grid(header, n);
    if (data.size() != grid.cell_count() * static_cast<std::size_t>(n))
      throw ConfigError(fmt::format("{}: expected {} values", path.string(), grid.cell_count() * n));
    GridFunction f(grid, n);
    std::copy(data.begin(), data.end(), f.values().data());
    return f;
  }
  const Parsed p = read_csv(path, "grid_function");
  const DyadicGrid grid = header_grid(p.header, n);
  if (p.rows.size() != grid.cell_count()) throw ConfigError(fmt::format("{}: expected {} rows", path.string(), grid.cell_count()));
  GridFunction f(grid, n);
  for (std::size_t c = 0; c < p.rows.size(); ++c) {
    if (p.rows[c].size() != static_cast<std::size_t>(n)) throw ConfigError(fmt::format("{}: row {} has the wrong width", path.string(), c));
    for (int k = 0; k < n; ++k) f.cell(c)(k) = p.rows[c][static_cast<std::size_t>(k)];
  }
  return f;
}

void write_weight(const MatrixWeight& w, const std::filesystem::path& path) {
  const int n = w.n();
  const nlohmann::json header{
      {"d", w.grid().dim()}, {"n", n}, {"L", w.grid().finest_level()}, {"metadata", w.metadata()}};
  std::vector<double> data;
  data.reserve(w.grid().cell_count() * triangle(n));
  for (const Matrix& m : w.cells())
    for (int r = 0; r < n; ++r)
      for (int c = 0; c <= r; ++c) data.push_back(m(r, c));
  if (format_for(path) == FileFormat::Binary) {
    write_binary(path, kWeightTag, header, data);
    return;
  }
  std::string text = "# weight " + header.dump() + "\ncell";
  for (int r = 0; r < n; ++r)
    for (int c = 0; c <= r; ++c) text += fmt::format(",a{}{}", r, c);
  text += '\n';
  const std::size_t t = triangle(n);
  for (std::size_t c = 0; c < w.grid().cell_count(); ++c) {
    text += std::to_string(c);
    for (std::size_t k = 0; k < t; ++k) text += ',' + format_double(data[c * t + k]);
    text += '\n';
  }
  write_text(path, text);
}

MatrixWeight read_weight(const std::filesystem::path& path) {
  nlohmann::json header;
  std::vector<double> data;
  if (format_for(path) == FileFormat::Binary) {
    std::tie(header, data) = read_binary(path, kWeightTag);
  } else {
    Parsed p = read_csv(path, "weight");
    header = std::move(p.header);
    for (auto& row : p.rows) data.insert(data.end(), row.begin(), row.end());
  }
  int n = 0;
  const DyadicGrid grid = header_grid(header, n);
  const std::size_t t = triangle(n);
  if (data.size() != grid.cell_count() * t)
    throw ConfigError(fmt::format("{}: expected {} matrix entries, got {}", path.string(), grid.cell_count() * t, data.size()));
  std::vector<Matrix> cells;
  cells.reserve(grid.cell_count());
  for (std::size_t c = 0; c < grid.cell_count(); ++c) {
    Matrix m(n, n);
    std::size_t k = c * t;
    for (int r = 0; r < n; ++r)
      for (int col = 0; col <= r; ++col) m(r, col) = m(col, r) = data[k++];
    cells.push_back(std::move(m));
  }
  return MatrixWeight(grid, std::move(cells), header.value("metadata", nlohmann::json::object()));
}

std::string reducing_family_csv(const ReducingFamily& v) {
  const int n = v.n();
  std::string text = "level,index,method,kappa";
  for (const char* name : {"v", "vd"})
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c) text += fmt::format(",{}{}{}", name, r, c);
  text += '\n';
  for (std::size_t id = 0; id < v.size(); ++id) {
    const DyadicCube cube = v.grid().cube_from_id(id);
    std::string index;
    for (int k = 0; k < cube.dim; ++k) index += (k ? ":" : "") + std::to_string(cube.index[k]);
    text += fmt::format("{},{},{},{}", cube.level, index, to_string(v.primal(id).method),
                        format_double(std::max(v.primal(id).kappa, v.dual(id).kappa)));
    for (const Matrix* m : {&v.v(id), &v.v_dual(id)})
      for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c) text += ',' + format_double((*m)(r, c));
    text += '\n';
  }
  return text;
}

std::string ratio_csv(const EquivalenceReport& r) {
  std::string text = "index,spectrum,weighted,square,ratio\n";
  for (const auto& s : r.samples)
    text += fmt::format("{},{},{},{},{}\n", s.index, to_string(s.spectrum), format_double(s.weighted),
                        format_double(s.square), format_double(s.ratio));
  return text;
}

}  // namespace haarweight
