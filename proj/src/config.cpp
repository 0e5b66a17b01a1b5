#include <fstream>
#include <set>

#include <fmt/format.h>

#include "haarweight/errors.hpp"
#include "haarweight/harness.hpp"
#include "haarweight/io.hpp"

namespace haarweight {

namespace {

WeightFamily family(FamilyKind kind, int dim, int n, int level, const std::string& label) {
  WeightFamily f;
  f.kind = kind;
  f.dim = dim;
  f.n = n;
  f.level = level;
  f.label = label;
  if (kind == FamilyKind::Constant) f.constant = Matrix::Identity(n, n);
  return f;
}

std::vector<SuiteEntry> default_suite() {
  std::vector<SuiteEntry> s;
  auto add = [&](WeightFamily f) { s.push_back({f.label, f, std::nullopt}); };
  add(family(FamilyKind::Constant, 1, 2, 10, "identity-d1-n2"));
  for (double a : {0.3, 0.6, -0.5}) {
    auto f = family(FamilyKind::Power, 1, 1, 10, fmt::format("power-d1-a{}", a));
    f.alpha = a;
    add(f);
  }
  auto rot = family(FamilyKind::Rotating, 1, 2, 10, "rotating-d1-n2");
  rot.alpha = 0.5;
  rot.omega = 6.283185307179586;
  add(rot);
  auto b2 = family(FamilyKind::BlockRandom, 1, 2, 10, "block-d1-n2");
  b2.sigma = 0.5;
  b2.seed = 7;
  add(b2);
  auto b3 = family(FamilyKind::BlockRandom, 1, 3, 10, "block-d1-n3");
  b3.sigma = 0.4;
  b3.seed = 11;
  add(b3);
  auto c3 = family(FamilyKind::Constant, 1, 3, 10, "constant-d1-n3");
  c3.constant = Matrix{{4.0, 1.0, 0.5}, {1.0, 2.0, 0.3}, {0.5, 0.3, 1.0}};
  add(c3);
  auto p2 = family(FamilyKind::Power, 2, 1, 6, "power-d2-a0.5");
  p2.alpha = 0.5;
  add(p2);
  auto r2 = family(FamilyKind::Rotating, 2, 2, 6, "rotating-d2-n2");
  r2.alpha = 0.5;
  r2.omega = 3.0;
  add(r2);
  auto bb = family(FamilyKind::BlockRandom, 2, 2, 6, "block-d2-n2");
  bb.sigma = 0.5;
  bb.seed = 5;
  add(bb);
  return s;
}

// Collects every problem before failing.
class Checker {
 public:
  explicit Checker(const nlohmann::json& j) : j_(j) {}

  template <class T>
  void read(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
      errors_.push_back(fmt::format("{}: {}", key, e.what()));
    }
  }

  bool has(const char* key) {
    seen_.insert(key);
    return j_.contains(key);
  }

  void error(std::string msg) { errors_.push_back(std::move(msg)); }

  void finish(const std::string& where) {
    for (const auto& [k, v] : j_.items())
      if (!seen_.count(k)) errors_.push_back(fmt::format("{}unknown key '{}'", where, k));
    if (!errors_.empty()) {
      std::string msg = "invalid configuration:";
      for (const auto& e : errors_) msg += "\n  " + e;
      throw ConfigError(msg);
    }
  }

  std::vector<std::string>& errors() { return errors_; }

 private:
  const nlohmann::json& j_;
  std::set<std::string> seen_;
  std::vector<std::string> errors_;
};

}  // namespace

const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names{"transform", "reducing", "duality",  "stopping", "kp",        "blocks",
                                              "cross",     "mainthm",  "slope",    "sharpness", "apinf"};
  return names;
}

ExperimentConfig default_config() {
  ExperimentConfig c;
  for (int level = 1; level <= 10; ++level) c.transform_cells.emplace_back(1, level);
  for (int level = 1; level <= 6; ++level) c.transform_cells.emplace_back(2, level);
  for (int k = 0; k <= 8; ++k) c.sweep_alphas.push_back(0.25 * k);
  c.sharpness_alphas = {0.0, -0.2, -0.4, -0.6, -0.8, -0.9};
  c.sharpness_rotating_alphas = {0.0, 0.3, 0.6, 0.9};
  c.suite = default_suite();
  return c;
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  if (!j.is_object()) throw ConfigError("configuration must be a JSON object");
  ExperimentConfig c = default_config();
  Checker chk(j);
  chk.read("schema_version", c.schema_version);
  if (!j.contains("schema_version")) chk.error("schema_version is required");
  else if (c.schema_version != kSchemaVersion)
    chk.error(fmt::format("schema_version {} not supported (expected {})", c.schema_version, kSchemaVersion));
  chk.read("experiment_id", c.experiment_id);
  std::string out = c.output_dir.string();
  chk.read("output_dir", out);
  c.output_dir = out;
  chk.read("seed", c.seed);
  chk.read("reseed", c.reseed);
  chk.read("p", c.p);
  for (double p : c.p)
    if (!(p > 1.0) || !std::isfinite(p)) chk.error(fmt::format("p: {} not in (1, inf)", p));
  if (c.p.empty()) chk.error("p: at least one exponent required");
  chk.read("experiments", c.experiments);
  for (const auto& e : c.experiments)
    if (std::find(experiment_names().begin(), experiment_names().end(), e) == experiment_names().end())
      chk.error(fmt::format("experiments: unknown experiment '{}'", e));
  chk.read("functions", c.functions);
  if (c.functions == 0) chk.error("functions must be positive");
  std::vector<std::string> spectra;
  if (chk.has("spectra")) {
    chk.read("spectra", spectra);
    c.spectra.clear();
    for (const auto& s : spectra) {
      try {
        c.spectra.push_back(spectrum_from_string(s));
      } catch (const ConfigError& e) {
        chk.error(fmt::format("spectra: {}", e.what()));
      }
    }
    if (c.spectra.empty()) chk.error("spectra: at least one spectrum required");
  }
  chk.read("target_decay", c.target_decay);
  if (!(c.target_decay > 0.0 && c.target_decay < 1.0)) chk.error("target_decay must lie in (0, 1)");
  if (chk.has("lambdas") && !j.at("lambdas").is_null()) {
    try {
      c.lambdas = Lambdas{j.at("lambdas").at("lambda1").get<double>(), j.at("lambdas").at("lambda2").get<double>()};
      if (!(c.lambdas->lambda1 > 1.0 && c.lambdas->lambda2 > 1.0)) chk.error("lambdas must exceed 1");
    } catch (const nlohmann::json::exception& e) {
      chk.error(fmt::format("lambdas: {}", e.what()));
    }
  }
  chk.read("fit_tol", c.reducing.fit_tol);
  chk.read("fit_directions", c.reducing.directions);
  chk.read("fit_max_iterations", c.reducing.max_iterations);
  chk.read("transform_cells", c.transform_cells);
  for (const auto& [d, level] : c.transform_cells)
    if (d < 1 || d > kMaxDim || level < 0) chk.error(fmt::format("transform_cells: bad cell ({}, {})", d, level));
  chk.read("transform_functions", c.transform_functions);
  chk.read("transform_n", c.transform_n);
  chk.read("sandwich_directions", c.sandwich_directions);
  chk.read("block_functions", c.block_functions);
  chk.read("cross_alphas", c.cross_alphas);
  chk.read("cross_level", c.cross_level);
  chk.read("cross_functions", c.cross_functions);
  chk.read("sweep_alphas", c.sweep_alphas);
  chk.read("sweep_level", c.sweep_level);
  chk.read("sharpness_alphas", c.sharpness_alphas);
  chk.read("sharpness_level", c.sharpness_level);
  chk.read("sharpness_rotating_alphas", c.sharpness_rotating_alphas);
  chk.read("sharpness_rotating_level", c.sharpness_rotating_level);
  chk.read("sharpness_rotating_omega", c.sharpness_rotating_omega);
  chk.read("apinf_functions", c.apinf_functions);

  if (chk.has("suite")) {
    c.suite.clear();
    const auto& s = j.at("suite");
    if (!s.is_array()) chk.error("suite must be an array");
    else
      for (std::size_t i = 0; i < s.size(); ++i) {
        const auto& e = s[i];
        SuiteEntry entry;
        try {
          entry.label = e.at("label").get<std::string>();
          if (e.contains("file")) {
            std::filesystem::path f = e.at("file").get<std::string>();
            entry.file = f.is_relative() ? base_dir / f : f;
            // Fails here, with MatrixDomainError, on a cell that is not SPD.
            read_weight(*entry.file);
          } else {
            WeightFamily fam = family_from_json(e, e.at("d").get<int>(), e.at("n").get<int>(), e.at("L").get<int>());
            fam.label = entry.label;
            entry.family = fam;
          }
          c.suite.push_back(std::move(entry));
        } catch (const nlohmann::json::exception& ex) {
          chk.error(fmt::format("suite[{}]: {}", i, ex.what()));
        } catch (const ConfigError& ex) {
          chk.error(fmt::format("suite[{}]: {}", i, ex.what()));
        }
      }
  }
  std::set<std::string> labels;
  for (const auto& e : c.suite)
    if (!labels.insert(e.label).second) chk.error(fmt::format("suite: duplicate label '{}'", e.label));
  chk.finish("");
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text(path));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(fmt::format("{}: {}", path.string(), e.what()));
  }
  return from_json(j, path.parent_path());
}

nlohmann::json ExperimentConfig::to_json() const {
  nlohmann::json suite_json = nlohmann::json::array();
  for (const auto& e : suite) {
    nlohmann::json s;
    if (e.family) s = haarweight::to_json(*e.family);
    if (e.file) s["file"] = e.file->string();
    s["label"] = e.label;
    suite_json.push_back(std::move(s));
  }
  std::vector<std::string> spectra_names;
  for (Spectrum s : spectra) spectra_names.push_back(to_string(s));
  nlohmann::json j{{"schema_version", schema_version},
                   {"experiment_id", experiment_id},
                   {"output_dir", output_dir.string()},
                   {"seed", seed},
                   {"reseed", reseed},
                   {"p", p},
                   {"experiments", experiments},
                   {"functions", functions},
                   {"spectra", spectra_names},
                   {"target_decay", target_decay},
                   {"fit_tol", reducing.fit_tol},
                   {"fit_directions", reducing.directions},
                   {"fit_max_iterations", reducing.max_iterations},
                   {"transform_cells", transform_cells},
                   {"transform_functions", transform_functions},
                   {"transform_n", transform_n},
                   {"sandwich_directions", sandwich_directions},
                   {"block_functions", block_functions},
                   {"cross_alphas", cross_alphas},
                   {"cross_level", cross_level},
                   {"cross_functions", cross_functions},
                   {"sweep_alphas", sweep_alphas},
                   {"sweep_level", sweep_level},
                   {"sharpness_alphas", sharpness_alphas},
                   {"sharpness_level", sharpness_level},
                   {"sharpness_rotating_alphas", sharpness_rotating_alphas},
                   {"sharpness_rotating_level", sharpness_rotating_level},
                   {"sharpness_rotating_omega", sharpness_rotating_omega},
                   {"apinf_functions", apinf_functions},
                   {"suite", suite_json}};
  j["lambdas"] = lambdas ? nlohmann::json{{"lambda1", lambdas->lambda1}, {"lambda2", lambdas->lambda2}} : nlohmann::json();
  return j;
}

}  // namespace haarweight
