#include "haarweight/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <exception>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <ostream>
#include <random>
#include <thread>
#include <tuple>

#include <fmt/format.h>
#include <openssl/evp.h>

#include "haarweight/ellipsoid.hpp"
#include "haarweight/errors.hpp"
#include "haarweight/io.hpp"
#include "haarweight/operators.hpp"
#include "haarweight/spd.hpp"

namespace haarweight {

namespace {

using nlohmann::json;
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kControlLambda = 1.0 + 1e-6;

// ---------------------------------------------------------------- plumbing

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Seed of one job, independent of scheduling.
std::uint64_t job_seed(std::uint64_t seed, const std::string& tag, std::uint64_t a = 0, std::uint64_t b = 0) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : tag) h = (h ^ c) * 0x100000001b3ull;
  return splitmix(splitmix(splitmix(seed ^ h) ^ a) ^ b);
}

std::uint64_t p_key(double p) { return static_cast<std::uint64_t>(std::llround(p * 1000.0)); }

template <class Key, class Value>
class Memo {
 public:
  template <class Make>
  const Value& get(const Key& key, Make&& make) {
    std::shared_ptr<Slot> slot;
    {
      std::lock_guard lock(mutex_);
      auto& s = slots_[key];
      if (!s) s = std::make_shared<Slot>();
      slot = s;
    }
    std::call_once(slot->once, [&] {
      try {
        slot->value.emplace(make());
      } catch (...) {
        slot->error = std::current_exception();
      }
    });
    if (slot->error) std::rethrow_exception(slot->error);
    return *slot->value;
  }

 private:
  struct Slot {
    std::once_flag once;
    std::optional<Value> value;
    std::exception_ptr error;
  };
  std::mutex mutex_;
  std::map<Key, std::shared_ptr<Slot>> slots_;
};

void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& job) {
  const std::size_t threads = std::min<std::size_t>(count, static_cast<std::size_t>(std::max(1, workers)));
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) job(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  for (std::size_t t = 0; t < threads; ++t)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) job(i);
    });
}

struct Failure {
  std::string experiment;
  std::string cell;
  std::string error;
};

// Results of independent cells, gathered in cell order.
class Cells {
 public:
  Cells(std::string experiment, int workers) : experiment_(std::move(experiment)), workers_(workers) {}

  template <class Run>
  std::vector<std::optional<json>> run(const std::vector<std::string>& names, Run&& body) {
    std::vector<std::optional<json>> out(names.size());
    std::vector<std::optional<Failure>> failed(names.size());
    parallel_for(names.size(), workers_, [&](std::size_t i) {
      try {
        out[i] = body(i);
      } catch (const std::exception& e) {
        failed[i] = Failure{experiment_, names[i], e.what()};
      }
    });
    for (auto& f : failed)
      if (f) failures_.push_back(std::move(*f));
    return out;
  }

  std::vector<Failure>& failures() { return failures_; }

 private:
  std::string experiment_;
  int workers_;
  std::vector<Failure> failures_;
};

std::string csv_row(std::initializer_list<std::string> fields) {
  std::string row;
  for (const auto& f : fields) {
    if (!row.empty()) row += ',';
    row += f;
  }
  return row + '\n';
}

std::string num(double x) { return format_double(x); }

MatrixWeight power_weight(double alpha, int level) {
  WeightFamily f;
  f.kind = FamilyKind::Power;
  f.dim = 1;
  f.n = 1;
  f.level = level;
  f.alpha = alpha;
  return make_weight(f);
}

bool is_identity(const MatrixWeight& w) {
  const Matrix id = Matrix::Identity(w.n(), w.n());
  return std::all_of(w.cells().begin(), w.cells().end(), [&](const Matrix& m) { return m == id; });
}

// ---------------------------------------------------------------- workspace

// Lazily shared weights, reducing families, characteristics and stopping trees.
class Workspace {
 public:
  explicit Workspace(const ExperimentConfig& cfg) : cfg_(cfg) {
    for (const auto& e : cfg.suite) sources_.emplace(e.label, e);
  }

  const ExperimentConfig& config() const { return cfg_; }

  /// Registers a non-suite weight; call before any parallel phase.
  void add(const std::string& label, std::function<MatrixWeight()> make) { extra_.emplace(label, std::move(make)); }

  const MatrixWeight& weight(const std::string& label) {
    return weights_.get(label, [&]() -> MatrixWeight {
      if (auto it = extra_.find(label); it != extra_.end()) return it->second();
      const SuiteEntry& e = sources_.at(label);
      if (e.family) return make_weight(*e.family);
      return read_weight(*e.file);
    });
  }

  const ReducingFamily& family(const std::string& label, double p) {
    return families_.get({label, p_key(p)}, [&] {
      const MatrixWeight& w = weight(label);
      return build_reducing_family(w, p, std::max(0, w.grid().finest_level() - 1), cfg_.reducing);
    });
  }

  double characteristic(const std::string& label, double p) {
    return characteristics_.get({label, p_key(p)}, [&] {
      const ReducingFamily& v = family(label, p);
      return ap_characteristic(v, default_max_depth(v.grid()));
    });
  }

  /// Family of W^{1-p'} at p', down to the default scan depth.
  const ReducingFamily& conjugate_family(const std::string& label, double p) {
    return conjugates_.get({label, p_key(p)}, [&] {
      const MatrixWeight& w = weight(label);
      const double pc = conjugate_exponent(p);
      return build_reducing_family(pointwise_power(w, 1.0 - pc), pc, default_max_depth(w.grid()), cfg_.reducing);
    });
  }

  Lambdas lambdas(const std::string& label, double p) {
    if (cfg_.lambdas) return *cfg_.lambdas;
    return lambdas_from(constants(label, p), characteristic(label, p), p);
  }

  const GenerationTree& tree(const std::string& label, double p) {
    return trees_.get({label, p_key(p)}, [&] { return build_tree(label, p, lambdas(label, p)); });
  }

  GenerationTree build_tree(const std::string& label, double p, const Lambdas& l) {
    const ReducingFamily& v = family(label, p);
    StoppingConfig sc;
    sc.p = p;
    sc.lambda1 = l.lambda1;
    sc.lambda2 = l.lambda2;
    sc.root = DyadicCube::root(v.grid().dim());
    sc.floor_level = std::max(0, v.grid().finest_level() - 1);
    return build_generations(v, sc);
  }

  /// Calibration constants of the suite group sharing (d, n, L) with `label`;
  /// a weight outside every group calibrates on itself.
  StoppingConstants constants(const std::string& label, double p) {
    const MatrixWeight& w = weight(label);
    const auto key = std::make_tuple(w.grid().dim(), w.n(), w.grid().finest_level(), p_key(p));
    std::vector<std::string> members;
    for (const auto& e : cfg_.suite) {
      const MatrixWeight* loaded = nullptr;
      try {
        loaded = &weight(e.label);
      } catch (const Error&) {
        continue;  // reported by the cells of that weight
      }
      const MatrixWeight& m = *loaded;
      if (std::make_tuple(m.grid().dim(), m.n(), m.grid().finest_level(), p_key(p)) == key) members.push_back(e.label);
    }
    const std::string group = members.empty() ? "self:" + label : fmt::format("{}-{}-{}", std::get<0>(key),
                                                                               std::get<1>(key), std::get<2>(key));
    if (members.empty()) members.push_back(label);
    return constants_.get({group, p_key(p)}, [&] {
      std::vector<CalibrationSample> samples;
      for (const auto& m : members) samples.push_back({&family(m, p), characteristic(m, p)});
      return calibrate_constants(samples, std::max(0, w.grid().finest_level() - 1), cfg_.target_decay);
    });
  }

 private:
  using Key = std::pair<std::string, std::uint64_t>;
  const ExperimentConfig& cfg_;
  std::map<std::string, SuiteEntry> sources_;
  std::map<std::string, std::function<MatrixWeight()>> extra_;
  Memo<std::string, MatrixWeight> weights_;
  Memo<Key, ReducingFamily> families_;
  Memo<Key, double> characteristics_;
  Memo<Key, ReducingFamily> conjugates_;
  Memo<Key, StoppingConstants> constants_;
  Memo<Key, GenerationTree> trees_;
};

// Every (suite weight, p) pair in config order.
struct SuiteCell {
  std::string label;
  double p;
};

std::vector<SuiteCell> suite_cells(const ExperimentConfig& cfg) {
  std::vector<SuiteCell> cells;
  for (const auto& e : cfg.suite)
    for (double p : cfg.p) cells.push_back({e.label, p});
  return cells;
}

std::vector<std::string> cell_names(const std::vector<SuiteCell>& cells) {
  std::vector<std::string> names;
  for (const auto& c : cells) names.push_back(fmt::format("{} p={}", c.label, c.p));
  return names;
}

// ---------------------------------------------------------------- experiments

struct Context {
  Workspace& ws;
  const ExperimentConfig& cfg;
  const RunOptions& opts;
  std::vector<OutputFile>& files;
};

json exp_transform(Context& c, Cells& cells) {
  const auto& list = c.cfg.transform_cells;
  std::vector<std::string> names;
  for (const auto& [d, level] : list) names.push_back(fmt::format("d={} L={}", d, level));
  auto out = cells.run(names, [&](std::size_t i) {
    const auto [d, level] = list[i];
    const DyadicGrid grid(d, level);
    std::mt19937_64 rng(job_seed(c.cfg.seed, "transform", static_cast<std::uint64_t>(d), static_cast<std::uint64_t>(level)));
    std::normal_distribution<double> normal;
    double roundtrip = 0.0;
    double parseval = 0.0;
    for (std::size_t k = 0; k < c.cfg.transform_functions; ++k) {
      GridFunction f(grid, c.cfg.transform_n);
      for (Eigen::Index col = 0; col < f.values().cols(); ++col)
        for (Eigen::Index row = 0; row < f.values().rows(); ++row) f.values()(row, col) = normal(rng);
      const HaarCoefficients h = haar_transform(f);
      const GridFunction back = haar_reconstruct(h);
      const double scale = std::max(1.0, f.values().cwiseAbs().maxCoeff());
      roundtrip = std::max(roundtrip, (back.values() - f.values()).cwiseAbs().maxCoeff() / scale);
      const double energy = std::pow(lp_norm(f, 2.0), 2);
      const double coeff = h.detail_norm_squared() + h.root_scaling().squaredNorm();
      parseval = std::max(parseval, std::abs(energy - coeff) / std::max(1.0, energy));
    }
    return json{{"d", d},
                {"L", level},
                {"functions", c.cfg.transform_functions},
                {"max_roundtrip_error", roundtrip},
                {"max_parseval_error", parseval}};
  });
  json rows = json::array();
  std::string csv = "d,L,functions,max_roundtrip_error,max_parseval_error\n";
  double rt = 0.0, pe = 0.0;
  for (auto& r : out) {
    if (!r) continue;
    rt = std::max(rt, (*r)["max_roundtrip_error"].get<double>());
    pe = std::max(pe, (*r)["max_parseval_error"].get<double>());
    csv += csv_row({std::to_string((*r)["d"].get<int>()), std::to_string((*r)["L"].get<int>()),
                    std::to_string((*r)["functions"].get<std::size_t>()), num((*r)["max_roundtrip_error"]),
                    num((*r)["max_parseval_error"])});
    rows.push_back(std::move(*r));
  }
  c.files.push_back({"transform.csv", csv});
  return {{"cells", rows}, {"max_roundtrip_error", rt}, {"max_parseval_error", pe}};
}

struct Sandwich {
  double low = kInf;
  double high = 0.0;
};

// min |V e| / rho(e) and max |V e| / (sqrt(n) rho(e)) over every covered cube.
Sandwich sandwich(const MatrixWeight& b, double q, const ReducingFamily& v, bool dual, const Matrix& dirs) {
  const DyadicGrid& grid = b.grid();
  std::vector<Eigen::RowVectorXd> cells;
  cells.reserve(grid.cell_count());
  for (const Matrix& m : b.cells()) cells.push_back((m * dirs).colwise().norm().array().pow(q).matrix());
  const auto means = cube_means<Eigen::RowVectorXd>(grid, std::span<const Eigen::RowVectorXd>(cells), v.max_depth());
  const double root_n = std::sqrt(static_cast<double>(v.n()));
  Sandwich s;
  for (std::size_t id = 0; id < v.size(); ++id) {
    const Eigen::RowVectorXd rho = means[id].array().pow(1.0 / q).matrix();
    const Matrix& op = dual ? v.v_dual(id) : v.v(id);
    const Eigen::RowVectorXd t = (op * dirs).colwise().norm().cwiseQuotient(rho);
    s.low = std::min(s.low, t.minCoeff());
    s.high = std::max(s.high, t.maxCoeff() / root_n);
  }
  return s;
}

json exp_reducing(Context& c, Cells& cells) {
  const auto list = suite_cells(c.cfg);
  auto out = cells.run(cell_names(list), [&](std::size_t i) {
    const auto& [label, p] = list[i];
    const MatrixWeight& w = c.ws.weight(label);
    const ReducingFamily& v = c.ws.family(label, p);
    json r{{"label", label}, {"p", p}, {"n", w.n()}, {"d", w.grid().dim()}, {"L", w.grid().finest_level()}};
    double min_product = kInf;
    for (std::size_t id = 0; id < v.size(); ++id)
      min_product = std::min(min_product, spectral_norm(v.v(id) * v.v_dual(id)));
    r["min_product_norm"] = min_product;
    r["characteristic"] = c.ws.characteristic(label, p);
    r["slack"] = v.slack();
    std::map<std::string, int> methods;
    for (std::size_t id = 0; id < v.size(); ++id) ++methods[to_string(v.primal(id).method)];
    r["methods"] = methods;
    r["out_of_range"] = w.out_of_range();
    if (p == 2.0) {
      // Independent route: cube averages from the cell list, then the square root.
      const MatrixWeight inv = pointwise_power(w, -1.0);
      double err = 0.0;
      for (std::size_t id = 0; id < v.size(); ++id) {
        const DyadicCube cube = w.grid().cube_from_id(id);
        const Matrix a = spd_power(weight_average(w, cube), 0.5);
        const Matrix b = spd_power(weight_average(inv, cube), 0.5);
        err = std::max(err, (a - v.v(id)).cwiseAbs().maxCoeff() / std::max(1.0, a.cwiseAbs().maxCoeff()));
        err = std::max(err, (b - v.v_dual(id)).cwiseAbs().maxCoeff() / std::max(1.0, b.cwiseAbs().maxCoeff()));
      }
      r["p2_oracle_error"] = err;
    } else {
      const Matrix dirs = random_directions(w.n(), c.cfg.sandwich_directions, job_seed(c.cfg.seed, "sandwich", i));
      const Sandwich s = sandwich(pointwise_power(w, 1.0 / p), p, v, false, dirs);
      const Sandwich sd = sandwich(pointwise_power(w, -1.0 / p), conjugate_exponent(p), v, true, dirs);
      r["sandwich_directions"] = c.cfg.sandwich_directions;
      r["sandwich_low"] = s.low;
      r["sandwich_high"] = s.high;
      r["dual_sandwich_low"] = sd.low;
      r["dual_sandwich_high"] = sd.high;
    }
    return r;
  });
  json rows = json::array();
  std::string csv =
      "label,p,characteristic,slack,min_product_norm,p2_oracle_error,sandwich_low,sandwich_high,dual_sandwich_low,"
      "dual_sandwich_high\n";
  auto opt = [](const json& r, const char* k) { return r.contains(k) ? num(r[k].get<double>()) : std::string(); };
  for (auto& r : out) {
    if (!r) continue;
    csv += csv_row({(*r)["label"].get<std::string>(), num((*r)["p"]), num((*r)["characteristic"]), num((*r)["slack"]),
                    num((*r)["min_product_norm"]), opt(*r, "p2_oracle_error"), opt(*r, "sandwich_low"),
                    opt(*r, "sandwich_high"), opt(*r, "dual_sandwich_low"), opt(*r, "dual_sandwich_high")});
    rows.push_back(std::move(*r));
  }
  c.files.push_back({"reducing.csv", csv});
  return {{"cells", rows}};
}

json exp_duality(Context& c, Cells& cells) {
  const auto list = suite_cells(c.cfg);
  auto out = cells.run(cell_names(list), [&](std::size_t i) {
    const auto& [label, p] = list[i];
    const ReducingFamily& v = c.ws.family(label, p);
    const ReducingFamily& vc = c.ws.conjugate_family(label, p);
    const double ch = c.ws.characteristic(label, p);
    const double chc = ap_characteristic(vc, vc.max_depth());
    const double kappa = std::max(v.slack(), vc.slack());
    const double gap = std::abs(std::log(chc) - std::log(ch) / (p - 1.0));
    const double bound = std::log(std::pow(kappa, 4));
    return json{{"label", label},      {"p", p},         {"characteristic", ch}, {"conjugate_characteristic", chc},
                {"kappa", kappa},      {"log_gap", gap}, {"log_bound", bound},   {"within", gap <= bound}};
  });
  json rows = json::array();
  std::string csv = "label,p,characteristic,conjugate_characteristic,kappa,log_gap,log_bound\n";
  for (auto& r : out) {
    if (!r) continue;
    csv += csv_row({(*r)["label"].get<std::string>(), num((*r)["p"]), num((*r)["characteristic"]),
                    num((*r)["conjugate_characteristic"]), num((*r)["kappa"]), num((*r)["log_gap"]),
                    num((*r)["log_bound"])});
    rows.push_back(std::move(*r));
  }
  c.files.push_back({"duality.csv", csv});
  return {{"cells", rows}};
}

json decay_rows(const GenerationTree& g) {
  json rows = json::array();
  for (int j = 1; j <= 5; ++j)
    rows.push_back({{"j", j},
                    {"decay", decay_ratio(g, j)},
                    {"floor_affected", j <= g.generations() && g.floor_affected(j)},
                    {"bound", std::ldexp(1.05, -j)}});
  return rows;
}

json exp_stopping(Context& c, Cells& cells) {
  const auto list = suite_cells(c.cfg);
  std::vector<std::optional<std::string>> dumps(list.size());
  auto out = cells.run(cell_names(list), [&](std::size_t i) {
    const auto& [label, p] = list[i];
    const Lambdas l = c.ws.lambdas(label, p);
    const GenerationTree& g = c.ws.tree(label, p);
    if (c.opts.dump_stopping) dumps[i] = g.to_json().dump(1);
    const GenerationTree control = c.ws.build_tree(label, p, {kControlLambda, kControlLambda});
    return json{{"label", label},
                {"p", p},
                {"lambda1", l.lambda1},
                {"lambda2", l.lambda2},
                {"calibrated", !c.cfg.lambdas.has_value()},
                {"generations", g.generations()},
                {"decay", decay_rows(g)},
                {"control_lambda", kControlLambda},
                {"control_decay", decay_rows(control)}};
  });
  json rows = json::array();
  std::string csv = "label,p,run,lambda1,lambda2,j,decay,floor_affected,bound\n";
  for (std::size_t i = 0; i < out.size(); ++i) {
    auto& r = out[i];
    if (!r) continue;
    const std::string label = (*r)["label"];
    for (const char* run : {"decay", "control_decay"}) {
      const bool main = std::string(run) == "decay";
      const std::string l1 = main ? num((*r)["lambda1"]) : num(kControlLambda);
      const std::string l2 = main ? num((*r)["lambda2"]) : num(kControlLambda);
      for (const auto& d : (*r)[run])
        csv += csv_row({label, num((*r)["p"]), main ? "calibrated" : "control", l1, l2,
                        std::to_string(d["j"].get<int>()), num(d["decay"]),
                        d["floor_affected"].get<bool>() ? "1" : "0", num(d["bound"])});
    }
    if (dumps[i]) c.files.push_back({fmt::format("stopping/{}_p{}.json", label, num(list[i].p)), *dumps[i]});
    rows.push_back(std::move(*r));
  }
  c.files.push_back({"stopping.csv", csv});
  return {{"cells", rows}};
}

double kp_constant(Workspace& ws, const ExperimentConfig& cfg, const SuiteCell& cell, std::uint64_t seed) {
  const MatrixWeight& w = ws.weight(cell.label);
  const GenerationTree& g = ws.tree(cell.label, cell.p);
  FunctionGenerator gen(cfg.spectra, seed);
  double best = 0.0;
  for (std::size_t k = 0; k < cfg.functions; ++k) {
    const HaarCoefficients f = gen.next(w.grid(), w.n());
    if (f.detail_norm_squared() == 0.0) continue;
    best = std::max(best, block_energy_ratio(f, g, cell.p));
  }
  return best;
}

json exp_kp(Context& c, Cells& cells) {
  const auto list = suite_cells(c.cfg);
  auto out = cells.run(cell_names(list), [&](std::size_t i) {
    const auto& cell = list[i];
    const double first = kp_constant(c.ws, c.cfg, cell, job_seed(c.cfg.seed, "kp", i));
    const double second = kp_constant(c.ws, c.cfg, cell, job_seed(c.cfg.seed + c.cfg.reseed, "kp", i));
    return json{{"label", cell.label},
                {"p", cell.p},
                {"functions", c.cfg.functions},
                {"c_emp", first},
                {"c_emp_reseeded", second},
                {"relative_change", std::abs(second / first - 1.0)}};
  });
  json rows = json::array();
  std::string csv = "label,p,functions,c_emp,c_emp_reseeded,relative_change\n";
  for (auto& r : out) {
    if (!r) continue;
    csv += csv_row({(*r)["label"].get<std::string>(), num((*r)["p"]),
                    std::to_string((*r)["functions"].get<std::size_t>()), num((*r)["c_emp"]),
                    num((*r)["c_emp_reseeded"]), num((*r)["relative_change"])});
    rows.push_back(std::move(*r));
  }
  c.files.push_back({"kp.csv", csv});
  return {{"cells", rows}};
}

double max_abs(const Matrix& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

json exp_blocks(Context& c, Cells& cells) {
  const auto list = suite_cells(c.cfg);
  auto out = cells.run(cell_names(list), [&](std::size_t i) {
    const auto& [label, p] = list[i];
    const MatrixWeight& w = c.ws.weight(label);
    const ReducingFamily& v = c.ws.family(label, p);
    const GenerationTree& g = c.ws.tree(label, p);
    const MatrixWeight wp = pointwise_power(w, 1.0 / p);
    FunctionGenerator gen(c.cfg.spectra, job_seed(c.cfg.seed, "blocks", i));
    double sum_err = 0.0;
    double delta_err = 0.0;
    double t_ratio = 0.0;
    for (std::size_t k = 0; k < c.cfg.block_functions; ++k) {
      const HaarCoefficients f = gen.next(w.grid(), w.n());
      const GridFunction tf = t_operator(w, v, f, p);
      const auto blocks = t_blocks(wp, v, f, g);
      const double scale = std::max(1.0, max_abs(tf.values()));
      GridFunction sum(w.grid(), w.n());
      for (const auto& b : blocks) sum += b;
      sum_err = std::max(sum_err, max_abs(sum.values() - tf.values()) / scale);
      for (int j = 1; j <= g.generations(); ++j) {
        const HaarCoefficients dj = haar_transform(delta_projection(f, g, j));
        const auto restricted = t_blocks(wp, v, dj, g);
        const auto& bj = blocks[static_cast<std::size_t>(j - 1)];
        delta_err = std::max(delta_err, max_abs(restricted[static_cast<std::size_t>(j - 1)].values() - bj.values()) /
                                            std::max(1.0, max_abs(bj.values())));
      }
      const double fn = lp_norm(haar_reconstruct(f), p);
      if (fn > 0.0) t_ratio = std::max(t_ratio, lp_norm(tf, p) / fn);
    }
    return json{{"label", label},
                {"p", p},
                {"functions", c.cfg.block_functions},
                {"generations", g.generations()},
                {"sum_error", sum_err},
                {"delta_error", delta_err},
                {"max_t_ratio", t_ratio}};
  });
  json rows = json::array();
  std::string csv = "label,p,functions,generations,sum_error,delta_error,max_t_ratio\n";
  for (auto& r : out) {
    if (!r) continue;
    csv += csv_row({(*r)["label"].get<std::string>(), num((*r)["p"]),
                    std::to_string((*r)["functions"].get<std::size_t>()),
                    std::to_string((*r)["generations"].get<int>()), num((*r)["sum_error"]),
                    num((*r)["delta_error"]), num((*r)["max_t_ratio"])});
    rows.push_back(std::move(*r));
  }
  c.files.push_back({"blocks.csv", csv});
  return {{"cells", rows}};
}

std::string cross_label(double alpha, int level) { return fmt::format("cross-a{}-L{}", num(alpha), level); }

json fit_json(const LinearFit& f) {
  return {{"slope", f.slope},         {"intercept", f.intercept}, {"slope_stderr", f.slope_stderr},
          {"slope_low", f.slope_low}, {"slope_high", f.slope_high}, {"points", f.points}};
}

bool decaying(const GenerationTree& g) {
  for (int j = 1; j <= 5; ++j)
    if (!(j <= g.generations() && g.floor_affected(j)) && decay_ratio(g, j) > std::ldexp(1.05, -j)) return false;
  return true;
}

// Smallest common threshold 1 + 0.05 k whose stopping time still decays and
// has at least three generations. Calibrated thresholds leave too few
// generations on mild weights for a rate fit. A configured override wins.
std::pair<Lambdas, bool> cross_thresholds(Workspace& ws, const std::string& label, double p) {
  if (ws.config().lambdas) return {*ws.config().lambdas, false};
  for (int k = 1; k <= 60; ++k) {
    const double lambda = 1.0 + 0.05 * k;
    const GenerationTree g = ws.build_tree(label, p, {lambda, lambda});
    if (g.generations() >= 3 && decaying(g)) return {{lambda, lambda}, true};
  }
  return {ws.lambdas(label, p), false};
}

json exp_cross(Context& c, Cells& cells) {
  struct Job {
    double alpha;
    double p;
  };
  std::vector<Job> jobs;
  std::vector<std::string> names;
  for (double a : c.cfg.cross_alphas)
    for (double p : c.cfg.p) {
      jobs.push_back({a, p});
      names.push_back(fmt::format("alpha={} p={}", a, p));
    }
  std::vector<std::string> csv_parts(jobs.size());
  auto out = cells.run(names, [&](std::size_t i) {
    const auto [alpha, p] = jobs[i];
    const std::string label = cross_label(alpha, c.cfg.cross_level);
    const MatrixWeight& w = c.ws.weight(label);
    const ReducingFamily& v = c.ws.family(label, p);
    const Lambdas calibrated = c.ws.lambdas(label, p);
    const auto [l, tight] = cross_thresholds(c.ws, label, p);
    const GenerationTree g = c.ws.build_tree(label, p, l);
    const MatrixWeight wp = pointwise_power(w, 1.0 / p);
    FunctionGenerator gen(c.cfg.spectra, job_seed(c.cfg.seed, "cross", i));
    std::vector<double> x, y;
    std::string csv;
    for (std::size_t k = 0; k < c.cfg.cross_functions; ++k) {
      const auto blocks = t_blocks(wp, v, gen.next(w.grid(), w.n()), g);
      std::vector<double> diag;
      for (const auto& b : blocks) diag.push_back(cross_integral(b, b, p));
      for (std::size_t a = 0; a < blocks.size(); ++a)
        for (std::size_t b = a + 1; b < blocks.size(); ++b) {
          const double value = cross_integral(blocks[a], blocks[b], p);
          if (!(value > 0.0) || !(diag[a] > 0.0) || !(diag[b] > 0.0)) continue;
          const double normalized = value / std::sqrt(diag[a] * diag[b]);
          x.push_back(static_cast<double>(b - a));
          y.push_back(std::log(normalized));
          csv += csv_row({num(alpha), num(p), std::to_string(k), std::to_string(a + 1), std::to_string(b + 1),
                          num(normalized)});
        }
    }
    csv_parts[i] = std::move(csv);
    json r{{"alpha", alpha},
           {"p", p},
           {"L", c.cfg.cross_level},
           {"lambda1", l.lambda1},
           {"lambda2", l.lambda2},
           {"decay_tight", tight},
           {"calibrated_lambda1", calibrated.lambda1},
           {"calibrated_lambda2", calibrated.lambda2},
           {"calibrated_generations", c.ws.tree(label, p).generations()},
           {"generations", g.generations()},
           {"decay", decay_rows(g)},
           {"functions", c.cfg.cross_functions},
           {"pairs", x.size()}};
    const bool spread = !x.empty() && *std::max_element(x.begin(), x.end()) > *std::min_element(x.begin(), x.end());
    if (x.size() >= 3 && spread) {
      const LinearFit f = fit_line(x, y);
      r["fit"] = fit_json(f);
      r["rate"] = std::exp(f.slope);
      r["rate_high"] = std::exp(f.slope_high);
      r["excludes_one"] = f.slope_high < 0.0;
    } else {
      r["excludes_one"] = false;
      r["note"] = "fewer than three generation pairs at distinct separations";
    }
    return r;
  });
  json rows = json::array();
  std::string csv = "alpha,p,function,j,k,normalized_cross\n";
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!out[i]) continue;
    csv += csv_parts[i];
    rows.push_back(std::move(*out[i]));
  }
  c.files.push_back({"cross.csv", csv});
  return {{"cells", rows}};
}

json exp_mainthm(Context& c, Cells& cells) {
  const auto list = suite_cells(c.cfg);
  std::vector<std::string> csv_parts(list.size());
  auto out = cells.run(cell_names(list), [&](std::size_t i) {
    const auto& [label, p] = list[i];
    const MatrixWeight& w = c.ws.weight(label);
    FunctionGenerator gen(c.cfg.spectra, job_seed(c.cfg.seed, "mainthm", i));
    EquivalenceReport rep =
        mainthm_ratios(w, c.ws.family(label, p), c.ws.characteristic(label, p), p, gen, c.cfg.functions);
    rep.weight = {{"label", label}, {"n", w.n()}, {"d", w.grid().dim()}, {"L", w.grid().finest_level()}};
    std::string csv;
    double identity_dev = 0.0;
    for (const auto& s : rep.samples) {
      csv += csv_row({label, num(p), std::to_string(s.index), to_string(s.spectrum), num(s.weighted), num(s.square),
                      num(s.ratio)});
      identity_dev = std::max(identity_dev, std::abs(s.ratio - 1.0));
    }
    csv_parts[i] = std::move(csv);
    json r = rep.to_json();
    r.erase("samples");
    r["label"] = label;
    r["identity"] = is_identity(w);
    r["max_abs_ratio_minus_one"] = identity_dev;
    r["c1"] = rep.max_ratio / std::pow(rep.characteristic, rep.exponent_direct);
    r["c2"] = rep.max_inverse_ratio / std::pow(rep.characteristic, rep.exponent_inverse);
    return r;
  });
  json rows = json::array();
  std::string csv = "label,p,index,spectrum,weighted,square,ratio\n";
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!out[i]) continue;
    csv += csv_parts[i];
    rows.push_back(std::move(*out[i]));
  }
  c.files.push_back({"mainthm_ratios.csv", csv});
  return {{"cells", rows}};
}

std::string sweep_label(double alpha, int level) { return fmt::format("sweep-a{}-L{}", num(alpha), level); }

json exp_slope(Context& c, Cells& cells) {
  const auto& alphas = c.cfg.sweep_alphas;
  std::vector<std::string> names;
  for (double a : alphas) names.push_back(fmt::format("alpha={}", a));
  auto out = cells.run(names, [&](std::size_t i) {
    const std::string label = sweep_label(alphas[i], c.cfg.sweep_level);
    FunctionGenerator gen(c.cfg.spectra, job_seed(c.cfg.seed, "slope", i));
    const MatrixWeight& w = c.ws.weight(label);
    const EquivalenceReport rep =
        mainthm_ratios(w, c.ws.family(label, 2.0), c.ws.characteristic(label, 2.0), 2.0, gen, c.cfg.functions);
    return json{{"alpha", alphas[i]},
                {"characteristic", rep.characteristic},
                {"max_ratio", rep.max_ratio},
                {"max_inverse_ratio", rep.max_inverse_ratio},
                {"out_of_range", w.out_of_range()}};
  });
  json rows = json::array();
  std::string csv = "alpha,characteristic,max_ratio,max_inverse_ratio\n";
  std::vector<double> x, yd, yi;
  for (auto& r : out) {
    if (!r) continue;
    csv += csv_row({num((*r)["alpha"]), num((*r)["characteristic"]), num((*r)["max_ratio"]),
                    num((*r)["max_inverse_ratio"])});
    x.push_back(std::log((*r)["characteristic"].get<double>()));
    yd.push_back(std::log((*r)["max_ratio"].get<double>()));
    yi.push_back(std::log((*r)["max_inverse_ratio"].get<double>()));
    rows.push_back(std::move(*r));
  }
  c.files.push_back({"slope.csv", csv});
  json result{{"p", 2.0}, {"L", c.cfg.sweep_level}, {"points", rows}};
  if (x.size() >= 3) {
    result["direct"] = fit_json(fit_line(x, yd));
    result["inverse"] = fit_json(fit_line(x, yi));
    result["log10_span"] =
        (*std::max_element(x.begin(), x.end()) - *std::min_element(x.begin(), x.end())) / std::log(10.0);
  }
  return result;
}

std::string sharp_label(const std::string& family, double alpha) { return fmt::format("sharp-{}-a{}", family, num(alpha)); }

json exp_sharpness(Context& c, Cells& cells) {
  std::vector<std::string> labels;
  for (double a : c.cfg.sharpness_alphas) labels.push_back(sharp_label("power", a));
  const std::size_t scalar_count = labels.size();
  for (double a : c.cfg.sharpness_rotating_alphas) labels.push_back(sharp_label("rotating", a));
  auto out = cells.run(labels, [&](std::size_t i) {
    const SharpnessPoint pt = sharpness_point(c.ws.weight(labels[i]), labels[i]);
    return json{{"label", pt.label},
                {"characteristic", pt.characteristic},
                {"max_ratio", pt.max_ratio},
                {"max_inverse_ratio", pt.max_inverse_ratio},
                {"ok", pt.ok},
                {"note", pt.note}};
  });
  std::vector<SharpnessPoint> scalar, rotating;
  std::string csv = "family,label,characteristic,max_ratio,max_inverse_ratio\n";
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!out[i]) continue;
    const json& r = *out[i];
    SharpnessPoint pt{r["label"].get<std::string>(), r["characteristic"].get<double>(), r["max_ratio"].get<double>(),
                      r["max_inverse_ratio"].get<double>(), r["ok"].get<bool>(), r["note"].get<std::string>()};
    const bool is_scalar = i < scalar_count;
    csv += csv_row({is_scalar ? "power" : "rotating", pt.label, num(pt.characteristic), num(pt.max_ratio),
                    num(pt.max_inverse_ratio)});
    (is_scalar ? scalar : rotating).push_back(std::move(pt));
  }
  c.files.push_back({"sharpness.csv", csv});
  const SharpnessReport s = sharpness_fit(std::move(scalar));
  const SharpnessReport r = sharpness_fit(std::move(rotating));
  json scalar_json = s.to_json();
  scalar_json["fitted"] = s.direct.points >= 3;
  json rotating_json = r.to_json();
  rotating_json["fitted"] = r.direct.points >= 3;
  return {{"scalar", scalar_json}, {"rotating", rotating_json}};
}

json exp_apinf(Context& c, Cells& cells) {
  const auto list = suite_cells(c.cfg);
  auto out = cells.run(cell_names(list), [&](std::size_t i) {
    const auto& [label, p] = list[i];
    const MatrixWeight& w = c.ws.weight(label);
    const ReducingFamily& v = c.ws.family(label, p);
    const double pc = conjugate_exponent(p);
    const MatrixWeight dual_weight = pointwise_power(w, 1.0 - pc);
    FunctionGenerator gen(c.cfg.spectra, job_seed(c.cfg.seed, "apinf", i));
    double best = 0.0;
    std::size_t used = 0;
    for (std::size_t k = 0; k < c.cfg.apinf_functions; ++k) {
      const HaarCoefficients f = gen.next(w.grid(), w.n());
      const double rhs = weighted_lp_norm(dual_weight, haar_reconstruct(f), pc);
      if (!(rhs > 0.0)) continue;
      ++used;
      best = std::max(best, dual_square_norm(f, v, p) / rhs);
    }
    return json{{"label", label}, {"p", p}, {"functions", used}, {"c_emp", best}};
  });
  json rows = json::array();
  std::string csv = "label,p,functions,c_emp\n";
  for (auto& r : out) {
    if (!r) continue;
    csv += csv_row({(*r)["label"].get<std::string>(), num((*r)["p"]),
                    std::to_string((*r)["functions"].get<std::size_t>()), num((*r)["c_emp"])});
    rows.push_back(std::move(*r));
  }
  c.files.push_back({"apinf.csv", csv});
  return {{"cells", rows}};
}

using Experiment = json (*)(Context&, Cells&);

Experiment lookup(const std::string& name) {
  static const std::map<std::string, Experiment> table{
      {"transform", exp_transform}, {"reducing", exp_reducing}, {"duality", exp_duality},
      {"stopping", exp_stopping},   {"kp", exp_kp},             {"blocks", exp_blocks},
      {"cross", exp_cross},         {"mainthm", exp_mainthm},   {"slope", exp_slope},
      {"sharpness", exp_sharpness}, {"apinf", exp_apinf}};
  auto it = table.find(name);
  if (it == table.end()) throw ConfigError(fmt::format("unknown experiment '{}'", name));
  return it->second;
}

void register_extra(Workspace& ws, const ExperimentConfig& cfg) {
  for (double a : cfg.cross_alphas) {
    const int level = cfg.cross_level;
    ws.add(cross_label(a, level), [a, level] { return power_weight(a, level); });
  }
  for (double a : cfg.sweep_alphas) {
    const int level = cfg.sweep_level;
    ws.add(sweep_label(a, level), [a, level] { return power_weight(a, level); });
  }
  for (double a : cfg.sharpness_alphas) {
    const int level = cfg.sharpness_level;
    ws.add(sharp_label("power", a), [a, level] { return power_weight(a, level); });
  }
  for (double a : cfg.sharpness_rotating_alphas) {
    WeightFamily f;
    f.kind = FamilyKind::Rotating;
    f.dim = 1;
    f.n = 2;
    f.level = cfg.sharpness_rotating_level;
    f.alpha = a;
    f.omega = cfg.sharpness_rotating_omega;
    ws.add(sharp_label("rotating", a), [f] { return make_weight(f); });
  }
}

}  // namespace

// ---------------------------------------------------------------- public API

RunOutput run_experiments(const ExperimentConfig& cfg, const RunOptions& opts) {
  std::vector<std::string> selected = opts.experiments;
  if (selected.empty()) selected = cfg.experiments;
  if (selected.empty()) selected = experiment_names();
  std::vector<Experiment> runners;
  for (const auto& name : selected) runners.push_back(lookup(name));

  Workspace ws(cfg);
  register_extra(ws, cfg);
  RunOutput run;
  Context ctx{ws, cfg, opts, run.files};
  json experiments = json::object();
  json timing = json::object();
  json failures = json::array();
  for (std::size_t i = 0; i < selected.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    Cells cells(selected[i], opts.workers);
    try {
      experiments[selected[i]] = runners[i](ctx, cells);
    } catch (const std::exception& e) {
      cells.failures().push_back({selected[i], "*", e.what()});
    }
    for (const auto& f : cells.failures())
      failures.push_back({{"experiment", f.experiment}, {"cell", f.cell}, {"error", f.error}});
    timing[selected[i]] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
  run.report = {{"config", cfg.to_json()},
                {"library_version", kLibraryVersion},
                {"experiments", std::move(experiments)},
                {"failures", std::move(failures)},
                {"elapsed_seconds", std::move(timing)}};
  return run;
}

json calibration_report(const ExperimentConfig& cfg, int workers) {
  Workspace ws(cfg);
  const auto list = suite_cells(cfg);
  Cells cells("calibrate", workers);
  auto out = cells.run(cell_names(list), [&](std::size_t i) {
    const auto& [label, p] = list[i];
    const Lambdas l = ws.lambdas(label, p);
    json r{{"label", label}, {"p", p}, {"characteristic", ws.characteristic(label, p)},
           {"lambda1", l.lambda1}, {"lambda2", l.lambda2}};
    if (!cfg.lambdas) {
      const StoppingConstants k = ws.constants(label, p);
      r["c1"] = k.c1;
      r["c2"] = k.c2;
    }
    return r;
  });
  json rows = json::array();
  for (auto& r : out)
    if (r) rows.push_back(std::move(*r));
  json failures = json::array();
  for (const auto& f : cells.failures()) failures.push_back({{"cell", f.cell}, {"error", f.error}});
  return {{"target_decay", cfg.target_decay}, {"weights", rows}, {"failures", failures}};
}

MatrixWeight suite_weight(const ExperimentConfig& cfg, const std::string& label) {
  for (const auto& e : cfg.suite)
    if (e.label == label) return e.family ? make_weight(*e.family) : read_weight(*e.file);
  throw ConfigError(fmt::format("no suite weight labelled '{}'", label));
}

std::string sha256_hex(const std::string& data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &length, EVP_sha256(), nullptr) != 1)
    throw Error("SHA-256 digest failed");
  std::string hex;
  for (unsigned int i = 0; i < length; ++i) hex += fmt::format("{:02x}", digest[i]);
  return hex;
}

void write_run(const RunOutput& run, const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
  std::vector<OutputFile> files = run.files;
  files.push_back({"report.json", run.report.dump(2) + "\n"});
  json listed = json::array();
  for (const auto& f : files) {
    const auto path = out_dir / f.path;
    std::filesystem::create_directories(path.parent_path());
    write_text(path, f.text);
    listed.push_back({{"path", f.path}, {"sha256", sha256_hex(f.text)}, {"bytes", f.text.size()}});
  }
  const std::time_t now = std::time(nullptr);
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  const json manifest{{"experiment_id", cfg.experiment_id},
                      {"schema_version", cfg.schema_version},
                      {"library_version", kLibraryVersion},
                      {"config_sha256", sha256_hex(cfg.to_json().dump())},
                      {"created", stamp},
                      {"files", listed}};
  write_text(out_dir / "manifest.json", manifest.dump(2) + "\n");
}

namespace {

const json* experiment(const json& report, const char* name) {
  const auto& e = report.at("experiments");
  return e.contains(name) ? &e.at(name) : nullptr;
}

int failure_count(const json& report, const std::string& name) {
  int n = 0;
  for (const auto& f : report.at("failures"))
    if (f.at("experiment") == name) ++n;
  return n;
}

// Common shell: missing experiment or failed cells fail the criterion.
template <class Body>
CriterionResult criterion(const json& report, int id, std::string name, const char* exp, std::string bound,
                          Body&& body) {
  CriterionResult r{id, std::move(name), false, "", std::move(bound)};
  const json* e = experiment(report, exp);
  if (!e) {
    r.measured = fmt::format("experiment '{}' did not run", exp);
    return r;
  }
  const int failed = failure_count(report, exp);
  body(*e, r);
  if (failed > 0) {
    r.pass = false;
    r.measured += fmt::format(" ({} failed cells)", failed);
  }
  return r;
}

std::string g(double x) { return fmt::format("{:.4g}", x); }

}  // namespace

std::vector<CriterionResult> evaluate_criteria(const json& report) {
  std::vector<CriterionResult> out;

  out.push_back(criterion(report, 1, "Haar round trip and Parseval", "transform", "<= 1e-10, >= 100 functions per cell",
                          [](const json& e, CriterionResult& r) {
                            const double rt = e["max_roundtrip_error"], pe = e["max_parseval_error"];
                            bool enough = !e["cells"].empty();
                            for (const auto& c : e["cells"]) enough = enough && c["functions"].get<std::size_t>() >= 100;
                            r.measured = fmt::format("round trip {}, Parseval {}", g(rt), g(pe));
                            r.pass = enough && rt <= 1e-10 && pe <= 1e-10;
                          }));

  out.push_back(criterion(report, 2, "p=2 reducing operators match the average square roots", "reducing", "<= 1e-10",
                          [](const json& e, CriterionResult& r) {
                            double err = 0.0;
                            int n = 0;
                            for (const auto& c : e["cells"])
                              if (c.contains("p2_oracle_error")) {
                                err = std::max(err, c["p2_oracle_error"].get<double>());
                                ++n;
                              }
                            r.measured = fmt::format("max error {} over {} weights", g(err), n);
                            r.pass = n > 0 && err <= 1e-10;
                          }));

  out.push_back(criterion(report, 3, "John sandwich at p=3", "reducing",
                          "rho <= |Ve|(1+1e-3), |Ve| <= sqrt(n) rho (1+1e-3), 1000 directions",
                          [](const json& e, CriterionResult& r) {
                            double low = kInf, high = 0.0;
                            int n = 0;
                            bool enough = true;
                            for (const auto& c : e["cells"])
                              if (c["p"].get<double>() == 3.0 && c.contains("sandwich_low")) {
                                low = std::min(low, c["sandwich_low"].get<double>());
                                high = std::max(high, c["sandwich_high"].get<double>());
                                enough = enough && c["sandwich_directions"].get<std::size_t>() >= 1000;
                                ++n;
                              }
                            r.measured = fmt::format("min |Ve|/rho {}, max |Ve|/(sqrt(n) rho) {} over {} weights",
                                                     g(low), g(high), n);
                            r.pass = n > 0 && enough && low * (1.0 + 1e-3) >= 1.0 && high <= 1.0 + 1e-3;
                          }));

  out.push_back(criterion(report, 4, "||V V'|| lower bound", "reducing", ">= 1 - 1e-8",
                          [](const json& e, CriterionResult& r) {
                            double low = kInf;
                            for (const auto& c : e["cells"]) low = std::min(low, c["min_product_norm"].get<double>());
                            r.measured = fmt::format("min {:.12f}", low);
                            r.pass = !e["cells"].empty() && low >= 1.0 - 1e-8;
                          }));

  out.push_back(criterion(report, 5, "characteristic duality", "duality", "log gap <= log kappa^4 per weight",
                          [](const json& e, CriterionResult& r) {
                            int bad = 0;
                            double worst = 0.0;
                            for (const auto& c : e["cells"]) {
                              worst = std::max(worst, c["log_gap"].get<double>());
                              if (!c["within"].get<bool>()) ++bad;
                            }
                            r.measured = fmt::format("max log gap {}, {} weights outside", g(worst), bad);
                            r.pass = !e["cells"].empty() && bad == 0;
                          }));

  out.push_back(criterion(report, 6, "stopping decay with negative control", "stopping",
                          "decay(j) <= 1.05 2^-j for j <= 5; control exceeds it somewhere",
                          [](const json& e, CriterionResult& r) {
                            double worst = 0.0, control = 0.0;
                            for (const auto& c : e["cells"]) {
                              for (const auto& d : c["decay"])
                                if (!d["floor_affected"].get<bool>())
                                  worst = std::max(worst, d["decay"].get<double>() / d["bound"].get<double>());
                              for (const auto& d : c["control_decay"])
                                if (!d["floor_affected"].get<bool>())
                                  control = std::max(control, d["decay"].get<double>() / d["bound"].get<double>());
                            }
                            r.measured = fmt::format("max decay/bound {}, control {}", g(worst), g(control));
                            r.pass = !e["cells"].empty() && worst <= 1.0 && control > 1.0;
                          }));

  out.push_back(criterion(report, 7, "block energy constant stable under re-seeding", "kp",
                          "|C'/C - 1| <= 0.2 per (weight, p), >= 100 functions",
                          [](const json& e, CriterionResult& r) {
                            double worst = 0.0, cmax = 0.0;
                            bool enough = !e["cells"].empty();
                            for (const auto& c : e["cells"]) {
                              worst = std::max(worst, c["relative_change"].get<double>());
                              cmax = std::max(cmax, c["c_emp"].get<double>());
                              enough = enough && c["functions"].get<std::size_t>() >= 100;
                            }
                            r.measured = fmt::format("max C_emp {}, max relative change {}", g(cmax), g(worst));
                            r.pass = enough && std::isfinite(cmax) && worst <= 0.2;
                          }));

  out.push_back(criterion(report, 8, "block identities", "blocks", "sum <= 1e-9, T_j Delta_j <= 1e-10",
                          [](const json& e, CriterionResult& r) {
                            double s = 0.0, d = 0.0;
                            for (const auto& c : e["cells"]) {
                              s = std::max(s, c["sum_error"].get<double>());
                              d = std::max(d, c["delta_error"].get<double>());
                            }
                            r.measured = fmt::format("sum {}, restriction {}", g(s), g(d));
                            r.pass = !e["cells"].empty() && s <= 1e-9 && d <= 1e-10;
                          }));

  out.push_back(criterion(report, 9, "cross-term geometric decay", "cross", "95% CI of the rate below 1",
                          [](const json& e, CriterionResult& r) {
                            int bad = 0;
                            std::string rates;
                            for (const auto& c : e["cells"]) {
                              if (!c["excludes_one"].get<bool>()) ++bad;
                              if (c.contains("rate"))
                                rates += fmt::format("{}a={},p={}: {} (<{})", rates.empty() ? "" : "; ",
                                                     g(c["alpha"]), g(c["p"]), g(c["rate"]), g(c["rate_high"]));
                            }
                            r.measured = rates.empty() ? "no fits" : rates;
                            r.pass = !e["cells"].empty() && bad == 0;
                          }));

  out.push_back(criterion(report, 10, "two-sided equivalence with suite-uniform constants", "mainthm",
                          "C1, C2 <= 10 per p; identity at p=2 within 1e-10",
                          [](const json& e, CriterionResult& r) {
                            std::map<double, std::pair<double, double>> per_p;
                            double id_dev = -1.0;
                            for (const auto& c : e["cells"]) {
                              auto& [c1, c2] = per_p[c["p"].get<double>()];
                              c1 = std::max(c1, c["c1"].get<double>());
                              c2 = std::max(c2, c["c2"].get<double>());
                              if (c["identity"].get<bool>() && c["p"].get<double>() == 2.0)
                                id_dev = std::max(id_dev, c["max_abs_ratio_minus_one"].get<double>());
                            }
                            bool ok = !per_p.empty() && id_dev >= 0.0 && id_dev <= 1e-10;
                            for (const auto& [p, cc] : per_p) {
                              r.measured += fmt::format("p={}: C1 {}, C2 {}; ", g(p), g(cc.first), g(cc.second));
                              ok = ok && cc.first <= 10.0 && cc.second <= 10.0;
                            }
                            r.measured += id_dev >= 0.0 ? fmt::format("identity dev {}", g(id_dev)) : "no identity weight";
                            r.pass = ok;
                          }));

  out.push_back(criterion(report, 11, "p=2 slopes over the power sweep", "slope",
                          "span >= 2 decades, slopes <= 1.6 and <= 2.1", [](const json& e, CriterionResult& r) {
                            if (!e.contains("direct")) {
                              r.measured = "too few sweep points";
                              return;
                            }
                            const double span = e["log10_span"], sd = e["direct"]["slope"], si = e["inverse"]["slope"];
                            r.measured = fmt::format("span {} decades, slopes {} / {}", g(span), g(sd), g(si));
                            r.pass = span >= 2.0 && sd <= 1.6 && si <= 2.1;
                          }));

  out.push_back(criterion(report, 11, "scalar sharp slopes from the sharpness probe", "sharpness",
                          "0.5 +- 0.15 and 1 +- 0.15", [](const json& e, CriterionResult& r) {
                            const json& s = e["scalar"];
                            if (!s["fitted"].get<bool>()) {
                              r.measured = "too few points";
                              return;
                            }
                            const double sd = s["direct"]["slope"], si = s["inverse"]["slope"];
                            r.measured = fmt::format("slopes {} / {}", g(sd), g(si));
                            r.pass = std::abs(sd - 0.5) <= 0.15 && std::abs(si - 1.0) <= 0.15;
                          }));

  out.push_back(criterion(report, 12, "dual square function bound", "apinf", "C_emp <= 10 per p, >= 50 functions",
                          [](const json& e, CriterionResult& r) {
                            std::map<double, double> per_p;
                            bool enough = !e["cells"].empty();
                            for (const auto& c : e["cells"]) {
                              auto& m = per_p[c["p"].get<double>()];
                              m = std::max(m, c["c_emp"].get<double>());
                              enough = enough && c["functions"].get<std::size_t>() >= 50;
                            }
                            bool ok = enough;
                            for (const auto& [p, m] : per_p) {
                              r.measured += fmt::format("p={}: C {}; ", g(p), g(m));
                              ok = ok && m <= 10.0;
                            }
                            r.pass = ok;
                          }));
  return out;
}

namespace {

std::map<std::string, std::string> csv_bodies(const RunOutput& run) {
  std::map<std::string, std::string> out;
  for (const auto& f : run.files)
    if (f.path.ends_with(".csv")) out[f.path] = f.text;
  return out;
}

}  // namespace

CriterionResult determinism_criterion(const RunOutput& first, const RunOutput& second) {
  const auto a = csv_bodies(first);
  const auto b = csv_bodies(second);
  std::vector<std::string> differing;
  for (const auto& [path, text] : a) {
    auto it = b.find(path);
    if (it == b.end() || it->second != text) differing.push_back(path);
  }
  for (const auto& [path, text] : b)
    if (!a.count(path)) differing.push_back(path);
  CriterionResult r{13, "byte-identical CSV bodies across two runs", differing.empty() && !a.empty(), "",
                    "identical bytes"};
  r.measured = differing.empty() ? fmt::format("{} CSV files identical", a.size())
                                 : fmt::format("{} files differ, first {}", differing.size(), differing.front());
  return r;
}

void print_criteria(const std::vector<CriterionResult>& results, std::ostream& log) {
  for (const auto& r : results)
    log << fmt::format("[{}] {:>2} {} | measured: {} | bound: {}\n", r.pass ? "PASS" : "FAIL", r.id, r.name,
                       r.measured, r.bound);
}

int verify(const ExperimentConfig& cfg, const std::filesystem::path& out_dir, int workers, std::ostream& log) {
  RunOptions opts;
  opts.experiments = experiment_names();
  opts.workers = workers;
  const RunOutput first = run_experiments(cfg, opts);
  write_run(first, cfg, out_dir);
  const RunOutput second = run_experiments(cfg, opts);
  auto results = evaluate_criteria(first.report);
  results.push_back(determinism_criterion(first, second));
  print_criteria(results, log);
  int failed = 0;
  for (const auto& r : results)
    if (!r.pass) ++failed;
  for (const auto& f : first.report.at("failures"))
    log << fmt::format("failure in {} [{}]: {}\n", f["experiment"].get<std::string>(), f["cell"].get<std::string>(),
                       f["error"].get<std::string>());
  log << fmt::format("{} of {} criteria failed\n", failed, results.size());
  return failed;
}

int default_workers() {
  const char* env = std::getenv("HAARWEIGHT_WORKERS");
  if (!env) return 1;
  try {
    const int n = std::stoi(env);
    return n >= 1 ? n : 1;
  } catch (const std::exception&) {
    return 1;
  }
}

}  // namespace haarweight
