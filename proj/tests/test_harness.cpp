#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <sstream>

#include "haarweight/errors.hpp"
#include "haarweight/harness.hpp"
#include "haarweight/io.hpp"

using namespace haarweight;
using nlohmann::json;

namespace {

std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "haarweight_harness_tests" / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

// A seconds-scale configuration exercising every experiment.
json small_config() {
  return json::parse(R"({
    "schema_version": 1,
    "experiment_id": "small",
    "seed": 7,
    "functions": 100,
    "transform_cells": [[1, 3], [2, 2]],
    "block_functions": 3,
    "cross_alphas": [0.5],
    "cross_level": 6,
    "cross_functions": 10,
    "sweep_alphas": [0, 0.5, 1, 1.5],
    "sweep_level": 6,
    "sharpness_alphas": [0, -0.3, -0.6],
    "sharpness_level": 5,
    "sharpness_rotating_alphas": [],
    "suite": [
      {"label": "id", "family": "constant", "d": 1, "n": 2, "L": 5},
      {"label": "pow", "family": "power", "d": 1, "n": 1, "L": 5, "alpha": 0.5},
      {"label": "blk", "family": "block_random", "d": 1, "n": 2, "L": 5, "sigma": 0.5, "seed": 3}
    ]
  })");
}

std::map<std::string, std::string> csv_files(const RunOutput& run) {
  std::map<std::string, std::string> out;
  for (const auto& f : run.files)
    if (f.path.ends_with(".csv")) out[f.path] = f.text;
  return out;
}

const CriterionResult& find(const std::vector<CriterionResult>& r, int id) {
  for (const auto& c : r)
    if (c.id == id) return c;
  throw std::logic_error("criterion not evaluated");
}

}  // namespace

TEST_CASE("default configuration survives a JSON round trip") {
  const ExperimentConfig cfg = default_config();
  CHECK(cfg.suite.size() == 11);
  const ExperimentConfig back = ExperimentConfig::from_json(cfg.to_json());
  CHECK(back.to_json() == cfg.to_json());
}

TEST_CASE("configuration diagnostics list every problem") {
  json j = small_config();
  j["p"] = json::array({1.0, 3.0});
  j["bogus"] = 1;
  j["spectra"] = json::array({"flat", "pink"});
  j["experiments"] = json::array({"nope"});
  try {
    ExperimentConfig::from_json(j);
    FAIL("expected a configuration error");
  } catch (const ConfigError& e) {
    const std::string what = e.what();
    CHECK(what.find("p: 1") != std::string::npos);
    CHECK(what.find("unknown key 'bogus'") != std::string::npos);
    CHECK(what.find("pink") != std::string::npos);
    CHECK(what.find("unknown experiment 'nope'") != std::string::npos);
  }

  json missing = small_config();
  missing.erase("schema_version");
  CHECK_THROWS_AS(ExperimentConfig::from_json(missing), ConfigError);
  json future = small_config();
  future["schema_version"] = 2;
  CHECK_THROWS_AS(ExperimentConfig::from_json(future), ConfigError);
  json dup = small_config();
  dup["suite"][1]["label"] = "id";
  CHECK_THROWS_AS(ExperimentConfig::from_json(dup), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json(json::array()), ConfigError);
}

TEST_CASE("a non-PD weight file fails at load with a matrix domain error") {
  const auto dir = scratch_dir("bad_weight");
  write_text(dir / "bad.csv",
             "# weight {\"d\":1,\"n\":2,\"L\":1}\ncell,a00,a10,a11\n0,1,0,1\n1,1,3,1\n");
  json j = small_config();
  j["suite"] = json::array({{{"label", "bad"}, {"file", "bad.csv"}}});
  write_text(dir / "config.json", j.dump());
  CHECK_THROWS_AS(ExperimentConfig::load(dir / "config.json"), MatrixDomainError);
}

TEST_CASE("weight files relative to the configuration are loaded") {
  const auto dir = scratch_dir("file_weight");
  const DyadicGrid grid(1, 4);
  write_weight(MatrixWeight::identity(grid, 2), dir / "id.bin");
  json j = small_config();
  j["suite"] = json::array({{{"label", "file-id"}, {"file", "id.bin"}}});
  write_text(dir / "config.json", j.dump());
  const ExperimentConfig cfg = ExperimentConfig::load(dir / "config.json");
  CHECK(suite_weight(cfg, "file-id").n() == 2);
  CHECK_THROWS_AS(suite_weight(cfg, "missing"), ConfigError);
}

TEST_CASE("runs are identical for any worker count") {
  const ExperimentConfig cfg = ExperimentConfig::from_json(small_config());
  const RunOutput serial = run_experiments(cfg, {{}, false, 1});
  const RunOutput pooled = run_experiments(cfg, {{}, false, 3});
  CHECK(serial.report["failures"].empty());
  const auto a = csv_files(serial);
  CHECK(a.size() == 11);
  CHECK(a == csv_files(pooled));
  CHECK(determinism_criterion(serial, pooled).pass);

  SUBCASE("the small configuration meets the calibrated criteria") {
    const auto results = evaluate_criteria(serial.report);
    for (int id : {1, 2, 3, 4, 5, 6, 7, 8, 10, 12}) {
      INFO("criterion " << id << ": " << find(results, id).measured);
      CHECK(find(results, id).pass);
    }
  }
}

TEST_CASE("the mainthm experiment writes one ratio row per function") {
  const ExperimentConfig cfg = ExperimentConfig::from_json(small_config());
  const RunOutput run = run_experiments(cfg, {{"mainthm"}, false, 1});
  const auto files = csv_files(run);
  REQUIRE(files.count("mainthm_ratios.csv") == 1);
  const std::string& csv = files.at("mainthm_ratios.csv");
  CHECK(csv.starts_with("label,p,index,spectrum,weighted,square,ratio\n"));
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 3 * 2 * 100);
  CHECK(run.report["experiments"].size() == 1);
}

TEST_CASE("negative control thresholds fail the decay criterion") {
  json j = small_config();
  j["lambdas"] = {{"lambda1", 1.0001}, {"lambda2", 1.0001}};
  const ExperimentConfig cfg = ExperimentConfig::from_json(j);
  const RunOutput run = run_experiments(cfg, {{"stopping"}, false, 1});
  const auto results = evaluate_criteria(run.report);
  CHECK_FALSE(find(results, 6).pass);

  const RunOutput calibrated = run_experiments(ExperimentConfig::from_json(small_config()), {{"stopping"}, false, 1});
  CHECK(find(evaluate_criteria(calibrated.report), 6).pass);
}

TEST_CASE("missing experiments fail their criteria") {
  const RunOutput run = run_experiments(ExperimentConfig::from_json(small_config()), {{"transform"}, false, 1});
  const auto results = evaluate_criteria(run.report);
  CHECK(find(results, 1).pass);
  CHECK_FALSE(find(results, 2).pass);
  CHECK(find(results, 2).measured.find("did not run") != std::string::npos);
}

TEST_CASE("one broken weight is isolated to its cells") {
  const auto dir = scratch_dir("isolation");
  const DyadicGrid grid(1, 4);
  write_weight(MatrixWeight::identity(grid, 1), dir / "gone.csv");
  json j = small_config();
  j["suite"].push_back({{"label", "gone"}, {"file", "gone.csv"}});
  write_text(dir / "config.json", j.dump());
  const ExperimentConfig cfg = ExperimentConfig::load(dir / "config.json");
  std::filesystem::remove(dir / "gone.csv");
  const RunOutput run = run_experiments(cfg, {{"reducing", "apinf"}, false, 2});
  const auto& failures = run.report["failures"];
  CHECK(failures.size() == 4);
  for (const auto& f : failures) CHECK(f["cell"].get<std::string>().starts_with("gone"));
  CHECK(run.report["experiments"]["reducing"]["cells"].size() == 6);
}

TEST_CASE("write_run hashes every file in the manifest") {
  const auto dir = scratch_dir("manifest");
  const ExperimentConfig cfg = ExperimentConfig::from_json(small_config());
  const RunOutput run = run_experiments(cfg, {{"stopping", "kp"}, true, 1});
  write_run(run, cfg, dir);
  const json manifest = json::parse(read_text(dir / "manifest.json"));
  CHECK(manifest["library_version"] == kLibraryVersion);
  CHECK(manifest["config_sha256"] == sha256_hex(cfg.to_json().dump()));
  CHECK(manifest["files"].size() == run.files.size() + 1);
  bool saw_dump = false;
  for (const auto& f : manifest["files"]) {
    const std::string path = f["path"];
    CHECK(sha256_hex(read_text(dir / path)) == f["sha256"].get<std::string>());
    saw_dump = saw_dump || path.starts_with("stopping/");
  }
  CHECK(saw_dump);
  CHECK(std::filesystem::exists(dir / "stopping" / "pow_p2.json"));
  const json tree = json::parse(read_text(dir / "stopping" / "pow_p3.json"));
  CHECK(tree.contains("generations"));
}

TEST_CASE("sha256 of known strings") {
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("calibration report covers every suite cell") {
  const json r = calibration_report(ExperimentConfig::from_json(small_config()), 2);
  CHECK(r["weights"].size() == 6);
  for (const auto& w : r["weights"]) {
    CHECK(w["lambda1"].get<double>() >= 4.0);
    CHECK(w["lambda2"].get<double>() >= 4.0);
  }
}

TEST_CASE("worker count from the environment") {
  setenv("HAARWEIGHT_WORKERS", "3", 1);
  CHECK(default_workers() == 3);
  setenv("HAARWEIGHT_WORKERS", "zero", 1);
  CHECK(default_workers() == 1);
  setenv("HAARWEIGHT_WORKERS", "-2", 1);
  CHECK(default_workers() == 1);
  unsetenv("HAARWEIGHT_WORKERS");
  CHECK(default_workers() == 1);
}

TEST_CASE("criteria table lines") {
  std::ostringstream out;
  print_criteria({{1, "x", true, "m", "b"}, {2, "y", false, "m2", "b2"}}, out);
  CHECK(out.str() == "[PASS]  1 x | measured: m | bound: b\n[FAIL]  2 y | measured: m2 | bound: b2\n");
}
