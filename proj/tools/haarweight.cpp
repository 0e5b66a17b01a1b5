// Command-line front end: run, verify, calibrate, dump-weight, dump-stopping.

#include <iostream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "haarweight/errors.hpp"
#include "haarweight/harness.hpp"
#include "haarweight/io.hpp"

namespace {

using namespace haarweight;

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  int workers = default_workers();
  std::string out;
};

void add_common(CLI::App* app, Common& c, bool with_out) {
  app->add_option("--config", c.config, "JSON configuration (desk defaults when omitted)");
  app->add_option("--seed", c.seed, "Override the configured seed");
  app->add_option("--workers", c.workers, "Worker threads (default HAARWEIGHT_WORKERS or 1)")->check(CLI::PositiveNumber);
  if (with_out) app->add_option("--out", c.out, "Output directory (default: configured output_dir)");
}

ExperimentConfig load(const Common& c) {
  ExperimentConfig cfg = c.config.empty() ? default_config() : ExperimentConfig::load(c.config);
  if (c.seed) cfg.seed = *c.seed;
  return cfg;
}

std::filesystem::path out_dir(const Common& c, const ExperimentConfig& cfg) {
  return c.out.empty() ? cfg.output_dir : std::filesystem::path(c.out);
}

int report_run(const RunOutput& run, const std::filesystem::path& dir) {
  const auto& failures = run.report.at("failures");
  for (const auto& f : failures)
    std::cerr << fmt::format("failure in {} [{}]: {}\n", f["experiment"].get<std::string>(),
                             f["cell"].get<std::string>(), f["error"].get<std::string>());
  std::cout << fmt::format("wrote {} files to {} ({} failed cells)\n", run.files.size() + 2, dir.string(),
                           failures.size());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Matrix-weighted Haar square function experiments"};
  app.require_subcommand(1);

  Common run_opts;
  std::vector<std::string> experiments;
  bool dump_stopping = false;
  auto* run = app.add_subcommand("run", "Run experiments and write reports, CSV tables and a manifest");
  add_common(run, run_opts, true);
  run->add_option("--experiment", experiments, "Experiment to run (repeatable; default all)")
      ->check(CLI::IsMember(experiment_names()));
  run->add_flag("--dump-stopping", dump_stopping, "Write the generation tree of every stopping cell");

  Common verify_opts;
  auto* verify_cmd = app.add_subcommand("verify", "Run the acceptance checks and print the criteria table");
  add_common(verify_cmd, verify_opts, true);

  Common cal_opts;
  auto* calibrate = app.add_subcommand("calibrate", "Print calibrated stopping thresholds for every suite weight");
  add_common(calibrate, cal_opts, false);

  Common dw_opts;
  std::string label;
  std::string file;
  auto* dump_weight = app.add_subcommand("dump-weight", "Write one suite weight to a CSV or .bin file");
  add_common(dump_weight, dw_opts, false);
  dump_weight->add_option("--label", label, "Suite label")->required();
  dump_weight->add_option("--file", file, "Destination (.bin selects the binary format)")->required();

  Common ds_opts;
  auto* dump_stop = app.add_subcommand("dump-stopping", "Write the generation trees of every suite weight");
  add_common(dump_stop, ds_opts, true);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      const ExperimentConfig cfg = load(run_opts);
      RunOptions opts{experiments, dump_stopping, run_opts.workers};
      const RunOutput out = run_experiments(cfg, opts);
      write_run(out, cfg, out_dir(run_opts, cfg));
      return report_run(out, out_dir(run_opts, cfg));
    }
    if (*verify_cmd) {
      const ExperimentConfig cfg = load(verify_opts);
      return verify(cfg, out_dir(verify_opts, cfg), verify_opts.workers, std::cout) == 0 ? 0 : 1;
    }
    if (*calibrate) {
      std::cout << calibration_report(load(cal_opts), cal_opts.workers).dump(2) << "\n";
      return 0;
    }
    if (*dump_weight) {
      write_weight(suite_weight(load(dw_opts), label), file);
      return 0;
    }
    if (*dump_stop) {
      const ExperimentConfig cfg = load(ds_opts);
      const RunOutput out = run_experiments(cfg, {{"stopping"}, true, ds_opts.workers});
      write_run(out, cfg, out_dir(ds_opts, cfg));
      return report_run(out, out_dir(ds_opts, cfg));
    }
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const MatrixDomainError& e) {
    std::cerr << "matrix domain error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
