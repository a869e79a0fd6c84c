#include <cstdint>
#include <iostream>
#include <vector>

#include <CLI11.hpp>

#include "explab/harness.hpp"

int main(int argc, char** argv) {
  CLI::App app{"exploration lab: run experiments, suites and reports"};
  app.require_subcommand(1);

  std::string config_path, out, suite, metrics_dir, suite_out = "results";
  std::vector<std::uint64_t> seeds;
  int jobs = 1;
  bool wall_time = false, svg = false, verbose = false;

  auto* run = app.add_subcommand("run", "run one configured experiment");
  run->add_option("--config", config_path, "experiment configuration (JSON)")->required();
  run->add_option("--seed", seeds, "seed(s) overriding the configured list");
  run->add_option("--out", out, "output directory overriding the configured one");
  run->add_option("--jobs", jobs, "parallel runs")->check(CLI::PositiveNumber);
  run->add_flag("--wall-time", wall_time, "record real wall-clock seconds (not reproducible)");
  run->add_flag("-v,--verbose", verbose, "log each finished run");

  auto* suite_cmd = app.add_subcommand("suite", "run a predefined experiment matrix");
  suite_cmd->add_option("name", suite, "suite name")
      ->required()
      ->check(CLI::IsMember(explab::suite_names()));
  suite_cmd->add_option("--out", suite_out, "output root");
  suite_cmd->add_option("--seed", seeds, "seed(s) overriding the default 0..4");
  suite_cmd->add_option("--jobs", jobs, "parallel runs")->check(CLI::PositiveNumber);
  suite_cmd->add_flag("--wall-time", wall_time, "record real wall-clock seconds (not reproducible)");
  suite_cmd->add_flag("-v,--verbose", verbose, "log each finished run");

  auto* report = app.add_subcommand("report", "summarize a directory of metrics files");
  report->add_option("metrics_dir", metrics_dir, "directory with <arm>_seed<k>.csv files")->required();
  report->add_option("--out", out, "report directory (default: metrics_dir)");
  report->add_flag("--svg", svg, "also write one SVG plot per metric");

  CLI11_PARSE(app, argc, argv);

  explab::RunOptions opts;
  opts.wall_time = wall_time;
  opts.quiet = !verbose;
  try {
    if (*run) {
      explab::ExperimentConfig cfg = explab::load_config(config_path);
      if (!seeds.empty()) cfg.seeds = seeds;
      if (!out.empty()) cfg.output = out;
      cfg.validate();
      const int failed = explab::run_experiment(cfg, jobs, std::cerr, opts);
      return failed ? 1 : 0;
    }
    if (*suite_cmd) {
      const int failed = explab::run_suite(suite, suite_out, jobs, std::cerr, seeds, opts);
      if (failed) std::cerr << failed << " run(s) failed\n";
      return failed ? 1 : 0;
    }
    if (*report) {
      return explab::write_report(metrics_dir, out.empty() ? metrics_dir : out, svg, std::cout);
    }
  } catch (const explab::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
