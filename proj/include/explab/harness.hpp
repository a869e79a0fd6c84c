#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "explab/agents.hpp"

namespace explab {

/// One experiment: an (environment, agent) pair run for a number of
/// episodes under each seed.
struct ExperimentConfig {
  std::string name = "experiment";  // file stem for outputs
  std::string env = "gridworld";
  std::string variant = "reward_free";
  std::string agent = "deep";
  AgentConfig agent_config;
  int episodes = 100;
  std::vector<std::uint64_t> seeds{0};
  std::string output = "results";

  /// Throws ConfigError naming the field.
  void validate() const;
  bool operator==(const ExperimentConfig&) const = default;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Strict parse of the JSON configuration document. Unknown keys and type
/// mismatches raise ConfigError with the dotted field path; syntax errors
/// carry the line and column.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Fully resolved configuration including every default.
std::string echo_config(const ExperimentConfig& cfg);

// ------------------------------------------------------------- metrics file

inline constexpr const char* kMetricsHeader =
    "episode,env_steps,eval_return,train_return,coverage,wall_time_s";

/// Locale-independent shortest round-trip formatting; NaN prints as "nan".
std::string format_number(double v);

void write_metrics_header(std::ostream& out);
void write_metrics_row(std::ostream& out, const RunRecord& r, bool wall_time);

/// Parses a metrics file. Throws std::runtime_error on a header mismatch
/// or malformed row.
std::vector<RunRecord> read_metrics(std::istream& in);

// ---------------------------------------------------------------- running

struct RunOptions {
  bool wall_time = false;  // record real timings (breaks byte identity)
  bool quiet = true;
};

/// Resolves the output directory, honoring EXPLAB_OUTPUT_ROOT for relative
/// paths.
std::filesystem::path output_dir(const ExperimentConfig& cfg);

std::filesystem::path metrics_path(const ExperimentConfig& cfg, std::uint64_t seed);

/// Runs one seed and writes its metrics file. Returns the records.
std::vector<RunRecord> run_experiment_seed(const ExperimentConfig& cfg, std::uint64_t seed,
                                           const RunOptions& opts = {});

/// Writes the config echo and runs every seed; up to `jobs` runs in
/// parallel. Returns the number of failed runs (diagnostics go to `log`).
int run_experiment(const ExperimentConfig& cfg, int jobs, std::ostream& log,
                   const RunOptions& opts = {});

// ----------------------------------------------------------------- suites

std::vector<std::string> suite_names();

/// The experiment matrix of a named suite. `output` is the suite's root
/// directory; seeds default to 0..4.
std::vector<ExperimentConfig> suite_experiments(const std::string& suite,
                                                const std::string& output,
                                                std::vector<std::uint64_t> seeds = {});

/// Runs a whole suite (all arms, all seeds). Returns the number of failed
/// runs.
int run_suite(const std::string& suite, const std::string& output, int jobs, std::ostream& log,
              std::vector<std::uint64_t> seeds = {}, const RunOptions& opts = {});

// ----------------------------------------------------------------- report

/// Per-arm metric curves: arm -> seed -> records.
using ArmRuns = std::map<std::string, std::map<std::uint64_t, std::vector<RunRecord>>>;

/// Reads every `<arm>_seed<k>.csv` under `dir`. Throws on an empty
/// directory or an unknown header.
ArmRuns read_metrics_dir(const std::filesystem::path& dir);

struct SummaryRow {
  std::string arm;
  int episode = 0;
  std::string metric;
  double mean = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  int n = 0;
};

/// Mean and normal-approximation 95% interval over seeds, per arm, episode
/// and metric. NaN values (episodes without evaluation) are skipped; a
/// single sample yields a degenerate interval.
std::vector<SummaryRow> summarize(const ArmRuns& runs);

struct OrderingCheck {
  std::string name;
  bool pass = false;
  std::string detail;
};

/// Orderings checked on whichever arms of the known suites are present.
std::vector<OrderingCheck> ordering_checks(const ArmRuns& runs);

// Individual checks (also used by the acceptance suite).
OrderingCheck check_pure_exploration(const ArmRuns& runs);
OrderingCheck check_warmstart(const ArmRuns& runs);
OrderingCheck check_local_optimum(const ArmRuns& runs, double far_goal_max);
OrderingCheck check_adversarial(const ArmRuns& runs, int budget);

/// Writes summary.csv, checks.txt and (optionally) one SVG per metric.
/// Returns 0 when every present check passes.
int write_report(const std::filesystem::path& dir, const std::filesystem::path& out, bool svg,
                 std::ostream& log);

}  // namespace explab
