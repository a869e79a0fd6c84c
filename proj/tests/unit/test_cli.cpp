#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "explab/harness.hpp"

using namespace explab;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("explab_test_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int cli(const std::string& args) {
  const std::string cmd = std::string(EXPLAB_CLI) + " " + args + " > /dev/null 2>&1";
  const int st = std::system(cmd.c_str());
  return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

void write_csv(const fs::path& p, const std::vector<RunRecord>& rows) {
  std::ofstream out(p, std::ios::binary);
  write_metrics_header(out);
  for (const auto& r : rows) write_metrics_row(out, r, false);
}

RunRecord rec(int ep, double eval, double train, std::int64_t cov) {
  RunRecord r;
  r.episode = ep;
  r.env_steps = std::uint64_t(200 * ep);
  r.eval_return = eval;
  r.train_return = train;
  r.coverage = cov;
  return r;
}

}  // namespace

TEST_CASE("config echo parses back to the same config") {
  ExperimentConfig c;
  c.name = "rt";
  c.agent = "bbe";
  c.agent_config.fast_adapt = true;
  c.agent_config.optimism_c = 0.25;
  c.agent_config.explore_q = "tabular";
  c.seeds = {3, 1, 4};
  c.episodes = 7;
  CHECK(parse_config(echo_config(c)) == c);
  CHECK(parse_config(echo_config(ExperimentConfig{})) == ExperimentConfig{});
}

TEST_CASE("config errors name the field or the location") {
  CHECK_THROWS_WITH_AS(parse_config(R"({"agent":{"name":"sac"}})"), doctest::Contains("agent.name"),
                       ConfigError);
  CHECK_THROWS_WITH_AS(parse_config(R"({"agent":{"config":{"tau_tsk":0.1}}})"),
                       doctest::Contains("agent.config.tau_tsk"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config(R"({"episodes":"ten"})"), doctest::Contains("episodes"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config("{\n  \"episodes\": 3,\n  oops\n}"), doctest::Contains("line 3"),
                       ConfigError);
  CHECK_THROWS_WITH_AS(parse_config(R"({"agent":{"config":{"gamma":1.5}}})"), doctest::Contains("gamma"),
                       ConfigError);
}

TEST_CASE("cli: unknown agent exits nonzero; uniform run writes 10 zero-eval rows") {
  const fs::path dir = scratch("run");
  {
    std::ofstream(dir / "bad.json") << R"({"agent":{"name":"sac"}})";
    std::ofstream(dir / "u.json") << R"({"name":"u","env":{"name":"gridworld","variant":"reward_free"},)"
                                  << R"("agent":{"name":"uniform"},"episodes":10,"seeds":[0],)"
                                  << R"("output":")" << (dir / "out").string() << R"("})";
  }
  CHECK(cli("run --config " + (dir / "bad.json").string()) != 0);
  REQUIRE(cli("run --config " + (dir / "u.json").string()) == 0);
  std::ifstream in(dir / "out" / "u_seed0.csv");
  const auto rows = read_metrics(in);
  REQUIRE(rows.size() == 10);
  for (const auto& r : rows) CHECK(r.eval_return == 0.0);
  CHECK(fs::exists(dir / "out" / "u.config.json"));
}

TEST_CASE("cli: unwritable output exits nonzero") {
  const fs::path dir = scratch("unwritable");
  std::ofstream(dir / "blocker") << "file, not a directory";
  std::ofstream(dir / "c.json") << R"({"agent":{"name":"uniform"},"episodes":1,"output":")"
                                << (dir / "blocker" / "sub").string() << R"("})";
  CHECK(cli("run --config " + (dir / "c.json").string()) != 0);
}

TEST_CASE("same config and seed rerun to identical bytes") {
  const fs::path dir = scratch("rerun");
  ExperimentConfig c;
  c.name = "d";
  c.agent = "deep";
  c.agent_config.hidden = 16;
  c.agent_config.explore_batch = 16;
  c.agent_config.task_batch = 16;
  c.episodes = 3;
  c.output = (dir / "a").string();
  run_experiment_seed(c, 2);
  c.output = (dir / "b").string();
  run_experiment_seed(c, 2);
  CHECK(slurp(dir / "a" / "d_seed2.csv") == slurp(dir / "b" / "d_seed2.csv"));
  CHECK(slurp(dir / "a" / "d_seed2.csv").size() > 100);
}

TEST_CASE("metrics rows round-trip; unknown headers are rejected") {
  std::stringstream ss;
  write_metrics_header(ss);
  RunRecord r = rec(3, std::nan(""), 0.5, 17);
  write_metrics_row(ss, r, false);
  const auto back = read_metrics(ss);
  REQUIRE(back.size() == 1);
  CHECK(std::isnan(back[0].eval_return));
  CHECK(back[0].train_return == 0.5);
  CHECK(back[0].coverage == 17);
  std::stringstream bad("episode,steps,eval\n1,2,3\n");
  CHECK_THROWS(read_metrics(bad));
}

TEST_CASE("report: means match a hand computation; n=1 flag; identical arms; empty dir") {
  const fs::path dir = scratch("report");
  write_csv(dir / "a_seed0.csv", {rec(1, 0.0, 1.0, 10), rec(2, 1.0, 2.0, 20)});
  write_csv(dir / "a_seed1.csv", {rec(1, 0.5, 3.0, 30), rec(2, 0.5, 4.0, 40)});
  write_csv(dir / "a_seed2.csv", {rec(1, 1.0, 5.0, 50), rec(2, 0.0, 6.0, 60)});
  write_csv(dir / "b_seed0.csv", {rec(1, 0.25, 1.0, 7)});
  const auto rows = summarize(read_metrics_dir(dir));
  auto find = [&](const std::string& arm, int ep, const std::string& m) {
    for (const auto& r : rows) {
      if (r.arm == arm && r.episode == ep && r.metric == m) return r;
    }
    FAIL("missing row");
    return SummaryRow{};
  };
  const auto cov = find("a", 2, "coverage");
  CHECK(cov.mean == 40.0);
  CHECK(cov.n == 3);
  // sd = 20, half width = 1.96 * 20 / sqrt(3)
  CHECK(cov.ci_high - cov.mean == doctest::Approx(1.96 * 20.0 / std::sqrt(3.0)).epsilon(1e-12));
  CHECK(find("a", 1, "train_return").mean == 3.0);
  CHECK(find("a", 1, "eval_return").mean == 0.5);
  const auto single = find("b", 1, "eval_return");
  CHECK(single.n == 1);
  CHECK(single.ci_low == 0.25);
  CHECK(single.ci_high == 0.25);

  const fs::path twin = scratch("twin");
  write_csv(twin / "x_seed0.csv", {rec(1, 0.1, 0.2, 3), rec(2, 0.4, 0.5, 6)});
  write_csv(twin / "y_seed0.csv", {rec(1, 0.1, 0.2, 3), rec(2, 0.4, 0.5, 6)});
  std::vector<SummaryRow> xs, ys;
  for (const auto& r : summarize(read_metrics_dir(twin))) (r.arm == "x" ? xs : ys).push_back(r);
  REQUIRE(xs.size() == ys.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    CHECK(xs[i].mean == ys[i].mean);
    CHECK(xs[i].ci_low == ys[i].ci_low);
    CHECK(xs[i].metric == ys[i].metric);
  }

  const fs::path empty = scratch("empty");
  CHECK_THROWS(read_metrics_dir(empty));
  CHECK(cli("report " + empty.string()) != 0);
  CHECK(cli("report " + dir.string() + " --out " + (dir / "rep").string()) == 0);
  const std::string summary = slurp(dir / "rep" / "summary.csv");
  CHECK(summary.find("b,1,eval_return,0.25,0.25,0.25,1,n=1\n") != std::string::npos);
  CHECK(summary.find("a,2,coverage,40,") != std::string::npos);
}

TEST_CASE("suite matrices") {
  const auto fig3 = suite_experiments("fig3_pure_exploration", "r");
  REQUIRE(fig3.size() == 4);
  CHECK(fig3[0].agent == "uniform");
  CHECK(fig3[1].agent == "bbe");
  CHECK_FALSE(fig3[1].agent_config.fast_adapt);
  CHECK(fig3[2].agent_config.fast_adapt);
  CHECK(fig3[3].agent == "deep");
  for (const auto& e : fig3) CHECK(e.seeds.size() == 5);

  const auto sweep = suite_experiments("bbe_scale_sweep", "r");
  REQUIRE(sweep.size() == 4);
  for (const auto& e : sweep) CHECK(e.env == sweep[0].env);

  const auto fig2 = suite_experiments("fig2_warmstart", "r");
  REQUIRE(fig2.size() == 3);
  for (const auto& e : fig2) CHECK(e.agent_config.warmstart_episodes == 20);
  CHECK_THROWS(suite_experiments("fig9", "r"));
}
