#include "explab/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <mutex>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "explab/envs.hpp"

namespace explab {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

// ------------------------------------------------------------------ config

namespace {

/// Strict reader over one JSON object: every key must be consumed.
class Fields {
 public:
  Fields(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail(path_.empty() ? "<root>" : path_, "expected an object");
  }

  const json* find(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  std::string at(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

  void get(const char* key, double& out) {
    if (const json* v = find(key)) {
      if (!v->is_number()) fail(at(key), "expected a number");
      out = v->get<double>();
    }
  }
  void get(const char* key, int& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_integer()) fail(at(key), "expected an integer");
      const auto x = v->get<std::int64_t>();
      if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max()) {
        fail(at(key), "integer out of range");
      }
      out = int(x);
    }
  }
  void get(const char* key, std::int64_t& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_integer()) fail(at(key), "expected an integer");
      out = v->get<std::int64_t>();
    }
  }
  void get(const char* key, bool& out) {
    if (const json* v = find(key)) {
      if (!v->is_boolean()) fail(at(key), "expected true or false");
      out = v->get<bool>();
    }
  }
  void get(const char* key, std::string& out) {
    if (const json* v = find(key)) {
      if (!v->is_string()) fail(at(key), "expected a string");
      out = v->get<std::string>();
    }
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) fail(at(it.key().c_str()), "unknown field");
    }
  }

  [[noreturn]] static void fail(const std::string& field, const std::string& what) {
    throw ConfigError(field + ": " + what);
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

// Field table shared by the parser and the echo so both stay in sync.
template <class F>
void agent_fields(AgentConfig& c, F&& f) {
  f("gamma", c.gamma);
  f("tau_task", c.tau_task);
  f("tau_explore", c.tau_explore);
  f("tau_target_task", c.tau_target_task);
  f("tau_target_explore", c.tau_target_explore);
  f("behavior_k", c.behavior_k);
  f("proposals", c.proposals);
  f("explore_lr", c.explore_lr);
  f("explore_tabular_lr", c.explore_tabular_lr);
  f("explore_updates_per_step", c.explore_updates_per_step);
  f("explore_batch", c.explore_batch);
  f("explore_target_sync", c.explore_target_sync);
  f("task_lr", c.task_lr);
  f("task_tabular_lr", c.task_tabular_lr);
  f("task_batch", c.task_batch);
  f("task_target_sync", c.task_target_sync);
  f("task_updates_per_step", c.task_updates_per_step);
  f("optimism_c", c.optimism_c);
  f("bonus_scale", c.bonus_scale);
  f("fast_adapt", c.fast_adapt);
  f("warmstart_episodes", c.warmstart_episodes);
  f("warmstart_epsilon", c.warmstart_epsilon);
  f("explore_q", c.explore_q);
  f("task_q", c.task_q);
  f("counts", c.counts);
  f("hidden", c.hidden);
  f("count_table_size", c.count_table_size);
  f("replay_capacity", c.replay_capacity);
}

template <class F>
void eval_fields(AgentConfig& c, F&& f) {
  f("episodes", c.eval_episodes);
  f("every", c.eval_every);
  f("tau", c.eval_tau);
}

}  // namespace

void ExperimentConfig::validate() const {
  if (name.empty() || name.find_first_of("/\\") != std::string::npos) {
    throw ConfigError("name: must be a non-empty file stem");
  }
  try {
    make_environment(env, variant);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("env: ") + e.what());
  }
  try {
    parse_agent_kind(agent);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("agent.name: ") + e.what());
  }
  try {
    agent_config.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("agent.config.") + e.what());
  }
  if (episodes < 1) throw ConfigError("episodes: must be >= 1");
  if (seeds.empty()) throw ConfigError("seeds: must list at least one seed");
  std::set<std::uint64_t> distinct(seeds.begin(), seeds.end());
  if (distinct.size() != seeds.size()) throw ConfigError("seeds: must be distinct");
  if (output.empty()) throw ConfigError("output: must be non-empty");
}

ExperimentConfig parse_config(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("syntax: ") + e.what());
  }
  ExperimentConfig cfg;
  Fields root(doc, "");
  root.get("name", cfg.name);
  root.get("episodes", cfg.episodes);
  root.get("output", cfg.output);
  if (const json* e = root.find("env")) {
    Fields f(*e, "env");
    f.get("name", cfg.env);
    f.get("variant", cfg.variant);
    f.finish();
  }
  if (const json* a = root.find("agent")) {
    Fields f(*a, "agent");
    f.get("name", cfg.agent);
    if (const json* c = f.find("config")) {
      Fields g(*c, "agent.config");
      agent_fields(cfg.agent_config, [&](const char* k, auto& v) { g.get(k, v); });
      g.finish();
    }
    f.finish();
  }
  if (const json* e = root.find("eval")) {
    Fields f(*e, "eval");
    eval_fields(cfg.agent_config, [&](const char* k, auto& v) { f.get(k, v); });
    f.finish();
  }
  if (const json* s = root.find("seeds")) {
    if (!s->is_array()) Fields::fail("seeds", "expected an array of non-negative integers");
    cfg.seeds.clear();
    for (std::size_t i = 0; i < s->size(); ++i) {
      const json& v = (*s)[i];
      if (!v.is_number_unsigned()) {
        Fields::fail("seeds[" + std::to_string(i) + "]", "expected a non-negative integer");
      }
      cfg.seeds.push_back(v.get<std::uint64_t>());
    }
  }
  root.finish();
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string echo_config(const ExperimentConfig& cfg_in) {
  ExperimentConfig cfg = cfg_in;
  ordered_json j;
  j["name"] = cfg.name;
  j["env"] = ordered_json{{"name", cfg.env}, {"variant", cfg.variant}};
  ordered_json ac = ordered_json::object();
  agent_fields(cfg.agent_config, [&](const char* k, auto& v) { ac[k] = v; });
  j["agent"] = ordered_json{{"name", cfg.agent}, {"config", ac}};
  ordered_json ev = ordered_json::object();
  eval_fields(cfg.agent_config, [&](const char* k, auto& v) { ev[k] = v; });
  j["eval"] = ev;
  j["episodes"] = cfg.episodes;
  j["seeds"] = cfg.seeds;
  j["output"] = cfg.output;
  return j.dump(2) + "\n";
}

// ----------------------------------------------------------------- metrics

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void write_metrics_header(std::ostream& out) { out << kMetricsHeader << '\n'; }

void write_metrics_row(std::ostream& out, const RunRecord& r, bool wall_time) {
  out << r.episode << ',' << r.env_steps << ',' << format_number(r.eval_return) << ','
      << format_number(r.train_return) << ',' << r.coverage << ','
      << format_number(wall_time ? r.wall_time_s : 0.0) << '\n';
}

namespace {

template <class T>
T parse_field(const std::string& s, int line) {
  T v{};
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw std::runtime_error("metrics line " + std::to_string(line) + ": bad value '" + s + "'");
  }
  return v;
}

}  // namespace

std::vector<RunRecord> read_metrics(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kMetricsHeader) {
    throw std::runtime_error("unknown metrics header '" + line + "'");
  }
  std::vector<RunRecord> out;
  int n = 1;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    if (f.size() != 6) throw std::runtime_error("metrics line " + std::to_string(n) + ": expected 6 fields");
    RunRecord r;
    r.episode = parse_field<int>(f[0], n);
    r.env_steps = parse_field<std::uint64_t>(f[1], n);
    r.eval_return = parse_field<double>(f[2], n);
    r.train_return = parse_field<double>(f[3], n);
    r.coverage = parse_field<std::int64_t>(f[4], n);
    r.wall_time_s = parse_field<double>(f[5], n);
    out.push_back(r);
  }
  return out;
}

// ----------------------------------------------------------------- running

fs::path output_dir(const ExperimentConfig& cfg) {
  fs::path p(cfg.output);
  if (p.is_relative()) {
    if (const char* root = std::getenv("EXPLAB_OUTPUT_ROOT"); root && *root) p = fs::path(root) / p;
  }
  return p;
}

fs::path metrics_path(const ExperimentConfig& cfg, std::uint64_t seed) {
  return output_dir(cfg) / (cfg.name + "_seed" + std::to_string(seed) + ".csv");
}

std::vector<RunRecord> run_experiment_seed(const ExperimentConfig& cfg, std::uint64_t seed,
                                           const RunOptions& opts) {
  const auto env = make_environment(cfg.env, cfg.variant);
  const fs::path path = metrics_path(cfg, seed);
  fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".part";
  std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + tmp.string() + "'");
  write_metrics_header(out);
  Runner runner(parse_agent_kind(cfg.agent), *env, cfg.agent_config, seed);
  auto records = runner.run(cfg.episodes, [&](const RunRecord& r) {
    write_metrics_row(out, r, opts.wall_time);
    out.flush();
  });
  out.close();
  if (!out) throw std::runtime_error("write to '" + tmp.string() + "' failed");
  fs::rename(tmp, path);
  return records;
}

namespace {

struct Job {
  const ExperimentConfig* cfg;
  std::uint64_t seed;
};

int run_jobs(const std::vector<Job>& jobs, int parallel, std::ostream& log, const RunOptions& opts) {
  std::atomic<std::size_t> next{0};
  std::atomic<int> failed{0};
  std::mutex log_mu;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next++;
      if (i >= jobs.size()) return;
      const Job& job = jobs[i];
      const auto start = std::chrono::steady_clock::now();
      try {
        run_experiment_seed(*job.cfg, job.seed, opts);
        if (!opts.quiet) {
          const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
          std::lock_guard lock(log_mu);
          log << "ok   " << job.cfg->name << " seed " << job.seed << " (" << format_number(std::round(secs * 10) / 10)
              << " s)\n";
        }
      } catch (const std::exception& e) {
        ++failed;
        std::lock_guard lock(log_mu);
        log << "FAIL " << job.cfg->name << " seed " << job.seed << ": " << e.what() << '\n';
      }
    }
  };
  const int n = std::max(1, std::min<int>(parallel, int(jobs.size())));
  std::vector<std::thread> threads;
  for (int t = 1; t < n; ++t) threads.emplace_back(worker);
  worker();
  for (auto& t : threads) t.join();
  return failed.load();
}

void write_echo(const ExperimentConfig& cfg) {
  const fs::path dir = output_dir(cfg);
  fs::create_directories(dir);
  std::ofstream out(dir / (cfg.name + ".config.json"), std::ios::binary | std::ios::trunc);
  out << echo_config(cfg);
  if (!out) throw std::runtime_error("cannot write config echo in '" + dir.string() + "'");
}

}  // namespace

int run_experiment(const ExperimentConfig& cfg, int jobs, std::ostream& log, const RunOptions& opts) {
  cfg.validate();
  write_echo(cfg);
  std::vector<Job> list;
  for (auto seed : cfg.seeds) list.push_back({&cfg, seed});
  return run_jobs(list, jobs, log, opts);
}

// ------------------------------------------------------------------ suites

std::vector<std::string> suite_names() {
  return {"fig2_warmstart", "fig3_pure_exploration", "fig4_hallway", "bbe_scale_sweep"};
}

namespace {

std::vector<std::uint64_t> default_seeds() { return {0, 1, 2, 3, 4}; }

AgentConfig grid_config() {
  AgentConfig c;
  c.hidden = 128;
  c.optimism_c = 0.1;
  return c;
}

/// Task values are tabular with hard-max targets: adjacent-action gaps are
/// about 1% of the value, below what the MLP or a 0.1 softmax resolves.
AgentConfig warmstart_config() {
  AgentConfig c = grid_config();
  c.task_q = "tabular";
  c.tau_target_task = 0.0;
  c.warmstart_episodes = 20;
  return c;
}

/// Hallway arms: every target and optimism query is a proposal sweep over
/// the count table, so proposals, batches and the table are reduced.
AgentConfig hallway_config() {
  AgentConfig c;
  c.hidden = 64;
  c.proposals = 16;
  c.explore_batch = 16;
  c.task_batch = 64;
  c.count_table_size = 1024;
  c.task_lr = 1e-3;
  c.eval_every = 5;
  return c;
}

ExperimentConfig arm(const std::string& name, const std::string& env, const std::string& variant,
                     const std::string& agent, AgentConfig ac, int episodes,
                     const std::vector<std::uint64_t>& seeds, const fs::path& out) {
  ExperimentConfig e;
  e.name = name;
  e.env = env;
  e.variant = variant;
  e.agent = agent;
  e.agent_config = std::move(ac);
  e.episodes = episodes;
  e.seeds = seeds;
  e.output = out.string();
  return e;
}

}  // namespace

std::vector<ExperimentConfig> suite_experiments(const std::string& suite, const std::string& output,
                                                std::vector<std::uint64_t> seeds) {
  if (seeds.empty()) seeds = default_seeds();
  const fs::path out = fs::path(output) / suite;
  std::vector<ExperimentConfig> list;
  if (suite == "fig3_pure_exploration") {
    const AgentConfig c = grid_config();
    AgentConfig fast = c;
    fast.fast_adapt = true;
    list.push_back(arm("uniform", "gridworld", "reward_free", "uniform", c, 100, seeds, out));
    list.push_back(arm("bbe", "gridworld", "reward_free", "bbe", c, 100, seeds, out));
    list.push_back(arm("bbe_fast", "gridworld", "reward_free", "bbe", fast, 100, seeds, out));
    list.push_back(arm("deep", "gridworld", "reward_free", "deep", c, 100, seeds, out));
  } else if (suite == "fig2_warmstart") {
    AgentConfig c = warmstart_config();
    list.push_back(arm("ddqn", "gridworld", "plain", "ddqn", c, 200, seeds, out));
    list.push_back(arm("bbe", "gridworld", "plain", "bbe", c, 200, seeds, out));
    list.push_back(arm("deep", "gridworld", "plain", "deep", c, 200, seeds, out));
  } else if (suite == "fig4_hallway") {
    const AgentConfig c = hallway_config();
    for (const char* variant : {"local_optimum", "adversarial"}) {
      for (const char* agent : {"ddqn", "deep"}) {
        list.push_back(arm(std::string(variant) + "_" + agent, "hallway", variant, agent, c, 300,
                           seeds, out));
      }
    }
  } else if (suite == "bbe_scale_sweep") {
    for (double scale : {0.01, 0.1, 1.0, 10.0}) {
      AgentConfig c = warmstart_config();
      c.bonus_scale = scale;
      list.push_back(arm("bbe_scale_" + format_number(scale), "gridworld", "plain", "bbe", c, 100,
                         seeds, out));
    }
  } else {
    throw std::invalid_argument("unknown suite '" + suite + "'");
  }
  return list;
}

int run_suite(const std::string& suite, const std::string& output, int jobs, std::ostream& log,
              std::vector<std::uint64_t> seeds, const RunOptions& opts) {
  const auto list = suite_experiments(suite, output, std::move(seeds));
  std::vector<Job> all;
  for (const auto& cfg : list) {
    cfg.validate();
    write_echo(cfg);
    for (auto seed : cfg.seeds) all.push_back({&cfg, seed});
  }
  return run_jobs(all, jobs, log, opts);
}

// ------------------------------------------------------------------ report

ArmRuns read_metrics_dir(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw std::runtime_error("'" + dir.string() + "' is not a directory");
  ArmRuns runs;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".csv") continue;
    const std::string stem = entry.path().stem().string();
    const auto pos = stem.rfind("_seed");
    if (pos == std::string::npos) continue;
    std::uint64_t seed = 0;
    const std::string tail = stem.substr(pos + 5);
    const auto res = std::from_chars(tail.data(), tail.data() + tail.size(), seed);
    if (res.ec != std::errc() || res.ptr != tail.data() + tail.size()) continue;
    std::ifstream in(entry.path());
    try {
      runs[stem.substr(0, pos)][seed] = read_metrics(in);
    } catch (const std::exception& e) {
      throw std::runtime_error(entry.path().string() + ": " + e.what());
    }
  }
  if (runs.empty()) throw std::runtime_error("no metrics files in '" + dir.string() + "'");
  return runs;
}

namespace {

double metric_of(const RunRecord& r, const std::string& m) {
  if (m == "eval_return") return r.eval_return;
  if (m == "train_return") return r.train_return;
  return double(r.coverage);
}

const std::vector<std::string>& metric_names() {
  static const std::vector<std::string> names{"eval_return", "train_return", "coverage"};
  return names;
}

double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

/// Metric value of each seed at a 1-based episode (NaN when missing).
std::map<std::uint64_t, double> at_episode(const ArmRuns& runs, const std::string& arm, int episode,
                                           const std::string& metric) {
  std::map<std::uint64_t, double> out;
  for (const auto& [seed, recs] : runs.at(arm)) {
    double v = std::numeric_limits<double>::quiet_NaN();
    for (const auto& r : recs) {
      if (r.episode == episode) v = metric_of(r, metric);
    }
    out[seed] = v;
  }
  return out;
}

std::map<std::uint64_t, double> final_value(const ArmRuns& runs, const std::string& arm,
                                            const std::string& metric) {
  std::map<std::uint64_t, double> out;
  for (const auto& [seed, recs] : runs.at(arm)) {
    out[seed] = recs.empty() ? std::numeric_limits<double>::quiet_NaN() : metric_of(recs.back(), metric);
  }
  return out;
}

std::vector<double> values(const std::map<std::uint64_t, double>& m) {
  std::vector<double> v;
  for (const auto& [_, x] : m) v.push_back(x);
  return v;
}

bool has(const ArmRuns& runs, std::initializer_list<const char*> arms) {
  return std::all_of(arms.begin(), arms.end(), [&](const char* a) { return runs.count(a) > 0; });
}

int required(std::size_t n, double fraction) { return int(std::ceil(fraction * double(n) - 1e-9)); }

std::string fmt(double v) { return format_number(std::round(v * 1000.0) / 1000.0); }

/// First episode whose eval return reaches `level`, or 0 when never.
int first_reaching(const std::vector<RunRecord>& recs, double level, int within) {
  for (const auto& r : recs) {
    if (r.episode > within) break;
    if (!std::isnan(r.eval_return) && r.eval_return >= level) return r.episode;
  }
  return 0;
}

}  // namespace

std::vector<SummaryRow> summarize(const ArmRuns& runs) {
  std::vector<SummaryRow> out;
  for (const auto& [arm, seeds] : runs) {
    std::set<int> episodes;
    for (const auto& [_, recs] : seeds) {
      for (const auto& r : recs) episodes.insert(r.episode);
    }
    for (int ep : episodes) {
      for (const auto& m : metric_names()) {
        std::vector<double> v;
        for (const auto& [_, recs] : seeds) {
          for (const auto& r : recs) {
            if (r.episode == ep && !std::isnan(metric_of(r, m))) v.push_back(metric_of(r, m));
          }
        }
        if (v.empty()) continue;
        SummaryRow row;
        row.arm = arm;
        row.episode = ep;
        row.metric = m;
        row.n = int(v.size());
        row.mean = std::accumulate(v.begin(), v.end(), 0.0) / double(v.size());
        double half = 0.0;
        if (v.size() > 1) {
          double ss = 0.0;
          for (double x : v) ss += (x - row.mean) * (x - row.mean);
          half = 1.96 * std::sqrt(ss / double(v.size() - 1)) / std::sqrt(double(v.size()));
        }
        row.ci_low = row.mean - half;
        row.ci_high = row.mean + half;
        out.push_back(row);
      }
    }
  }
  return out;
}

OrderingCheck check_pure_exploration(const ArmRuns& runs) {
  OrderingCheck c{"pure_exploration_coverage", false, ""};
  if (!has(runs, {"uniform", "bbe", "bbe_fast", "deep"})) {
    c.detail = "arms missing";
    return c;
  }
  const auto u = final_value(runs, "uniform", "coverage");
  const auto b = final_value(runs, "bbe", "coverage");
  const auto f = final_value(runs, "bbe_fast", "coverage");
  const auto d = final_value(runs, "deep", "coverage");
  const double mu = median(values(u)), mb = median(values(b)), mf = median(values(f)),
               md = median(values(d));
  const bool medians = mu < mb && mb < mf && mf <= md && md >= 2.0 * mu;
  int holds = 0, n = 0;
  for (const auto& [seed, uv] : u) {
    if (!b.count(seed) || !f.count(seed) || !d.count(seed)) continue;
    ++n;
    if (uv < b.at(seed) && b.at(seed) < f.at(seed) && f.at(seed) <= d.at(seed)) ++holds;
  }
  c.pass = medians && n > 0 && holds >= required(std::size_t(n), 0.8);
  c.detail = "median coverage uniform=" + fmt(mu) + " bbe=" + fmt(mb) + " bbe_fast=" + fmt(mf) +
             " deep=" + fmt(md) + "; per-seed ordering " + std::to_string(holds) + "/" +
             std::to_string(n);
  return c;
}

OrderingCheck check_warmstart(const ArmRuns& runs) {
  OrderingCheck c{"warmstart_reward_and_coverage", false, ""};
  if (!has(runs, {"ddqn", "bbe", "deep"})) {
    c.detail = "arms missing";
    return c;
  }
  auto reached = [&](const std::string& arm) {
    int k = 0;
    for (const auto& [_, recs] : runs.at(arm)) k += first_reaching(recs, 0.95, 100) > 0;
    return k;
  };
  const int n_ddqn = int(runs.at("ddqn").size()), n_deep = int(runs.at("deep").size());
  const int r_ddqn = reached("ddqn"), r_deep = reached("deep");
  const bool reach_ok = r_ddqn >= required(std::size_t(n_ddqn), 0.8) &&
                        r_deep >= required(std::size_t(n_deep), 0.8);

  int last = 0;
  for (const auto& [_, recs] : runs.at("ddqn")) {
    if (!recs.empty()) last = std::max(last, recs.back().episode);
  }
  int start = 0;
  bool within = true;
  int worst_episode = 0;
  double worst_gap = 0.0;
  for (int ep = 1; ep <= last; ++ep) {
    const double dq = median(values(at_episode(runs, "ddqn", ep, "eval_return")));
    if (std::isnan(dq)) continue;
    if (!start && dq >= 0.95) start = ep;
    if (!start) continue;
    const double dp = median(values(at_episode(runs, "deep", ep, "eval_return")));
    const double gap = std::abs(dp - dq);
    if (std::isnan(dp) || gap > 0.05 * std::abs(dq) + 1e-12) {
      within = false;
      if (std::isnan(dp) || gap > worst_gap) {
        worst_gap = std::isnan(dp) ? std::numeric_limits<double>::infinity() : gap;
        worst_episode = ep;
      }
    }
  }
  const bool track_ok = start > 0 && within;

  const double bbe100 = median(values(at_episode(runs, "bbe", 100, "eval_return")));
  const double ddqn100 = median(values(at_episode(runs, "ddqn", 100, "eval_return")));
  const bool bias_ok = bbe100 < ddqn100;

  const double cov_deep = median(values(final_value(runs, "deep", "coverage")));
  const double cov_bbe = median(values(final_value(runs, "bbe", "coverage")));
  const bool cov_ok = cov_deep > cov_bbe;

  c.pass = reach_ok && track_ok && bias_ok && cov_ok;
  c.detail = "reach>=0.95 by ep100 ddqn " + std::to_string(r_ddqn) + "/" + std::to_string(n_ddqn) +
             " deep " + std::to_string(r_deep) + "/" + std::to_string(n_deep) +
             "; median ddqn first >=0.95 at ep " + std::to_string(start) +
             (within ? ", deep within 5% after" :
                       ", deep outside 5% (worst ep " + std::to_string(worst_episode) + " gap " +
                           fmt(worst_gap) + ")") +
             "; ep100 eval bbe=" + fmt(bbe100) + " ddqn=" + fmt(ddqn100) +
             "; final coverage deep=" + fmt(cov_deep) + " bbe=" + fmt(cov_bbe);
  return c;
}

OrderingCheck check_local_optimum(const ArmRuns& runs, double far_goal_max) {
  OrderingCheck c{"hallway_local_optimum", false, ""};
  if (!has(runs, {"local_optimum_ddqn", "local_optimum_deep"})) {
    c.detail = "arms missing";
    return c;
  }
  const auto base = values(final_value(runs, "local_optimum_ddqn", "eval_return"));
  const auto deep = values(final_value(runs, "local_optimum_deep", "eval_return"));
  const double mb = median(base), md = median(deep);
  const int found = int(std::count_if(deep.begin(), deep.end(),
                                      [&](double v) { return v >= 0.5 * far_goal_max; }));
  c.pass = mb <= 0.15 * far_goal_max && md >= 0.5 * far_goal_max &&
           found >= required(deep.size(), 0.6);
  c.detail = "far-goal max " + fmt(far_goal_max) + "; median final eval ddqn=" + fmt(mb) +
             " deep=" + fmt(md) + "; deep seeds >= half max " + std::to_string(found) + "/" +
             std::to_string(deep.size());
  return c;
}

OrderingCheck check_adversarial(const ArmRuns& runs, int budget) {
  OrderingCheck c{"hallway_adversarial", false, ""};
  if (!has(runs, {"adversarial_ddqn", "adversarial_deep"})) {
    c.detail = "arms missing";
    return c;
  }
  // Episode of first rewarded training episode; budget + 1 when never.
  auto first = [&](const std::string& arm) {
    std::vector<double> out;
    for (const auto& [_, recs] : runs.at(arm)) {
      int ep = budget + 1;
      for (const auto& r : recs) {
        if (r.episode <= budget && r.train_return > 0.0) {
          ep = r.episode;
          break;
        }
      }
      out.push_back(ep);
    }
    return out;
  };
  const auto base = first("adversarial_ddqn");
  const auto deep = first("adversarial_deep");
  const double mb = median(base), md = median(deep);
  const int found = int(std::count_if(deep.begin(), deep.end(), [&](double e) { return e <= budget; }));
  c.pass = mb < md && found >= required(deep.size(), 0.6);
  c.detail = "median first goal episode ddqn=" + fmt(mb) + " deep=" + fmt(md) +
             "; deep found within " + std::to_string(budget) + " episodes in " +
             std::to_string(found) + "/" + std::to_string(deep.size());
  return c;
}

std::vector<OrderingCheck> ordering_checks(const ArmRuns& runs) {
  std::vector<OrderingCheck> out;
  if (has(runs, {"uniform", "bbe", "bbe_fast", "deep"})) out.push_back(check_pure_exploration(runs));
  if (has(runs, {"ddqn", "bbe", "deep"})) out.push_back(check_warmstart(runs));
  if (has(runs, {"local_optimum_ddqn", "local_optimum_deep"})) {
    const auto env = make_hallway(HallwayVariant::local_optimum);
    const auto& goals = env->hallway().goals;
    const auto far = std::max_element(goals.begin(), goals.end(),
                                      [](const auto& a, const auto& b) { return a.scale < b.scale; });
    out.push_back(check_local_optimum(runs, hallway_goal_episode_max(*env, *far)));
  }
  if (has(runs, {"adversarial_ddqn", "adversarial_deep"})) {
    int budget = 0;
    for (const auto& [_, recs] : runs.at("adversarial_deep")) {
      if (!recs.empty()) budget = std::max(budget, recs.back().episode);
    }
    out.push_back(check_adversarial(runs, budget));
  }
  return out;
}

namespace {

void write_svg(const fs::path& path, const std::string& metric, const std::vector<SummaryRow>& rows) {
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
  std::map<std::string, std::vector<std::pair<int, double>>> curves;
  double ymin = 0.0, ymax = 1e-12;
  int xmax = 1;
  for (const auto& r : rows) {
    if (r.metric != metric) continue;
    curves[r.arm].push_back({r.episode, r.mean});
    ymin = std::min(ymin, r.mean);
    ymax = std::max(ymax, r.mean);
    xmax = std::max(xmax, r.episode);
  }
  const double W = 640, H = 400, L = 60, B = 40, T = 20, R = 140;
  std::ofstream out(path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << L << "\" y=\"14\" font-size=\"12\">" << metric << " (mean over seeds)</text>\n"
      << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
      << "\" stroke=\"black\"/>\n"
      << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B
      << "\" stroke=\"black\"/>\n"
      << "<text x=\"" << L - 4 << "\" y=\"" << H - B << "\" font-size=\"10\" text-anchor=\"end\">"
      << fmt(ymin) << "</text>\n"
      << "<text x=\"" << L - 4 << "\" y=\"" << T + 8 << "\" font-size=\"10\" text-anchor=\"end\">"
      << fmt(ymax) << "</text>\n"
      << "<text x=\"" << W - R << "\" y=\"" << H - B + 14 << "\" font-size=\"10\" text-anchor=\"end\">"
      << xmax << "</text>\n";
  int k = 0;
  for (const auto& [arm, pts] : curves) {
    const char* color = colors[k % 6];
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" points=\"";
    for (const auto& [x, y] : pts) {
      const double px = L + (W - L - R) * double(x) / double(xmax);
      const double py = (H - B) - (H - B - T) * (y - ymin) / (ymax - ymin);
      out << format_number(std::round(px * 10) / 10) << ',' << format_number(std::round(py * 10) / 10) << ' ';
    }
    out << "\"/>\n<text x=\"" << W - R + 8 << "\" y=\"" << T + 14 * (k + 1) << "\" font-size=\"11\" fill=\""
        << color << "\">" << arm << "</text>\n";
    ++k;
  }
  out << "</svg>\n";
}

}  // namespace

int write_report(const fs::path& dir, const fs::path& out_dir, bool svg, std::ostream& log) {
  const ArmRuns runs = read_metrics_dir(dir);
  fs::create_directories(out_dir);
  const auto rows = summarize(runs);
  {
    std::ofstream out(out_dir / "summary.csv", std::ios::binary | std::ios::trunc);
    out << "arm,episode,metric,mean,ci_low,ci_high,n,flag\n";
    for (const auto& r : rows) {
      out << r.arm << ',' << r.episode << ',' << r.metric << ',' << format_number(r.mean) << ','
          << format_number(r.ci_low) << ',' << format_number(r.ci_high) << ',' << r.n << ','
          << (r.n == 1 ? "n=1" : "") << '\n';
    }
    if (!out) throw std::runtime_error("cannot write summary in '" + out_dir.string() + "'");
  }
  const auto checks = ordering_checks(runs);
  bool all = true;
  {
    std::ofstream out(out_dir / "checks.txt", std::ios::binary | std::ios::trunc);
    for (const auto& c : checks) {
      const std::string line = std::string(c.pass ? "PASS " : "FAIL ") + c.name + ": " + c.detail;
      out << line << '\n';
      log << line << '\n';
      all = all && c.pass;
    }
  }
  if (svg) {
    for (const auto& m : metric_names()) write_svg(out_dir / (m + ".svg"), m, rows);
  }
  return all ? 0 : 1;
}

}  // namespace explab
