// smo_sim: run, compare and validate scenario configs.
//
// Exit codes: 0 success, 1 simulated failure, 2 usage or config error.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "smo/config.hpp"
#include "smo/error.hpp"
#include "smo/scenarios.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kOk = 0;
constexpr int kSimFailure = 1;
constexpr int kUsage = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// SMO_SIM_SEED wins over --seed; neither keeps the config seed.
std::optional<std::uint64_t> effective_seed(const std::optional<std::uint64_t>& flag) {
  if (const char* env = std::getenv("SMO_SIM_SEED"); env && *env) {
    try {
      std::size_t used = 0;
      auto v = std::stoull(env, &used, 10);
      if (used != std::string(env).size()) throw std::invalid_argument("trailing characters");
      return v;
    } catch (const std::exception&) {
      throw UsageError(std::string("SMO_SIM_SEED is not an unsigned integer: ") + env);
    }
  }
  return flag;
}

smo::ScenarioConfig load(const std::string& path, const std::optional<std::uint64_t>& seed) {
  auto cfg = smo::load_config(path);
  return seed ? smo::with_seed(std::move(cfg), *seed) : cfg;
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw UsageError("cannot write " + p.string());
  out << text;
}

void write_outputs(const smo::RunResult& r, const fs::path& dir) {
  fs::create_directories(dir);
  write_file(dir / "events.jsonl", r.sim->log_jsonl());
  write_file(dir / "report.json", r.report.dump(2) + "\n");
  std::ostringstream metrics;
  smo::write_metrics_csv(metrics, {smo::metrics_row(r)});
  write_file(dir / "metrics.csv", metrics.str());
  if (r.live) write_file(dir / "artifact.json", smo::to_json(*r.live).dump(2) + "\n");
  if (r.dataset) {
    std::ostringstream csv;
    smo::write_csv(csv, *r.dataset);
    write_file(dir / "dataset.csv", csv.str());
  }
  if (r.exploration) {
    std::ostringstream csv;
    smo::write_exploration_csv(csv, *r.exploration);
    write_file(dir / "exploration.csv", csv.str());
  }
  if (r.search) {
    std::ostringstream csv;
    smo::write_trials_csv(csv, *r.search);
    write_file(dir / "trials.csv", csv.str());
  }
}

void print_config_error(const smo::Error& e) {
  std::cerr << "config error [" << smo::to_string(e.code()) << "]";
  if (!e.field().empty()) std::cerr << " at " << e.field();
  std::cerr << ": " << e.what() << "\n";
}

int cmd_run(const std::string& config, const std::optional<std::uint64_t>& seed_flag, const std::string& out) {
  auto cfg = load(config, effective_seed(seed_flag));
  auto r = smo::run_scenario(cfg);
  write_outputs(r, out);
  std::cout << "scenario " << smo::to_string(cfg.kind) << " seed " << cfg.seed << ": "
            << r.report["status"].get<std::string>();
  if (r.failure) std::cout << " (" << *r.failure << ")";
  if (r.rejection) std::cout << " (" << *r.rejection << ")";
  std::cout << "\n";
  return r.failure ? kSimFailure : kOk;
}

int cmd_compare(const std::vector<std::string>& configs, const std::optional<std::uint64_t>& seed_flag,
                const std::string& out) {
  if (configs.size() < 2) throw UsageError("compare needs at least two configs");
  const auto seed = effective_seed(seed_flag);
  std::vector<smo::ScenarioConfig> cfgs;
  for (const auto& c : configs) cfgs.push_back(load(c, seed));
  // Runs share nothing, so they proceed in parallel.
  std::vector<std::future<smo::RunResult>> futures;
  for (const auto& c : cfgs) futures.push_back(std::async(std::launch::async, [&c] { return smo::run_scenario(c); }));
  std::vector<std::vector<std::pair<std::string, std::string>>> rows;
  json table = json::array();
  bool failed = false;
  for (std::size_t i = 0; i < futures.size(); ++i) {
    auto r = futures[i].get();
    failed = failed || r.failure.has_value();
    auto row = smo::metrics_row(r);
    row.insert(row.begin(), {"config", fs::path(configs[i]).filename().string()});
    json j = json::object();
    for (const auto& [k, v] : row) j[k] = v;
    table.push_back(j);
    rows.push_back(std::move(row));
  }
  fs::create_directories(out);
  std::ostringstream csv;
  smo::write_metrics_csv(csv, rows);
  write_file(fs::path(out) / "comparison.csv", csv.str());
  write_file(fs::path(out) / "comparison.json", table.dump(2) + "\n");
  std::cout << csv.str();
  return failed ? kSimFailure : kOk;
}

int cmd_validate(const std::string& config) {
  auto cfg = smo::load_config(config);
  std::cout << config << ": valid scenario " << smo::to_string(cfg.kind) << " (" << smo::to_string(cfg.mode) << ")\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SMO intelligence-plane simulator"};
  app.require_subcommand(1);

  std::string config, out = "out";
  std::vector<std::string> configs;
  std::optional<std::uint64_t> seed;

  auto* run = app.add_subcommand("run", "Run one scenario and write events.jsonl, report.json, metrics.csv");
  run->add_option("--config", config, "Scenario config (JSON)")->required();
  run->add_option("--seed", seed, "Seed override");
  run->add_option("--out", out, "Output directory");

  auto* compare = app.add_subcommand("compare", "Run several configs and tabulate their metrics");
  compare->add_option("--configs", configs, "Scenario configs")->required()->expected(2, -1);
  compare->add_option("--seed", seed, "Seed override");
  compare->add_option("--out", out, "Output directory");

  auto* validate = app.add_subcommand("validate", "Validate a config without running it");
  validate->add_option("--config", config, "Scenario config (JSON)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*run) return cmd_run(config, seed, out);
    if (*compare) return cmd_compare(configs, seed, out);
    if (*validate) return cmd_validate(config);
  } catch (const smo::Error& e) {
    print_config_error(e);
    return kUsage;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsage;
  }
  return kUsage;
}
