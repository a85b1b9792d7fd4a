// Command-line front end: Monte Carlo experiments, the detection-policy
// delay tables, and a planner-vs-learner sanity check.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "adaptq/config.hpp"
#include "adaptq/harness.hpp"

namespace {

using namespace adaptq;

struct CommonOverrides {
  std::optional<long> runs;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<int> jobs;

  void apply(ExperimentConfig& cfg) const {
    if (runs) cfg.n_runs = *runs;
    if (seed) cfg.master_seed = *seed;
    if (out_dir) cfg.out_dir = *out_dir;
    if (jobs) cfg.jobs = *jobs;
  }
};

void add_common_options(CLI::App* cmd, CommonOverrides& overrides) {
  cmd->add_option("--runs", overrides.runs, "Number of Monte Carlo runs");
  cmd->add_option("--seed", overrides.seed, "Master seed");
  cmd->add_option("--out-dir", overrides.out_dir, "Output directory");
  cmd->add_option("--jobs", overrides.jobs, "Worker threads (0 = hardware)");
}

std::string format_optional(const std::optional<double>& value, const char* fallback = "-") {
  if (!value.has_value()) return fallback;
  char buffer[32];
  std::snprintf(buffer, sizeof(buffer), "%.2f", *value);
  return buffer;
}

void print_metrics(const MetricsTable& table) {
  std::printf("%-8s %12s %12s %10s %9s %8s %8s\n", "agent", "rwd_mdp1", "rwd_total",
              "avg_delay", "detect%", "miss%", "fa%");
  for (const auto& [kind, m] : table.agents) {
    std::printf("%-8s %12.1f %12.1f %10s %9.2f %8.2f %8.2f\n", to_string(kind), m.rwd_post_mean,
                m.rwd_total_mean, format_optional(m.avg_delay).c_str(), m.true_detect_pct,
                m.miss_pct, m.false_alarm_pct);
  }
}

int cmd_run(const std::string& config_path, const CommonOverrides& overrides) {
  ExperimentConfig cfg = ExperimentConfig::from_file(config_path);
  overrides.apply(cfg);
  cfg.validate();
  std::printf("scenario %s: %ld runs x %zu agents, horizon %ld, change at %ld\n",
              cfg.scenario.c_str(), cfg.n_runs, cfg.agents.size(), cfg.horizon, cfg.change_point);
  const MetricsTable table = run_monte_carlo(cfg);
  print_metrics(table);
  const OutputPaths paths = emit_outputs(table, cfg);
  std::printf("wrote %s\n", paths.summary.string().c_str());
  if (!paths.series.empty()) std::printf("wrote %s\n", paths.series.string().c_str());
  if (!paths.runs.empty()) std::printf("wrote %s\n", paths.runs.string().c_str());
  return 0;
}

int cmd_table(int which, const std::optional<std::string>& config_path,
              const std::optional<double>& eta, const std::optional<std::string>& rates,
              long runs, const CommonOverrides& overrides) {
  ExperimentConfig base =
      config_path ? ExperimentConfig::from_file(*config_path) : ExperimentConfig{};
  overrides.apply(base);

  TableQuery query;
  query.which = which;
  query.n_runs = runs;
  query.eta = eta;
  query.master_seed = overrides.seed;
  query.jobs = overrides.jobs;
  if (rates) {
    const auto comma = rates->find(',');
    if (comma == std::string::npos) {
      throw std::invalid_argument("--rates expects 'lambda_pre,lambda_post'");
    }
    query.rates = {std::stod(rates->substr(0, comma)), std::stod(rates->substr(comma + 1))};
  }

  const auto rows = reproduce_table(base, query);
  std::printf("%-6s %-6s %-6s %-11s %8s %10s %8s\n", "pre", "post", "eta", "policy", "runs",
              "delay", "fa");
  for (const TableRow& row : rows) {
    std::printf("%-6.2f %-6.2f %-6.2f %-11s %8ld %10s %8.4f\n", row.lambda_pre, row.lambda_post,
                row.eta, row.policy.c_str(), row.runs, format_optional(row.avg_delay).c_str(),
                row.false_alarm_fraction);
  }

  std::filesystem::path dir(overrides.out_dir.value_or(base.out_dir));
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  const auto path = dir / ("table" + std::to_string(which) + ".csv");
  write_table_csv(rows, path);
  std::printf("wrote %s\n", path.string().c_str());
  return 0;
}

int cmd_oracle_check(const std::string& config_path, long runs, const std::string& init_name,
                     double init_scale, const CommonOverrides& overrides) {
  ExperimentConfig cfg = ExperimentConfig::from_file(config_path);
  overrides.apply(cfg);
  if (overrides.runs) runs = *overrides.runs;

  const TabularMDP pre = exact_inventory_kernel(cfg.inventory, DemandModel{cfg.lambda_pre});
  const double tol = 1e-6;
  const auto plan = value_iteration(pre, cfg.schedule.beta, tol);

  // Bellman residual of the returned Q.
  double residual = 0.0;
  const int S = pre.n_states, A = pre.n_actions;
  for (int s = 0; s < S; ++s) {
    for (int a = 0; a < A; ++a) {
      double backup = 0.0;
      for (int next = 0; next < S; ++next) {
        double best = plan.q_values[static_cast<std::size_t>(next) * A];
        for (int na = 1; na < A; ++na) {
          best = std::max(best, plan.q_values[static_cast<std::size_t>(next) * A + na]);
        }
        backup += pre.transition(s, a, next) * (pre.reward_at(s, a, next) + cfg.schedule.beta * best);
      }
      residual = std::max(residual, std::fabs(plan.q_values[static_cast<std::size_t>(s) * A + a] - backup));
    }
  }

  std::printf("value iteration: %ld sweeps, Bellman residual %.3g (bound %.3g)\n",
              plan.iterations, residual, tol / (1.0 - cfg.schedule.beta));
  std::printf("optimal policy:");
  for (int s = 0; s < S; ++s) std::printf(" %d", plan.policy[s]);
  std::printf("\n");

  // Default: seed the learner with the known monotone structure at one
  // day's revenue, the setup under which it reliably holds the planner's map.
  InitStrategy init;
  init.kind = init_kind_from_string(init_name);
  init.scale = init_scale > 0.0 ? init_scale : cfg.inventory.unit_price * cfg.lambda_pre;
  long matched = 0;
  for (long i = 0; i < runs; ++i) {
    RngStream rng = RngStream::derive(cfg.master_seed, static_cast<std::uint64_t>(i));
    const QTable q = run_q_learning(pre, cfg.schedule, init, cfg.horizon, rng);
    if (greedy_policy(q) == plan.policy) ++matched;
  }
  std::printf("Q-learning (%ld steps, %s init): greedy policy matched the planner in %ld/%ld runs\n",
              cfg.horizon, to_string(init.kind), matched, runs);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Q-learning with CUSUM change detection: inventory experiments"};
  app.require_subcommand(1);

  CommonOverrides run_overrides;
  std::string run_config;
  auto* run_cmd = app.add_subcommand("run", "Monte Carlo experiment from a config file");
  run_cmd->add_option("config", run_config, "Config file (key = value lines)")
      ->required()
      ->check(CLI::ExistingFile);
  add_common_options(run_cmd, run_overrides);

  CommonOverrides t1_overrides, t2_overrides;
  std::optional<std::string> t1_config, t2_config, t1_rates, t2_rates;
  std::optional<double> t1_eta, t2_eta;
  long t1_runs = 2000, t2_runs = 2000;
  auto* t1_cmd = app.add_subcommand("table1", "Detection delays, demand dropping");
  t1_cmd->add_option("--config", t1_config, "Base config file")->check(CLI::ExistingFile);
  t1_cmd->add_option("--eta", t1_eta, "Single row: drift guard eta");
  t1_cmd->add_option("--rates", t1_rates, "Single row: lambda_pre,lambda_post");
  t1_cmd->add_option("--runs", t1_runs, "Runs per row and policy");
  t1_cmd->add_option("--seed", t1_overrides.seed, "Master seed");
  t1_cmd->add_option("--out-dir", t1_overrides.out_dir, "Output directory");
  t1_cmd->add_option("--jobs", t1_overrides.jobs, "Worker threads (0 = hardware)");
  auto* t2_cmd = app.add_subcommand("table2", "Detection delays, demand rising");
  t2_cmd->add_option("--config", t2_config, "Base config file")->check(CLI::ExistingFile);
  t2_cmd->add_option("--eta", t2_eta, "Single row: drift guard eta");
  t2_cmd->add_option("--rates", t2_rates, "Single row: lambda_pre,lambda_post");
  t2_cmd->add_option("--runs", t2_runs, "Runs per row and policy");
  t2_cmd->add_option("--seed", t2_overrides.seed, "Master seed");
  t2_cmd->add_option("--out-dir", t2_overrides.out_dir, "Output directory");
  t2_cmd->add_option("--jobs", t2_overrides.jobs, "Worker threads (0 = hardware)");

  CommonOverrides oc_overrides;
  std::string oc_config;
  std::string oc_init = "monotone";
  double oc_scale = 0.0;
  long oc_runs = 100;
  auto* oc_cmd = app.add_subcommand("oracle-check",
                                    "Compare exact planning with the Q-learner on the pre-change model");
  oc_cmd->add_option("config", oc_config, "Config file")->required()->check(CLI::ExistingFile);
  oc_cmd->add_option("--init", oc_init, "Learner init kind (random|pyramid|monotone)");
  oc_cmd->add_option("--scale", oc_scale, "Init amplitude (0 = one day's revenue)");
  add_common_options(oc_cmd, oc_overrides);

  CLI11_PARSE(app, argc, argv);

  try {
    if (run_cmd->parsed()) return cmd_run(run_config, run_overrides);
    if (t1_cmd->parsed()) return cmd_table(1, t1_config, t1_eta, t1_rates, t1_runs, t1_overrides);
    if (t2_cmd->parsed()) return cmd_table(2, t2_config, t2_eta, t2_rates, t2_runs, t2_overrides);
    if (oc_cmd->parsed()) {
      return cmd_oracle_check(oc_config, oc_runs, oc_init, oc_scale, oc_overrides);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
