#include "adaptq/harness.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "adaptq/config.hpp"

namespace {

using namespace adaptq;
namespace fs = std::filesystem;

fs::path temp_dir() {
  const auto dir = fs::temp_directory_path() / "adaptq_harness_test";
  fs::create_directories(dir);
  return dir;
}

fs::path write_file(const std::string& name, const std::string& text) {
  const auto path = temp_dir() / name;
  std::ofstream out(path);
  out << text;
  return path;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

// A quick configuration for tests that exercise plumbing, not statistics.
ExperimentConfig small_config() {
  ExperimentConfig cfg;
  cfg.scenario = "test_small";
  cfg.change_point = 1000;
  cfg.horizon = 1500;
  cfg.n_runs = 40;
  cfg.master_seed = 99;
  cfg.jobs = 2;
  cfg.out_dir = (temp_dir() / "out").string();
  return cfg;
}

TEST(ConfigFile, ParsesOverridesAndRejectsUnknownKeys) {
  const auto path = write_file("good.cfg",
                               "# comment line\n"
                               "scenario = n7_drop\n"
                               "capacity = 7\n"
                               "lambda_pre = 6\n"
                               "lambda_post = 2.5\n"
                               "eta = 1.2\n"
                               "threshold_a = 8\n"
                               "threshold_b = 4\n"
                               "threshold_a_tilde = 6.9   # trailing comment\n"
                               "agents = staql, ttaql\n"
                               "seed = 123\n");
  const ExperimentConfig cfg = ExperimentConfig::from_file(path);
  EXPECT_EQ(cfg.scenario, "n7_drop");
  EXPECT_EQ(cfg.inventory.capacity, 7);
  EXPECT_DOUBLE_EQ(cfg.lambda_pre, 6.0);
  EXPECT_DOUBLE_EQ(cfg.lambda_post, 2.5);
  EXPECT_DOUBLE_EQ(cfg.eta, 1.2);
  EXPECT_DOUBLE_EQ(cfg.threshold_a_sd, 8.0);
  EXPECT_DOUBLE_EQ(cfg.threshold_b_sd, 4.0);
  EXPECT_DOUBLE_EQ(cfg.threshold_a_tilde_sd, 6.9);
  ASSERT_EQ(cfg.agents.size(), 2u);
  EXPECT_EQ(cfg.agents[0], AgentKind::staql);
  EXPECT_EQ(cfg.agents[1], AgentKind::ttaql);
  EXPECT_EQ(cfg.master_seed, 123u);
  // untouched keys keep the benchmark defaults
  EXPECT_DOUBLE_EQ(cfg.schedule.alpha0, 0.2);
  EXPECT_EQ(cfg.change_point, 1000);

  const auto bad_key = write_file("bad_key.cfg", "capactiy = 7\n");
  EXPECT_THROW(ExperimentConfig::from_file(bad_key), std::invalid_argument);
  const auto bad_value = write_file("bad_value.cfg", "eta = fast\n");
  EXPECT_THROW(ExperimentConfig::from_file(bad_value), std::invalid_argument);
  const auto bad_line = write_file("bad_line.cfg", "eta 0.9\n");
  EXPECT_THROW(ExperimentConfig::from_file(bad_line), std::invalid_argument);
}

TEST(ConfigFile, AutoInitPicksShapeFromDemandLevel) {
  ExperimentConfig cfg;
  const InitStrategy high = cfg.resolve_init("auto", 4.0);
  EXPECT_EQ(high.kind, InitKind::monotone);
  EXPECT_DOUBLE_EQ(high.scale, cfg.default_init_scale());
  const InitStrategy low = cfg.resolve_init("auto", 1.8);
  EXPECT_EQ(low.kind, InitKind::random);
  EXPECT_DOUBLE_EQ(low.scale, cfg.default_init_scale());
  cfg.init_scale = 12.0;
  EXPECT_DOUBLE_EQ(cfg.resolve_init("auto", 4.0).scale, 12.0);
  const InitStrategy forced = cfg.resolve_init("pyramid", 1.8);
  EXPECT_EQ(forced.kind, InitKind::pyramid);
  EXPECT_THROW(cfg.resolve_init("bogus", 1.0), std::invalid_argument);
}

TEST(RunMonteCarlo, SingleRunTableEqualsThatRun) {
  ExperimentConfig cfg = small_config();
  cfg.n_runs = 1;
  cfg.agents = {AgentKind::staql};
  const MetricsTable table = run_monte_carlo(cfg);

  RngStream rng = RngStream::derive(cfg.master_seed, 0);
  const RunResult direct = run_staql(cfg.agent_config(), cfg.process(), rng);

  ASSERT_EQ(table.rows.size(), 1u);
  const AgentMetrics& m = table.agents.front().second;
  EXPECT_EQ(m.runs, 1);
  if (direct.outcome == Outcome::false_alarm) {
    EXPECT_EQ(m.false_alarms, 1);
  } else {
    EXPECT_DOUBLE_EQ(m.rwd_total_mean, direct.total_return);
    EXPECT_DOUBLE_EQ(m.rwd_post_mean, direct.post_change_return);
  }
  EXPECT_EQ(table.rows[0].detection_time, direct.detection_time);
  EXPECT_EQ(table.rows[0].outcome, direct.outcome);
}

TEST(RunMonteCarlo, AggregatesExcludeExactlyTheFalseAlarms) {
  ExperimentConfig cfg = small_config();
  cfg.n_runs = 120;
  cfg.agents = {AgentKind::staql, AgentKind::ttaql};
  const MetricsTable table = run_monte_carlo(cfg);

  ASSERT_EQ(table.rows.size(), 240u);
  for (const auto& [kind, metrics] : table.agents) {
    long fa = 0, td = 0, miss = 0, nonfa = 0;
    double total = 0.0, post = 0.0, delay = 0.0;
    for (const RunRow& row : table.rows) {
      if (row.agent != kind) continue;
      switch (row.outcome) {
        case Outcome::false_alarm: ++fa; break;
        case Outcome::true_detect:
          ++td;
          delay += static_cast<double>(*row.detection_time - cfg.change_point);
          break;
        case Outcome::miss: ++miss; break;
      }
      if (row.outcome != Outcome::false_alarm) {
        ++nonfa;
        total += row.total_return;
        post += row.post_change_return;
      }
    }
    EXPECT_EQ(metrics.false_alarms, fa);
    EXPECT_EQ(metrics.true_detects, td);
    EXPECT_EQ(metrics.misses, miss);
    EXPECT_EQ(metrics.runs, fa + td + miss);
    EXPECT_NEAR(metrics.true_detect_pct + metrics.miss_pct + metrics.false_alarm_pct, 100.0, 1e-9);
    if (nonfa > 0) {
      EXPECT_NEAR(metrics.rwd_total_mean, total / nonfa, 1e-9);
      EXPECT_NEAR(metrics.rwd_post_mean, post / nonfa, 1e-9);
    }
    if (td > 0) {
      ASSERT_TRUE(metrics.avg_delay.has_value());
      EXPECT_NEAR(*metrics.avg_delay, delay / td, 1e-9);
    }
  }
}

TEST(RunMonteCarlo, DeterministicAcrossInvocationsAndWorkerCounts) {
  ExperimentConfig cfg = small_config();
  cfg.agents = {AgentKind::staql, AgentKind::oracle};
  const MetricsTable first = run_monte_carlo(cfg);
  const MetricsTable second = run_monte_carlo(cfg);
  ExperimentConfig serial = cfg;
  serial.jobs = 1;
  const MetricsTable third = run_monte_carlo(serial);

  ASSERT_EQ(first.rows.size(), second.rows.size());
  ASSERT_EQ(first.rows.size(), third.rows.size());
  for (std::size_t i = 0; i < first.rows.size(); ++i) {
    EXPECT_EQ(first.rows[i].run_index, second.rows[i].run_index);
    EXPECT_EQ(first.rows[i].total_return, second.rows[i].total_return);
    EXPECT_EQ(first.rows[i].total_return, third.rows[i].total_return);
    EXPECT_EQ(first.rows[i].detection_time, third.rows[i].detection_time);
  }
  for (std::size_t a = 0; a < first.agents.size(); ++a) {
    EXPECT_EQ(first.agents[a].second.rwd_total_mean, third.agents[a].second.rwd_total_mean);
    EXPECT_EQ(first.agents[a].second.series, third.agents[a].second.series);
  }
}

TEST(RunMonteCarlo, StandardErrorShrinksLikeRootN) {
  ExperimentConfig cfg = small_config();
  cfg.agents = {AgentKind::ignore};
  cfg.n_runs = 200;
  const MetricsTable small = run_monte_carlo(cfg);
  cfg.n_runs = 400;
  const MetricsTable big = run_monte_carlo(cfg);

  auto standard_error = [](const MetricsTable& table) {
    double sum = 0.0, sum_sq = 0.0;
    long n = 0;
    for (const RunRow& row : table.rows) {
      sum += row.total_return;
      sum_sq += row.total_return * row.total_return;
      ++n;
    }
    const double mean = sum / n;
    const double var = (sum_sq - n * mean * mean) / (n - 1);
    return std::sqrt(var / n);
  };
  const double ratio = standard_error(small) / standard_error(big);
  // Theoretical ratio sqrt(2) ~ 1.414; allow generous sampling slack.
  EXPECT_GT(ratio, 1.1);
  EXPECT_LT(ratio, 1.8);
}

TEST(EmitOutputs, FilesRoundTripAndRowCountsMatch) {
  ExperimentConfig cfg = small_config();
  cfg.scenario = "emit_check";
  cfg.agents = {AgentKind::staql, AgentKind::ignore};
  cfg.n_runs = 25;
  const MetricsTable table = run_monte_carlo(cfg);
  const OutputPaths paths = emit_outputs(table, cfg);

  ASSERT_TRUE(fs::exists(paths.summary));
  ASSERT_TRUE(fs::exists(paths.series));
  ASSERT_TRUE(fs::exists(paths.runs));

  const std::string runs_text = slurp(paths.runs);
  const long lines = std::count(runs_text.begin(), runs_text.end(), '\n');
  EXPECT_EQ(lines, 1 + cfg.n_runs * static_cast<long>(cfg.agents.size()));

  const std::string series_text = slurp(paths.series);
  const long series_lines = std::count(series_text.begin(), series_text.end(), '\n');
  EXPECT_EQ(series_lines, 1 + (cfg.horizon - cfg.change_point));

  // Re-running the identical experiment reproduces the files byte for byte.
  const MetricsTable again = run_monte_carlo(cfg);
  ExperimentConfig copy = cfg;
  copy.out_dir = (temp_dir() / "out_again").string();
  const OutputPaths second = emit_outputs(again, copy);
  EXPECT_EQ(slurp(paths.runs), slurp(second.runs));
  EXPECT_EQ(slurp(paths.series), slurp(second.series));
  EXPECT_EQ(slurp(paths.summary), slurp(second.summary));
}

TEST(EmitOutputs, EmptyAgentSetWritesOnlyTheSummary) {
  ExperimentConfig cfg = small_config();
  cfg.scenario = "emit_empty";
  cfg.agents.clear();
  MetricsTable table;  // nothing ran
  const OutputPaths paths = emit_outputs(table, cfg);
  EXPECT_TRUE(fs::exists(paths.summary));
  EXPECT_TRUE(paths.series.empty());
  EXPECT_TRUE(paths.runs.empty());
  const std::string summary = slurp(paths.summary);
  EXPECT_NE(summary.find("\"agents\": {}"), std::string::npos);
}

TEST(ReproduceTable, EqualRatesReportFalseAlarmsOnly) {
  ExperimentConfig base = small_config();
  TableQuery query;
  query.which = 1;
  query.rates = {{3.0, 3.0}};
  query.eta = 0.5;
  query.n_runs = 40;
  const auto rows = reproduce_table(base, query);
  ASSERT_EQ(rows.size(), 2u);
  for (const TableRow& row : rows) {
    EXPECT_EQ(row.true_detects, 0);
    EXPECT_FALSE(row.avg_delay.has_value());
    EXPECT_EQ(row.runs, 40);
    EXPECT_EQ(row.misses + row.false_alarms, row.runs);
  }
}

TEST(ReproduceTable, SingleRowQueryAndCsvShape) {
  ExperimentConfig base = small_config();
  TableQuery query;
  query.which = 1;
  query.rates = {{4.0, 1.8}};
  query.eta = 0.92;
  query.n_runs = 60;
  const auto rows = reproduce_table(base, query);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].policy, "full_stock");
  EXPECT_EQ(rows[1].policy, "learned");
  for (const TableRow& row : rows) {
    EXPECT_EQ(row.true_detects + row.misses + row.false_alarms, row.runs);
  }

  const auto path = temp_dir() / "table_test.csv";
  write_table_csv(rows, path);
  const std::string text = slurp(path);
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 3);
  EXPECT_NE(text.find("full_stock"), std::string::npos);
}

TEST(ExperimentConfig, ValidateRejectsBrokenSettings) {
  ExperimentConfig cfg = small_config();
  cfg.change_point = cfg.horizon;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = small_config();
  cfg.n_runs = 0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = small_config();
  cfg.lambda_post = -1.0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

}  // namespace
