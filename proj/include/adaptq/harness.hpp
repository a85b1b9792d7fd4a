#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <limits>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <json.hpp>

#include "adaptq/agents.hpp"
#include "adaptq/config.hpp"

namespace adaptq {

// One line of the run-level output.
struct RunRow {
  AgentKind agent{};
  long run_index = 0;
  std::uint64_t seed = 0;
  std::optional<long> detection_time;
  Outcome outcome = Outcome::miss;
  double total_return = 0.0;
  double post_change_return = 0.0;
};

// Monte Carlo aggregates for one agent. Reward means exclude false-alarm
// runs; the delay mean is taken over true detections only.
struct AgentMetrics {
  long runs = 0;
  long true_detects = 0;
  long misses = 0;
  long false_alarms = 0;
  double rwd_total_mean = 0.0;
  double rwd_post_mean = 0.0;
  std::optional<double> avg_delay;
  double true_detect_pct = 0.0;
  double miss_pct = 0.0;
  double false_alarm_pct = 0.0;
  long armed_runs = 0;
  double mean_abs_threshold = 0.0;
  double mean_baseline_mean = 0.0;
  double mean_baseline_sd = 0.0;
  // Mean cumulative post-change reward by step offset, over non-FA runs.
  std::vector<double> series;
  long series_runs = 0;
};

struct MetricsTable {
  std::vector<std::pair<AgentKind, AgentMetrics>> agents;  // config order
  std::vector<RunRow> rows;                                // agent-major, run order

  const AgentMetrics* find(AgentKind kind) const {
    for (const auto& [k, m] : agents) {
      if (k == kind) return &m;
    }
    return nullptr;
  }
};

namespace detail {

// Fixed-size chunks pulled from an atomic counter; chunk results are stored
// by index and reduced sequentially afterwards, so aggregates never depend
// on worker count or completion order.
inline constexpr long kChunkRuns = 64;

template <typename Fn>
inline void parallel_chunks(long n_chunks, int jobs, Fn&& fn) {
  int workers = jobs > 0 ? jobs : static_cast<int>(std::thread::hardware_concurrency());
  if (workers < 1) workers = 1;
  if (workers > n_chunks) workers = static_cast<int>(n_chunks);
  if (workers <= 1) {
    for (long c = 0; c < n_chunks; ++c) fn(c);
    return;
  }
  std::atomic<long> next{0};
  std::mutex error_mutex;
  std::exception_ptr error;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      try {
        for (long c = next.fetch_add(1); c < n_chunks; c = next.fetch_add(1)) fn(c);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        next.store(n_chunks);
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

struct AgentAccum {
  long runs = 0;
  long true_detects = 0;
  long misses = 0;
  long false_alarms = 0;
  double sum_total_nonfa = 0.0;
  double sum_post_nonfa = 0.0;
  long nonfa = 0;
  double sum_delay = 0.0;
  long armed_runs = 0;
  double sum_abs_threshold = 0.0;
  double sum_baseline_mean = 0.0;
  double sum_baseline_sd = 0.0;
  std::vector<double> series_sum;
  long series_runs = 0;

  void add(const RunResult& result, long change_point, bool discounted_series, double beta) {
    ++runs;
    switch (result.outcome) {
      case Outcome::true_detect:
        ++true_detects;
        sum_delay += static_cast<double>(*result.detection_time - change_point);
        break;
      case Outcome::miss: ++misses; break;
      case Outcome::false_alarm: ++false_alarms; break;
    }
    if (result.outcome != Outcome::false_alarm) {
      ++nonfa;
      sum_total_nonfa += result.total_return;
      sum_post_nonfa += result.post_change_return;
      const long horizon = static_cast<long>(result.rewards.size());
      if (change_point < horizon) {
        if (series_sum.empty()) series_sum.assign(horizon - change_point, 0.0);
        double cumulative = 0.0;
        double weight = 1.0;
        for (long j = 0; j + change_point < horizon; ++j) {
          cumulative += weight * result.rewards[change_point + j];
          if (discounted_series) weight *= beta;
          series_sum[j] += cumulative;
        }
        ++series_runs;
      }
    }
    if (result.baseline.has_value()) {
      ++armed_runs;
      sum_abs_threshold += result.declare_threshold_abs;
      sum_baseline_mean += result.baseline->mean;
      sum_baseline_sd += result.baseline->sd;
    }
  }

  void merge(const AgentAccum& other) {
    runs += other.runs;
    true_detects += other.true_detects;
    misses += other.misses;
    false_alarms += other.false_alarms;
    sum_total_nonfa += other.sum_total_nonfa;
    sum_post_nonfa += other.sum_post_nonfa;
    nonfa += other.nonfa;
    sum_delay += other.sum_delay;
    armed_runs += other.armed_runs;
    sum_abs_threshold += other.sum_abs_threshold;
    sum_baseline_mean += other.sum_baseline_mean;
    sum_baseline_sd += other.sum_baseline_sd;
    if (series_sum.empty()) {
      series_sum = other.series_sum;
    } else if (!other.series_sum.empty()) {
      for (std::size_t i = 0; i < series_sum.size(); ++i) series_sum[i] += other.series_sum[i];
    }
    series_runs += other.series_runs;
  }

  AgentMetrics finalize() const {
    AgentMetrics m;
    m.runs = runs;
    m.true_detects = true_detects;
    m.misses = misses;
    m.false_alarms = false_alarms;
    if (nonfa > 0) {
      m.rwd_total_mean = sum_total_nonfa / nonfa;
      m.rwd_post_mean = sum_post_nonfa / nonfa;
    }
    if (true_detects > 0) m.avg_delay = sum_delay / true_detects;
    if (runs > 0) {
      m.true_detect_pct = 100.0 * true_detects / runs;
      m.miss_pct = 100.0 * misses / runs;
      m.false_alarm_pct = 100.0 * false_alarms / runs;
    }
    m.armed_runs = armed_runs;
    if (armed_runs > 0) {
      m.mean_abs_threshold = sum_abs_threshold / armed_runs;
      m.mean_baseline_mean = sum_baseline_mean / armed_runs;
      m.mean_baseline_sd = sum_baseline_sd / armed_runs;
    }
    if (series_runs > 0) {
      m.series = series_sum;
      for (double& v : m.series) v /= static_cast<double>(series_runs);
    }
    m.series_runs = series_runs;
    return m;
  }
};

inline RunResult dispatch_agent(AgentKind kind, const AgentConfig& cfg,
                                const NonstationaryProcess& proc, RngStream& rng) {
  switch (kind) {
    case AgentKind::staql: return run_staql(cfg, proc, rng);
    case AgentKind::ttaql: return run_ttaql(cfg, proc, rng);
    case AgentKind::ignore: return run_ignore(cfg, proc, rng);
    case AgentKind::oracle: return run_oracle(cfg, proc, rng);
  }
  throw std::invalid_argument("dispatch_agent: unknown agent kind");
}

}  // namespace detail

// Runs n_runs independent trials of every selected agent. Run i of every
// agent draws from an identical stream derived from (master seed, i), so
// agents are compared on common random numbers and the whole table is a
// pure function of the config.
inline MetricsTable run_monte_carlo(const ExperimentConfig& cfg) {
  cfg.validate();
  const NonstationaryProcess proc = cfg.process();
  const AgentConfig agent_cfg = cfg.agent_config();
  const std::size_t n_agents = cfg.agents.size();

  const long n_chunks = (cfg.n_runs + detail::kChunkRuns - 1) / detail::kChunkRuns;
  struct ChunkOut {
    std::vector<detail::AgentAccum> accum;
    std::vector<RunRow> rows;
  };
  std::vector<ChunkOut> chunks(static_cast<std::size_t>(std::max(n_chunks, 0L)));

  detail::parallel_chunks(n_chunks, cfg.jobs, [&](long c) {
    const long begin = c * detail::kChunkRuns;
    const long end = std::min(cfg.n_runs, begin + detail::kChunkRuns);
    ChunkOut& out = chunks[c];
    out.accum.resize(n_agents);
    out.rows.reserve(static_cast<std::size_t>(end - begin) * n_agents);
    for (long run = begin; run < end; ++run) {
      for (std::size_t ai = 0; ai < n_agents; ++ai) {
        RngStream rng = RngStream::derive(cfg.master_seed, static_cast<std::uint64_t>(run));
        RunResult result;
        try {
          result = detail::dispatch_agent(cfg.agents[ai], agent_cfg, proc, rng);
        } catch (const std::exception& e) {
          throw std::runtime_error("run " + std::to_string(run) + " (" +
                                   to_string(cfg.agents[ai]) + "): " + e.what());
        }
        out.accum[ai].add(result, cfg.change_point, cfg.discounted_series, cfg.schedule.beta);
        RunRow row;
        row.agent = cfg.agents[ai];
        row.run_index = run;
        row.seed = rng.seed();
        row.detection_time = result.detection_time;
        row.outcome = result.outcome;
        row.total_return = result.total_return;
        row.post_change_return = result.post_change_return;
        out.rows.push_back(row);
      }
    }
  });

  std::vector<detail::AgentAccum> totals(n_agents);
  MetricsTable table;
  // Chunk rows are run-major, agent-minor; regroup them agent-major so each
  // agent's block is contiguous and run-ordered.
  std::vector<std::vector<RunRow>> rows_by_agent(n_agents);
  for (const ChunkOut& chunk : chunks) {
    for (std::size_t ai = 0; ai < n_agents; ++ai) {
      if (ai < chunk.accum.size()) totals[ai].merge(chunk.accum[ai]);
    }
    for (std::size_t j = 0; j < chunk.rows.size(); ++j) {
      rows_by_agent[j % n_agents].push_back(chunk.rows[j]);
    }
  }
  for (std::size_t ai = 0; ai < n_agents; ++ai) {
    table.agents.emplace_back(cfg.agents[ai], totals[ai].finalize());
    table.rows.insert(table.rows.end(), rows_by_agent[ai].begin(), rows_by_agent[ai].end());
  }
  return table;
}

// ---------------------------------------------------------------------------
// Detection-policy comparison (the delay/false-alarm tables)
// ---------------------------------------------------------------------------

// One table row: a (lambda_pre, lambda_post, eta) configuration probed with
// one acting policy during the detection phase.
struct TableRow {
  double lambda_pre = 0.0;
  double lambda_post = 0.0;
  double eta = 0.0;
  std::string policy;  // "full_stock" or "learned"
  long runs = 0;
  std::optional<double> avg_delay;  // over true detections
  double false_alarm_fraction = 0.0;
  long true_detects = 0;
  long misses = 0;
  long false_alarms = 0;
};

struct TableQuery {
  int which = 1;  // 1: demand drops (high_to_low), 2: demand rises (low_to_high)
  std::optional<double> eta;
  std::optional<std::pair<double, double>> rates;
  long n_runs = 2000;
  std::optional<std::uint64_t> master_seed;
  std::optional<int> jobs;
};

namespace detail {

struct TableConfigRow {
  double lambda_pre, lambda_post, eta;
};

inline std::vector<TableConfigRow> builtin_table_rows(int which) {
  if (which == 1) {
    return {{4.0, 1.8, 0.92}, {4.0, 1.8, 0.7}, {3.0, 1.0, 0.9},
            {3.0, 1.0, 0.7},  {3.5, 2.5, 0.2}, {3.5, 2.5, 0.1}};
  }
  if (which == 2) {
    return {{2.0, 4.0, 0.3},  {2.0, 4.0, 0.1}, {1.5, 3.5, 0.4},
            {1.5, 3.5, 0.3},  {2.0, 3.0, 0.2}, {2.0, 3.0, 0.05}};
  }
  throw std::invalid_argument("reproduce_table: table index must be 1 or 2");
}

// A single detection trial: phase 1 is ordinary Q-learning; the benchmark
// window arms the reward CUSUM; from then on the run either keeps learning
// (probe == nullptr, the learned-policy arm) or acts the fixed probe policy
// with the learner frozen (the full-stock arm). Stops at the first alarm.
inline std::optional<long> run_detection_trial(const AgentConfig& cfg,
                                               const NonstationaryProcess& proc, RngStream& rng,
                                               const std::vector<int>* probe) {
  QTable q = init_qtable(cfg.init_pre, proc.pre.n_states, proc.pre.n_actions, rng);
  double eps = cfg.schedule.eps0;
  double alpha = cfg.schedule.alpha0;
  CusumDetector detector(cfg.direction, cfg.eta, cfg.threshold_a_sd, cfg.baseline_until);
  std::vector<double> rewards;
  rewards.reserve(cfg.horizon);
  int s = 0;
  for (long t = 0; t < cfg.horizon; ++t) {
    double r;
    int next;
    if (probe != nullptr && t >= cfg.baseline_until) {
      std::tie(next, r) = env_step(proc, t, s, (*probe)[s], rng);
    } else {
      const int a = select_action(q, s, eps, rng);
      std::tie(next, r) = env_step(proc, t, s, a, rng);
      td_update(q, s, a, r, next, alpha, cfg.schedule.beta);
      eps = decay(eps, cfg.schedule.decrement, cfg.schedule.eps_cut);
      alpha = decay(alpha, cfg.schedule.decrement, cfg.schedule.alpha_cut);
    }
    rewards.push_back(r);
    if (t == cfg.baseline_until - 1) {
      detector.arm(baseline_stats(rewards, cfg.learn_until, cfg.baseline_until));
    }
    if (t >= cfg.baseline_until) {
      detector.update(r);
      if (detector.alarm()) return t;
    }
    s = next;
  }
  return std::nullopt;
}

}  // namespace detail

// For each (lambda_pre, lambda_post, eta) row, measures the average
// detection delay and false-alarm fraction with the detector driven by
// (a) the full-stock policy and (b) the policy the learner happens to hold,
// sharing run seeds between the two arms.
inline std::vector<TableRow> reproduce_table(const ExperimentConfig& base, const TableQuery& query) {
  std::vector<detail::TableConfigRow> rows;
  if (query.rates.has_value() || query.eta.has_value()) {
    detail::TableConfigRow row{};
    const auto defaults = detail::builtin_table_rows(query.which).front();
    row.lambda_pre = query.rates ? query.rates->first : defaults.lambda_pre;
    row.lambda_post = query.rates ? query.rates->second : defaults.lambda_post;
    row.eta = query.eta ? *query.eta : defaults.eta;
    rows.push_back(row);
  } else {
    rows = detail::builtin_table_rows(query.which);
  }

  const std::uint64_t master = query.master_seed.value_or(base.master_seed);
  const int jobs = query.jobs.value_or(base.jobs);

  std::vector<TableRow> out;
  for (std::size_t row_index = 0; row_index < rows.size(); ++row_index) {
    const auto& row = rows[row_index];
    ExperimentConfig cfg = base;
    cfg.lambda_pre = row.lambda_pre;
    cfg.lambda_post = row.lambda_post;
    cfg.eta = row.eta;
    cfg.direction = query.which == 1 ? Direction::high_to_low : Direction::low_to_high;
    cfg.n_runs = query.n_runs;
    cfg.validate();
    // With identical rates there is no change to detect: every alarm is a
    // false alarm and the delay column is undefined.
    const long effective_change =
        cfg.lambda_pre == cfg.lambda_post ? std::numeric_limits<long>::max() : cfg.change_point;
    const NonstationaryProcess proc = cfg.process();
    const AgentConfig agent_cfg = cfg.agent_config();
    const std::vector<int> full_stock = full_stock_policy_map(cfg.inventory.capacity);
    const std::uint64_t row_master = splitmix64(master + row_index + 1);

    struct ArmAccum {
      long runs = 0, true_detects = 0, misses = 0, false_alarms = 0;
      double sum_delay = 0.0;
    };
    const long n_chunks = (cfg.n_runs + detail::kChunkRuns - 1) / detail::kChunkRuns;
    std::vector<std::array<ArmAccum, 2>> chunks(static_cast<std::size_t>(n_chunks));
    detail::parallel_chunks(n_chunks, jobs, [&](long c) {
      const long begin = c * detail::kChunkRuns;
      const long end = std::min(cfg.n_runs, begin + detail::kChunkRuns);
      for (long run = begin; run < end; ++run) {
        for (int arm = 0; arm < 2; ++arm) {
          RngStream rng = RngStream::derive(row_master, static_cast<std::uint64_t>(run));
          const auto detected = detail::run_detection_trial(agent_cfg, proc, rng,
                                                            arm == 0 ? &full_stock : nullptr);
          ArmAccum& acc = chunks[c][arm];
          ++acc.runs;
          if (!detected.has_value()) {
            ++acc.misses;
          } else if (*detected < effective_change) {
            ++acc.false_alarms;
          } else {
            ++acc.true_detects;
            acc.sum_delay += static_cast<double>(*detected - effective_change);
          }
        }
      }
    });

    for (int arm = 0; arm < 2; ++arm) {
      ArmAccum total;
      for (const auto& chunk : chunks) {
        total.runs += chunk[arm].runs;
        total.true_detects += chunk[arm].true_detects;
        total.misses += chunk[arm].misses;
        total.false_alarms += chunk[arm].false_alarms;
        total.sum_delay += chunk[arm].sum_delay;
      }
      TableRow result;
      result.lambda_pre = row.lambda_pre;
      result.lambda_post = row.lambda_post;
      result.eta = row.eta;
      result.policy = arm == 0 ? "full_stock" : "learned";
      result.runs = total.runs;
      result.true_detects = total.true_detects;
      result.misses = total.misses;
      result.false_alarms = total.false_alarms;
      if (total.true_detects > 0) result.avg_delay = total.sum_delay / total.true_detects;
      result.false_alarm_fraction =
          total.runs > 0 ? static_cast<double>(total.false_alarms) / total.runs : 0.0;
      out.push_back(result);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Output files
// ---------------------------------------------------------------------------

namespace detail {

inline std::string format_double(double v) {
  char buffer[40];
  std::snprintf(buffer, sizeof(buffer), "%.17g", v);
  return buffer;
}

inline std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);  // '\n' endings on every platform
  if (!out) throw std::runtime_error("cannot open output file: " + path.string());
  return out;
}

}  // namespace detail

struct OutputPaths {
  std::filesystem::path summary;
  std::filesystem::path series;
  std::filesystem::path runs;
};

// Writes the JSON summary, the per-step mean cumulative post-change reward
// series (one column per agent), and the run-level CSV. With no agents only
// the summary is written.
inline OutputPaths emit_outputs(const MetricsTable& table, const ExperimentConfig& cfg) {
  namespace fs = std::filesystem;
  const fs::path dir(cfg.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory " + dir.string() + ": " + ec.message());

  OutputPaths paths;
  paths.summary = dir / (cfg.scenario + "_summary.json");

  nlohmann::json summary;
  summary["schema_version"] = 1;
  summary["scenario"] = cfg.scenario;
  summary["config"] = {
      {"capacity", cfg.inventory.capacity},
      {"fixed_cost", cfg.inventory.fixed_cost},
      {"unit_cost", cfg.inventory.unit_cost},
      {"holding_cost", cfg.inventory.holding_cost},
      {"unit_price", cfg.inventory.unit_price},
      {"rent", cfg.inventory.rent},
      {"charge_full_order", cfg.inventory.charge_full_order},
      {"lambda_pre", cfg.lambda_pre},
      {"lambda_post", cfg.lambda_post},
      {"change_point", cfg.change_point},
      {"horizon", cfg.horizon},
      {"beta", cfg.schedule.beta},
      {"alpha0", cfg.schedule.alpha0},
      {"alpha_cut", cfg.schedule.alpha_cut},
      {"eps0", cfg.schedule.eps0},
      {"eps_cut", cfg.schedule.eps_cut},
      {"decay_step", cfg.schedule.decrement},
      {"tau", cfg.learn_until},
      {"delta", cfg.baseline_until},
      {"direction", to_string(cfg.direction)},
      {"eta", cfg.eta},
      {"threshold_a", cfg.threshold_a_sd},
      {"threshold_b", cfg.threshold_b_sd},
      {"threshold_a_tilde", cfg.threshold_a_tilde_sd},
      {"n_runs", cfg.n_runs},
      {"seed", cfg.master_seed},
      {"discounted_series", cfg.discounted_series},
  };
  nlohmann::json agents = nlohmann::json::object();
  for (const auto& [kind, metrics] : table.agents) {
    nlohmann::json entry;
    entry["runs"] = metrics.runs;
    entry["rwd_mdp1"] = metrics.rwd_post_mean;
    entry["rwd_total"] = metrics.rwd_total_mean;
    if (metrics.avg_delay.has_value()) {
      entry["avg_delay"] = *metrics.avg_delay;
    } else {
      entry["avg_delay"] = nullptr;
    }
    entry["true_detect_pct"] = metrics.true_detect_pct;
    entry["miss_pct"] = metrics.miss_pct;
    entry["false_alarm_pct"] = metrics.false_alarm_pct;
    entry["armed_runs"] = metrics.armed_runs;
    entry["mean_abs_threshold"] = metrics.mean_abs_threshold;
    entry["mean_baseline_mean"] = metrics.mean_baseline_mean;
    entry["mean_baseline_sd"] = metrics.mean_baseline_sd;
    agents[to_string(kind)] = entry;
  }
  summary["agents"] = agents;

  {
    auto out = detail::open_output(paths.summary);
    out << summary.dump(2) << '\n';
  }

  if (table.agents.empty()) return paths;

  paths.series = dir / (cfg.scenario + "_series.csv");
  {
    auto out = detail::open_output(paths.series);
    out << "step_offset";
    for (const auto& [kind, _] : table.agents) out << ',' << to_string(kind);
    out << '\n';
    std::size_t length = 0;
    for (const auto& [_, metrics] : table.agents) length = std::max(length, metrics.series.size());
    for (std::size_t j = 0; j < length; ++j) {
      out << j;
      for (const auto& [_, metrics] : table.agents) {
        out << ',';
        if (j < metrics.series.size()) out << detail::format_double(metrics.series[j]);
      }
      out << '\n';
    }
  }

  paths.runs = dir / (cfg.scenario + "_runs.csv");
  {
    auto out = detail::open_output(paths.runs);
    out << "agent,run,seed,gamma_hat,outcome,reward_total,reward_post_change\n";
    for (const RunRow& row : table.rows) {
      out << to_string(row.agent) << ',' << row.run_index << ',' << row.seed << ',';
      if (row.detection_time.has_value()) out << *row.detection_time;
      out << ',' << to_string(row.outcome) << ',' << detail::format_double(row.total_return)
          << ',' << detail::format_double(row.post_change_return) << '\n';
    }
  }
  return paths;
}

inline void write_table_csv(const std::vector<TableRow>& rows, const std::filesystem::path& path) {
  auto out = detail::open_output(path);
  out << "lambda_pre,lambda_post,eta,policy,runs,avg_delay,false_alarm_fraction,"
         "true_detects,misses,false_alarms\n";
  for (const TableRow& row : rows) {
    out << detail::format_double(row.lambda_pre) << ',' << detail::format_double(row.lambda_post)
        << ',' << detail::format_double(row.eta) << ',' << row.policy << ',' << row.runs << ',';
    if (row.avg_delay.has_value()) out << detail::format_double(*row.avg_delay);
    out << ',' << detail::format_double(row.false_alarm_fraction) << ',' << row.true_detects
        << ',' << row.misses << ',' << row.false_alarms << '\n';
  }
}

}  // namespace adaptq
