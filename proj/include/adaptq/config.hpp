#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "adaptq/agents.hpp"
#include "adaptq/inventory.hpp"

namespace adaptq {

enum class AgentKind { staql, ttaql, ignore, oracle };

inline const char* to_string(AgentKind kind) {
  switch (kind) {
    case AgentKind::staql: return "staql";
    case AgentKind::ttaql: return "ttaql";
    case AgentKind::ignore: return "ignore";
    case AgentKind::oracle: return "oracle";
  }
  return "?";
}

inline AgentKind agent_kind_from_string(std::string_view name) {
  if (name == "staql") return AgentKind::staql;
  if (name == "ttaql") return AgentKind::ttaql;
  if (name == "ignore") return AgentKind::ignore;
  if (name == "oracle") return AgentKind::oracle;
  throw std::invalid_argument("unknown agent: " + std::string(name));
}

namespace detail {

inline std::string trim(std::string_view text) {
  const auto* first = text.begin();
  const auto* last = text.end();
  while (first != last && std::isspace(static_cast<unsigned char>(*first))) ++first;
  while (last != first && std::isspace(static_cast<unsigned char>(*(last - 1)))) --last;
  return std::string(first, last);
}

inline std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> items;
  std::stringstream stream(text);
  std::string item;
  while (std::getline(stream, item, ',')) {
    item = trim(item);
    if (!item.empty()) items.push_back(item);
  }
  return items;
}

inline double to_double(const std::string& key, const std::string& value) {
  std::size_t used = 0;
  double parsed = 0.0;
  try {
    parsed = std::stod(value, &used);
  } catch (const std::exception&) {
    throw std::invalid_argument("config key '" + key + "': cannot parse number from '" + value + "'");
  }
  if (used != value.size()) {
    throw std::invalid_argument("config key '" + key + "': trailing junk in '" + value + "'");
  }
  return parsed;
}

inline long to_long(const std::string& key, const std::string& value) {
  std::size_t used = 0;
  long parsed = 0;
  try {
    parsed = std::stol(value, &used);
  } catch (const std::exception&) {
    throw std::invalid_argument("config key '" + key + "': cannot parse integer from '" + value + "'");
  }
  if (used != value.size()) {
    throw std::invalid_argument("config key '" + key + "': trailing junk in '" + value + "'");
  }
  return parsed;
}

inline bool to_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw std::invalid_argument("config key '" + key + "': expected a boolean, got '" + value + "'");
}

// Flat `key = value` file; '#' starts a comment, blank lines are skipped.
struct KeyValueFile {
  std::map<std::string, std::string> entries;

  static KeyValueFile parse(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path.string());
    KeyValueFile file;
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      const std::string stripped = trim(line);
      if (stripped.empty()) continue;
      const auto eq = stripped.find('=');
      if (eq == std::string::npos) {
        throw std::invalid_argument(path.string() + ":" + std::to_string(line_no) +
                                    ": expected 'key = value'");
      }
      const std::string key = trim(stripped.substr(0, eq));
      const std::string value = trim(stripped.substr(eq + 1));
      if (key.empty()) {
        throw std::invalid_argument(path.string() + ":" + std::to_string(line_no) + ": empty key");
      }
      file.entries[key] = value;
    }
    return file;
  }

  bool take(const std::string& key, std::string& out) {
    const auto it = entries.find(key);
    if (it == entries.end()) return false;
    out = it->second;
    entries.erase(it);
    return true;
  }
};

}  // namespace detail

// A full Monte Carlo experiment: the environment, the agent stack, and the
// execution settings. Defaults are the N=5 benchmark scenario; a config file
// overrides any subset of keys.
struct ExperimentConfig {
  std::string scenario = "inventory_n5";
  InventoryParams inventory{};
  double lambda_pre = 4.0;
  double lambda_post = 1.8;
  long change_point = 1000;
  long horizon = 5000;
  LearningSchedule schedule{};
  long learn_until = 500;
  long baseline_until = 600;
  Direction direction = Direction::high_to_low;
  double eta = 0.92;
  double threshold_a_sd = 6.0;
  double threshold_b_sd = 3.35;
  double threshold_a_tilde_sd = 6.67;
  std::string init_pre = "auto";
  std::string init_post = "auto";
  double init_scale = 0.0;  // 0 = default_init_scale()
  std::vector<AgentKind> agents = {AgentKind::staql, AgentKind::ttaql, AgentKind::ignore,
                                   AgentKind::oracle};
  long n_runs = 10000;
  std::uint64_t master_seed = 7;
  std::string out_dir = "out";
  int jobs = 0;  // 0 = hardware concurrency
  bool discounted_series = false;

  void validate() const {
    inventory.validate();
    schedule.validate();
    if (!(lambda_pre >= 0.0 && lambda_post >= 0.0)) {
      throw std::invalid_argument("ExperimentConfig: demand rates must be nonnegative");
    }
    if (n_runs < 1) throw std::invalid_argument("ExperimentConfig: n_runs must be >= 1");
    if (change_point < 0 || change_point >= horizon) {
      throw std::invalid_argument("ExperimentConfig: need 0 <= change_point < horizon");
    }
    if (jobs < 0) throw std::invalid_argument("ExperimentConfig: jobs must be >= 0");
    agent_config().validate();
  }

  // Init strategy resolution: 'auto' picks the monotone (order-up-to) shape
  // when demand is high relative to capacity and a random table when it is
  // low. The default amplitude is a fraction of one demand unit's reward
  // swing (unit_price + holding_cost): small enough that early TD noise
  // keeps the learner exploring around the seeded map, which is what puts
  // the reward detector at its ~1% false-alarm operating point.
  InitStrategy resolve_init(const std::string& name, double rate) const {
    InitStrategy strategy;
    if (name == "auto") {
      strategy.kind = rate >= inventory.capacity / 2.0 ? InitKind::monotone : InitKind::random;
    } else {
      strategy.kind = init_kind_from_string(name);
    }
    strategy.scale = init_scale > 0.0 ? init_scale : default_init_scale();
    return strategy;
  }

  double default_init_scale() const {
    return 0.45 * (inventory.unit_price + inventory.holding_cost);
  }

  AgentConfig agent_config() const {
    AgentConfig cfg;
    cfg.horizon = horizon;
    cfg.learn_until = learn_until;
    cfg.baseline_until = baseline_until;
    cfg.schedule = schedule;
    cfg.init_pre = resolve_init(init_pre, lambda_pre);
    cfg.init_post = resolve_init(init_post, lambda_post);
    cfg.direction = direction;
    cfg.eta = eta;
    cfg.threshold_a_sd = threshold_a_sd;
    cfg.threshold_b_sd = threshold_b_sd;
    cfg.threshold_a_tilde_sd = threshold_a_tilde_sd;
    cfg.qcd_policy = full_stock_policy_map(inventory.capacity);
    return cfg;
  }

  NonstationaryProcess process() const {
    return NonstationaryProcess(exact_inventory_kernel(inventory, DemandModel{lambda_pre}),
                                exact_inventory_kernel(inventory, DemandModel{lambda_post}),
                                change_point);
  }

  static ExperimentConfig from_file(const std::filesystem::path& path) {
    ExperimentConfig cfg;
    auto file = detail::KeyValueFile::parse(path);
    std::string v;
    if (file.take("scenario", v)) cfg.scenario = v;
    if (file.take("capacity", v)) cfg.inventory.capacity = static_cast<int>(detail::to_long("capacity", v));
    if (file.take("fixed_cost", v)) cfg.inventory.fixed_cost = detail::to_double("fixed_cost", v);
    if (file.take("unit_cost", v)) cfg.inventory.unit_cost = detail::to_double("unit_cost", v);
    if (file.take("holding_cost", v)) cfg.inventory.holding_cost = detail::to_double("holding_cost", v);
    if (file.take("unit_price", v)) cfg.inventory.unit_price = detail::to_double("unit_price", v);
    if (file.take("rent", v)) cfg.inventory.rent = detail::to_double("rent", v);
    if (file.take("charge_full_order", v)) cfg.inventory.charge_full_order = detail::to_bool("charge_full_order", v);
    if (file.take("lambda_pre", v)) cfg.lambda_pre = detail::to_double("lambda_pre", v);
    if (file.take("lambda_post", v)) cfg.lambda_post = detail::to_double("lambda_post", v);
    if (file.take("change_point", v)) cfg.change_point = detail::to_long("change_point", v);
    if (file.take("horizon", v)) cfg.horizon = detail::to_long("horizon", v);
    if (file.take("beta", v)) cfg.schedule.beta = detail::to_double("beta", v);
    if (file.take("alpha0", v)) cfg.schedule.alpha0 = detail::to_double("alpha0", v);
    if (file.take("alpha_cut", v)) cfg.schedule.alpha_cut = detail::to_double("alpha_cut", v);
    if (file.take("eps0", v)) cfg.schedule.eps0 = detail::to_double("eps0", v);
    if (file.take("eps_cut", v)) cfg.schedule.eps_cut = detail::to_double("eps_cut", v);
    if (file.take("decay_step", v)) cfg.schedule.decrement = detail::to_double("decay_step", v);
    if (file.take("tau", v)) cfg.learn_until = detail::to_long("tau", v);
    if (file.take("delta", v)) cfg.baseline_until = detail::to_long("delta", v);
    if (file.take("direction", v)) cfg.direction = direction_from_string(v);
    if (file.take("eta", v)) cfg.eta = detail::to_double("eta", v);
    if (file.take("threshold_a", v)) cfg.threshold_a_sd = detail::to_double("threshold_a", v);
    if (file.take("threshold_b", v)) cfg.threshold_b_sd = detail::to_double("threshold_b", v);
    if (file.take("threshold_a_tilde", v)) cfg.threshold_a_tilde_sd = detail::to_double("threshold_a_tilde", v);
    if (file.take("init_pre", v)) cfg.init_pre = v;
    if (file.take("init_post", v)) cfg.init_post = v;
    if (file.take("init_scale", v)) cfg.init_scale = detail::to_double("init_scale", v);
    if (file.take("agents", v)) {
      cfg.agents.clear();
      for (const auto& name : detail::split_list(v)) cfg.agents.push_back(agent_kind_from_string(name));
    }
    if (file.take("n_runs", v)) cfg.n_runs = detail::to_long("n_runs", v);
    if (file.take("seed", v)) cfg.master_seed = static_cast<std::uint64_t>(detail::to_long("seed", v));
    if (file.take("out_dir", v)) cfg.out_dir = v;
    if (file.take("jobs", v)) cfg.jobs = static_cast<int>(detail::to_long("jobs", v));
    if (file.take("discounted_series", v)) cfg.discounted_series = detail::to_bool("discounted_series", v);
    if (!file.entries.empty()) {
      std::string unknown;
      for (const auto& [key, _] : file.entries) {
        if (!unknown.empty()) unknown += ", ";
        unknown += key;
      }
      throw std::invalid_argument(path.string() + ": unknown config keys: " + unknown);
    }
    return cfg;
  }
};

}  // namespace adaptq
