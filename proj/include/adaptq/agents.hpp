#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "adaptq/detect.hpp"
#include "adaptq/mdp.hpp"
#include "adaptq/qlearn.hpp"
#include "adaptq/rng.hpp"

namespace adaptq {

// Which policy regime produced a step.
enum class Phase : std::uint8_t { learning, suspect, relearning };

enum class Outcome { true_detect, false_alarm, miss };

inline const char* to_string(Outcome o) {
  switch (o) {
    case Outcome::true_detect: return "true_detect";
    case Outcome::false_alarm: return "false_alarm";
    case Outcome::miss: return "miss";
  }
  return "?";
}

// Everything an end-to-end agent needs: the learning schedule, the benchmark
// window [learn_until, baseline_until), the detector settings (thresholds in
// sd0 multiples), and the fixed detection policy for suspect mode.
struct AgentConfig {
  long horizon = 5000;
  long learn_until = 500;     // steps granted to Q-learning before the window
  long baseline_until = 600;  // end of the benchmark window; detector arms here
  LearningSchedule schedule{};
  InitStrategy init_pre{};
  InitStrategy init_post{};
  Direction direction = Direction::high_to_low;
  double eta = 0.92;
  double threshold_a_sd = 6.0;         // single-threshold declare level
  double threshold_b_sd = 3.35;        // two-threshold suspect level
  double threshold_a_tilde_sd = 6.67;  // two-threshold declare level
  std::vector<int> qcd_policy;         // per-state action map for suspect mode

  void validate() const {
    schedule.validate();
    if (horizon < 1) throw std::invalid_argument("AgentConfig: horizon must be positive");
    if (learn_until < 0 || baseline_until - learn_until < 2 || baseline_until >= horizon) {
      throw std::invalid_argument("AgentConfig: need 0 <= learn_until < baseline_until < horizon "
                                  "with a window of at least two steps");
    }
    if (!(eta >= 0.0)) throw std::invalid_argument("AgentConfig: eta must be nonnegative");
    if (!(threshold_a_sd > 0.0 && threshold_b_sd > 0.0 && threshold_a_tilde_sd > 0.0)) {
      throw std::invalid_argument("AgentConfig: thresholds must be positive");
    }
    if (threshold_b_sd > threshold_a_tilde_sd) {
      throw std::invalid_argument("AgentConfig: suspect threshold B must not exceed declare "
                                  "threshold A-tilde");
    }
  }
};

// One run's outcome: the full reward trajectory, per-step phase labels, the
// detection time (if any), its classification against the true change point,
// and the discounted returns with the discount reset at the true change point.
struct RunResult {
  std::vector<double> rewards;
  std::vector<Phase> phases;
  std::vector<StepRecord> steps;
  std::optional<long> detection_time;
  Outcome outcome = Outcome::miss;
  double total_return = 0.0;
  double post_change_return = 0.0;
  std::optional<Baseline> baseline;
  double declare_threshold_abs = 0.0;  // resolved at arm time; 0 if never armed
};

namespace detail {

inline void finalize_run(RunResult& out, double beta, long change_point) {
  const long horizon = static_cast<long>(out.rewards.size());
  const auto returns = discounted_return(out.rewards, beta, std::min(change_point, horizon));
  out.total_return = returns.total;
  out.post_change_return = returns.post_change;
  if (out.detection_time.has_value() && *out.detection_time < change_point) {
    out.outcome = Outcome::false_alarm;
  } else if (!out.detection_time.has_value()) {
    out.outcome = Outcome::miss;
  } else {
    out.outcome = Outcome::true_detect;
  }
}

// Shared core of the single- and two-threshold agents. Phase 1 runs
// Q-learning while collecting rewards; the benchmark window [learn_until,
// baseline_until) arms the detector; after that every reward feeds the
// CUSUM. Between suspect_sd and declare_sd (in sd0 units) the agent acts
// with the fixed detection policy and freezes the Q-table; above declare_sd
// the change is declared: re-initialize, reset the schedule, disarm.
// A single-threshold agent is the special case suspect_sd == declare_sd.
inline RunResult run_threshold_agent(const AgentConfig& cfg, const NonstationaryProcess& proc,
                                     RngStream& rng, double suspect_sd, double declare_sd) {
  cfg.validate();
  if (suspect_sd < declare_sd &&
      static_cast<long>(cfg.qcd_policy.size()) < proc.pre.n_states) {
    throw std::invalid_argument("run_threshold_agent: qcd_policy does not cover all states");
  }

  QTable q = init_qtable(cfg.init_pre, proc.pre.n_states, proc.pre.n_actions, rng);
  double eps = cfg.schedule.eps0;
  double alpha = cfg.schedule.alpha0;
  CusumDetector detector(cfg.direction, cfg.eta, declare_sd, cfg.baseline_until);

  RunResult out;
  out.rewards.reserve(cfg.horizon);
  out.phases.reserve(cfg.horizon);
  out.steps.reserve(cfg.horizon);

  double suspect_abs = 0.0;
  double declare_abs = 0.0;
  bool found = false;
  bool suspect = false;
  int s = 0;

  for (long t = 0; t < cfg.horizon; ++t) {
    double r;
    int next;
    int a;
    if (suspect) {
      a = cfg.qcd_policy[s];
      std::tie(next, r) = env_step(proc, t, s, a, rng);
      out.phases.push_back(Phase::suspect);
    } else {
      a = select_action(q, s, eps, rng);
      std::tie(next, r) = env_step(proc, t, s, a, rng);
      td_update(q, s, a, r, next, alpha, cfg.schedule.beta);
      eps = decay(eps, cfg.schedule.decrement, cfg.schedule.eps_cut);
      alpha = decay(alpha, cfg.schedule.decrement, cfg.schedule.alpha_cut);
      out.phases.push_back(found ? Phase::relearning : Phase::learning);
    }
    out.rewards.push_back(r);
    out.steps.push_back({t, s, a, next, r});

    if (t == cfg.baseline_until - 1) {
      const Baseline baseline = baseline_stats(out.rewards, cfg.learn_until, cfg.baseline_until);
      detector.arm(baseline);
      suspect_abs = suspect_sd * baseline.sd;
      declare_abs = declare_sd * baseline.sd;
      out.baseline = baseline;
      out.declare_threshold_abs = declare_abs;
    }

    if (!found && t >= cfg.baseline_until) {
      const double w = detector.update(r);
      if (std::fabs(w) > suspect_abs) {
        suspect = true;
        if (std::fabs(w) > declare_abs) {
          found = true;
          suspect = false;
          out.detection_time = t;
          q = init_qtable(cfg.init_post, proc.pre.n_states, proc.pre.n_actions, rng);
          eps = cfg.schedule.eps0;
          alpha = cfg.schedule.alpha0;
          detector.disarm();  // one change point; one detection per run
        }
      } else {
        suspect = false;
      }
    }
    s = next;
  }

  finalize_run(out, cfg.schedule.beta, proc.change_point);
  return out;
}

}  // namespace detail

// Single-threshold adaptive Q-learning: learn, benchmark, watch the reward
// CUSUM, and on the first |w| > A re-initialize the learner and keep going.
inline RunResult run_staql(const AgentConfig& cfg, const NonstationaryProcess& proc,
                           RngStream& rng) {
  return detail::run_threshold_agent(cfg, proc, rng, cfg.threshold_a_sd, cfg.threshold_a_sd);
}

// Two-threshold adaptive Q-learning: as STAQL, but while B < |w| <= A-tilde
// the agent buys detection speed by acting with the fixed detection policy
// (Q-table frozen); it declares only at |w| > A-tilde.
inline RunResult run_ttaql(const AgentConfig& cfg, const NonstationaryProcess& proc,
                           RngStream& rng) {
  return detail::run_threshold_agent(cfg, proc, rng, cfg.threshold_b_sd,
                                     cfg.threshold_a_tilde_sd);
}

// Knows the change point exactly: re-initializes the learner at t = gamma.
// Detection delay is zero by definition.
inline RunResult run_oracle(const AgentConfig& cfg, const NonstationaryProcess& proc,
                            RngStream& rng) {
  cfg.validate();
  QTable q = init_qtable(cfg.init_pre, proc.pre.n_states, proc.pre.n_actions, rng);
  double eps = cfg.schedule.eps0;
  double alpha = cfg.schedule.alpha0;

  RunResult out;
  out.rewards.reserve(cfg.horizon);
  out.phases.reserve(cfg.horizon);
  out.steps.reserve(cfg.horizon);
  int s = 0;
  for (long t = 0; t < cfg.horizon; ++t) {
    if (t == proc.change_point) {
      q = init_qtable(cfg.init_post, proc.pre.n_states, proc.pre.n_actions, rng);
      eps = cfg.schedule.eps0;
      alpha = cfg.schedule.alpha0;
    }
    const int a = select_action(q, s, eps, rng);
    const auto [next, r] = env_step(proc, t, s, a, rng);
    td_update(q, s, a, r, next, alpha, cfg.schedule.beta);
    eps = decay(eps, cfg.schedule.decrement, cfg.schedule.eps_cut);
    alpha = decay(alpha, cfg.schedule.decrement, cfg.schedule.alpha_cut);
    out.rewards.push_back(r);
    out.phases.push_back(t < proc.change_point ? Phase::learning : Phase::relearning);
    out.steps.push_back({t, s, a, next, r});
    s = next;
  }
  if (proc.change_point < cfg.horizon) out.detection_time = proc.change_point;
  detail::finalize_run(out, cfg.schedule.beta, proc.change_point);
  return out;
}

// Never looks for a change: plain Q-learning across the whole horizon under
// the decayed schedule.
inline RunResult run_ignore(const AgentConfig& cfg, const NonstationaryProcess& proc,
                            RngStream& rng) {
  cfg.validate();
  QTable q = init_qtable(cfg.init_pre, proc.pre.n_states, proc.pre.n_actions, rng);
  double eps = cfg.schedule.eps0;
  double alpha = cfg.schedule.alpha0;

  RunResult out;
  out.rewards.reserve(cfg.horizon);
  out.phases.reserve(cfg.horizon);
  out.steps.reserve(cfg.horizon);
  int s = 0;
  for (long t = 0; t < cfg.horizon; ++t) {
    const int a = select_action(q, s, eps, rng);
    const auto [next, r] = env_step(proc, t, s, a, rng);
    td_update(q, s, a, r, next, alpha, cfg.schedule.beta);
    eps = decay(eps, cfg.schedule.decrement, cfg.schedule.eps_cut);
    alpha = decay(alpha, cfg.schedule.decrement, cfg.schedule.alpha_cut);
    out.rewards.push_back(r);
    out.phases.push_back(Phase::learning);
    out.steps.push_back({t, s, a, next, r});
    s = next;
  }
  detail::finalize_run(out, cfg.schedule.beta, proc.change_point);
  return out;
}

}  // namespace adaptq
