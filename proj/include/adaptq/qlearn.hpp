#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "adaptq/mdp.hpp"
#include "adaptq/rng.hpp"

namespace adaptq {

// Dense per-(state, action) value estimates.
struct QTable {
  int n_states = 0;
  int n_actions = 0;
  std::vector<double> values;

  QTable() = default;

  QTable(int states, int actions) : n_states(states), n_actions(actions) {
    if (states <= 0 || actions <= 0) {
      throw std::invalid_argument("QTable: dimensions must be positive");
    }
    values.assign(static_cast<std::size_t>(states) * actions, 0.0);
  }

  double at(int s, int a) const { return values[static_cast<std::size_t>(s) * n_actions + a]; }
  double& at(int s, int a) { return values[static_cast<std::size_t>(s) * n_actions + a]; }

  bool operator==(const QTable& other) const = default;
};

// Exploration and learning-rate schedule: both rates start at their initial
// values and lose `decrement` per environment step until the cutoff floor.
struct LearningSchedule {
  double alpha0 = 0.2;
  double alpha_cut = 0.05;
  double eps0 = 0.2;
  double eps_cut = 0.05;
  double decrement = 0.001;
  double beta = 0.9999;

  void validate() const {
    if (!(alpha_cut > 0.0 && alpha_cut <= alpha0 && alpha0 <= 1.0)) {
      throw std::invalid_argument("LearningSchedule: need 0 < alpha_cut <= alpha0 <= 1");
    }
    if (!(eps_cut >= 0.0 && eps_cut <= eps0 && eps0 <= 1.0)) {
      throw std::invalid_argument("LearningSchedule: need 0 <= eps_cut <= eps0 <= 1");
    }
    if (!(decrement >= 0.0)) throw std::invalid_argument("LearningSchedule: decrement must be >= 0");
    if (!(beta > 0.0 && beta < 1.0)) {
      throw std::invalid_argument("LearningSchedule: beta must lie in (0, 1)");
    }
  }
};

enum class InitKind { random, pyramid, monotone };

inline InitKind init_kind_from_string(std::string_view name) {
  if (name == "random") return InitKind::random;
  if (name == "pyramid") return InitKind::pyramid;
  if (name == "monotone") return InitKind::monotone;
  throw std::invalid_argument("unknown Q-table init kind: " + std::string(name));
}

inline const char* to_string(InitKind kind) {
  switch (kind) {
    case InitKind::random: return "random";
    case InitKind::pyramid: return "pyramid";
    case InitKind::monotone: return "monotone";
  }
  return "?";
}

struct InitStrategy {
  InitKind kind = InitKind::random;
  double scale = 1.0;
};

// Build a starting Q-table.
//   random   — i.i.d. uniform entries on [0, scale].
//   pyramid  — greedy action rises to a peak at the middle state, then falls.
//   monotone — greedy map is s -> clamp(n_actions-1 - s), the order-up-to-
//              capacity shape known to be optimal for inventory problems.
inline QTable init_qtable(const InitStrategy& strategy, int n_states, int n_actions,
                          RngStream& rng) {
  QTable q(n_states, n_actions);
  switch (strategy.kind) {
    case InitKind::random:
      for (double& v : q.values) v = strategy.scale * rng.uniform();
      break;
    case InitKind::pyramid:
      for (int s = 0; s < n_states; ++s) {
        const double x = n_states > 1 ? static_cast<double>(s) / (n_states - 1) : 0.5;
        const int peak = static_cast<int>(
            std::lround((n_actions - 1) * (1.0 - std::fabs(2.0 * x - 1.0))));
        q.at(s, peak) = strategy.scale;
      }
      break;
    case InitKind::monotone:
      for (int s = 0; s < n_states; ++s) {
        const int target = std::clamp(n_actions - 1 - s, 0, n_actions - 1);
        q.at(s, target) = strategy.scale;
      }
      break;
  }
  return q;
}

// Argmax over actions with lowest-index tie-breaking.
inline int greedy_action(const QTable& q, int s) {
  int best = 0;
  double best_value = q.at(s, 0);
  for (int a = 1; a < q.n_actions; ++a) {
    if (q.at(s, a) > best_value) {
      best_value = q.at(s, a);
      best = a;
    }
  }
  return best;
}

inline std::vector<int> greedy_policy(const QTable& q) {
  std::vector<int> policy(static_cast<std::size_t>(q.n_states));
  for (int s = 0; s < q.n_states; ++s) policy[s] = greedy_action(q, s);
  return policy;
}

// Epsilon-greedy selection: one uniform draw decides the branch; a second
// draw (only when exploring) picks the action uniformly.
inline int select_action(const QTable& q, int s, double eps, RngStream& rng) {
  if (!(eps >= 0.0 && eps <= 1.0)) {
    throw std::invalid_argument("select_action: eps must lie in [0, 1]");
  }
  if (rng.uniform() < eps) return rng.uniform_int(q.n_actions);
  return greedy_action(q, s);
}

// One temporal-difference update; touches only the (s, a) entry. Returns the
// updated entry.
inline double td_update(QTable& q, int s, int a, double reward, int s_next, double alpha,
                        double beta) {
  if (!(alpha > 0.0 && alpha <= 1.0)) {
    throw std::invalid_argument("td_update: alpha must lie in (0, 1]");
  }
  double best_next = q.at(s_next, 0);
  for (int next_a = 1; next_a < q.n_actions; ++next_a) {
    best_next = std::max(best_next, q.at(s_next, next_a));
  }
  const double td = reward + beta * best_next - q.at(s, a);
  q.at(s, a) += alpha * td;
  return q.at(s, a);
}

// Linear decay with a hard floor: one decrement per environment step,
// applied independently to the exploration and learning rates.
inline double decay(double value, double delta, double cutoff) {
  return value > cutoff ? std::max(value - delta, cutoff) : value;
}

// Tabular Q-learning on a fixed model: epsilon-greedy action selection with
// linearly decaying exploration and learning rates.
inline QTable run_q_learning(const TabularMDP& mdp, const LearningSchedule& schedule,
                             const InitStrategy& init, long steps, RngStream& rng,
                             int start_state = 0) {
  schedule.validate();
  QTable q = init_qtable(init, mdp.n_states, mdp.n_actions, rng);
  double eps = schedule.eps0;
  double alpha = schedule.alpha0;
  int s = start_state;
  for (long t = 0; t < steps; ++t) {
    const int a = select_action(q, s, eps, rng);
    const int next = sample_next_state(mdp, s, a, rng);
    td_update(q, s, a, mdp.reward_at(s, a, next), next, alpha, schedule.beta);
    eps = decay(eps, schedule.decrement, schedule.eps_cut);
    alpha = decay(alpha, schedule.decrement, schedule.alpha_cut);
    s = next;
  }
  return q;
}

}  // namespace adaptq
