#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "adaptq/rng.hpp"

namespace adaptq {

inline constexpr double kRowSumTolerance = 1e-9;

// Dense finite MDP: transition probabilities and rewards indexed by
// (state, action, next state). Rows of the kernel must be probability
// distributions; validate() is called by every consumer that plans on it.
struct TabularMDP {
  int n_states = 0;
  int n_actions = 0;
  std::vector<double> kernel;  // row-major (s, a, s')
  std::vector<double> reward;  // same layout

  TabularMDP() = default;

  TabularMDP(int states, int actions) : n_states(states), n_actions(actions) {
    if (states <= 0 || actions <= 0) {
      throw std::invalid_argument("TabularMDP: state and action counts must be positive");
    }
    const std::size_t n = static_cast<std::size_t>(states) * actions * states;
    kernel.assign(n, 0.0);
    reward.assign(n, 0.0);
  }

  std::size_t index(int s, int a, int next) const {
    return (static_cast<std::size_t>(s) * n_actions + a) * n_states + next;
  }

  void check_state_action(int s, int a) const {
    if (s < 0 || s >= n_states) {
      throw std::invalid_argument("TabularMDP: state " + std::to_string(s) + " out of range");
    }
    if (a < 0 || a >= n_actions) {
      throw std::invalid_argument("TabularMDP: action " + std::to_string(a) + " out of range");
    }
  }

  double transition(int s, int a, int next) const { return kernel[index(s, a, next)]; }
  double& transition(int s, int a, int next) { return kernel[index(s, a, next)]; }
  double reward_at(int s, int a, int next) const { return reward[index(s, a, next)]; }
  double& reward_at(int s, int a, int next) { return reward[index(s, a, next)]; }

  std::span<const double> kernel_row(int s, int a) const {
    return {kernel.data() + index(s, a, 0), static_cast<std::size_t>(n_states)};
  }

  // Every kernel row must sum to 1 within kRowSumTolerance with entries in
  // [0, 1]; every reward must be finite.
  void validate() const {
    for (int s = 0; s < n_states; ++s) {
      for (int a = 0; a < n_actions; ++a) {
        double sum = 0.0;
        for (int next = 0; next < n_states; ++next) {
          const double p = transition(s, a, next);
          if (!(p >= 0.0 && p <= 1.0 + kRowSumTolerance)) {
            throw std::invalid_argument("TabularMDP: kernel entry outside [0, 1] at (" +
                                        std::to_string(s) + ", " + std::to_string(a) + ")");
          }
          if (!std::isfinite(reward_at(s, a, next))) {
            throw std::invalid_argument("TabularMDP: non-finite reward at (" + std::to_string(s) +
                                        ", " + std::to_string(a) + ")");
          }
          sum += p;
        }
        if (std::fabs(sum - 1.0) > kRowSumTolerance) {
          throw std::invalid_argument("TabularMDP: kernel row (" + std::to_string(s) + ", " +
                                      std::to_string(a) + ") sums to " + std::to_string(sum));
        }
      }
    }
  }
};

// One abrupt model change: the pre-change kernel governs steps t < change_point
// and the post-change kernel every step from change_point on.
struct NonstationaryProcess {
  TabularMDP pre;
  TabularMDP post;
  long change_point = 0;

  NonstationaryProcess() = default;

  NonstationaryProcess(TabularMDP pre_model, TabularMDP post_model, long gamma)
      : pre(std::move(pre_model)), post(std::move(post_model)), change_point(gamma) {
    if (pre.n_states != post.n_states || pre.n_actions != post.n_actions) {
      throw std::invalid_argument("NonstationaryProcess: models must share state and action spaces");
    }
    if (change_point < 0) {
      throw std::invalid_argument("NonstationaryProcess: change point must be nonnegative");
    }
  }

  const TabularMDP& model_at(long t) const { return t < change_point ? pre : post; }
};

// One logged environment transition.
struct StepRecord {
  long t = 0;
  int state = 0;
  int action = 0;
  int next_state = 0;
  double reward = 0.0;
};

// Inverse-CDF draw over the kernel row (s, a), walking next states in
// ascending order. `u` must lie in [0, 1).
inline int sample_from_row(const TabularMDP& mdp, int s, int a, double u) {
  mdp.check_state_action(s, a);
  const auto row = mdp.kernel_row(s, a);
  double cumulative = 0.0;
  int last_positive = -1;
  for (int next = 0; next < mdp.n_states; ++next) {
    if (row[next] > 0.0) last_positive = next;
    cumulative += row[next];
    if (u < cumulative) return next;
  }
  if (last_positive < 0) {
    throw std::invalid_argument("sample_from_row: kernel row has no mass");
  }
  return last_positive;  // u landed in the rounding gap at the top of the CDF
}

// Consumes exactly one uniform draw.
inline int sample_next_state(const TabularMDP& mdp, int s, int a, RngStream& rng) {
  return sample_from_row(mdp, s, a, rng.uniform());
}

// One step of the nonstationary process at time t: samples the next state
// from the active model and returns it with the realized reward.
inline std::pair<int, double> env_step(const NonstationaryProcess& proc, long t, int s, int a,
                                       RngStream& rng) {
  if (t < 0) throw std::invalid_argument("env_step: time index must be nonnegative");
  const TabularMDP& model = proc.model_at(t);
  const int next = sample_next_state(model, s, a, rng);
  return {next, model.reward_at(s, a, next)};
}

struct PlanResult {
  std::vector<double> values;    // per state
  std::vector<double> q_values;  // row-major (state, action)
  std::vector<int> policy;       // argmax action per state, lowest index on ties
  long iterations = 0;
};

// Value iteration to sup-norm change < tol. The returned Q satisfies the
// fixed-point equation within tol / (1 - beta); the greedy policy breaks
// ties toward the lowest action index.
inline PlanResult value_iteration(const TabularMDP& mdp, double beta, double tol,
                                  long max_iterations = 5'000'000) {
  if (!(beta > 0.0 && beta < 1.0)) {
    throw std::invalid_argument("value_iteration: beta must lie in (0, 1)");
  }
  if (!(tol > 0.0)) throw std::invalid_argument("value_iteration: tol must be positive");
  mdp.validate();

  const int S = mdp.n_states;
  const int A = mdp.n_actions;

  // Expected immediate reward per (s, a), hoisted out of the sweep.
  std::vector<double> expected_reward(static_cast<std::size_t>(S) * A, 0.0);
  for (int s = 0; s < S; ++s) {
    for (int a = 0; a < A; ++a) {
      double acc = 0.0;
      for (int next = 0; next < S; ++next) {
        acc += mdp.transition(s, a, next) * mdp.reward_at(s, a, next);
      }
      expected_reward[static_cast<std::size_t>(s) * A + a] = acc;
    }
  }

  std::vector<double> values(S, 0.0);
  std::vector<double> updated(S, 0.0);
  long iterations = 0;
  for (; iterations < max_iterations; ++iterations) {
    double change = 0.0;
    for (int s = 0; s < S; ++s) {
      double best = -std::numeric_limits<double>::infinity();
      for (int a = 0; a < A; ++a) {
        double q = expected_reward[static_cast<std::size_t>(s) * A + a];
        const auto row = mdp.kernel_row(s, a);
        double future = 0.0;
        for (int next = 0; next < S; ++next) future += row[next] * values[next];
        q += beta * future;
        if (q > best) best = q;
      }
      updated[s] = best;
      change = std::max(change, std::fabs(best - values[s]));
    }
    values.swap(updated);
    if (change < tol) {
      ++iterations;
      break;
    }
  }
  if (iterations >= max_iterations) {
    throw std::runtime_error("value_iteration: did not converge within iteration budget");
  }

  PlanResult result;
  result.values = values;
  result.iterations = iterations;
  result.q_values.assign(static_cast<std::size_t>(S) * A, 0.0);
  result.policy.assign(S, 0);
  for (int s = 0; s < S; ++s) {
    double best = -std::numeric_limits<double>::infinity();
    int best_action = 0;
    for (int a = 0; a < A; ++a) {
      double q = expected_reward[static_cast<std::size_t>(s) * A + a];
      const auto row = mdp.kernel_row(s, a);
      double future = 0.0;
      for (int next = 0; next < S; ++next) future += row[next] * values[next];
      q += beta * future;
      result.q_values[static_cast<std::size_t>(s) * A + a] = q;
      if (q > best) {
        best = q;
        best_action = a;
      }
    }
    result.policy[s] = best_action;
  }
  return result;
}

struct ReturnPair {
  double total = 0.0;
  double post_change = 0.0;
};

// Discounted return with the discount exponent reset at the change point:
// total = sum_{t < gamma} beta^t R_t + sum_{t >= gamma} beta^(t - gamma) R_t,
// post_change = the second sum alone. beta = 1 is allowed here (plain sums).
inline ReturnPair discounted_return(std::span<const double> rewards, double beta,
                                    long change_point) {
  if (!(beta > 0.0 && beta <= 1.0)) {
    throw std::invalid_argument("discounted_return: beta must lie in (0, 1]");
  }
  const long n = static_cast<long>(rewards.size());
  if (change_point < 0 || change_point > n) {
    throw std::invalid_argument("discounted_return: change point outside [0, len]");
  }
  ReturnPair out;
  double weight = 1.0;
  for (long t = 0; t < change_point; ++t) {
    out.total += weight * rewards[t];
    weight *= beta;
  }
  weight = 1.0;
  for (long t = change_point; t < n; ++t) {
    out.post_change += weight * rewards[t];
    weight *= beta;
  }
  out.total += out.post_change;
  return out;
}

}  // namespace adaptq
