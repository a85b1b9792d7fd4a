#pragma once

#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>

#include "adaptq/mdp.hpp"
#include "adaptq/rng.hpp"

namespace adaptq {

// Pre-change reward statistics estimated over the window [begin, end).
struct Baseline {
  double mean = 0.0;
  double sd = 0.0;
  long window_begin = 0;
  long window_end = 0;
};

// Sample mean and sample standard deviation (n - 1 denominator) of the
// rewards collected over [begin, end).
inline Baseline baseline_stats(std::span<const double> rewards, long begin, long end) {
  if (begin < 0 || end > static_cast<long>(rewards.size()) || end - begin < 2) {
    throw std::invalid_argument("baseline_stats: window must hold at least two rewards");
  }
  const long n = end - begin;
  double sum = 0.0;
  for (long i = begin; i < end; ++i) sum += rewards[i];
  const double mean = sum / static_cast<double>(n);
  double ss = 0.0;
  for (long i = begin; i < end; ++i) {
    const double d = rewards[i] - mean;
    ss += d * d;
  }
  Baseline b;
  b.mean = mean;
  b.sd = std::sqrt(ss / static_cast<double>(n - 1));
  b.window_begin = begin;
  b.window_end = end;
  return b;
}

enum class Direction { low_to_high, high_to_low, two_sided };

inline Direction direction_from_string(std::string_view name) {
  if (name == "low_to_high") return Direction::low_to_high;
  if (name == "high_to_low") return Direction::high_to_low;
  if (name == "two_sided") return Direction::two_sided;
  throw std::invalid_argument("unknown detector direction: " + std::string(name));
}

inline const char* to_string(Direction d) {
  switch (d) {
    case Direction::low_to_high: return "low_to_high";
    case Direction::high_to_low: return "high_to_low";
    case Direction::two_sided: return "two_sided";
  }
  return "?";
}

// Nonparametric reflected CUSUM on rewards. The statistic drifts toward zero
// while rewards match the baseline and away from it once the mean moves by
// more than the drift guard eta * sd0. Thresholds are specified in sd0
// multiples and resolved to absolute units when the detector is armed.
//
//   low_to_high:  w = max(0, w + r - mu0 - eta sd0)   (w >= 0)
//   high_to_low:  w = min(0, w + r - mu0 + eta sd0)   (w <= 0)
//   two_sided:    both recursions; the larger |w| is reported.
class CusumDetector {
 public:
  CusumDetector(Direction direction, double eta, double threshold_sd, long armed_from)
      : direction_(direction), eta_(eta), threshold_sd_(threshold_sd), armed_from_(armed_from) {
    if (!(eta >= 0.0)) throw std::invalid_argument("CusumDetector: eta must be nonnegative");
    if (!(threshold_sd > 0.0)) {
      throw std::invalid_argument("CusumDetector: threshold must be positive");
    }
  }

  void arm(const Baseline& baseline) {
    baseline_ = baseline;
    abs_threshold_ = threshold_sd_ * baseline.sd;
    armed_ = true;
    up_ = 0.0;
    down_ = 0.0;
  }

  bool armed() const { return armed_; }
  long armed_from() const { return armed_from_; }
  double eta() const { return eta_; }
  double threshold_sd() const { return threshold_sd_; }

  const Baseline& baseline() const {
    require_armed();
    return baseline_;
  }

  double absolute_threshold() const {
    require_armed();
    return abs_threshold_;
  }

  // Feed one reward; returns the running statistic.
  double update(double reward) {
    require_armed();
    const double guard = eta_ * baseline_.sd;
    const double centered = reward - baseline_.mean;
    if (direction_ != Direction::high_to_low) up_ = std::max(0.0, up_ + centered - guard);
    if (direction_ != Direction::low_to_high) down_ = std::min(0.0, down_ + centered + guard);
    return statistic();
  }

  // Signed statistic; for two_sided the recursion with the larger magnitude.
  double statistic() const {
    switch (direction_) {
      case Direction::low_to_high: return up_;
      case Direction::high_to_low: return down_;
      case Direction::two_sided: return up_ >= -down_ ? up_ : down_;
    }
    return 0.0;
  }

  bool check_alarm(double abs_threshold) const { return std::fabs(statistic()) > abs_threshold; }

  bool alarm() const {
    require_armed();
    return check_alarm(abs_threshold_);
  }

  void reset_statistic() {
    up_ = 0.0;
    down_ = 0.0;
  }

  void disarm() { armed_ = false; }

 private:
  void require_armed() const {
    if (!armed_) throw std::logic_error("CusumDetector: used before arm()");
  }

  Direction direction_;
  double eta_;
  double threshold_sd_;
  long armed_from_;
  bool armed_ = false;
  Baseline baseline_{};
  double abs_threshold_ = 0.0;
  double up_ = 0.0;    // low_to_high recursion, kept >= 0
  double down_ = 0.0;  // high_to_low recursion, kept <= 0
};

// Model-based CUSUM on log-likelihood ratios of observed transitions,
//   w = max(0, w + log(T_post(s, a, s') / T_pre(s, a, s'))),
// the recursive equivalent of maximizing the ratio sum over start indices.
// A transition impossible under the pre-change model pins the statistic at
// +infinity and flags an immediate alarm.
class GlrCusum {
 public:
  GlrCusum(const TabularMDP& pre, const TabularMDP& post, double threshold)
      : pre_(&pre), post_(&post), threshold_(threshold) {
    if (pre.n_states != post.n_states || pre.n_actions != post.n_actions) {
      throw std::invalid_argument("GlrCusum: models must share state and action spaces");
    }
  }

  double update(int s_prev, int a_prev, int s_curr) {
    pre_->check_state_action(s_prev, a_prev);
    if (s_curr < 0 || s_curr >= pre_->n_states) {
      throw std::invalid_argument("GlrCusum: next state out of range");
    }
    const double p_pre = pre_->transition(s_prev, a_prev, s_curr);
    const double p_post = post_->transition(s_prev, a_prev, s_curr);
    if (p_pre <= 0.0) {
      infinite_ = true;
      w_ = std::numeric_limits<double>::infinity();
      return w_;
    }
    w_ = std::max(0.0, w_ + std::log(p_post / p_pre));
    return w_;
  }

  double update(const StepRecord& record) {
    return update(record.state, record.action, record.next_state);
  }

  double statistic() const { return w_; }
  bool infinite_ratio() const { return infinite_; }
  double threshold() const { return threshold_; }
  bool alarm() const { return infinite_ || w_ > threshold_; }

  void reset() {
    w_ = 0.0;
    infinite_ = false;
  }

 private:
  const TabularMDP* pre_;
  const TabularMDP* post_;
  double threshold_;
  double w_ = 0.0;
  bool infinite_ = false;
};

struct InfoEstimate {
  double value = 0.0;
  bool infinite = false;
};

// Monte Carlo estimate of the information number: the long-run average
// log-likelihood ratio log(T_post / T_pre) along a trajectory generated
// entirely by the post-change model under the given policy. Larger values
// mean faster detection.
inline InfoEstimate estimate_information_number(std::span<const int> policy,
                                                const TabularMDP& pre, const TabularMDP& post,
                                                long steps, RngStream& rng, int start_state = 0) {
  if (pre.n_states != post.n_states || pre.n_actions != post.n_actions) {
    throw std::invalid_argument("estimate_information_number: models must share spaces");
  }
  if (static_cast<long>(policy.size()) < post.n_states) {
    throw std::invalid_argument("estimate_information_number: policy does not cover all states");
  }
  if (steps < 1) throw std::invalid_argument("estimate_information_number: steps must be >= 1");

  double sum = 0.0;
  int s = start_state;
  for (long k = 0; k < steps; ++k) {
    const int a = policy[s];
    const int next = sample_next_state(post, s, a, rng);
    const double p_pre = pre.transition(s, a, next);
    if (p_pre <= 0.0) {
      return {std::numeric_limits<double>::infinity(), true};
    }
    sum += std::log(post.transition(s, a, next) / p_pre);
    s = next;
  }
  return {sum / static_cast<double>(steps), false};
}

}  // namespace adaptq
