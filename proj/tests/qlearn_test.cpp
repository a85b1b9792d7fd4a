#include "adaptq/qlearn.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "adaptq/inventory.hpp"

namespace {

using namespace adaptq;

TEST(InitQTable, MonotoneGreedyMapIsOrderUpToCapacity) {
  RngStream rng(1);
  const QTable q = init_qtable({InitKind::monotone, 1.0}, 6, 6, rng);
  EXPECT_EQ(greedy_policy(q), (std::vector<int>{5, 4, 3, 2, 1, 0}));
}

TEST(InitQTable, RandomIsReproducibleAndBounded) {
  RngStream rng_a(42), rng_b(42), rng_c(43);
  const QTable a = init_qtable({InitKind::random, 32.0}, 6, 6, rng_a);
  const QTable b = init_qtable({InitKind::random, 32.0}, 6, 6, rng_b);
  const QTable c = init_qtable({InitKind::random, 32.0}, 6, 6, rng_c);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
  for (double v : a.values) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 32.0);
  }
}

TEST(InitQTable, PyramidGreedyActionsAreUnimodal) {
  RngStream rng(1);
  const QTable q = init_qtable({InitKind::pyramid, 1.0}, 6, 6, rng);
  const auto policy = greedy_policy(q);
  // Nondecreasing up to the peak, nonincreasing after it.
  int peak = 0;
  for (std::size_t s = 1; s < policy.size(); ++s) {
    if (policy[s] > policy[peak]) peak = static_cast<int>(s);
  }
  for (int s = 1; s <= peak; ++s) EXPECT_GE(policy[s], policy[s - 1]);
  for (std::size_t s = peak + 1; s < policy.size(); ++s) EXPECT_LE(policy[s], policy[s - 1]);
  EXPECT_GT(policy[peak], policy.front());  // actually rises somewhere
}

TEST(InitQTable, UnknownKindNameRejected) {
  EXPECT_THROW(init_kind_from_string("sideways"), std::invalid_argument);
  EXPECT_EQ(init_kind_from_string("monotone"), InitKind::monotone);
}

TEST(SelectAction, GreedyWhenEpsilonZero) {
  QTable q(3, 4);
  q.at(1, 2) = 5.0;
  RngStream rng(3);
  for (int i = 0; i < 50; ++i) EXPECT_EQ(select_action(q, 1, 0.0, rng), 2);
}

TEST(SelectAction, TieBreaksToLowestIndex) {
  QTable q(1, 3);
  q.at(0, 1) = 5.0;
  q.at(0, 2) = 5.0;
  RngStream rng(4);
  EXPECT_EQ(select_action(q, 0, 0.0, rng), 1);
}

TEST(SelectAction, FullExplorationIsUniform) {
  QTable q(1, 4);
  q.at(0, 3) = 100.0;  // must not bias exploration
  RngStream rng(5);
  const int draws = 100000;
  int counts[4] = {0, 0, 0, 0};
  for (int i = 0; i < draws; ++i) ++counts[select_action(q, 0, 1.0, rng)];
  const double p = 0.25;
  const double sigma = std::sqrt(draws * p * (1.0 - p));
  for (int a = 0; a < 4; ++a) EXPECT_NEAR(counts[a], draws * p, 3.0 * sigma);
}

TEST(SelectAction, RejectsEpsilonOutsideUnitInterval) {
  QTable q(1, 2);
  RngStream rng(6);
  EXPECT_THROW(select_action(q, 0, -0.1, rng), std::invalid_argument);
  EXPECT_THROW(select_action(q, 0, 1.1, rng), std::invalid_argument);
}

TEST(TdUpdate, BasicCases) {
  QTable q(2, 2);
  EXPECT_DOUBLE_EQ(td_update(q, 0, 1, 1.0, 1, 1.0, 0.9), 1.0);
  QTable q2(2, 2);
  EXPECT_DOUBLE_EQ(td_update(q2, 0, 0, 2.0, 1, 0.5, 0.9), 1.0);
  EXPECT_THROW(td_update(q2, 0, 0, 1.0, 1, 0.0, 0.9), std::invalid_argument);
}

TEST(TdUpdate, TouchesOnlyTheUpdatedEntry) {
  QTable q(4, 3);
  RngStream rng(7);
  for (double& v : q.values) v = rng.uniform();
  QTable before = q;
  td_update(q, 2, 1, -3.0, 0, 0.3, 0.95);
  for (int s = 0; s < 4; ++s) {
    for (int a = 0; a < 3; ++a) {
      if (s == 2 && a == 1) {
        EXPECT_NE(q.at(s, a), before.at(s, a));
      } else {
        EXPECT_DOUBLE_EQ(q.at(s, a), before.at(s, a));
      }
    }
  }
}

// With the exact fixed-point Q loaded, the TD increment has zero mean under
// the model's own transition sampling, for every (state, action).
TEST(TdUpdate, ZeroMeanAtTheFixedPoint) {
  const InventoryParams params{};
  const TabularMDP mdp = exact_inventory_kernel(params, DemandModel{4.0});
  const double beta = 0.9999;
  const double tol = 1e-6;
  const auto plan = value_iteration(mdp, beta, tol);

  QTable q(mdp.n_states, mdp.n_actions);
  q.values = plan.q_values;

  RngStream rng(90211);
  const long n = 100000;
  for (int s = 0; s < mdp.n_states; ++s) {
    for (int a = 0; a < mdp.n_actions; ++a) {
      double sum = 0.0, sum_sq = 0.0;
      for (long i = 0; i < n; ++i) {
        const int next = sample_next_state(mdp, s, a, rng);
        double best_next = q.at(next, 0);
        for (int na = 1; na < mdp.n_actions; ++na) best_next = std::max(best_next, q.at(next, na));
        const double td = mdp.reward_at(s, a, next) + beta * best_next - q.at(s, a);
        sum += td;
        sum_sq += td * td;
      }
      const double mean = sum / n;
      const double var = std::max(0.0, sum_sq / n - mean * mean);
      const double se = std::sqrt(var / n);
      // Allow the planner's residual on top of the sampling error.
      EXPECT_LE(std::fabs(mean), 3.0 * se + tol / (1.0 - beta)) << "(" << s << ", " << a << ")";
    }
  }
}

TEST(Decay, LinearStepWithHardFloor) {
  EXPECT_NEAR(decay(0.2, 0.001, 0.05), 0.199, 1e-15);
  EXPECT_DOUBLE_EQ(decay(0.05, 0.001, 0.05), 0.05);
  double value = 0.2;
  for (int i = 0; i < 150; ++i) value = decay(value, 0.001, 0.05);
  EXPECT_NEAR(value, 0.05, 1e-12);
  const double settled = decay(value, 0.001, 0.05);
  EXPECT_DOUBLE_EQ(settled, value);  // constant once the floor is reached
}

TEST(Decay, RatesNonincreasingAndNeverBelowCutoff) {
  double eps = 0.2, alpha = 0.2;
  for (int t = 0; t < 1000; ++t) {
    const double eps_next = decay(eps, 0.001, 0.05);
    const double alpha_next = decay(alpha, 0.001, 0.05);
    EXPECT_LE(eps_next, eps);
    EXPECT_LE(alpha_next, alpha);
    EXPECT_GE(eps_next, 0.05);
    EXPECT_GE(alpha_next, 0.05);
    eps = eps_next;
    alpha = alpha_next;
  }
}

TEST(GreedyPolicy, ArgmaxPerStateWithTies) {
  QTable q(3, 3);
  q.at(0, 2) = 1.0;
  q.at(1, 0) = 1.0;
  q.at(1, 1) = 1.0;  // tie with action 0
  const auto policy = greedy_policy(q);
  EXPECT_EQ(policy, (std::vector<int>{2, 0, 0}));
}

TEST(RunQLearning, LearnsATwoStateChainAndIsDeterministic) {
  // Staying in state 1 pays 1, everything else pays 0; optimal map: flip
  // from 0, stay in 1.
  TabularMDP mdp(2, 2);
  for (int s = 0; s < 2; ++s) {
    mdp.transition(s, 0, s) = 1.0;      // action 0: stay
    mdp.transition(s, 1, 1 - s) = 1.0;  // action 1: flip
  }
  mdp.reward_at(1, 0, 1) = 1.0;

  LearningSchedule schedule;
  schedule.alpha0 = 0.5;
  schedule.alpha_cut = 0.1;
  schedule.eps0 = 0.5;
  schedule.eps_cut = 0.1;
  schedule.decrement = 0.001;
  schedule.beta = 0.9;

  RngStream rng_a(77), rng_b(77);
  const QTable q = run_q_learning(mdp, schedule, {InitKind::random, 1.0}, 20000, rng_a);
  EXPECT_EQ(greedy_policy(q), (std::vector<int>{1, 0}));
  const QTable again = run_q_learning(mdp, schedule, {InitKind::random, 1.0}, 20000, rng_b);
  EXPECT_EQ(q, again);
}

TEST(LearningSchedule, ValidateRejectsBadRanges) {
  LearningSchedule s;
  EXPECT_NO_THROW(s.validate());
  s.alpha_cut = 0.0;
  EXPECT_THROW(s.validate(), std::invalid_argument);
  s = LearningSchedule{};
  s.eps0 = 1.5;
  EXPECT_THROW(s.validate(), std::invalid_argument);
  s = LearningSchedule{};
  s.beta = 1.0;
  EXPECT_THROW(s.validate(), std::invalid_argument);
}

}  // namespace
