#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "adaptq/mdp.hpp"
#include "adaptq/rng.hpp"

namespace adaptq {

// Lost-sales inventory cycle: order up to capacity in the morning, serve
// Poisson demand during the day, pay holding on the leftovers and a flat
// rent. Selling must beat holding (unit_price > holding_cost) or the shop
// has no reason to stock anything.
struct InventoryParams {
  int capacity = 5;
  double fixed_cost = 0.5;    // flat fee per nonzero order
  double unit_cost = 3.0;     // per purchased item
  double holding_cost = 2.0;  // per item left at end of day
  double unit_price = 8.0;    // per item sold
  double rent = 4.8;          // per day
  // The reward charges only the deliverable part of an order,
  // min(order, free space). Set true to charge the full order quantity.
  bool charge_full_order = false;

  void validate() const {
    if (capacity < 1) throw std::invalid_argument("InventoryParams: capacity must be positive");
    if (fixed_cost < 0 || unit_cost < 0 || holding_cost < 0 || unit_price < 0 || rent < 0) {
      throw std::invalid_argument("InventoryParams: costs must be nonnegative");
    }
    if (!(unit_price > holding_cost)) {
      throw std::invalid_argument("InventoryParams: unit price must exceed holding cost");
    }
  }
};

// Poisson daily demand.
struct DemandModel {
  double rate = 4.0;

  void validate() const {
    if (!(rate >= 0.0)) throw std::invalid_argument("DemandModel: rate must be nonnegative");
  }
};

namespace detail {
inline void check_inventory_range(const InventoryParams& params, int s, int a) {
  if (s < 0 || s > params.capacity) {
    throw std::invalid_argument("inventory: level " + std::to_string(s) + " out of range");
  }
  if (a < 0 || a > params.capacity) {
    throw std::invalid_argument("inventory: order " + std::to_string(a) + " out of range");
  }
}
}  // namespace detail

// Next inventory level: stock up (capped at capacity), serve demand, no
// backorders: max(min(s + a, N) - d, 0).
inline int inventory_next_state(const InventoryParams& params, int s, int a, int d) {
  detail::check_inventory_range(params, s, a);
  if (d < 0) throw std::invalid_argument("inventory: demand must be nonnegative");
  return std::max(std::min(s + a, params.capacity) - d, 0);
}

// Day profit for the transition (s, a) -> s_next:
//   -k 1{a>0} - c min(a, N-s) - h s_next + p (min(s+a, N) - s_next) - rent.
inline double inventory_reward(const InventoryParams& params, int s, int a, int s_next) {
  detail::check_inventory_range(params, s, a);
  const int stocked = std::min(s + a, params.capacity);
  if (s_next < 0 || s_next > stocked) {
    throw std::invalid_argument("inventory: next level " + std::to_string(s_next) +
                                " unreachable from (" + std::to_string(s) + ", " +
                                std::to_string(a) + ")");
  }
  const int purchased = params.charge_full_order ? a : std::min(a, params.capacity - s);
  const int sold = stocked - s_next;
  double r = 0.0;
  if (a > 0) r -= params.fixed_cost;
  r -= params.unit_cost * purchased;
  r -= params.holding_cost * s_next;
  r += params.unit_price * sold;
  r -= params.rent;
  return r;
}

inline double poisson_pmf(double rate, int count) {
  if (count < 0) return 0.0;
  if (rate == 0.0) return count == 0 ? 1.0 : 0.0;
  double p = std::exp(-rate);
  for (int i = 1; i <= count; ++i) p *= rate / i;
  return p;
}

// Exact Poisson draw by inverse CDF; consumes exactly one uniform draw.
inline int sample_poisson(const DemandModel& model, RngStream& rng) {
  model.validate();
  if (model.rate == 0.0) {
    rng.uniform();
    return 0;
  }
  const double u = rng.uniform();
  double p = std::exp(-model.rate);
  double cumulative = p;
  int k = 0;
  // Far past any realistic quantile for the rates in play; stops the walk
  // if u falls into the floating-point gap at the top of the CDF.
  const int cap = static_cast<int>(model.rate + 40.0 * std::sqrt(model.rate + 1.0)) + 50;
  while (u >= cumulative && k < cap) {
    ++k;
    p *= model.rate / k;
    cumulative += p;
  }
  return k;
}

// The exact transition kernel of the inventory cycle under Poisson demand.
// Demand d maps (s, a) to s' = max(min(s+a, N) - d, 0); all tail mass
// d >= min(s+a, N) collapses onto s' = 0 (lost sales).
inline TabularMDP exact_inventory_kernel(const InventoryParams& params, const DemandModel& model) {
  params.validate();
  model.validate();
  const int N = params.capacity;
  TabularMDP mdp(N + 1, N + 1);
  for (int s = 0; s <= N; ++s) {
    for (int a = 0; a <= N; ++a) {
      const int stocked = std::min(s + a, N);
      double below = 0.0;  // P(d < stocked)
      for (int next = stocked; next >= 1; --next) {
        const double p = poisson_pmf(model.rate, stocked - next);
        mdp.transition(s, a, next) = p;
        mdp.reward_at(s, a, next) = inventory_reward(params, s, a, next);
        below += p;
      }
      mdp.transition(s, a, 0) = 1.0 - below;  // P(d >= stocked)
      mdp.reward_at(s, a, 0) = inventory_reward(params, s, a, 0);
    }
  }
  mdp.validate();
  return mdp;
}

// Order whatever fits: the keep-inventory-full map a = N - s. Maximizes
// demand observability, which is what makes it the fastest detector policy.
inline int full_stock_policy(int s, int capacity) {
  if (s < 0 || s > capacity) {
    throw std::invalid_argument("full_stock_policy: level out of range");
  }
  return capacity - s;
}

inline std::vector<int> full_stock_policy_map(int capacity) {
  std::vector<int> map(static_cast<std::size_t>(capacity) + 1);
  for (int s = 0; s <= capacity; ++s) map[s] = full_stock_policy(s, capacity);
  return map;
}

}  // namespace adaptq
