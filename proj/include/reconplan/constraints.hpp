#pragma once
//
// Plan feasibility: budget, plan duration (sum of reconstruction times), mean
// political priority against the cycle threshold, and physical dependencies
// (every damaged blocker of a plan item is in the plan and comes first).
//

#include <algorithm>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "instance.hpp"

namespace reconplan {

inline constexpr double kPriorityStep = 0.8;
inline constexpr double kFeasibilityTolerance = 1e-9;

// Mean-priority threshold for a reconstruction cycle: (max - cycle + 1) * 0.8.
inline double threshold_for_cycle(int cycle, int max_priority = kMaxPriority) {
  if (cycle < 1 || cycle > max_priority)
    throw ValidationError("cycle " + std::to_string(cycle) + " outside 1.." + std::to_string(max_priority));
  return static_cast<double>(max_priority - cycle + 1) * kPriorityStep;
}

struct SlackCheck {
  bool pass = true;
  double slack = 0.0;  // limit - used; negative when violated
};

struct PriorityCheck {
  bool pass = true;
  double margin = 0.0;  // PP - threshold
};

struct DependencyCheck {
  bool pass = true;
  std::vector<std::pair<std::string, std::string>> violations;  // (blocked, blocker)
};

struct Verdict {
  bool feasible = true;
  SlackCheck cost;
  SlackCheck duration;
  PriorityCheck priority;
  DependencyCheck dependencies;
};

struct CheckOptions {
  // Strict mode: every item must individually reach this priority.
  std::optional<int> per_item_floor;
};

inline Verdict check_plan(const Instance& inst, std::span<const std::size_t> plan, double budget, double horizon,
                          double threshold, CheckOptions opts = {}) {
  detail::reject_duplicates(plan, inst.items);
  Verdict v;
  double cost = 0.0, time = 0.0, prio = 0.0;
  std::vector<long> position(inst.size(), -1);
  for (std::size_t k = 0; k < plan.size(); ++k) {
    const auto& it = inst.items[plan[k]];
    cost += it.effective_cost();
    time += it.effective_time();
    prio += it.priority;
    position[plan[k]] = static_cast<long>(k);
  }
  v.cost.slack = budget - cost;
  v.cost.pass = v.cost.slack >= -kFeasibilityTolerance * std::max(1.0, budget);
  v.duration.slack = horizon - time;
  v.duration.pass = v.duration.slack >= -kFeasibilityTolerance * std::max(1.0, horizon);

  if (!plan.empty()) {
    v.priority.margin = prio / static_cast<double>(plan.size()) - threshold;
    v.priority.pass = v.priority.margin >= -kFeasibilityTolerance;
    if (opts.per_item_floor) {
      for (auto x : plan)
        if (inst.items[x].priority < *opts.per_item_floor) v.priority.pass = false;
    }
  }

  for (std::size_t k = 0; k < plan.size(); ++k) {
    const auto x = plan[k];
    for (auto b : inst.deps.blockers(x)) {
      if (inst.start_intact[b]) continue;
      if (position[b] < 0 || position[b] > static_cast<long>(k)) {
        v.dependencies.pass = false;
        v.dependencies.violations.emplace_back(inst.items[x].id, inst.items[b].id);
      }
    }
  }
  v.feasible = v.cost.pass && v.duration.pass && v.priority.pass && v.dependencies.pass;
  return v;
}

inline Verdict check_plan(const Instance& inst, std::span<const std::string> plan, double budget, double horizon,
                          double threshold, CheckOptions opts = {}) {
  return check_plan(inst, inst.items.indices(plan), budget, horizon, threshold, opts);
}

// Damaged items not yet in `partial` that fit the remaining budget and time
// and whose damaged blockers are all already in `partial`. Sorted by index.
inline std::vector<std::size_t> feasible_actions(const Instance& inst, std::span<const std::size_t> partial,
                                                 double remaining_budget, double remaining_time) {
  std::vector<char> done(inst.size(), 0);
  for (auto v : partial) done[v] = 1;
  std::vector<std::size_t> out;
  for (std::size_t x = 0; x < inst.size(); ++x) {
    if (inst.start_intact[x] || done[x]) continue;
    const auto& it = inst.items[x];
    if (it.cost > remaining_budget + kFeasibilityTolerance * std::max(1.0, remaining_budget)) continue;
    if (it.time > remaining_time + kFeasibilityTolerance * std::max(1.0, remaining_time)) continue;
    const auto& bl = inst.deps.blockers(x);
    if (std::all_of(bl.begin(), bl.end(), [&](std::size_t b) { return inst.start_intact[b] || done[b]; })) out.push_back(x);
  }
  return out;
}

}  // namespace reconplan
