#pragma once
// Builders and independent oracles shared by the test binaries.

#include <algorithm>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "reconplan/constraints.hpp"
#include "reconplan/dataset_io.hpp"
#include "reconplan/instance.hpp"

namespace fx {

using namespace reconplan;

inline std::filesystem::path data_file(const std::string& name) { return std::filesystem::path(RECONPLAN_DATA_DIR) / name; }

inline Dataset load(const std::string& name) { return load_dataset(data_file(name)); }

inline Unit unit(std::string id, Kind kind, int status, double cost, double time, long benefit) {
  Unit u;
  u.id = std::move(id);
  u.kind = kind;
  u.status = status;
  u.vulnerability = status ? 5 : 0;
  u.cost = cost;
  u.time = time;
  u.priority = priority_for_kind(kind);
  u.direct_benefit = benefit;
  return u;
}

inline RoadEdge road(std::string from, std::string to, int status, double length, double cost = 0, double time = 0) {
  RoadEdge r;
  r.from = std::move(from);
  r.to = std::move(to);
  r.status = status;
  r.length = length;
  r.cost = cost;
  r.time = time;
  return r;
}

// Unique per-test scratch directory, emptied on creation.
inline std::filesystem::path scratch(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("reconplan-test-" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

// Calls `visit` for every non-empty ordered selection of damaged items.
inline void for_each_ordering(const Instance& inst, const std::function<void(const std::vector<std::size_t>&)>& visit) {
  const auto damaged = inst.items.damaged();
  std::vector<std::size_t> cur;
  std::vector<char> used(damaged.size(), 0);
  std::function<void()> rec = [&] {
    if (!cur.empty()) visit(cur);
    for (std::size_t i = 0; i < damaged.size(); ++i) {
      if (used[i]) continue;
      used[i] = 1;
      cur.push_back(damaged[i]);
      rec();
      cur.pop_back();
      used[i] = 0;
    }
  };
  rec();
}

// Feasibility written out directly from the constraint definitions, without check_plan.
inline bool feasible_by_definition(const Instance& inst, const std::vector<std::size_t>& plan, double budget, double horizon,
                                   double threshold) {
  double cost = 0, time = 0, prio = 0;
  for (auto v : plan) {
    cost += inst.items[v].cost;
    time += inst.items[v].time;
    prio += inst.items[v].priority;
  }
  if (cost > budget + 1e-9 || time > horizon + 1e-9) return false;
  if (!plan.empty() && prio / static_cast<double>(plan.size()) < threshold - 1e-9) return false;
  for (std::size_t k = 0; k < plan.size(); ++k)
    for (auto b : inst.deps.blockers(plan[k])) {
      auto pos = std::find(plan.begin(), plan.end(), b);
      if (pos == plan.end() || pos > plan.begin() + static_cast<long>(k)) return false;
    }
  return true;
}

// S_P recomputed by hand: sum of S(v) * max(0, T_e - cumulative completion time).
inline double sp_by_hand(const Instance& inst, const std::vector<std::size_t>& plan, double horizon) {
  double clock = 0, total = 0;
  for (auto v : plan) {
    clock += inst.items[v].time;
    total += inst.start_benefit(v) * std::max(0.0, horizon - clock);
  }
  return total;
}

struct Optimum {
  double value = 0.0;
  std::vector<std::size_t> plan;
};

inline Optimum brute_force_optimum(const Instance& inst, double budget, double horizon, double threshold) {
  Optimum best;
  for_each_ordering(inst, [&](const std::vector<std::size_t>& p) {
    if (!feasible_by_definition(inst, p, budget, horizon, threshold)) return;
    const double v = sp_by_hand(inst, p, horizon);
    if (v > best.value) {
      best.value = v;
      best.plan = p;
    }
  });
  return best;
}

}  // namespace fx
