#pragma once
//
// Distances over the road graph, the per-item social benefit and the plan
// objective.
//
// Plan objective: items are rebuilt one after another; item v finishing at
// cumulative time t_v contributes S(v) * max(0, T_e - t_v).
//
// Unit benefit of a damaged item v:
//   S_r(v) = alpha * b_v + beta * sum_{u intact unit, u != v, reachable} S(u) / d(u, v)
// with S(u) = b_u (Direct) or the fixpoint of the same recurrence over intact
// units (Fixpoint). Intact items have S(v) = b_v.
//

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <queue>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "city_model.hpp"
#include "error.hpp"

namespace reconplan {

inline constexpr double kUnreachable = std::numeric_limits<double>::infinity();

// All-pairs shortest road distances between units (Dijkstra from every unit,
// `length` weights, road status ignored).
class DistanceTable {
public:
  DistanceTable() = default;

  explicit DistanceTable(const Dataset& ds) : n_(ds.units.size()), dist_(n_ * n_, kUnreachable) {
    const auto adj = detail::make_adjacency(ds);
    index_ = adj.unit_index;
    using Entry = std::pair<double, std::size_t>;
    for (std::size_t s = 0; s < n_; ++s) {
      double* row = &dist_[s * n_];
      row[s] = 0.0;
      std::priority_queue<Entry, std::vector<Entry>, std::greater<>> pq;
      pq.push({0.0, s});
      while (!pq.empty()) {
        auto [d, v] = pq.top();
        pq.pop();
        if (d > row[v]) continue;
        for (auto [w, r] : adj.out[v]) {
          const double nd = d + ds.roads[r].length;
          if (nd < row[w]) {
            row[w] = nd;
            pq.push({nd, w});
          }
        }
      }
    }
  }

  std::size_t units() const noexcept { return n_; }

  // Distance between units by position in Dataset::units; kUnreachable when disconnected.
  double between(std::size_t a, std::size_t b) const { return dist_[a * n_ + b]; }

  std::size_t unit_index(std::string_view id) const {
    auto it = index_.find(std::string(id));
    if (it == index_.end()) throw NotFoundError("unknown unit id '" + std::string(id) + "'");
    return it->second;
  }

private:
  std::size_t n_ = 0;
  std::vector<double> dist_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Shortest road distance between two units; nullopt when they are disconnected.
inline std::optional<double> distance(const Dataset& ds, std::string_view v1, std::string_view v2) {
  DistanceTable table(ds);
  const double d = table.between(table.unit_index(v1), table.unit_index(v2));
  if (d == kUnreachable) return std::nullopt;
  return d;
}

struct ObjectiveWeights {
  double alpha = 0.5;
  double beta = 0.5;

  void check() const {
    if (!(alpha >= 0.0 && alpha <= 1.0 && beta >= 0.0 && beta <= 1.0) || std::abs(alpha + beta - 1.0) > 1e-12)
      throw ValidationError("weights need alpha, beta in [0,1] with alpha + beta = 1");
  }
};

// Which units count as intact while evaluating a plan.
enum class IntactMode {
  Frozen,       // the set at plan start
  Incremental,  // plan items already completed count as intact
};

enum class NeighbourhoodMode {
  Direct,    // S(u) = b_u for intact neighbours
  Fixpoint,  // S(u) solves the recurrence over intact units
};

struct BenefitConfig {
  ObjectiveWeights weights;
  IntactMode intact = IntactMode::Frozen;
  NeighbourhoodMode neighbourhood = NeighbourhoodMode::Direct;
};

// Evaluates S_r for items of one dataset against an intact mask. Holds the
// inverse-distance matrix item x unit, so it is cheap to query repeatedly.
class BenefitModel {
public:
  BenefitModel() = default;

  BenefitModel(const Dataset& ds, const ItemTable& items, const DistanceTable& dist, BenefitConfig cfg)
      : cfg_(cfg), n_units_(ds.units.size()) {
    cfg_.weights.check();
    const std::size_t n_items = items.size();
    inv_dist_.assign(n_items * n_units_, 0.0);
    unit_item_.resize(n_units_);
    unit_benefit_.resize(n_units_);
    for (std::size_t u = 0; u < n_units_; ++u) {
      unit_item_[u] = items.at(ds.units[u].id);
      unit_benefit_[u] = static_cast<double>(ds.units[u].direct_benefit);
    }
    const auto adj = detail::make_adjacency(ds);
    for (std::size_t x = 0; x < n_items; ++x) {
      const auto& it = items[x];
      for (std::size_t u = 0; u < n_units_; ++u) {
        double d;
        if (it.road) {
          const auto& r = ds.roads[it.source];
          const auto a = adj.unit_index.at(r.from);
          const auto b = adj.unit_index.at(r.to);
          // distance to the segment midpoint
          d = std::min(dist.between(u, a), dist.between(u, b)) + 0.5 * r.length;
        } else {
          if (it.source == u) continue;
          d = dist.between(u, it.source);
        }
        if (d != kUnreachable && d > 0.0) inv_dist_[x * n_units_ + u] = 1.0 / d;
      }
    }
    direct_benefit_.resize(n_items);
    for (std::size_t x = 0; x < n_items; ++x) direct_benefit_[x] = items[x].direct_benefit;
  }

  const BenefitConfig& config() const noexcept { return cfg_; }
  std::size_t unit_count() const noexcept { return n_units_; }
  std::size_t unit_item(std::size_t unit) const { return unit_item_[unit]; }

  // Per-unit S(u) for the given intact mask (indexed by item). Non-intact units get 0.
  std::vector<double> intact_unit_values(std::span<const char> intact) const {
    std::vector<double> s(n_units_, 0.0);
    for (std::size_t u = 0; u < n_units_; ++u)
      if (intact[unit_item_[u]]) s[u] = unit_benefit_[u];
    if (cfg_.neighbourhood == NeighbourhoodMode::Direct) return s;

    const double a = cfg_.weights.alpha, b = cfg_.weights.beta;
    std::vector<double> next(n_units_);
    for (int iter = 0; iter < 10000; ++iter) {
      double delta = 0.0, scale = 0.0;
      for (std::size_t u = 0; u < n_units_; ++u) {
        if (!intact[unit_item_[u]]) {
          next[u] = 0.0;
          continue;
        }
        const auto x = unit_item_[u];
        double acc = 0.0;
        for (std::size_t w = 0; w < n_units_; ++w) acc += s[w] * inv_dist_[x * n_units_ + w];
        next[u] = a * unit_benefit_[u] + b * acc;
        delta = std::max(delta, std::abs(next[u] - s[u]));
        scale = std::max(scale, std::abs(next[u]));
      }
      s.swap(next);
      if (!std::isfinite(delta)) break;
      if (delta <= 1e-12 * std::max(1.0, scale)) return s;
    }
    throw Error("neighbourhood fixpoint did not converge (beta too large for these distances)");
  }

  // S(x) given precomputed intact-unit values.
  double value(std::size_t x, std::span<const char> intact, std::span<const double> unit_values) const {
    if (intact[x]) return direct_benefit_[x];
    double acc = 0.0;
    const double* row = &inv_dist_[x * n_units_];
    for (std::size_t u = 0; u < n_units_; ++u) acc += unit_values[u] * row[u];
    return cfg_.weights.alpha * direct_benefit_[x] + cfg_.weights.beta * acc;
  }

  double value(std::size_t x, std::span<const char> intact) const { return value(x, intact, intact_unit_values(intact)); }

private:
  BenefitConfig cfg_;
  std::size_t n_units_ = 0;
  std::vector<double> inv_dist_;
  std::vector<std::size_t> unit_item_;
  std::vector<double> unit_benefit_;
  std::vector<double> direct_benefit_;
};

inline std::vector<char> intact_mask(const ItemTable& items) {
  std::vector<char> m(items.size());
  for (std::size_t i = 0; i < items.size(); ++i) m[i] = items[i].intact() ? 1 : 0;
  return m;
}

struct PlanEvaluation {
  double social_benefit = 0.0;  // S_P
  double mean_priority = 0.0;   // PP; 0 for the empty plan
  double total_cost = 0.0;
  double total_duration = 0.0;
  std::vector<double> completion_times;
  std::vector<double> item_benefits;  // S(v) used for each plan item
};

namespace detail {

inline void reject_duplicates(std::span<const std::size_t> plan, const ItemTable& items) {
  std::unordered_set<std::size_t> seen;
  for (auto v : plan)
    if (!seen.insert(v).second) throw ValidationError("duplicate item '" + items[v].id + "' in plan");
}

}  // namespace detail

inline double mean_priority(std::span<const std::size_t> plan, const ItemTable& items) {
  if (plan.empty()) throw ValidationError("mean priority of an empty plan");
  double sum = 0.0;
  for (auto v : plan) sum += items[v].priority;
  return sum / static_cast<double>(plan.size());
}

inline double mean_priority(std::span<const std::string> plan, const Dataset& ds) {
  ItemTable items(ds);
  return mean_priority(items.indices(plan), items);
}

// Sequential-completion evaluation of a plan (item indices into `items`).
inline PlanEvaluation plan_benefit(const ItemTable& items, const BenefitModel& model, std::span<const std::size_t> plan,
                                   double horizon) {
  detail::reject_duplicates(plan, items);
  PlanEvaluation ev;
  auto intact = intact_mask(items);
  auto unit_values = model.intact_unit_values(intact);
  double clock = 0.0;
  for (auto v : plan) {
    const auto& it = items[v];
    const double s = model.value(v, intact, unit_values);
    clock += it.effective_time();
    ev.total_cost += it.effective_cost();
    ev.completion_times.push_back(clock);
    ev.item_benefits.push_back(s);
    ev.social_benefit += s * std::max(0.0, horizon - clock);
    if (model.config().intact == IntactMode::Incremental && !intact[v]) {
      intact[v] = 1;
      if (!it.road) unit_values = model.intact_unit_values(intact);
    }
  }
  ev.total_duration = clock;
  ev.mean_priority = plan.empty() ? 0.0 : mean_priority(plan, items);
  return ev;
}

// Convenience overload over a raw dataset and item ids.
inline PlanEvaluation plan_benefit(const Dataset& ds, std::span<const std::string> plan, double horizon,
                                   BenefitConfig cfg = {}) {
  ItemTable items(ds);
  DistanceTable dist(ds);
  BenefitModel model(ds, items, dist, cfg);
  return plan_benefit(items, model, items.indices(plan), horizon);
}

// S_r(v) against the dataset's current intact set.
inline double unit_benefit(const Dataset& ds, std::string_view id, ObjectiveWeights w = {}) {
  ItemTable items(ds);
  DistanceTable dist(ds);
  BenefitModel model(ds, items, dist, BenefitConfig{w, IntactMode::Frozen, NeighbourhoodMode::Direct});
  auto mask = intact_mask(items);
  return model.value(items.at(id), mask);
}

}  // namespace reconplan
