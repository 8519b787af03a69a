#pragma once
//
// City data model: reconstruction units, road segments, declared dependencies,
// the item table shared by the planners, and the physical-dependency graph.
//
// Road segments are reconstruction items in their own right. Their item id is
// "<from>-<to>"; lookups accept either endpoint order ("22-77" finds "77-22").
//

#include <algorithm>
#include <array>
#include <cctype>
#include <cstddef>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <queue>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "error.hpp"

namespace reconplan {

enum class Kind : std::uint8_t {
  Hospital,
  CollegeSchool,
  ResidentialArea,
  PublicPoint,
  Religious,
  PublicBuilding,
  BusinessCenter,
  GymCenter,
  BanquetHall,
  PrivateBuilding,
  Museum,
  BarCinema,
  OtherPlace,
  Road,
};

inline constexpr std::size_t kBuildingKindCount = 13;
inline constexpr int kMaxPriority = 10;
inline constexpr int kDefaultRoadPriority = 8;

namespace detail {

struct KindInfo {
  Kind kind;
  std::string_view name;   // canonical file spelling
  std::string_view label;  // human label
  int priority;
};

inline constexpr std::array<KindInfo, 14> kKinds{{
    {Kind::Hospital, "hospital", "Hospitals", 10},
    {Kind::CollegeSchool, "college_school", "Colleges/School", 9},
    {Kind::ResidentialArea, "residential_area", "Residential Area", 9},
    {Kind::PublicPoint, "public_point", "Public Points", 8},
    {Kind::Religious, "religious", "Religious", 8},
    {Kind::PublicBuilding, "public_building", "Public Buildings", 7},
    {Kind::BusinessCenter, "business_center", "Business Centers", 6},
    {Kind::GymCenter, "gym_center", "Gym Centers", 5},
    {Kind::BanquetHall, "banquet_hall", "Banquet Halls", 5},
    {Kind::PrivateBuilding, "private_building", "Private Buildings", 4},
    {Kind::Museum, "museum", "Museums", 3},
    {Kind::BarCinema, "bar_cinema", "Bars/Cinemas", 2},
    {Kind::OtherPlace, "other_place", "Other Places", 1},
    {Kind::Road, "road", "Road", kDefaultRoadPriority},
}};

inline std::string fold(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (std::isalnum(static_cast<unsigned char>(c))) out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  return out;
}

}  // namespace detail

inline std::span<const detail::KindInfo> all_kinds() { return detail::kKinds; }

inline std::string_view kind_name(Kind k) { return detail::kKinds[static_cast<std::size_t>(k)].name; }
inline std::string_view kind_label(Kind k) { return detail::kKinds[static_cast<std::size_t>(k)].label; }

// Accepts the canonical snake_case spelling or the human label, ignoring case
// and punctuation.
inline Kind parse_kind(std::string_view text) {
  const std::string key = detail::fold(text);
  for (const auto& info : detail::kKinds) {
    if (detail::fold(info.name) == key || detail::fold(info.label) == key) return info.kind;
  }
  throw ValidationError("unknown building category '" + std::string(text) + "'");
}

// Political priority by building category. Road has no table row; it sits in
// the public-infrastructure tier.
inline int priority_for_kind(Kind k) {
  const auto idx = static_cast<std::size_t>(k);
  if (idx >= detail::kKinds.size()) throw ValidationError("unknown building category");
  return detail::kKinds[idx].priority;
}

// Vulnerability 0..3 is damaged (0), 4..5 intact (1).
inline int derive_status(int vulnerability) {
  if (vulnerability < 0 || vulnerability > 5)
    throw ValidationError("vulnerability " + std::to_string(vulnerability) + " outside 0..5");
  return vulnerability <= 3 ? 0 : 1;
}

struct Unit {
  std::string id;
  Kind kind = Kind::OtherPlace;
  int status = 0;
  int vulnerability = 0;
  double cost = 0.0;
  double time = 0.0;
  int priority = 1;
  long direct_benefit = 0;

  bool intact() const noexcept { return status == 1; }
  double effective_cost() const noexcept { return intact() ? 0.0 : cost; }
  double effective_time() const noexcept { return intact() ? 0.0 : time; }
  friend bool operator==(const Unit&, const Unit&) = default;
};

struct RoadEdge {
  std::string from;
  std::string to;
  int status = 1;
  double length = 1.0;
  double cost = 0.0;
  double time = 0.0;
  int priority = kDefaultRoadPriority;
  long direct_benefit = 0;

  std::string id() const { return from + "-" + to; }
  bool intact() const noexcept { return status == 1; }
  friend bool operator==(const RoadEdge&, const RoadEdge&) = default;
};

// `blocked` cannot be reconstructed before `blocker`.
struct DependencyEdge {
  std::string blocked;
  std::string blocker;
  friend bool operator==(const DependencyEdge&, const DependencyEdge&) = default;
  friend auto operator<=>(const DependencyEdge&, const DependencyEdge&) = default;
};

struct Dataset {
  std::vector<Unit> units;
  std::vector<RoadEdge> roads;
  std::vector<DependencyEdge> dependencies;
  int cycle = 1;

  friend bool operator==(const Dataset&, const Dataset&) = default;

  const Unit* find_unit(std::string_view id) const {
    auto it = std::find_if(units.begin(), units.end(), [&](const Unit& u) { return u.id == id; });
    return it == units.end() ? nullptr : &*it;
  }

  // Road by item id in either endpoint order.
  const RoadEdge* find_road(std::string_view id) const {
    for (const auto& r : roads) {
      if (r.id() == id || (r.to + "-" + r.from) == id) return &r;
    }
    return nullptr;
  }

  bool has_item(std::string_view id) const { return find_unit(id) != nullptr || find_road(id) != nullptr; }

  std::size_t damaged_count() const {
    auto n = static_cast<std::size_t>(std::count_if(units.begin(), units.end(), [](const Unit& u) { return !u.intact(); }));
    n += static_cast<std::size_t>(std::count_if(roads.begin(), roads.end(), [](const RoadEdge& r) { return !r.intact(); }));
    return n;
  }
};

// Finds a dependency cycle among the declared edges; returns it as a closed
// id sequence (first == last), or empty when the edges are acyclic.
inline std::vector<std::string> find_dependency_cycle(const std::vector<DependencyEdge>& edges) {
  std::map<std::string, std::vector<std::string>> out;
  for (const auto& e : edges) out[e.blocked].push_back(e.blocker);
  std::map<std::string, int> color;  // 0 white, 1 grey, 2 black
  std::vector<std::string> stack;
  std::vector<std::string> cycle;

  auto dfs = [&](auto&& self, const std::string& v) -> bool {
    color[v] = 1;
    stack.push_back(v);
    for (const auto& w : out[v]) {
      if (color[w] == 1) {
        auto it = std::find(stack.begin(), stack.end(), w);
        cycle.assign(it, stack.end());
        cycle.push_back(w);
        return true;
      }
      if (color[w] == 0 && self(self, w)) return true;
    }
    stack.pop_back();
    color[v] = 2;
    return false;
  };
  for (const auto& [v, _] : out) {
    if (color[v] == 0 && dfs(dfs, v)) return cycle;
  }
  return {};
}

// Checks every invariant of a Dataset; throws ValidationError naming the
// offending table row and field.
inline void validate(const Dataset& ds) {
  if (ds.cycle < 1) throw ValidationError("cycle must be >= 1", "cycle");
  std::set<std::string> ids;
  for (std::size_t i = 0; i < ds.units.size(); ++i) {
    const auto& u = ds.units[i];
    const std::string at = "units row " + std::to_string(i + 1);
    if (u.id.empty()) throw ValidationError("empty id", at + ", field id");
    if (!ids.insert(u.id).second) throw ValidationError("duplicate id '" + u.id + "'", at + ", field id");
    if (u.kind == Kind::Road) throw ValidationError("road kind belongs in the roads table", at + ", field kind");
    if (u.status != 0 && u.status != 1) throw ValidationError("status must be 0 or 1", at + ", field status");
    if (u.vulnerability < 0 || u.vulnerability > 5) throw ValidationError("vulnerability outside 0..5", at + ", field vulnerability");
    if (u.priority < 1 || u.priority > kMaxPriority) throw ValidationError("priority outside 1..10", at + ", field priority");
    if (!(u.cost >= 0.0)) throw ValidationError("cost must be >= 0", at + ", field cost");
    if (!(u.time >= 0.0)) throw ValidationError("time must be >= 0", at + ", field time");
    if (u.direct_benefit < 0) throw ValidationError("direct_benefit must be >= 0", at + ", field direct_benefit");
  }
  std::set<std::pair<std::string, std::string>> pairs;
  for (std::size_t i = 0; i < ds.roads.size(); ++i) {
    const auto& r = ds.roads[i];
    const std::string at = "roads row " + std::to_string(i + 1);
    if (!ds.find_unit(r.from)) throw ValidationError("dangling reference to unit '" + r.from + "'", at + ", field from");
    if (!ds.find_unit(r.to)) throw ValidationError("dangling reference to unit '" + r.to + "'", at + ", field to");
    if (r.from == r.to) throw ValidationError("road endpoints must differ", at + ", field to");
    auto key = std::minmax(r.from, r.to);
    if (!pairs.insert({key.first, key.second}).second) throw ValidationError("duplicate road " + r.id(), at);
    if (ids.count(r.id())) throw ValidationError("road id '" + r.id() + "' collides with a unit id", at);
    if (r.status != 0 && r.status != 1) throw ValidationError("status must be 0 or 1", at + ", field status");
    if (!(r.length > 0.0)) throw ValidationError("length must be > 0", at + ", field length");
    if (!(r.cost >= 0.0)) throw ValidationError("cost must be >= 0", at + ", field cost");
    if (!(r.time >= 0.0)) throw ValidationError("time must be >= 0", at + ", field time");
    if (r.priority < 1 || r.priority > kMaxPriority) throw ValidationError("priority outside 1..10", at + ", field priority");
    if (r.direct_benefit < 0) throw ValidationError("direct_benefit must be >= 0", at + ", field direct_benefit");
  }
  for (std::size_t i = 0; i < ds.dependencies.size(); ++i) {
    const auto& d = ds.dependencies[i];
    const std::string at = "dependencies row " + std::to_string(i + 1);
    if (!ds.has_item(d.blocked)) throw ValidationError("dangling reference to '" + d.blocked + "'", at + ", field blocked");
    if (!ds.has_item(d.blocker)) throw ValidationError("dangling reference to '" + d.blocker + "'", at + ", field blocker");
    if (d.blocked == d.blocker) throw ValidationError("self-dependency", at);
  }
  // Normalise road ids before looking for cycles so "a-b" and "b-a" coincide.
  auto canon = [&](const std::string& id) {
    if (const auto* r = ds.find_road(id)) return r->id();
    return id;
  };
  std::vector<DependencyEdge> normalized;
  for (const auto& d : ds.dependencies) normalized.push_back({canon(d.blocked), canon(d.blocker)});
  if (auto cyc = find_dependency_cycle(normalized); !cyc.empty()) {
    std::string path;
    for (std::size_t i = 0; i < cyc.size(); ++i) path += (i ? " -> " : "") + cyc[i];
    throw ValidationError("dependency cycle " + path, "dependencies");
  }
}

// Uniform view over buildings and road segments, sorted by item id so that
// index order equals id order.
struct Item {
  std::string id;
  Kind kind = Kind::OtherPlace;
  bool road = false;
  int status = 0;
  double cost = 0.0;
  double time = 0.0;
  int priority = 1;
  double direct_benefit = 0.0;
  std::size_t source = 0;  // index into Dataset::units or Dataset::roads

  bool intact() const noexcept { return status == 1; }
  double effective_cost() const noexcept { return intact() ? 0.0 : cost; }
  double effective_time() const noexcept { return intact() ? 0.0 : time; }
};

class ItemTable {
public:
  ItemTable() = default;

  explicit ItemTable(const Dataset& ds) {
    for (std::size_t i = 0; i < ds.units.size(); ++i) {
      const auto& u = ds.units[i];
      items_.push_back({u.id, u.kind, false, u.status, u.cost, u.time, u.priority, static_cast<double>(u.direct_benefit), i});
    }
    for (std::size_t i = 0; i < ds.roads.size(); ++i) {
      const auto& r = ds.roads[i];
      items_.push_back({r.id(), Kind::Road, true, r.status, r.cost, r.time, r.priority, static_cast<double>(r.direct_benefit), i});
    }
    std::sort(items_.begin(), items_.end(), [](const Item& a, const Item& b) { return a.id < b.id; });
    for (std::size_t i = 0; i < items_.size(); ++i) {
      index_.emplace(items_[i].id, i);
      if (items_[i].road) {
        const auto& r = ds.roads[items_[i].source];
        index_.emplace(r.to + "-" + r.from, i);
      }
    }
  }

  std::size_t size() const noexcept { return items_.size(); }
  const Item& operator[](std::size_t i) const { return items_[i]; }
  const std::vector<Item>& items() const noexcept { return items_; }

  std::optional<std::size_t> find(std::string_view id) const {
    auto it = index_.find(std::string(id));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  std::size_t at(std::string_view id) const {
    if (auto i = find(id)) return *i;
    throw NotFoundError("unknown item id '" + std::string(id) + "'");
  }

  std::vector<std::size_t> indices(std::span<const std::string> ids) const {
    std::vector<std::size_t> out;
    out.reserve(ids.size());
    for (const auto& id : ids) out.push_back(at(id));
    return out;
  }

  std::vector<std::size_t> damaged() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < items_.size(); ++i)
      if (!items_[i].intact()) out.push_back(i);
    return out;
  }

private:
  std::vector<Item> items_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Directed graph over damaged items: blockers_[v] lists the items that must be
// rebuilt before v. Indices refer to the ItemTable it was built from.
class DependencyGraph {
public:
  DependencyGraph() = default;
  explicit DependencyGraph(std::size_t n) : blockers_(n), blocked_by_me_(n) {}

  std::size_t size() const noexcept { return blockers_.size(); }
  const std::vector<std::size_t>& blockers(std::size_t v) const { return blockers_[v]; }
  const std::vector<std::size_t>& dependents(std::size_t v) const { return blocked_by_me_[v]; }

  bool has_edge(std::size_t blocked, std::size_t blocker) const {
    const auto& b = blockers_[blocked];
    return std::find(b.begin(), b.end(), blocker) != b.end();
  }

  // True when `from` reaches `to` following blocked -> blocker edges.
  bool depends_on(std::size_t from, std::size_t to) const {
    if (from == to) return false;
    std::vector<char> seen(size(), 0);
    std::vector<std::size_t> stack{from};
    while (!stack.empty()) {
      auto v = stack.back();
      stack.pop_back();
      for (auto w : blockers_[v]) {
        if (w == to) return true;
        if (!seen[w]) {
          seen[w] = 1;
          stack.push_back(w);
        }
      }
    }
    return false;
  }

  // Adds blocked -> blocker unless it is a duplicate or would close a cycle.
  bool add_edge(std::size_t blocked, std::size_t blocker) {
    if (blocked == blocker || has_edge(blocked, blocker) || depends_on(blocker, blocked)) return false;
    blockers_[blocked].push_back(blocker);
    std::sort(blockers_[blocked].begin(), blockers_[blocked].end());
    blocked_by_me_[blocker].push_back(blocked);
    std::sort(blocked_by_me_[blocker].begin(), blocked_by_me_[blocker].end());
    return true;
  }

  std::size_t edge_count() const {
    return std::accumulate(blockers_.begin(), blockers_.end(), std::size_t{0},
                           [](std::size_t acc, const auto& b) { return acc + b.size(); });
  }

  std::vector<DependencyEdge> edges(const ItemTable& items) const {
    std::vector<DependencyEdge> out;
    for (std::size_t v = 0; v < size(); ++v)
      for (auto b : blockers_[v]) out.push_back({items[v].id, items[b].id});
    return out;
  }

  bool acyclic() const {
    std::vector<int> indeg(size(), 0);
    for (std::size_t v = 0; v < size(); ++v) indeg[v] = static_cast<int>(blockers_[v].size());
    std::queue<std::size_t> q;
    for (std::size_t v = 0; v < size(); ++v)
      if (indeg[v] == 0) q.push(v);
    std::size_t seen = 0;
    while (!q.empty()) {
      auto b = q.front();
      q.pop();
      ++seen;
      for (auto v : blocked_by_me_[b])
        if (--indeg[v] == 0) q.push(v);
    }
    return seen == size();
  }

private:
  std::vector<std::vector<std::size_t>> blockers_;
  std::vector<std::vector<std::size_t>> blocked_by_me_;
};

namespace detail {

struct Adjacency {
  // per unit: (neighbour unit, road index)
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> out;
  std::unordered_map<std::string, std::size_t> unit_index;
};

inline Adjacency make_adjacency(const Dataset& ds) {
  Adjacency adj;
  adj.out.resize(ds.units.size());
  for (std::size_t i = 0; i < ds.units.size(); ++i) adj.unit_index.emplace(ds.units[i].id, i);
  for (std::size_t r = 0; r < ds.roads.size(); ++r) {
    auto a = adj.unit_index.at(ds.roads[r].from);
    auto b = adj.unit_index.at(ds.roads[r].to);
    adj.out[a].push_back({b, r});
    adj.out[b].push_back({a, r});
  }
  return adj;
}

// Largest component of intact units joined by intact roads; ties go to the
// component holding the smallest unit id.
inline std::vector<char> access_region(const Dataset& ds, const Adjacency& adj) {
  const std::size_t n = ds.units.size();
  std::vector<long> comp(n, -1);
  std::vector<char> best(n, 0);
  std::size_t best_size = 0;
  std::string best_min;
  long next = 0;
  for (std::size_t s = 0; s < n; ++s) {
    if (!ds.units[s].intact() || comp[s] >= 0) continue;
    std::vector<std::size_t> members{s};
    comp[s] = next;
    for (std::size_t k = 0; k < members.size(); ++k) {
      for (auto [w, r] : adj.out[members[k]]) {
        if (ds.roads[r].intact() && ds.units[w].intact() && comp[w] < 0) {
          comp[w] = next;
          members.push_back(w);
        }
      }
    }
    std::string min_id = ds.units[members[0]].id;
    for (auto m : members) min_id = std::min(min_id, ds.units[m].id);
    if (members.size() > best_size || (members.size() == best_size && min_id < best_min)) {
      best_size = members.size();
      best_min = min_id;
      std::fill(best.begin(), best.end(), 0);
      for (auto m : members) best[m] = 1;
    }
    ++next;
  }
  return best;
}

// Breadth-first reachability from `starts` to any anchor unit in the full
// road graph with one unit or one road removed.
inline bool reaches_anchor(const Adjacency& adj, const std::vector<char>& anchor, std::span<const std::size_t> starts,
                           std::optional<std::size_t> removed_unit, std::optional<std::size_t> removed_road) {
  std::vector<char> seen(adj.out.size(), 0);
  std::vector<std::size_t> frontier;
  for (auto s : starts) {
    if (removed_unit && *removed_unit == s) continue;
    if (!seen[s]) {
      seen[s] = 1;
      frontier.push_back(s);
    }
  }
  for (std::size_t k = 0; k < frontier.size(); ++k) {
    const auto v = frontier[k];
    if (anchor[v]) return true;
    for (auto [w, r] : adj.out[v]) {
      if (removed_road && *removed_road == r) continue;
      if (removed_unit && *removed_unit == w) continue;
      if (!seen[w]) {
        seen[w] = 1;
        frontier.push_back(w);
      }
    }
  }
  return false;
}

}  // namespace detail

// Physical-dependency graph: declared dependencies between damaged items plus
// one derived edge (x, r) for every damaged item x that is cut off from the
// access region by damaged item r alone. Derived edges that would close a
// cycle with the declared ones are skipped, so the result is acyclic whenever
// the declared edges are.
inline DependencyGraph build_dependency_graph(const Dataset& ds, const ItemTable& items) {
  DependencyGraph g(items.size());
  for (const auto& d : ds.dependencies) {
    auto blocked = items.find(d.blocked);
    auto blocker = items.find(d.blocker);
    if (!blocked || !blocker) throw ValidationError("dependency references unknown item", "dependencies");
    if (!items[*blocked].intact() && !items[*blocker].intact()) g.add_edge(*blocked, *blocker);
  }

  const auto adj = detail::make_adjacency(ds);
  const auto anchor = detail::access_region(ds, adj);
  if (std::none_of(anchor.begin(), anchor.end(), [](char c) { return c != 0; })) return g;

  auto starts_of = [&](const Item& it) {
    std::vector<std::size_t> s;
    if (it.road) {
      s.push_back(adj.unit_index.at(ds.roads[it.source].from));
      s.push_back(adj.unit_index.at(ds.roads[it.source].to));
    } else {
      s.push_back(it.source);
    }
    return s;
  };

  const auto damaged = items.damaged();
  for (auto x : damaged) {
    const auto starts = starts_of(items[x]);
    if (!detail::reaches_anchor(adj, anchor, starts, std::nullopt, std::nullopt)) continue;
    for (auto r : damaged) {
      if (r == x) continue;
      const auto& cut = items[r];
      std::optional<std::size_t> ru, rr;
      if (cut.road) rr = cut.source; else ru = cut.source;
      if (!detail::reaches_anchor(adj, anchor, starts, ru, rr)) g.add_edge(x, r);
    }
  }
  return g;
}

inline DependencyGraph build_dependency_graph(const Dataset& ds) { return build_dependency_graph(ds, ItemTable(ds)); }

// Marks every plan item intact and advances the cycle counter.
inline Dataset apply_plan(const Dataset& ds, std::span<const std::string> plan) {
  Dataset next = ds;
  for (const auto& id : plan) {
    bool hit = false;
    for (auto& u : next.units) {
      if (u.id == id) {
        u.status = 1;
        hit = true;
      }
    }
    if (!hit) {
      for (auto& r : next.roads) {
        if (r.id() == id || (r.to + "-" + r.from) == id) {
          r.status = 1;
          hit = true;
        }
      }
    }
    if (!hit) throw NotFoundError("plan references unknown item '" + id + "'");
  }
  next.cycle = ds.cycle + 1;
  return next;
}

}  // namespace reconplan
