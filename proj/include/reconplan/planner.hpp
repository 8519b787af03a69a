#pragma once
//
// Planning cycle: train an agent on the current snapshot, check it against
// the random baseline, extract alternative plans, split them into parallel
// groups, and advance the snapshot once a decision-maker picks one.
//

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "agents.hpp"
#include "constraints.hpp"
#include "dataset_io.hpp"
#include "instance.hpp"

namespace reconplan {

struct Provenance {
  AgentKind agent = AgentKind::Ddqn;
  std::uint64_t seed = 0;
  int cycle = 1;
};

struct Plan {
  std::string id;
  std::vector<std::string> items;
  PlanEvaluation evaluation;
  Verdict verdict;
  std::vector<std::vector<std::string>> parallel_sublists;
  double parallel_makespan = 0.0;  // sum over groups of the longest item time
  Provenance provenance;
  double budget = 0.0;
  double horizon = 0.0;
  double threshold = 0.0;
};

// Greedy left-to-right grouping: an item opens a new group when it depends,
// directly or transitively, on an item of the current group.
inline std::vector<std::vector<std::size_t>> parallel_sublists(std::span<const std::size_t> plan, const DependencyGraph& deps) {
  std::vector<std::vector<std::size_t>> groups;
  for (auto v : plan) {
    bool split = groups.empty();
    if (!split) {
      for (auto g : groups.back()) {
        if (deps.depends_on(v, g)) {
          split = true;
          break;
        }
      }
    }
    if (split) groups.emplace_back();
    groups.back().push_back(v);
  }
  return groups;
}

inline std::vector<std::vector<std::string>> parallel_sublists(std::span<const std::string> plan, const Instance& inst) {
  const auto idx = inst.items.indices(plan);
  std::vector<std::vector<std::string>> out;
  for (const auto& g : parallel_sublists(idx, inst.deps)) out.push_back(inst.ids(g));
  return out;
}

struct PlannerConfig {
  double budget = 100000.0;
  double horizon = 60.0;
  AgentKind agent = AgentKind::Ddqn;
  AgentConfig agent_config;
  int alternatives = 2;
  bool strict_priority = false;    // per-item floor equal to the cycle threshold, rounded up
  int verification_rollouts = 100;
  BenefitConfig benefit;

  void check() const {
    if (!(budget >= 0.0) || !(horizon >= 0.0)) throw ValidationError("budget and horizon must be >= 0");
    if (alternatives < 1) throw ValidationError("alternatives must be >= 1");
    if (verification_rollouts < 0) throw ValidationError("verification rollouts must be >= 0");
    agent_config.check();
  }
};

// Threshold used for a dataset's cycle. Past the last tabulated cycle the
// threshold stays at its final value.
inline double cycle_threshold(int cycle) { return threshold_for_cycle(std::clamp(cycle, 1, kMaxPriority), kMaxPriority); }

struct Verification {
  double trained_mean = 0.0;
  double random_mean = 0.0;
};

struct TrainResult {
  std::vector<Plan> plans;
  std::vector<EpisodeRecord> history;
  Verification verification;
  double threshold = 0.0;
  std::string diagnostics;  // why no plan was produced, when plans is empty
  double training_seconds = 0.0;
};

inline EnvConfig env_config_for(const PlannerConfig& cfg, double threshold) {
  EnvConfig e;
  e.budget = cfg.budget;
  e.horizon = cfg.horizon;
  e.priority_threshold = threshold;
  if (cfg.strict_priority) e.per_item_floor = static_cast<int>(std::ceil(threshold - kFeasibilityTolerance));
  e.reward = cfg.agent_config.reward;
  return e;
}

// Explains an empty first-action set by naming the binding constraint(s).
inline std::string binding_constraints(const Environment& env) {
  const auto& inst = env.instance();
  const auto& cfg = env.config();
  std::size_t affordable = 0, in_time = 0, unblocked = 0, prioritised = 0, damaged = 0;
  for (auto x : inst.items.damaged()) {
    ++damaged;
    const auto& it = inst.items[x];
    if (it.cost <= cfg.budget) ++affordable;
    if (it.time <= cfg.horizon) ++in_time;
    const auto& bl = inst.deps.blockers(x);
    if (std::all_of(bl.begin(), bl.end(), [&](std::size_t b) { return inst.start_intact[b] != 0; })) ++unblocked;
    if (!cfg.priority_threshold || it.priority >= *cfg.priority_threshold - kFeasibilityTolerance) ++prioritised;
  }
  std::ostringstream os;
  os << "no feasible first action among " << damaged << " damaged items:";
  if (affordable == 0) os << " budget (" << cfg.budget << ") below every item cost;";
  if (in_time == 0) os << " horizon (" << cfg.horizon << ") below every item time;";
  if (unblocked == 0) os << " every item is blocked by a dependency;";
  if (prioritised == 0 && cfg.priority_threshold) os << " no item reaches priority threshold " << *cfg.priority_threshold << ";";
  if (affordable && in_time && unblocked && prioritised) os << " no single item satisfies all constraints at once;";
  return os.str();
}

inline Plan make_plan(const Instance& inst, std::span<const std::size_t> order, const PlannerConfig& cfg, double threshold,
                      Provenance prov, std::string id) {
  Plan p;
  p.id = std::move(id);
  p.items = inst.ids(order);
  p.evaluation = inst.evaluate(order, cfg.horizon);
  CheckOptions opts;
  if (cfg.strict_priority) opts.per_item_floor = static_cast<int>(std::ceil(threshold - kFeasibilityTolerance));
  p.verdict = check_plan(inst, order, cfg.budget, cfg.horizon, threshold, opts);
  for (const auto& g : parallel_sublists(order, inst.deps)) {
    double longest = 0.0;
    for (auto v : g) longest = std::max(longest, inst.items[v].effective_time());
    p.parallel_makespan += longest;
    p.parallel_sublists.push_back(inst.ids(g));
  }
  p.provenance = prov;
  p.budget = cfg.budget;
  p.horizon = cfg.horizon;
  p.threshold = threshold;
  return p;
}

// Branches the greedy rollout on the k best first actions (by the agent's
// action values; random order for the random agent) and keeps the distinct
// feasible plans, best S_P first.
inline std::vector<Plan> extract_plans(const Agent& agent, const Environment& env, const PlannerConfig& cfg, double threshold,
                                       int cycle) {
  const auto& inst = env.instance();
  std::mt19937_64 rng(cfg.agent_config.seed ^ 0x5bd1e995ULL);
  EnvState start = env.reset(rng);
  auto first = env.actions(start);
  if (first.empty()) return {};

  if (agent.kind() == AgentKind::Random) {
    std::shuffle(first.begin(), first.end(), rng);
  } else {
    const auto q = agent.q_values(env, start);
    std::stable_sort(first.begin(), first.end(), [&](std::size_t a, std::size_t b) { return q[a] > q[b]; });
  }
  if (first.size() > static_cast<std::size_t>(cfg.alternatives)) first.resize(static_cast<std::size_t>(cfg.alternatives));

  std::vector<std::vector<std::size_t>> orders;
  for (auto a : first) {
    auto t = env.step(start, a);
    auto r = greedy_rollout(agent, env, t.next_state, rng);
    if (std::find(orders.begin(), orders.end(), r.plan) == orders.end()) orders.push_back(std::move(r.plan));
  }

  std::vector<Plan> plans;
  for (const auto& o : orders) {
    auto p = make_plan(inst, o, cfg, threshold, {agent.kind(), cfg.agent_config.seed, cycle}, "");
    if (p.verdict.feasible) plans.push_back(std::move(p));
  }
  std::stable_sort(plans.begin(), plans.end(),
                   [](const Plan& a, const Plan& b) { return a.evaluation.social_benefit > b.evaluation.social_benefit; });
  for (std::size_t i = 0; i < plans.size(); ++i) plans[i].id = "c" + std::to_string(cycle) + "-p" + std::to_string(i);
  return plans;
}

// Trains the configured agent on the snapshot and proposes up to k feasible plans.
inline TrainResult train_and_plan(const Dataset& ds, const PlannerConfig& cfg, const EpisodeSink& sink = {}) {
  cfg.check();
  if (ds.damaged_count() == 0) throw NothingToPlanError();
  const auto inst = Instance::make(ds, cfg.benefit);
  TrainResult result;
  result.threshold = cycle_threshold(ds.cycle);
  Environment env(inst, env_config_for(cfg, result.threshold));

  if (env.actions(env.initial()).empty()) {
    result.diagnostics = binding_constraints(env);
    return result;
  }

  auto agent = make_agent(cfg.agent, cfg.agent_config, env);
  const auto t0 = std::chrono::steady_clock::now();
  result.history = agent->train(env, cfg.agent_config.episodes, sink);
  result.training_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  if (cfg.verification_rollouts > 0) {
    RandomAgent baseline(AgentConfig{.seed = cfg.agent_config.seed + 1});
    result.verification.trained_mean = evaluate(*agent, env, cfg.verification_rollouts, cfg.agent_config.seed + 2);
    result.verification.random_mean = evaluate(baseline, env, cfg.verification_rollouts, cfg.agent_config.seed + 2);
  }

  result.plans = extract_plans(*agent, env, cfg, result.threshold, ds.cycle);
  if (result.plans.empty()) result.diagnostics = "rollouts produced no plan passing every constraint";
  return result;
}

struct CycleRecord {
  int cycle = 1;
  double threshold = 0.0;
  std::vector<Plan> candidates;
  std::optional<std::string> selected;
  std::string before_snapshot;
  std::optional<std::string> after_snapshot;
};

// Applies the chosen candidate. Returns the next snapshot; `record` gains the
// selection. The caller persists the snapshot under record.after_snapshot.
inline Dataset select_and_advance(const Dataset& current, CycleRecord& record, const std::string& plan_id) {
  if (record.selected) throw ConflictError("cycle " + std::to_string(record.cycle) + " already applied plan " + *record.selected);
  auto it = std::find_if(record.candidates.begin(), record.candidates.end(), [&](const Plan& p) { return p.id == plan_id; });
  if (it == record.candidates.end()) throw NotFoundError("unknown plan id '" + plan_id + "'");
  if (current.cycle != record.cycle) throw ConflictError("plan belongs to cycle " + std::to_string(record.cycle));
  Dataset next = apply_plan(current, it->items);
  record.selected = plan_id;
  record.after_snapshot = snapshot_name(next.cycle);
  return next;
}

// ---------------------------------------------------------------------------
// Synthetic instances

struct GeneratorConfig {
  int units = 20;
  double damage_rate = 0.3;
  double dependency_rate = 0.1;
  std::uint64_t seed = 1;
  int roads = 0;                   // 0: about 1.13 roads per unit
  double road_damage_rate = -1.0;  // < 0: half the unit damage rate

  void check() const {
    if (units < 2) throw ValidationError("need at least two units");
    if (!(damage_rate >= 0.0 && damage_rate <= 1.0)) throw ValidationError("damage rate must be in [0,1]");
    if (!(dependency_rate >= 0.0 && dependency_rate <= 1.0)) throw ValidationError("dependency rate must be in [0,1]");
    if (roads < 0) throw ValidationError("road count must be >= 0");
    if (road_damage_rate > 1.0) throw ValidationError("road damage rate must be <= 1");
    if (roads > 0 && roads < units - 1) throw ValidationError("a connected graph needs at least units - 1 roads");
  }
};

namespace detail {

struct KindProfile {
  Kind kind;
  double weight;  // sampling weight
  double cost_mult;
  double time_mult;
  long benefit_lo, benefit_hi;
};

inline constexpr std::array<KindProfile, kBuildingKindCount> kProfiles{{
    {Kind::Hospital, 0.5, 2.5, 2.0, 300, 600},
    {Kind::CollegeSchool, 1.0, 1.6, 1.5, 150, 400},
    {Kind::ResidentialArea, 4.0, 1.0, 1.0, 20, 120},
    {Kind::PublicPoint, 1.0, 0.8, 0.8, 50, 200},
    {Kind::Religious, 0.8, 1.2, 1.2, 30, 150},
    {Kind::PublicBuilding, 1.0, 1.3, 1.2, 40, 200},
    {Kind::BusinessCenter, 1.0, 1.2, 1.0, 30, 150},
    {Kind::GymCenter, 0.5, 0.9, 0.8, 20, 80},
    {Kind::BanquetHall, 0.4, 0.9, 0.8, 20, 80},
    {Kind::PrivateBuilding, 2.5, 0.7, 0.7, 5, 40},
    {Kind::Museum, 0.4, 1.4, 1.4, 20, 100},
    {Kind::BarCinema, 0.6, 0.8, 0.7, 20, 100},
    {Kind::OtherPlace, 0.8, 0.5, 0.5, 5, 30},
}};

inline double round_to(double v, double step) { return std::round(v / step) * step; }

}  // namespace detail

// Connected random city: a random spanning tree plus extra roads, Table-style
// building kinds, exactly round(rate * count) damaged units and roads, and
// declared dependencies between damaged units that respect a random order
// (so they are acyclic). Reproducible by seed.
inline Dataset generate_instance(const GeneratorConfig& cfg) {
  cfg.check();
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const int n = cfg.units;

  std::vector<double> weights;
  for (const auto& p : detail::kProfiles) weights.push_back(p.weight);
  std::discrete_distribution<std::size_t> pick_kind(weights.begin(), weights.end());

  const int damaged_units = static_cast<int>(std::lround(cfg.damage_rate * n));
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<char> damaged(static_cast<std::size_t>(n), 0);
  for (int i = 0; i < damaged_units; ++i) damaged[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = 1;

  Dataset ds;
  for (int i = 0; i < n; ++i) {
    const auto& prof = detail::kProfiles[pick_kind(rng)];
    Unit u;
    u.id = std::to_string(i + 1);
    u.kind = prof.kind;
    std::uniform_int_distribution<int> vul(damaged[static_cast<std::size_t>(i)] ? 0 : 4, damaged[static_cast<std::size_t>(i)] ? 3 : 5);
    u.vulnerability = vul(rng);
    u.status = derive_status(u.vulnerability);
    u.cost = detail::round_to((3000.0 + 9000.0 * unif(rng)) * prof.cost_mult, 10.0);
    u.time = detail::round_to((1.0 + 5.0 * unif(rng)) * prof.time_mult, 0.5);
    u.priority = priority_for_kind(u.kind);
    std::uniform_int_distribution<long> ben(prof.benefit_lo, prof.benefit_hi);
    u.direct_benefit = ben(rng);
    ds.units.push_back(std::move(u));
  }

  const long max_edges = static_cast<long>(n) * (n - 1) / 2;
  const long target = std::min(max_edges, cfg.roads > 0 ? static_cast<long>(cfg.roads) : std::lround(1.13 * n));
  std::set<std::pair<int, int>> edges;
  auto add_road = [&](int a, int b) {
    if (a == b) return false;
    if (!edges.insert(std::minmax(a, b)).second) return false;
    RoadEdge r;
    r.from = std::to_string(a + 1);
    r.to = std::to_string(b + 1);
    r.length = detail::round_to(1.0 + 9.0 * unif(rng), 0.1);
    r.cost = detail::round_to(1000.0 + 3000.0 * unif(rng), 10.0);
    r.time = detail::round_to(0.5 + 1.5 * unif(rng), 0.5);
    r.priority = kDefaultRoadPriority;
    ds.roads.push_back(std::move(r));
    return true;
  };
  for (int i = 1; i < n; ++i) {
    std::uniform_int_distribution<int> parent(0, i - 1);
    add_road(parent(rng), i);
  }
  std::uniform_int_distribution<int> any(0, n - 1);
  while (static_cast<long>(ds.roads.size()) < target) add_road(any(rng), any(rng));

  const double road_rate = cfg.road_damage_rate < 0.0 ? cfg.damage_rate / 2.0 : cfg.road_damage_rate;
  const auto damaged_roads = static_cast<std::size_t>(std::lround(road_rate * static_cast<double>(ds.roads.size())));
  std::vector<std::size_t> road_order(ds.roads.size());
  std::iota(road_order.begin(), road_order.end(), std::size_t{0});
  std::shuffle(road_order.begin(), road_order.end(), rng);
  for (auto& r : ds.roads) r.status = 1;
  for (std::size_t i = 0; i < damaged_roads; ++i) ds.roads[road_order[i]].status = 0;

  // Declared dependencies: each damaged unit, with probability dependency_rate,
  // waits for a damaged unit placed earlier in a random order (neighbours preferred).
  std::vector<int> dmg;
  for (int i = 0; i < n; ++i)
    if (damaged[static_cast<std::size_t>(i)]) dmg.push_back(i);
  std::shuffle(dmg.begin(), dmg.end(), rng);
  for (std::size_t k = 1; k < dmg.size(); ++k) {
    if (unif(rng) >= cfg.dependency_rate) continue;
    std::vector<int> near;
    for (std::size_t j = 0; j < k; ++j)
      if (edges.count(std::minmax(dmg[k], dmg[j]))) near.push_back(dmg[j]);
    int blocker;
    if (!near.empty()) {
      std::uniform_int_distribution<std::size_t> pk(0, near.size() - 1);
      blocker = near[pk(rng)];
    } else {
      std::uniform_int_distribution<std::size_t> pk(0, k - 1);
      blocker = dmg[pk(rng)];
    }
    ds.dependencies.push_back({std::to_string(dmg[k] + 1), std::to_string(blocker + 1)});
  }
  validate(ds);
  return ds;
}

// ---------------------------------------------------------------------------
// Plan documents

inline nlohmann::json verdict_to_json(const Verdict& v) {
  nlohmann::json viol = nlohmann::json::array();
  for (const auto& [a, b] : v.dependencies.violations) viol.push_back({{"blocked", a}, {"blocker", b}});
  return {{"feasible", v.feasible},
          {"cost", {{"pass", v.cost.pass}, {"slack", v.cost.slack}}},
          {"duration", {{"pass", v.duration.pass}, {"slack", v.duration.slack}}},
          {"priority", {{"pass", v.priority.pass}, {"margin", v.priority.margin}}},
          {"dependencies", {{"pass", v.dependencies.pass}, {"violations", viol}}}};
}

inline Verdict verdict_from_json(const nlohmann::json& j) {
  Verdict v;
  v.feasible = j.at("feasible").get<bool>();
  v.cost = {j.at("cost").at("pass").get<bool>(), j.at("cost").at("slack").get<double>()};
  v.duration = {j.at("duration").at("pass").get<bool>(), j.at("duration").at("slack").get<double>()};
  v.priority = {j.at("priority").at("pass").get<bool>(), j.at("priority").at("margin").get<double>()};
  v.dependencies.pass = j.at("dependencies").at("pass").get<bool>();
  for (const auto& e : j.at("dependencies").at("violations"))
    v.dependencies.violations.emplace_back(e.at("blocked").get<std::string>(), e.at("blocker").get<std::string>());
  return v;
}

// Ordered items with per-item kind/cost/time/priority, totals and parallel groups.
inline nlohmann::json plan_to_json(const Plan& p, const Instance& inst) {
  nlohmann::json items = nlohmann::json::array();
  for (std::size_t k = 0; k < p.items.size(); ++k) {
    const auto& it = inst.items[inst.items.at(p.items[k])];
    items.push_back({{"position", k + 1},
                     {"id", p.items[k]},
                     {"kind", kind_name(it.kind)},
                     {"type", it.road ? "dependency" : "building"},
                     {"cost", it.effective_cost()},
                     {"time", it.effective_time()},
                     {"priority", it.priority},
                     {"benefit", p.evaluation.item_benefits[k]},
                     {"completion_time", p.evaluation.completion_times[k]}});
  }
  std::size_t roads = 0;
  for (const auto& id : p.items) roads += inst.items[inst.items.at(id)].road ? 1 : 0;
  return {{"id", p.id},
          {"items", items},
          {"totals",
           {{"social_benefit", p.evaluation.social_benefit},
            {"mean_priority", p.evaluation.mean_priority},
            {"cost", p.evaluation.total_cost},
            {"duration", p.evaluation.total_duration},
            {"units", p.items.size()},
            {"buildings", p.items.size() - roads},
            {"dependencies", roads},
            {"parallel_makespan", p.parallel_makespan}}},
          {"parallel_sublists", p.parallel_sublists},
          {"verdict", verdict_to_json(p.verdict)},
          {"limits", {{"budget", p.budget}, {"horizon", p.horizon}, {"threshold", p.threshold}}},
          {"provenance", {{"agent", agent_name(p.provenance.agent)}, {"seed", p.provenance.seed}, {"cycle", p.provenance.cycle}}}};
}

inline Plan plan_from_json(const nlohmann::json& j) {
  Plan p;
  p.id = j.at("id").get<std::string>();
  for (const auto& it : j.at("items")) {
    p.items.push_back(it.at("id").get<std::string>());
    p.evaluation.item_benefits.push_back(it.at("benefit").get<double>());
    p.evaluation.completion_times.push_back(it.at("completion_time").get<double>());
  }
  const auto& t = j.at("totals");
  p.evaluation.social_benefit = t.at("social_benefit").get<double>();
  p.evaluation.mean_priority = t.at("mean_priority").get<double>();
  p.evaluation.total_cost = t.at("cost").get<double>();
  p.evaluation.total_duration = t.at("duration").get<double>();
  p.parallel_makespan = t.at("parallel_makespan").get<double>();
  p.parallel_sublists = j.at("parallel_sublists").get<std::vector<std::vector<std::string>>>();
  p.verdict = verdict_from_json(j.at("verdict"));
  p.budget = j.at("limits").at("budget").get<double>();
  p.horizon = j.at("limits").at("horizon").get<double>();
  p.threshold = j.at("limits").at("threshold").get<double>();
  p.provenance.agent = parse_agent(j.at("provenance").at("agent").get<std::string>());
  p.provenance.seed = j.at("provenance").at("seed").get<std::uint64_t>();
  p.provenance.cycle = j.at("provenance").at("cycle").get<int>();
  return p;
}

}  // namespace reconplan
