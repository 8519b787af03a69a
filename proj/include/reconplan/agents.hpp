#pragma once
//
// Reconstruction environment and the learning agents (DDQN, Deep SARSA,
// tabular Q-learning, tabular SARSA, uniform random).
//
// State: (current location, remaining budget, remaining time). Actions are
// item indices; infeasible actions are masked, never penalised. Rewards are
// the social benefit S_r of the rebuilt item; a road's benefit is banked and
// paid out with the next building (or at episode end).
//

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "constraints.hpp"
#include "instance.hpp"
#include "neural.hpp"

namespace reconplan {

enum class AgentKind { Ddqn, QLearning, Sarsa, DeepSarsa, Random };

inline constexpr std::array<AgentKind, 5> kAllAgents{AgentKind::QLearning, AgentKind::Sarsa, AgentKind::DeepSarsa,
                                                     AgentKind::Ddqn, AgentKind::Random};

inline std::string_view agent_name(AgentKind k) {
  switch (k) {
    case AgentKind::Ddqn: return "ddqn";
    case AgentKind::QLearning: return "qlearn";
    case AgentKind::Sarsa: return "sarsa";
    case AgentKind::DeepSarsa: return "deep-sarsa";
    case AgentKind::Random: return "random";
  }
  return "?";
}

inline AgentKind parse_agent(std::string_view name) {
  for (auto k : kAllAgents)
    if (agent_name(k) == name) return k;
  throw ValidationError("unknown agent '" + std::string(name) + "' (ddqn, qlearn, sarsa, deep-sarsa, random)");
}

// How the per-step reward is computed.
enum class RewardMode {
  UnitBenefit,   // S_r(v)
  TimeWeighted,  // S_r(v) * max(0, T_e - completion time); undiscounted sum equals S_P
};

struct AgentConfig {
  double gamma = 0.95;
  double epsilon_start = 1.0;
  double epsilon_min = 1e-7;
  double epsilon_decay = 0.0003;  // eps <- max(min, eps * (1 - decay)) per episode
  double learning_rate = 0.001;
  int batch_size = 32;
  std::size_t replay_capacity = 2000;
  int episodes = 15000;
  int target_sync = 100;   // gradient updates between target-network copies
  int warmup = 0;          // transitions before training starts; 0 means batch_size
  std::vector<int> hidden{8, 64, 128};
  double tabular_learning_rate = 0.1;
  int buckets = 10;
  double reward_scale = 0.0;  // network reward scale; 0 picks 1 / max item benefit
  RewardMode reward = RewardMode::UnitBenefit;
  std::uint64_t seed = 1;

  void check() const {
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw ValidationError("gamma must be in [0,1]");
    if (!(epsilon_min >= 1e-7 && epsilon_start <= 1.0 && epsilon_min <= epsilon_start))
      throw ValidationError("epsilon range must lie within [1e-7, 1]");
    if (!(epsilon_decay >= 0.0 && epsilon_decay < 1.0)) throw ValidationError("epsilon decay must be in [0,1)");
    if (batch_size < 1) throw ValidationError("batch size must be >= 1");
    if (replay_capacity < static_cast<std::size_t>(batch_size)) throw ValidationError("replay capacity below batch size");
    if (episodes < 0) throw ValidationError("episodes must be >= 0");
    if (target_sync < 1) throw ValidationError("target sync interval must be >= 1");
    if (buckets < 1) throw ValidationError("buckets must be >= 1");
    if (!(learning_rate >= 0.0) || !(tabular_learning_rate >= 0.0)) throw ValidationError("learning rates must be >= 0");
  }
};

class EpsilonSchedule {
public:
  explicit EpsilonSchedule(const AgentConfig& cfg)
      : value_(cfg.epsilon_start), min_(cfg.epsilon_min), decay_(cfg.epsilon_decay) {}

  double value() const noexcept { return value_; }
  void advance() noexcept { value_ = std::max(min_, value_ * (1.0 - decay_)); }

private:
  double value_;
  double min_;
  double decay_;
};

struct EnvConfig {
  double budget = 0.0;
  double horizon = 0.0;
  // Running mean priority of the partial plan must stay at or above this, so
  // every rollout prefix already meets the cycle threshold.
  std::optional<double> priority_threshold;
  // Strict mode: each chosen item must reach this priority on its own.
  std::optional<int> per_item_floor;
  RewardMode reward = RewardMode::UnitBenefit;
};

struct EnvState {
  std::optional<std::size_t> location;  // nullopt: start sentinel
  double remaining_budget = 0.0;
  double remaining_time = 0.0;
  std::vector<std::size_t> taken;       // plan so far
  double banked = 0.0;                  // road benefit awaiting the next building
  int priority_sum = 0;
};

struct Transition {
  EnvState state;
  std::size_t action = 0;
  double reward = 0.0;
  EnvState next_state;
  bool terminal = false;
};

inline constexpr std::size_t kStateFeatures = 4;
using Features = std::array<double, kStateFeatures>;

class Environment {
public:
  Environment(InstancePtr inst, EnvConfig cfg) : inst_(std::move(inst)), cfg_(cfg) {
    if (!(cfg_.budget >= 0.0) || !(cfg_.horizon >= 0.0)) throw ValidationError("budget and horizon must be >= 0");
    damaged_ = inst_->items.damaged().size();
  }

  const Instance& instance() const noexcept { return *inst_; }
  const InstancePtr& instance_ptr() const noexcept { return inst_; }
  const EnvConfig& config() const noexcept { return cfg_; }
  std::size_t action_count() const noexcept { return inst_->size(); }

  // Full budget and time; the location is drawn uniformly among the feasible
  // first actions (it is positional context only, nothing is rebuilt).
  EnvState reset(std::mt19937_64& rng) const {
    if (damaged_ == 0) throw NothingToPlanError();
    EnvState s;
    s.remaining_budget = cfg_.budget;
    s.remaining_time = cfg_.horizon;
    const auto first = actions(s);
    if (!first.empty()) {
      std::uniform_int_distribution<std::size_t> pick(0, first.size() - 1);
      s.location = first[pick(rng)];
    }
    return s;
  }

  EnvState reset(std::uint64_t seed) const {
    std::mt19937_64 rng(seed);
    return reset(rng);
  }

  // Deterministic start state used for plan extraction.
  EnvState initial() const {
    if (damaged_ == 0) throw NothingToPlanError();
    EnvState s;
    s.remaining_budget = cfg_.budget;
    s.remaining_time = cfg_.horizon;
    return s;
  }

  std::vector<std::size_t> actions(const EnvState& s) const {
    auto feas = feasible_actions(*inst_, s.taken, s.remaining_budget, s.remaining_time);
    if (!cfg_.priority_threshold && !cfg_.per_item_floor) return feas;
    std::vector<std::size_t> out;
    const double n = static_cast<double>(s.taken.size()) + 1.0;
    for (auto a : feas) {
      const int p = inst_->items[a].priority;
      if (cfg_.per_item_floor && p < *cfg_.per_item_floor) continue;
      if (cfg_.priority_threshold && (s.priority_sum + p) / n < *cfg_.priority_threshold - kFeasibilityTolerance) continue;
      out.push_back(a);
    }
    return out;
  }

  bool terminal(const EnvState& s) const { return actions(s).empty(); }

  // S(v) of `action` against the intact set this state implies.
  double benefit_of(const EnvState& s, std::size_t action) const {
    if (inst_->benefit.config().intact == IntactMode::Frozen || s.taken.empty()) return inst_->start_benefit(action);
    auto mask = inst_->start_intact;
    for (auto v : s.taken) mask[v] = 1;
    return inst_->benefit.value(action, mask);
  }

  Transition step(const EnvState& s, std::size_t action) const {
    const auto legal = actions(s);
    if (!std::binary_search(legal.begin(), legal.end(), action))
      throw ContractError("action '" + (action < inst_->size() ? inst_->items[action].id : std::to_string(action)) +
                          "' is not feasible in this state");
    const auto& it = inst_->items[action];
    Transition t;
    t.state = s;
    t.action = action;
    EnvState& n = t.next_state;
    n = s;
    n.location = action;
    n.remaining_budget = std::max(0.0, s.remaining_budget - it.cost);
    n.remaining_time = std::max(0.0, s.remaining_time - it.time);
    n.taken.push_back(action);
    n.priority_sum += it.priority;

    double gain = benefit_of(s, action);
    // remaining time after this step is exactly T_e minus the completion time
    if (cfg_.reward == RewardMode::TimeWeighted) gain *= n.remaining_time;
    if (it.road) {
      n.banked = s.banked + gain;
      t.reward = 0.0;
    } else {
      t.reward = gain + s.banked;
      n.banked = 0.0;
    }
    t.terminal = terminal(n);
    if (t.terminal) {
      t.reward += n.banked;
      n.banked = 0.0;
    }
    return t;
  }

  // [location, budget fraction, time fraction, fraction of damaged items rebuilt]
  Features encode(const EnvState& s) const {
    const double n = static_cast<double>(inst_->size());
    return {s.location ? (static_cast<double>(*s.location) + 1.0) / n : 0.0,
            cfg_.budget > 0.0 ? s.remaining_budget / cfg_.budget : 0.0,
            cfg_.horizon > 0.0 ? s.remaining_time / cfg_.horizon : 0.0,
            damaged_ ? static_cast<double>(s.taken.size()) / static_cast<double>(damaged_) : 0.0};
  }

  // Largest single-item benefit on offer; used to scale network rewards.
  double max_item_benefit() const {
    double m = 0.0;
    for (auto x : inst_->items.damaged()) {
      double b = inst_->start_benefit(x);
      if (cfg_.reward == RewardMode::TimeWeighted) b *= cfg_.horizon;
      m = std::max(m, b);
    }
    return m;
  }

private:
  InstancePtr inst_;
  EnvConfig cfg_;
  std::size_t damaged_ = 0;
};

// Epsilon-greedy over the feasible set; ties go to the smallest index.
inline std::size_t select_action(std::span<const double> q_values, std::span<const std::size_t> feasible, double epsilon,
                                 std::mt19937_64& rng) {
  if (feasible.empty()) throw ContractError("no feasible action to select");
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  if (epsilon > 0.0 && coin(rng) < epsilon) {
    std::uniform_int_distribution<std::size_t> pick(0, feasible.size() - 1);
    return feasible[pick(rng)];
  }
  std::size_t best = feasible[0];
  for (auto a : feasible) {
    if (q_values[a] > q_values[best] || (q_values[a] == q_values[best] && a < best)) best = a;
  }
  return best;
}

inline std::size_t select_action(std::span<const double> q_values, std::span<const std::size_t> feasible, double epsilon,
                                 std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return select_action(q_values, feasible, epsilon, rng);
}

inline std::size_t random_policy(std::span<const std::size_t> feasible, std::mt19937_64& rng) {
  if (feasible.empty()) throw ContractError("no feasible action to select");
  std::uniform_int_distribution<std::size_t> pick(0, feasible.size() - 1);
  return feasible[pick(rng)];
}

// Stored experience in encoded form.
struct Experience {
  Features state{};
  std::size_t action = 0;
  double reward = 0.0;  // already scaled
  Features next_state{};
  std::vector<std::size_t> next_actions;
  bool terminal = false;
};

// Fixed-capacity FIFO with uniform sampling without replacement.
class ReplayBuffer {
public:
  explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity_ == 0) throw ValidationError("replay capacity must be positive");
  }

  void push(Experience e) {
    if (items_.size() == capacity_) items_.pop_front();
    items_.push_back(std::move(e));
  }

  std::size_t size() const noexcept { return items_.size(); }
  std::size_t capacity() const noexcept { return capacity_; }
  const Experience& operator[](std::size_t i) const { return items_[i]; }

  std::vector<const Experience*> sample(std::size_t n, std::mt19937_64& rng) const {
    if (n > items_.size()) throw ContractError("replay buffer holds fewer transitions than the batch size");
    std::vector<std::size_t> idx(items_.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::vector<const Experience*> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
      std::swap(idx[i], idx[pick(rng)]);
      out.push_back(&items_[idx[i]]);
    }
    return out;
  }

private:
  std::size_t capacity_;
  std::deque<Experience> items_;
};

inline Eigen::MatrixXd stack_features(std::span<const Features> rows) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(kStateFeatures), static_cast<Eigen::Index>(rows.size()));
  for (std::size_t c = 0; c < rows.size(); ++c)
    for (std::size_t r = 0; r < kStateFeatures; ++r) m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[c][r];
  return m;
}

// Bellman targets from the target network: y = r for terminal transitions,
// otherwise r + gamma * max over the next state's feasible actions.
inline Eigen::VectorXd ddqn_targets(const Mlp& target, std::span<const Experience* const> batch, double gamma) {
  std::vector<Features> next;
  next.reserve(batch.size());
  for (const auto* e : batch) next.push_back(e->next_state);
  const Eigen::MatrixXd q_next = target.forward(stack_features(next));
  Eigen::VectorXd y(static_cast<Eigen::Index>(batch.size()));
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto* e = batch[b];
    double v = e->reward;
    if (!e->terminal && !e->next_actions.empty()) {
      double best = -std::numeric_limits<double>::infinity();
      for (auto a : e->next_actions) best = std::max(best, q_next(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)));
      v += gamma * best;
    }
    y[static_cast<Eigen::Index>(b)] = v;
  }
  return y;
}

// One optimisation step of the online network toward target-network Bellman
// targets. Target synchronisation is the caller's job (copy_parameters).
inline double ddqn_update(Mlp& online, const Mlp& target, AdamState& opt, std::span<const Experience* const> batch,
                          double gamma) {
  std::vector<Features> states;
  std::vector<int> actions;
  for (const auto* e : batch) {
    states.push_back(e->state);
    actions.push_back(static_cast<int>(e->action));
  }
  TrainBatch tb{stack_features(states), ddqn_targets(target, batch, gamma), std::move(actions)};
  return train_step(online, opt, tb);
}

// Sparse state-action value table; unseen entries read as zero.
template <class Key>
class QTable {
public:
  explicit QTable(std::size_t actions) : actions_(actions) {}

  std::size_t action_count() const noexcept { return actions_; }
  std::size_t state_count() const noexcept { return rows_.size(); }

  double get(const Key& s, std::size_t a) const {
    auto it = rows_.find(s);
    return it == rows_.end() ? 0.0 : it->second[a];
  }

  double& at(const Key& s, std::size_t a) {
    auto it = rows_.try_emplace(s, actions_, 0.0).first;
    return it->second[a];
  }

  std::vector<double> row(const Key& s) const {
    auto it = rows_.find(s);
    return it == rows_.end() ? std::vector<double>(actions_, 0.0) : it->second;
  }

private:
  std::size_t actions_;
  std::map<Key, std::vector<double>> rows_;
};

enum class TabularRule { QLearning, Sarsa };

// Q(s,a) += lr * (r + gamma * bootstrap - Q(s,a)); bootstrap is the max over
// `next_actions` (Q-learning) or Q(s', next_action) (SARSA), and 0 when terminal.
template <class Key>
void tabular_update(TabularRule rule, QTable<Key>& table, const Key& s, std::size_t a, double reward, const Key& next,
                    bool terminal, std::span<const std::size_t> next_actions, std::optional<std::size_t> next_action,
                    double lr, double gamma) {
  double bootstrap = 0.0;
  if (!terminal) {
    if (rule == TabularRule::QLearning) {
      if (!next_actions.empty()) {
        bootstrap = -std::numeric_limits<double>::infinity();
        for (auto b : next_actions) bootstrap = std::max(bootstrap, table.get(next, b));
      }
    } else {
      if (!next_action) throw ContractError("SARSA update needs the next action");
      bootstrap = table.get(next, *next_action);
    }
  }
  double& q = table.at(s, a);
  q += lr * (reward + gamma * bootstrap - q);
}

struct EpisodeRecord {
  int episode = 0;
  double reward = 0.0;
  double epsilon = 0.0;
  double loss = 0.0;  // mean loss over the episode's updates; 0 when none
};

using EpisodeSink = std::function<void(const EpisodeRecord&)>;

class Agent {
public:
  virtual ~Agent() = default;
  virtual AgentKind kind() const = 0;

  // Runs one training episode and returns its statistics.
  virtual EpisodeRecord train_episode(const Environment& env) = 0;

  // Action values for every action in `state` (unscaled ordering only).
  virtual std::vector<double> q_values(const Environment& env, const EnvState& state) const = 0;

  virtual double epsilon() const = 0;

  // Greedy (or random, for the baseline) action.
  virtual std::size_t act_greedy(const Environment& env, const EnvState& state, std::mt19937_64& rng) const {
    const auto feas = env.actions(state);
    const auto q = q_values(env, state);
    return select_action(q, feas, 0.0, rng);
  }

  std::vector<EpisodeRecord> train(const Environment& env, int episodes, const EpisodeSink& sink = {}) {
    std::vector<EpisodeRecord> history;
    history.reserve(static_cast<std::size_t>(std::max(episodes, 0)));
    for (int e = 0; e < episodes; ++e) {
      auto rec = train_episode(env);
      rec.episode = static_cast<int>(episodes_done_++) + 1;
      if (sink) sink(rec);
      history.push_back(rec);
    }
    return history;
  }

protected:
  long episodes_done_ = 0;
};

namespace detail {

inline double auto_scale(const AgentConfig& cfg, const Environment& env) {
  if (cfg.reward_scale > 0.0) return cfg.reward_scale;
  const double m = env.max_item_benefit();
  return m > 0.0 ? 1.0 / m : 1.0;
}

inline std::vector<double> to_vector(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace detail

class RandomAgent final : public Agent {
public:
  explicit RandomAgent(const AgentConfig& cfg) : rng_(cfg.seed) {}

  AgentKind kind() const override { return AgentKind::Random; }
  double epsilon() const override { return 1.0; }

  EpisodeRecord train_episode(const Environment& env) override {
    EpisodeRecord rec;
    rec.epsilon = 1.0;
    auto s = env.reset(rng_);
    for (auto feas = env.actions(s); !feas.empty(); feas = env.actions(s)) {
      auto t = env.step(s, random_policy(feas, rng_));
      rec.reward += t.reward;
      s = std::move(t.next_state);
    }
    return rec;
  }

  std::vector<double> q_values(const Environment& env, const EnvState&) const override {
    return std::vector<double>(env.action_count(), 0.0);
  }

  std::size_t act_greedy(const Environment& env, const EnvState& state, std::mt19937_64& rng) const override {
    return random_policy(env.actions(state), rng);
  }

private:
  std::mt19937_64 rng_;
};

// Shared machinery of the two network agents.
class NetworkAgent : public Agent {
public:
  NetworkAgent(const AgentConfig& cfg, const Environment& env)
      : cfg_(cfg), rng_(cfg.seed), eps_(cfg), scale_(detail::auto_scale(cfg, env)) {
    cfg_.check();
    std::vector<int> widths{static_cast<int>(kStateFeatures)};
    widths.insert(widths.end(), cfg_.hidden.begin(), cfg_.hidden.end());
    widths.push_back(static_cast<int>(env.action_count()));
    online_ = Mlp(widths, cfg_.seed ^ 0x9e3779b97f4a7c15ULL);
    opt_.learning_rate = cfg_.learning_rate;
  }

  double epsilon() const override { return eps_.value(); }
  const Mlp& network() const noexcept { return online_; }
  Mlp& network() noexcept { return online_; }
  double reward_scale() const noexcept { return scale_; }

  std::vector<double> q_values(const Environment& env, const EnvState& state) const override {
    const auto f = env.encode(state);
    return detail::to_vector(online_.forward(std::span<const double>(f)));
  }

protected:
  AgentConfig cfg_;
  std::mt19937_64 rng_;
  EpsilonSchedule eps_;
  double scale_;
  Mlp online_;
  AdamState opt_;
};

class DdqnAgent final : public NetworkAgent {
public:
  DdqnAgent(const AgentConfig& cfg, const Environment& env) : NetworkAgent(cfg, env), replay_(cfg.replay_capacity) {
    target_ = online_;
  }

  AgentKind kind() const override { return AgentKind::Ddqn; }
  const Mlp& target_network() const noexcept { return target_; }
  const ReplayBuffer& replay() const noexcept { return replay_; }
  long updates() const noexcept { return updates_; }

  EpisodeRecord train_episode(const Environment& env) override {
    EpisodeRecord rec;
    rec.epsilon = eps_.value();
    double loss_sum = 0.0;
    int loss_n = 0;
    const std::size_t warmup = std::max<std::size_t>(static_cast<std::size_t>(cfg_.batch_size),
                                                     static_cast<std::size_t>(std::max(cfg_.warmup, 0)));
    auto s = env.reset(rng_);
    for (auto feas = env.actions(s); !feas.empty(); feas = env.actions(s)) {
      const auto q = q_values(env, s);
      const auto a = select_action(q, feas, eps_.value(), rng_);
      auto t = env.step(s, a);
      rec.reward += t.reward;
      Experience e{env.encode(s), a, t.reward * scale_, env.encode(t.next_state), env.actions(t.next_state), t.terminal};
      replay_.push(std::move(e));
      if (replay_.size() >= warmup) {
        const auto batch = replay_.sample(static_cast<std::size_t>(cfg_.batch_size), rng_);
        loss_sum += ddqn_update(online_, target_, opt_, batch, cfg_.gamma);
        ++loss_n;
        if (++updates_ % cfg_.target_sync == 0) copy_parameters(online_, target_);
      }
      s = std::move(t.next_state);
    }
    rec.loss = loss_n ? loss_sum / loss_n : 0.0;
    eps_.advance();
    return rec;
  }

private:
  Mlp target_;
  ReplayBuffer replay_;
  long updates_ = 0;
};

// On-policy network agent: y = r + gamma * Q(s', a') with a' drawn by the
// same epsilon-greedy policy; one update per step, no target network.
class DeepSarsaAgent final : public NetworkAgent {
public:
  DeepSarsaAgent(const AgentConfig& cfg, const Environment& env) : NetworkAgent(cfg, env) {}

  AgentKind kind() const override { return AgentKind::DeepSarsa; }

  EpisodeRecord train_episode(const Environment& env) override {
    EpisodeRecord rec;
    rec.epsilon = eps_.value();
    double loss_sum = 0.0;
    int loss_n = 0;
    auto s = env.reset(rng_);
    auto feas = env.actions(s);
    if (feas.empty()) {
      eps_.advance();
      return rec;
    }
    auto a = select_action(q_values(env, s), feas, eps_.value(), rng_);
    while (true) {
      auto t = env.step(s, a);
      rec.reward += t.reward;
      double y = t.reward * scale_;
      std::optional<std::size_t> next_a;
      if (!t.terminal) {
        const auto q_next = q_values(env, t.next_state);
        next_a = select_action(q_next, env.actions(t.next_state), eps_.value(), rng_);
        y += cfg_.gamma * q_next[*next_a];
      }
      const auto f = env.encode(s);
      TrainBatch tb{stack_features(std::span<const Features>(&f, 1)), Eigen::VectorXd::Constant(1, y), {static_cast<int>(a)}};
      loss_sum += train_step(online_, opt_, tb);
      ++loss_n;
      if (t.terminal) break;
      s = std::move(t.next_state);
      a = *next_a;
    }
    rec.loss = loss_n ? loss_sum / loss_n : 0.0;
    eps_.advance();
    return rec;
  }
};

// (location, budget bucket, time bucket); location -1 is the start sentinel.
using TabularKey = std::tuple<long, int, int>;

class TabularAgent final : public Agent {
public:
  TabularAgent(TabularRule rule, const AgentConfig& cfg, const Environment& env)
      : rule_(rule), cfg_(cfg), rng_(cfg.seed), eps_(cfg), table_(env.action_count()) {
    cfg_.check();
  }

  AgentKind kind() const override { return rule_ == TabularRule::QLearning ? AgentKind::QLearning : AgentKind::Sarsa; }
  double epsilon() const override { return eps_.value(); }
  const QTable<TabularKey>& table() const noexcept { return table_; }

  TabularKey key(const Environment& env, const EnvState& s) const {
    auto bucket = [&](double rem, double full) {
      if (full <= 0.0) return 0;
      return std::min(cfg_.buckets - 1, static_cast<int>(std::floor(rem / full * cfg_.buckets)));
    };
    return {s.location ? static_cast<long>(*s.location) : -1L, bucket(s.remaining_budget, env.config().budget),
            bucket(s.remaining_time, env.config().horizon)};
  }

  std::vector<double> q_values(const Environment& env, const EnvState& state) const override {
    return table_.row(key(env, state));
  }

  EpisodeRecord train_episode(const Environment& env) override {
    EpisodeRecord rec;
    rec.epsilon = eps_.value();
    auto s = env.reset(rng_);
    auto feas = env.actions(s);
    if (feas.empty()) {
      eps_.advance();
      return rec;
    }
    auto a = select_action(q_values(env, s), feas, eps_.value(), rng_);
    while (true) {
      auto t = env.step(s, a);
      rec.reward += t.reward;
      const auto next_feas = env.actions(t.next_state);
      std::optional<std::size_t> next_a;
      if (!t.terminal) next_a = select_action(q_values(env, t.next_state), next_feas, eps_.value(), rng_);
      tabular_update(rule_, table_, key(env, s), a, t.reward, key(env, t.next_state), t.terminal, next_feas,
                     rule_ == TabularRule::Sarsa ? next_a : std::nullopt, cfg_.tabular_learning_rate, cfg_.gamma);
      if (t.terminal) break;
      s = std::move(t.next_state);
      // Q-learning acts with a fresh epsilon-greedy choice after the update.
      a = rule_ == TabularRule::Sarsa ? *next_a : select_action(q_values(env, s), next_feas, eps_.value(), rng_);
    }
    eps_.advance();
    return rec;
  }

private:
  TabularRule rule_;
  AgentConfig cfg_;
  std::mt19937_64 rng_;
  EpsilonSchedule eps_;
  QTable<TabularKey> table_;
};

inline std::unique_ptr<Agent> make_agent(AgentKind kind, const AgentConfig& cfg, const Environment& env) {
  cfg.check();
  switch (kind) {
    case AgentKind::Ddqn: return std::make_unique<DdqnAgent>(cfg, env);
    case AgentKind::DeepSarsa: return std::make_unique<DeepSarsaAgent>(cfg, env);
    case AgentKind::QLearning: return std::make_unique<TabularAgent>(TabularRule::QLearning, cfg, env);
    case AgentKind::Sarsa: return std::make_unique<TabularAgent>(TabularRule::Sarsa, cfg, env);
    case AgentKind::Random: return std::make_unique<RandomAgent>(cfg);
  }
  throw ValidationError("unknown agent kind");
}

struct Rollout {
  std::vector<std::size_t> plan;
  double reward = 0.0;
};

// Plays one episode with the agent's greedy policy from `start`.
inline Rollout greedy_rollout(const Agent& agent, const Environment& env, EnvState start, std::mt19937_64& rng) {
  Rollout r;
  auto s = std::move(start);
  while (!env.terminal(s)) {
    auto t = env.step(s, agent.act_greedy(env, s, rng));
    r.reward += t.reward;
    s = std::move(t.next_state);
  }
  r.plan = s.taken;
  return r;
}

// Mean undiscounted reward of `rollouts` greedy episodes from random starts.
inline double evaluate(const Agent& agent, const Environment& env, int rollouts, std::uint64_t seed) {
  if (rollouts < 1) throw ValidationError("need at least one evaluation rollout");
  std::mt19937_64 rng(seed);
  double sum = 0.0;
  for (int i = 0; i < rollouts; ++i) sum += greedy_rollout(agent, env, env.reset(rng), rng).reward;
  return sum / rollouts;
}

}  // namespace reconplan
