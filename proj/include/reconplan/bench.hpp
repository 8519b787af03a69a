#pragma once
//
// Side-by-side training of every agent on one instance, with reward curves
// and a summary table written as CSV.
//
// summary.csv  algorithm,episodes,seeds,final_reward,first100_reward,status
// runs.csv     algorithm,seed,final_reward,first100_reward,status
// curve-<alg>-<seed>.csv  episode,reward,moving_avg,epsilon,loss
// timing.csv   algorithm,seed,wallclock_s
// digest.txt   human-readable table including wall-clock time
//
// Everything except timing.csv and digest.txt is a pure function of the
// dataset, configuration and seeds.
//

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "agents.hpp"
#include "planner.hpp"

namespace reconplan {

inline constexpr int kMovingAverageWindow = 100;
inline constexpr int kBenchEvaluationRollouts = 100;

struct BenchConfig {
  double budget = 100000.0;
  double horizon = 60.0;
  int episodes = 2000;
  std::vector<std::uint64_t> seeds{1, 2, 3};
  std::vector<AgentKind> agents{kAllAgents.begin(), kAllAgents.end()};
  AgentConfig agent_config;  // seed and episodes are overridden per run
  int evaluation_rollouts = kBenchEvaluationRollouts;
  unsigned threads = 0;  // 0: hardware concurrency

  void check() const {
    if (episodes < 100) throw ValidationError("bench needs at least 100 episodes");
    if (seeds.empty()) throw ValidationError("bench needs at least one seed");
    if (agents.empty()) throw ValidationError("bench needs at least one algorithm");
    if (evaluation_rollouts < 1) throw ValidationError("bench needs at least one evaluation rollout");
  }
};

struct BenchRun {
  AgentKind agent = AgentKind::Ddqn;
  std::uint64_t seed = 0;
  std::vector<EpisodeRecord> curve;
  double final_reward = 0.0;    // greedy evaluation mean
  double first100_reward = 0.0; // mean training reward over the first 100 episodes
  double wallclock_s = 0.0;
  bool diverged = false;
  std::string error;
};

struct SummaryRow {
  std::string algorithm;
  int episodes = 0;
  int seeds = 0;
  double final_reward = 0.0;
  double first100_reward = 0.0;
  std::string status = "ok";

  bool operator==(const SummaryRow&) const = default;
};

struct BenchResult {
  std::vector<BenchRun> runs;
  std::vector<SummaryRow> summary;
  int episodes = 0;

  bool any_diverged() const {
    return std::any_of(runs.begin(), runs.end(), [](const BenchRun& r) { return r.diverged; });
  }
  const SummaryRow& row(AgentKind k) const {
    for (const auto& r : summary)
      if (r.algorithm == agent_name(k)) return r;
    throw NotFoundError("no summary row for " + std::string(agent_name(k)));
  }
};

inline std::vector<double> moving_average(const std::vector<EpisodeRecord>& curve, int window = kMovingAverageWindow) {
  std::vector<double> out;
  out.reserve(curve.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < curve.size(); ++i) {
    sum += curve[i].reward;
    if (i >= static_cast<std::size_t>(window)) sum -= curve[i - static_cast<std::size_t>(window)].reward;
    out.push_back(sum / static_cast<double>(std::min<std::size_t>(i + 1, static_cast<std::size_t>(window))));
  }
  return out;
}

inline BenchRun run_one(const Dataset& ds, const BenchConfig& cfg, AgentKind kind, std::uint64_t seed) {
  BenchRun run;
  run.agent = kind;
  run.seed = seed;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    auto inst = Instance::make(ds);
    AgentConfig ac = cfg.agent_config;
    ac.seed = seed;
    ac.episodes = cfg.episodes;
    PlannerConfig pc;
    pc.budget = cfg.budget;
    pc.horizon = cfg.horizon;
    pc.agent_config = ac;
    Environment env(inst, env_config_for(pc, cycle_threshold(ds.cycle)));
    auto agent = make_agent(kind, ac, env);
    run.curve = agent->train(env, cfg.episodes);
    const auto head = std::min<std::size_t>(run.curve.size(), 100);
    double s = 0.0;
    for (std::size_t i = 0; i < head; ++i) s += run.curve[i].reward;
    run.first100_reward = head ? s / static_cast<double>(head) : 0.0;
    run.final_reward = evaluate(*agent, env, cfg.evaluation_rollouts, seed ^ 0x9e3779b97f4a7c15ULL);
  } catch (const Error& e) {
    run.diverged = true;
    run.error = e.what();
  }
  run.wallclock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return run;
}

inline BenchResult compare_algorithms(const Dataset& ds, const BenchConfig& cfg) {
  cfg.check();
  validate(ds);
  if (ds.damaged_count() == 0) throw NothingToPlanError();

  std::vector<std::pair<AgentKind, std::uint64_t>> jobs;
  for (auto k : cfg.agents)
    for (auto s : cfg.seeds) jobs.emplace_back(k, s);

  BenchResult res;
  res.episodes = cfg.episodes;
  res.runs.resize(jobs.size());
  unsigned threads = cfg.threads ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(jobs.size()));
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) res.runs[i] = run_one(ds, cfg, jobs[i].first, jobs[i].second);
  };
  std::vector<std::jthread> pool;
  for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  pool.clear();

  for (auto k : cfg.agents) {
    SummaryRow row;
    row.algorithm = std::string(agent_name(k));
    row.episodes = cfg.episodes;
    int ok = 0;
    for (const auto& r : res.runs) {
      if (r.agent != k) continue;
      ++row.seeds;
      if (r.diverged) {
        row.status = "diverged";
        continue;
      }
      ++ok;
      row.final_reward += r.final_reward;
      row.first100_reward += r.first100_reward;
    }
    if (ok) {
      row.final_reward /= ok;
      row.first100_reward /= ok;
    }
    res.summary.push_back(std::move(row));
  }
  return res;
}

namespace detail {

inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::ofstream open_for_write(const std::filesystem::path& p) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write '" + p.string() + "'");
  return out;
}

}  // namespace detail

inline std::string curve_file_name(AgentKind k, std::uint64_t seed) {
  return "curve-" + std::string(agent_name(k)) + "-" + std::to_string(seed) + ".csv";
}

inline std::string summary_csv(const std::vector<SummaryRow>& rows) {
  std::ostringstream os;
  os << "algorithm,episodes,seeds,final_reward,first100_reward,status\n";
  for (const auto& r : rows)
    os << r.algorithm << ',' << r.episodes << ',' << r.seeds << ',' << detail::fmt_double(r.final_reward) << ','
       << detail::fmt_double(r.first100_reward) << ',' << r.status << '\n';
  return os.str();
}

inline std::vector<SummaryRow> parse_summary_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || detail::trim(line) != "algorithm,episodes,seeds,final_reward,first100_reward,status")
    throw ValidationError("unexpected summary header");
  std::vector<SummaryRow> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    auto f = detail::split_csv(line);
    const std::string where = "summary line " + std::to_string(lineno);
    if (f.size() != 6) throw ValidationError("expected 6 fields", where);
    SummaryRow r;
    r.algorithm = f[0];
    r.episodes = static_cast<int>(detail::parse_number<double>(f[1], where + ", field episodes"));
    r.seeds = static_cast<int>(detail::parse_number<double>(f[2], where + ", field seeds"));
    r.final_reward = detail::parse_number<double>(f[3], where + ", field final_reward");
    r.first100_reward = detail::parse_number<double>(f[4], where + ", field first100_reward");
    r.status = f[5];
    rows.push_back(std::move(r));
  }
  return rows;
}

// Writes the report files into `out_dir` (created if missing). Returns the paths written.
inline std::vector<std::filesystem::path> emit_report(const BenchResult& res, const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw Error("cannot create '" + out_dir.string() + "': " + ec.message());
  std::vector<std::filesystem::path> written;

  auto put = [&](const std::string& name, const std::string& text) {
    auto p = out_dir / name;
    auto out = detail::open_for_write(p);
    out << text;
    if (!out) throw Error("short write to '" + p.string() + "'");
    written.push_back(p);
  };

  put("summary.csv", summary_csv(res.summary));

  if (!res.runs.empty()) {
    std::ostringstream runs, timing;
    runs << "algorithm,seed,final_reward,first100_reward,status\n";
    timing << "algorithm,seed,wallclock_s\n";
    for (const auto& r : res.runs) {
      runs << agent_name(r.agent) << ',' << r.seed << ',' << detail::fmt_double(r.final_reward) << ','
           << detail::fmt_double(r.first100_reward) << ',' << (r.diverged ? "diverged" : "ok") << '\n';
      timing << agent_name(r.agent) << ',' << r.seed << ',' << detail::fmt_double(r.wallclock_s) << '\n';
    }
    put("runs.csv", runs.str());
    put("timing.csv", timing.str());
  }

  for (const auto& r : res.runs) {
    if (r.curve.empty()) continue;
    std::ostringstream os;
    os << "episode,reward,moving_avg,epsilon,loss\n";
    const auto ma = moving_average(r.curve);
    for (std::size_t i = 0; i < r.curve.size(); ++i) {
      const auto& e = r.curve[i];
      os << e.episode << ',' << detail::fmt_double(e.reward) << ',' << detail::fmt_double(ma[i]) << ','
         << detail::fmt_double(e.epsilon) << ',' << detail::fmt_double(e.loss) << '\n';
    }
    put(curve_file_name(r.agent, r.seed), os.str());
  }

  std::ostringstream d;
  char line[160];
  std::snprintf(line, sizeof line, "%-12s %8s %6s %14s %14s %12s  %s\n", "algorithm", "episodes", "seeds", "final_reward",
                "first100", "wallclock_s", "status");
  d << line;
  for (const auto& s : res.summary) {
    double wall = 0.0;
    for (const auto& r : res.runs)
      if (agent_name(r.agent) == s.algorithm) wall += r.wallclock_s;
    std::snprintf(line, sizeof line, "%-12s %8d %6d %14.3f %14.3f %12.2f  %s\n", s.algorithm.c_str(), s.episodes, s.seeds,
                  s.final_reward, s.first100_reward, wall, s.status.c_str());
    d << line;
  }
  for (const auto& r : res.runs)
    if (r.diverged) d << "diverged: " << agent_name(r.agent) << " seed " << r.seed << ": " << r.error << '\n';
  put("digest.txt", d.str());
  return written;
}

}  // namespace reconplan
