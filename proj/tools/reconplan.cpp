// reconplan: command-line front end over a lineage directory.
//
// Exit status: 0 ok, 1 invalid input or conflicting request, 2 no feasible
// plan / nothing to plan, 3 internal error (including diverged bench runs).

#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "reconplan/bench.hpp"
#include "reconplan/lineage.hpp"
#include "reconplan/planner.hpp"
#include "reconplan/service.hpp"

namespace rp = reconplan;
using nlohmann::json;

namespace {

constexpr int kExitValidation = 1;
constexpr int kExitNoPlan = 2;
constexpr int kExitInternal = 3;

struct Globals {
  std::string data_dir = "reconplan-data";
  bool json = false;
};

void emit(const Globals& g, const json& j, const std::string& text) {
  if (g.json) std::cout << j.dump(2) << '\n';
  else std::cout << text;
}

std::string dataset_line(const rp::Dataset& ds) {
  std::ostringstream os;
  std::size_t du = 0, dr = 0;
  for (const auto& u : ds.units) du += u.intact() ? 0 : 1;
  for (const auto& r : ds.roads) dr += r.intact() ? 0 : 1;
  os << ds.units.size() << " units (" << du << " damaged), " << ds.roads.size() << " roads (" << dr << " damaged), "
     << ds.dependencies.size() << " declared dependencies, cycle " << ds.cycle << '\n';
  return os.str();
}

json dataset_summary(const rp::Dataset& ds) {
  std::size_t du = 0, dr = 0;
  for (const auto& u : ds.units) du += u.intact() ? 0 : 1;
  for (const auto& r : ds.roads) dr += r.intact() ? 0 : 1;
  return {{"units", ds.units.size()},        {"damaged_units", du},
          {"roads", ds.roads.size()},        {"damaged_roads", dr},
          {"dependencies", ds.dependencies.size()}, {"cycle", ds.cycle}};
}

std::string render_plan(const json& p) {
  std::ostringstream os;
  char buf[200];
  os << "plan " << p["id"].get<std::string>() << "  (agent " << p["provenance"]["agent"].get<std::string>() << ", seed "
     << p["provenance"]["seed"].get<std::uint64_t>() << ", cycle " << p["provenance"]["cycle"].get<int>() << ")\n";
  std::snprintf(buf, sizeof buf, "%4s  %-12s %-10s %-18s %10s %7s %4s %12s\n", "pos", "unit", "type", "kind", "cost", "time",
                "prio", "benefit");
  os << buf;
  for (const auto& it : p["items"]) {
    std::snprintf(buf, sizeof buf, "%4d  %-12s %-10s %-18s %10.0f %7.2f %4d %12.2f\n", it["position"].get<int>(),
                  it["id"].get<std::string>().c_str(), it["type"].get<std::string>().c_str(),
                  it["kind"].get<std::string>().c_str(), it["cost"].get<double>(), it["time"].get<double>(),
                  it["priority"].get<int>(), it["benefit"].get<double>());
    os << buf;
  }
  const auto& t = p["totals"];
  const auto& l = p["limits"];
  std::snprintf(buf, sizeof buf, "S_P %.2f   PP %.2f (threshold >= %.1f)   cost %.0f / %.0f   duration %.2f / %.2f\n",
                t["social_benefit"].get<double>(), t["mean_priority"].get<double>(), l["threshold"].get<double>(),
                t["cost"].get<double>(), l["budget"].get<double>(), t["duration"].get<double>(), l["horizon"].get<double>());
  os << buf;
  os << "parallel groups (makespan " << t["parallel_makespan"].get<double>() << "):";
  for (const auto& g : p["parallel_sublists"]) {
    os << " [";
    bool first = true;
    for (const auto& id : g) {
      os << (first ? "" : ", ") << id.get<std::string>();
      first = false;
    }
    os << ']';
  }
  os << "\n";
  return os.str();
}

rp::PlanningService* g_service = nullptr;
httplib::Server* g_server = nullptr;

extern "C" void on_signal(int) {
  if (g_server) g_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Post-disaster reconstruction planner"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--data-dir", g.data_dir, "Lineage directory")->envname("RECONPLAN_DATA_DIR");
  app.add_flag("--json", g.json, "Machine-readable output");

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Validate a dataset file (CSV or JSON) and start a lineage from it");
  std::string ingest_file;
  bool ingest_replace = false;
  ingest->add_option("file", ingest_file, "Dataset file")->required();
  ingest->add_flag("--replace", ingest_replace, "Discard an existing lineage in the data directory");

  // generate
  auto* gen = app.add_subcommand("generate", "Create a synthetic instance");
  rp::GeneratorConfig gcfg;
  std::string gen_out;
  bool gen_replace = false;
  gen->add_option("--units", gcfg.units, "Number of building units")->capture_default_str();
  gen->add_option("--damage-rate", gcfg.damage_rate, "Fraction of damaged units")->capture_default_str();
  gen->add_option("--dependency-rate", gcfg.dependency_rate, "Chance a damaged unit gets a declared dependency")
      ->capture_default_str();
  gen->add_option("--roads", gcfg.roads, "Road count (0: about 1.13 per unit)")->capture_default_str();
  gen->add_option("--road-damage-rate", gcfg.road_damage_rate, "Fraction of damaged roads (<0: half the unit rate)");
  gen->add_option("--seed", gcfg.seed, "Random seed")->capture_default_str();
  gen->add_option("--out", gen_out, "Write the dataset to this file instead of starting a lineage");
  gen->add_flag("--replace", gen_replace, "Discard an existing lineage in the data directory");

  // train
  auto* train = app.add_subcommand("train", "Train an agent on the current snapshot and propose plans");
  rp::PlannerConfig pcfg;
  pcfg.agent_config.episodes = 2000;
  std::string agent_name = "ddqn", reward_mode = "unit-benefit";
  train->add_option("--budget", pcfg.budget, "Budget")->capture_default_str();
  train->add_option("--horizon", pcfg.horizon, "Time horizon")->capture_default_str();
  train->add_option("--episodes", pcfg.agent_config.episodes, "Training episodes")->capture_default_str();
  train->add_option("--agent", agent_name, "ddqn|qlearn|sarsa|deep-sarsa|random")->capture_default_str();
  train->add_option("--alternatives", pcfg.alternatives, "Number of alternative plans")->capture_default_str();
  train->add_option("--seed", pcfg.agent_config.seed, "Random seed")->capture_default_str();
  train->add_option("--reward", reward_mode, "unit-benefit|time-weighted")->capture_default_str();
  train->add_flag("--strict-priority", pcfg.strict_priority, "Every item must reach the cycle threshold on its own");

  // plan show
  auto* plan = app.add_subcommand("plan", "Inspect candidate plans");
  plan->require_subcommand(1);
  auto* show = plan->add_subcommand("show", "Show candidate plans of a cycle, or one plan by id");
  std::string show_id;
  int show_cycle = 0;
  show->add_option("id", show_id, "Plan id");
  show->add_option("--cycle", show_cycle, "Cycle (default: current)");

  // apply
  auto* apply = app.add_subcommand("apply", "Apply a candidate plan and advance to the next cycle");
  std::string apply_id;
  apply->add_option("plan-id", apply_id, "Plan id")->required();

  // bench
  auto* bench = app.add_subcommand("bench", "Compare all algorithms on the current snapshot (or a dataset file)");
  rp::BenchConfig bcfg;
  std::string bench_out = "bench-report", bench_file, bench_agents;
  bench->add_option("--episodes", bcfg.episodes, "Training episodes per run")->capture_default_str();
  bench->add_option("--seeds", bcfg.seeds, "Seeds")->delimiter(',');
  bench->add_option("--agents", bench_agents, "Comma-separated subset of algorithms");
  bench->add_option("--budget", bcfg.budget, "Budget")->capture_default_str();
  bench->add_option("--horizon", bcfg.horizon, "Time horizon")->capture_default_str();
  bench->add_option("--threads", bcfg.threads, "Parallel runs (0: all cores)")->capture_default_str();
  bench->add_option("--out", bench_out, "Report directory")->capture_default_str();
  bench->add_option("--dataset", bench_file, "Dataset file instead of the lineage snapshot");

  // serve
  auto* serve = app.add_subcommand("serve", "Run the HTTP API");
  int port = 8080;
  std::string host = "127.0.0.1";
  unsigned workers = 2;
  serve->add_option("--port", port, "Port")->envname("RECONPLAN_PORT")->capture_default_str();
  serve->add_option("--host", host, "Bind address")->capture_default_str();
  serve->add_option("--workers", workers, "Concurrent training jobs")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitValidation;
  }

  try {
    if (*ingest) {
      auto ds = rp::load_dataset(std::filesystem::path(ingest_file));
      rp::LineageStore store(g.data_dir);
      store.init(ds, ingest_replace);
      emit(g, {{"ingested", ingest_file}, {"snapshot", (store.directory() / rp::snapshot_name(ds.cycle)).string()},
               {"dataset", dataset_summary(ds)}},
           "ingested " + ingest_file + ": " + dataset_line(ds));
      return 0;
    }

    if (*gen) {
      auto ds = rp::generate_instance(gcfg);
      if (!gen_out.empty()) {
        rp::save_dataset(ds, std::filesystem::path(gen_out));
        emit(g, {{"written", gen_out}, {"dataset", dataset_summary(ds)}}, "wrote " + gen_out + ": " + dataset_line(ds));
      } else {
        rp::LineageStore store(g.data_dir);
        store.init(ds, gen_replace);
        emit(g, {{"data_dir", g.data_dir}, {"dataset", dataset_summary(ds)}}, "generated into " + g.data_dir + ": " + dataset_line(ds));
      }
      return 0;
    }

    if (*train) {
      pcfg.agent = rp::parse_agent(agent_name);
      if (reward_mode == "time-weighted") pcfg.agent_config.reward = rp::RewardMode::TimeWeighted;
      else if (reward_mode != "unit-benefit") throw rp::ValidationError("unknown reward mode '" + reward_mode + "'", "--reward");
      rp::LineageStore store(g.data_dir);
      const auto ds = store.current();
      auto result = rp::train_and_plan(ds, pcfg);
      if (result.plans.empty()) {
        emit(g, {{"plans", json::array()}, {"diagnostics", result.diagnostics}}, "no plan: " + result.diagnostics + "\n");
        return kExitNoPlan;
      }
      const auto inst = rp::Instance::make(ds, pcfg.benefit);
      store.set_candidates(ds.cycle, result.plans, *inst);
      json files = json::array();
      std::ostringstream text;
      char buf[200];
      std::snprintf(buf, sizeof buf, "trained %s for %d episodes in %.1fs; greedy %.2f vs random %.2f (threshold %.1f)\n",
                    agent_name.c_str(), pcfg.agent_config.episodes, result.training_seconds,
                    result.verification.trained_mean, result.verification.random_mean, result.threshold);
      text << buf;
      for (const auto& p : result.plans) {
        files.push_back(store.plan_path(p.id).string());
        std::snprintf(buf, sizeof buf, "  %-8s S_P %12.2f  PP %5.2f  items %zu  -> %s\n", p.id.c_str(), p.evaluation.social_benefit,
                      p.evaluation.mean_priority, p.items.size(), store.plan_path(p.id).string().c_str());
        text << buf;
      }
      emit(g,
           {{"plans", store.plan_documents(ds.cycle)},
            {"files", files},
            {"threshold", result.threshold},
            {"training_seconds", result.training_seconds},
            {"verification", {{"trained_mean", result.verification.trained_mean}, {"random_mean", result.verification.random_mean}}}},
           text.str());
      return 0;
    }

    if (*plan) {
      rp::LineageStore store(g.data_dir);
      if (!show_id.empty()) {
        auto doc = store.find_plan(show_id);
        if (!doc) throw rp::NotFoundError("unknown plan id '" + show_id + "'");
        emit(g, *doc, render_plan(*doc));
        return 0;
      }
      const int cycle = show_cycle > 0 ? show_cycle : store.current_cycle();
      const auto docs = store.plan_documents(cycle);
      std::string text;
      for (const auto& d : docs) text += render_plan(d) + "\n";
      if (docs.empty()) text = "no candidate plans for cycle " + std::to_string(cycle) + "\n";
      emit(g, {{"cycle", cycle}, {"plans", docs}}, text);
      return 0;
    }

    if (*apply) {
      rp::LineageStore store(g.data_dir);
      if (!store.find_plan(apply_id)) throw rp::NotFoundError("unknown plan id '" + apply_id + "'");
      const auto next = store.apply(apply_id);
      emit(g, {{"applied", apply_id}, {"cycle", next.cycle}, {"threshold", rp::cycle_threshold(next.cycle)},
               {"dataset", dataset_summary(next)}},
           "applied " + apply_id + "; now " + dataset_line(next));
      return 0;
    }

    if (*bench) {
      if (!bench_agents.empty()) {
        bcfg.agents.clear();
        std::stringstream ss(bench_agents);
        for (std::string a; std::getline(ss, a, ',');) bcfg.agents.push_back(rp::parse_agent(a));
      }
      const auto ds = bench_file.empty() ? rp::LineageStore(g.data_dir).current() : rp::load_dataset(std::filesystem::path(bench_file));
      auto res = rp::compare_algorithms(ds, bcfg);
      auto files = rp::emit_report(res, bench_out);
      std::ifstream digest(std::filesystem::path(bench_out) / "digest.txt");
      std::stringstream dtext;
      dtext << digest.rdbuf();
      json fl = json::array();
      for (const auto& f : files) fl.push_back(f.string());
      json rows = json::array();
      for (const auto& r : res.summary)
        rows.push_back({{"algorithm", r.algorithm}, {"episodes", r.episodes}, {"seeds", r.seeds},
                        {"final_reward", r.final_reward}, {"first100_reward", r.first100_reward}, {"status", r.status}});
      emit(g, {{"summary", rows}, {"files", fl}}, dtext.str());
      return res.any_diverged() ? kExitInternal : 0;
    }

    if (*serve) {
      rp::LineageStore store(g.data_dir);
      rp::PlanningService service(store, workers);
      httplib::Server srv;
      service.mount(srv);
      g_service = &service;
      g_server = &srv;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::cerr << "serving " << g.data_dir << " on http://" << host << ':' << port << '\n';
      if (!srv.listen(host, port)) {
        std::cerr << "cannot listen on " << host << ':' << port << '\n';
        return kExitInternal;
      }
      service.shutdown();
      return 0;
    }
  } catch (const rp::NothingToPlanError& e) {
    std::cerr << e.what() << '\n';
    return kExitNoPlan;
  } catch (const rp::ValidationError& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return kExitValidation;
  } catch (const rp::ConflictError& e) {
    std::cerr << "conflict: " << e.what() << '\n';
    return kExitValidation;
  } catch (const rp::NotFoundError& e) {
    std::cerr << "not found: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kExitInternal;
  }
  return 0;
}
