#pragma once
//
// HTTP front end over one lineage directory.
//
//   GET  /api/dataset            current snapshot plus the derived dependency graph
//   POST /api/jobs/train         {"budget","horizon","config":{...}} -> {"job": id}
//   GET  /api/jobs/{id}          status, progress, reward tail, resulting plan ids
//   GET  /api/plans?cycle=n      candidate plan documents (current cycle by default)
//   POST /api/plans/{id}/apply   advance the lineage one cycle
//   GET  /api/cycles             cycle history
//   GET  /api/curves/{job}       full reward series of a job
//
// Errors: {"error": {"code": "...", "message": "..."}} with 404 / 409 / 422 / 500.
//

#include <atomic>
#include <condition_variable>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "bench.hpp"
#include "lineage.hpp"
#include "planner.hpp"

// After Eigen: <resolv.h>, pulled in by httplib, defines a `_res` macro.
#include <httplib.h>

namespace reconplan {

enum class JobStatus { Queued, Running, Done, Failed };

inline std::string_view job_status_name(JobStatus s) {
  switch (s) {
    case JobStatus::Queued: return "queued";
    case JobStatus::Running: return "running";
    case JobStatus::Done: return "done";
    case JobStatus::Failed: return "failed";
  }
  return "unknown";
}

struct TrainRequest {
  PlannerConfig planner;
};

// Body: {"budget": 100000, "horizon": 60, "config": {"agent": "ddqn", "episodes": 2000,
// "seed": 1, "alternatives": 2, "gamma": 0.95, "learning_rate": 0.001, "batch_size": 32,
// "epsilon_decay": 0.0003, "strict_priority": false, "reward": "unit-benefit"}}
inline TrainRequest parse_train_request(const nlohmann::json& body) {
  if (!body.is_object()) throw ValidationError("request body must be an object");
  TrainRequest r;
  auto& p = r.planner;
  try {
    p.budget = body.value("budget", p.budget);
    p.horizon = body.value("horizon", p.horizon);
    const auto cfg = body.value("config", nlohmann::json::object());
    if (!cfg.is_object()) throw ValidationError("config must be an object", "config");
    p.agent = parse_agent(cfg.value("agent", std::string(agent_name(p.agent))));
    p.alternatives = cfg.value("alternatives", p.alternatives);
    p.strict_priority = cfg.value("strict_priority", p.strict_priority);
    p.verification_rollouts = cfg.value("verification_rollouts", p.verification_rollouts);
    auto& a = p.agent_config;
    a.episodes = cfg.value("episodes", 2000);
    a.seed = cfg.value("seed", a.seed);
    a.gamma = cfg.value("gamma", a.gamma);
    a.learning_rate = cfg.value("learning_rate", a.learning_rate);
    a.batch_size = cfg.value("batch_size", a.batch_size);
    a.epsilon_decay = cfg.value("epsilon_decay", a.epsilon_decay);
    a.target_sync = cfg.value("target_sync", a.target_sync);
    const auto reward = cfg.value("reward", std::string("unit-benefit"));
    if (reward == "unit-benefit") a.reward = RewardMode::UnitBenefit;
    else if (reward == "time-weighted") a.reward = RewardMode::TimeWeighted;
    else throw ValidationError("unknown reward mode '" + reward + "'", "config.reward");
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(e.what(), "request body");
  }
  p.check();
  return r;
}

struct Job {
  std::string id;
  TrainRequest request;
  int cycle = 0;

  mutable std::mutex mu;
  JobStatus status = JobStatus::Queued;
  std::vector<EpisodeRecord> curve;
  std::vector<std::string> plan_ids;
  std::string diagnostics;
  std::string error;
  Verification verification;
  double threshold = 0.0;

  // Status only moves forward; finished jobs never change again.
  bool advance(JobStatus next) {
    std::lock_guard lk(mu);
    if (static_cast<int>(next) <= static_cast<int>(status) || status == JobStatus::Done || status == JobStatus::Failed)
      return false;
    status = next;
    return true;
  }

  JobStatus current() const {
    std::lock_guard lk(mu);
    return status;
  }
};

namespace detail {

struct Cancelled {};

inline nlohmann::json error_body(std::string_view code, std::string_view message) {
  return {{"error", {{"code", code}, {"message", message}}}};
}

}  // namespace detail

class PlanningService {
public:
  explicit PlanningService(LineageStore& store, unsigned workers = 2) : store_(store) {
    for (unsigned i = 0; i < std::max(1u, workers); ++i) workers_.emplace_back([this] { work(); });
  }

  ~PlanningService() { shutdown(); }

  PlanningService(const PlanningService&) = delete;
  PlanningService& operator=(const PlanningService&) = delete;

  void shutdown() {
    {
      std::lock_guard lk(queue_mu_);
      if (stopping_) return;
      stopping_ = true;
    }
    queue_cv_.notify_all();
    for (auto& w : workers_)
      if (w.joinable()) w.join();
  }

  // ---- operations behind the routes; each returns the JSON body or throws

  nlohmann::json dataset() const {
    const auto ds = store_.current();
    auto j = dataset_to_json(ds);
    const auto inst = Instance::make(ds);
    j["threshold"] = cycle_threshold(ds.cycle);
    j["damaged_items"] = ds.damaged_count();
    nlohmann::json edges = nlohmann::json::array();
    for (const auto& e : inst->deps.edges(inst->items)) edges.push_back({{"blocked", e.blocked}, {"blocker", e.blocker}});
    j["derived_dependencies"] = edges;
    return j;
  }

  std::string submit(const nlohmann::json& body) {
    auto req = parse_train_request(body);
    const int cycle = store_.current_cycle();
    auto job = std::make_shared<Job>();
    job->request = std::move(req);
    job->cycle = cycle;
    {
      std::lock_guard lk(jobs_mu_);
      job->id = "job-" + std::to_string(++job_counter_);
      jobs_[job->id] = job;
    }
    {
      std::lock_guard lk(queue_mu_);
      if (stopping_) throw Error("service is shutting down");
      queue_.push_back(job);
    }
    queue_cv_.notify_one();
    return job->id;
  }

  nlohmann::json job(const std::string& id) const {
    auto j = find_job(id);
    std::lock_guard lk(j->mu);
    nlohmann::json tail = nlohmann::json::array();
    const std::size_t from = j->curve.size() > 20 ? j->curve.size() - 20 : 0;
    for (std::size_t i = from; i < j->curve.size(); ++i) tail.push_back(j->curve[i].reward);
    return {{"id", j->id},
            {"status", job_status_name(j->status)},
            {"cycle", j->cycle},
            {"agent", agent_name(j->request.planner.agent)},
            {"episodes_done", j->curve.size()},
            {"episodes_total", j->request.planner.agent_config.episodes},
            {"reward_tail", tail},
            {"plans", j->plan_ids},
            {"threshold", j->threshold},
            {"verification", {{"trained_mean", j->verification.trained_mean}, {"random_mean", j->verification.random_mean}}},
            {"diagnostics", j->diagnostics},
            {"error", j->error}};
  }

  nlohmann::json curves(const std::string& id) const {
    auto j = find_job(id);
    std::lock_guard lk(j->mu);
    nlohmann::json ep = nlohmann::json::array(), rw = nlohmann::json::array(), ma = nlohmann::json::array(),
                   eps = nlohmann::json::array(), loss = nlohmann::json::array();
    const auto avg = moving_average(j->curve);
    for (std::size_t i = 0; i < j->curve.size(); ++i) {
      ep.push_back(j->curve[i].episode);
      rw.push_back(j->curve[i].reward);
      ma.push_back(avg[i]);
      eps.push_back(j->curve[i].epsilon);
      loss.push_back(j->curve[i].loss);
    }
    return {{"job", j->id},
            {"status", job_status_name(j->status)},
            {"episode", ep},
            {"reward", rw},
            {"moving_avg", ma},
            {"epsilon", eps},
            {"loss", loss}};
  }

  nlohmann::json plans(std::optional<int> cycle) const {
    const int c = cycle ? *cycle : store_.current_cycle();
    return {{"cycle", c}, {"plans", store_.plan_documents(c)}};
  }

  nlohmann::json apply(const std::string& plan_id) {
    if (!store_.find_plan(plan_id)) throw NotFoundError("unknown plan id '" + plan_id + "'");
    const auto next = store_.apply(plan_id);
    return {{"applied", plan_id}, {"cycle", next.cycle}, {"threshold", cycle_threshold(next.cycle)},
            {"damaged_items", next.damaged_count()}};
  }

  nlohmann::json cycles() const {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& c : store_.cycles()) {
      nlohmann::json ids = nlohmann::json::array();
      for (const auto& p : c.record.candidates) ids.push_back(p.id);
      nlohmann::json sel = nullptr;
      if (c.record.selected) {
        for (const auto& p : c.record.candidates)
          if (p.id == *c.record.selected)
            sel = {{"id", p.id},
                   {"social_benefit", p.evaluation.social_benefit},
                   {"mean_priority", p.evaluation.mean_priority},
                   {"items", p.items}};
      }
      out.push_back({{"cycle", c.record.cycle},
                     {"threshold", c.record.threshold},
                     {"candidates", ids},
                     {"selected", sel},
                     {"before", c.record.before_snapshot},
                     {"after", c.record.after_snapshot ? nlohmann::json(*c.record.after_snapshot) : nlohmann::json(nullptr)}});
    }
    return {{"cycles", out}};
  }

  // ---- HTTP wiring

  void mount(httplib::Server& srv) {
    auto wrap = [](auto fn) {
      return [fn](const httplib::Request& req, httplib::Response& res) {
        int status = 200;
        nlohmann::json body;
        try {
          body = fn(req, status);
        } catch (const ValidationError& e) {
          status = 422;
          body = detail::error_body("validation_error", e.what());
        } catch (const NothingToPlanError& e) {
          status = 422;
          body = detail::error_body("nothing_to_plan", e.what());
        } catch (const NotFoundError& e) {
          status = 404;
          body = detail::error_body("not_found", e.what());
        } catch (const ConflictError& e) {
          status = 409;
          body = detail::error_body("conflict", e.what());
        } catch (const std::exception& e) {
          status = 500;
          body = detail::error_body("internal", e.what());
        }
        res.status = status;
        res.set_content(body.dump(), "application/json");
      };
    };

    srv.Get("/api/dataset", wrap([this](const httplib::Request&, int&) { return dataset(); }));
    srv.Post("/api/jobs/train", wrap([this](const httplib::Request& req, int& status) {
               nlohmann::json body;
               try {
                 body = req.body.empty() ? nlohmann::json::object() : nlohmann::json::parse(req.body);
               } catch (const nlohmann::json::exception& e) {
                 throw ValidationError(e.what(), "request body");
               }
               status = 202;
               return nlohmann::json{{"job", submit(body)}};
             }));
    srv.Get(R"(/api/jobs/([^/]+))", wrap([this](const httplib::Request& req, int&) { return job(req.matches[1]); }));
    srv.Get(R"(/api/curves/([^/]+))", wrap([this](const httplib::Request& req, int&) { return curves(req.matches[1]); }));
    srv.Get("/api/plans", wrap([this](const httplib::Request& req, int&) {
              std::optional<int> cycle;
              if (req.has_param("cycle")) cycle = detail::parse_number<int>(req.get_param_value("cycle"), "query cycle");
              return plans(cycle);
            }));
    srv.Post(R"(/api/plans/([^/]+)/apply)", wrap([this](const httplib::Request& req, int&) { return apply(req.matches[1]); }));
    srv.Get("/api/cycles", wrap([this](const httplib::Request&, int&) { return cycles(); }));
    srv.set_error_handler([](const httplib::Request&, httplib::Response& res) {
      if (!res.body.empty()) return;
      res.set_content(detail::error_body(res.status == 404 ? "not_found" : "http_error", httplib::status_message(res.status)).dump(),
                      "application/json");
    });
  }

private:
  std::shared_ptr<Job> find_job(const std::string& id) const {
    std::lock_guard lk(jobs_mu_);
    auto it = jobs_.find(id);
    if (it == jobs_.end()) throw NotFoundError("unknown job id '" + id + "'");
    return it->second;
  }

  void work() {
    for (;;) {
      std::shared_ptr<Job> job;
      {
        std::unique_lock lk(queue_mu_);
        queue_cv_.wait(lk, [&] { return stopping_ || !queue_.empty(); });
        if (stopping_) {
          for (auto& j : queue_) fail(*j, "service shut down before the job started");
          queue_.clear();
          return;
        }
        job = queue_.front();
        queue_.pop_front();
      }
      run(*job);
    }
  }

  void fail(Job& job, const std::string& why) {
    {
      std::lock_guard lk(job.mu);
      job.error = why;
    }
    job.advance(JobStatus::Failed);
  }

  void run(Job& job) {
    job.advance(JobStatus::Running);
    try {
      const auto ds = store_.snapshot(job.cycle);
      auto sink = [&](const EpisodeRecord& rec) {
        {
          std::lock_guard lk(queue_mu_);
          if (stopping_) throw detail::Cancelled{};
        }
        std::lock_guard lk(job.mu);
        job.curve.push_back(rec);
      };
      auto result = train_and_plan(ds, job.request.planner, sink);
      if (!result.plans.empty()) {
        const auto inst = Instance::make(ds, job.request.planner.benefit);
        store_.set_candidates(job.cycle, result.plans, *inst);
      }
      {
        std::lock_guard lk(job.mu);
        for (const auto& p : result.plans) job.plan_ids.push_back(p.id);
        job.diagnostics = result.diagnostics;
        job.verification = result.verification;
        job.threshold = result.threshold;
      }
      job.advance(JobStatus::Done);
    } catch (const detail::Cancelled&) {
      fail(job, "cancelled by shutdown");
    } catch (const std::exception& e) {
      fail(job, e.what());
    }
  }

  LineageStore& store_;

  mutable std::mutex jobs_mu_;
  std::map<std::string, std::shared_ptr<Job>> jobs_;
  long job_counter_ = 0;

  std::mutex queue_mu_;
  std::condition_variable queue_cv_;
  std::deque<std::shared_ptr<Job>> queue_;
  bool stopping_ = false;
  std::vector<std::thread> workers_;
};

}  // namespace reconplan
