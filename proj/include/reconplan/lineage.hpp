#pragma once
//
// One dataset lineage on disk:
//   <dir>/manifest.json         cycle records, candidate plans, selections
//   <dir>/cycle-<n>.dataset     snapshot the cycle started from (never rewritten)
//   <dir>/plans/<plan-id>.json  exported candidate plans
//
// Readers may run concurrently. Writers are serialised; a writer that finds
// another write in flight fails fast with ConflictError instead of queueing.
//

#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dataset_io.hpp"
#include "planner.hpp"

namespace reconplan {

inline constexpr std::string_view kManifestFormat = "reconplan-lineage";
inline constexpr int kManifestVersion = 1;

namespace detail {

// Write-then-rename so a crashed writer never leaves a torn file behind.
inline void write_atomically(const std::filesystem::path& path, const std::string& text) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write '" + tmp.string() + "'");
    out << text;
    if (!out) throw Error("short write to '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace detail

class LineageStore {
public:
  struct StoredCycle {
    CycleRecord record;
    std::vector<nlohmann::json> documents;  // plan_to_json of each candidate, same order
  };

  explicit LineageStore(std::filesystem::path dir) : dir_(std::move(dir)) {
    if (std::filesystem::exists(manifest_path())) load();
  }

  const std::filesystem::path& directory() const noexcept { return dir_; }

  bool initialised() const {
    std::shared_lock lk(state_);
    return !cycles_.empty();
  }

  // Starts a lineage from `ds`. Refuses to overwrite an existing one unless `replace`.
  void init(const Dataset& ds, bool replace = false) {
    validate(ds);
    WriteGuard g(*this);
    std::unique_lock lk(state_);
    if (!cycles_.empty() && !replace) throw ConflictError("lineage already initialised in '" + dir_.string() + "'");
    std::filesystem::create_directories(dir_ / "plans");
    if (replace) {
      for (const auto& c : cycles_) {
        std::filesystem::remove(dir_ / c.record.before_snapshot);
        for (const auto& p : c.record.candidates) std::filesystem::remove(plan_path(p.id));
      }
    }
    cycles_.clear();
    StoredCycle c;
    c.record.cycle = ds.cycle;
    c.record.threshold = cycle_threshold(ds.cycle);
    c.record.before_snapshot = snapshot_name(ds.cycle);
    detail::write_atomically(dir_ / c.record.before_snapshot, dataset_to_json(ds).dump(2) + "\n");
    cycles_.push_back(std::move(c));
    current_ = ds;
    save_manifest();
  }

  Dataset current() const {
    std::shared_lock lk(state_);
    require_init();
    return current_;
  }

  int current_cycle() const {
    std::shared_lock lk(state_);
    require_init();
    return cycles_.back().record.cycle;
  }

  std::vector<StoredCycle> cycles() const {
    std::shared_lock lk(state_);
    return cycles_;
  }

  // Candidate documents for a cycle; unknown cycles and untrained cycles give an empty list.
  std::vector<nlohmann::json> plan_documents(int cycle) const {
    std::shared_lock lk(state_);
    for (const auto& c : cycles_)
      if (c.record.cycle == cycle) return c.documents;
    return {};
  }

  std::optional<nlohmann::json> find_plan(const std::string& id) const {
    std::shared_lock lk(state_);
    for (const auto& c : cycles_)
      for (const auto& d : c.documents)
        if (d.at("id").get<std::string>() == id) return std::optional<nlohmann::json>(std::in_place, d);
    return std::nullopt;
  }

  // Records the candidates of the current cycle. `expected_cycle` guards
  // against a result trained on a snapshot that has since been advanced.
  void set_candidates(int expected_cycle, const std::vector<Plan>& plans, const Instance& inst) {
    WriteGuard g(*this);
    std::unique_lock lk(state_);
    require_init();
    auto& c = cycles_.back();
    if (c.record.cycle != expected_cycle)
      throw ConflictError("lineage moved to cycle " + std::to_string(c.record.cycle) + " while planning cycle " +
                          std::to_string(expected_cycle));
    if (c.record.selected) throw ConflictError("cycle " + std::to_string(c.record.cycle) + " already has an applied plan");
    for (const auto& p : c.record.candidates) std::filesystem::remove(plan_path(p.id));
    c.record.candidates = plans;
    c.documents.clear();
    for (const auto& p : plans) {
      c.documents.push_back(plan_to_json(p, inst));
      detail::write_atomically(plan_path(p.id), c.documents.back().dump(2) + "\n");
    }
    save_manifest();
  }

  // Applies a candidate of the current cycle and opens the next cycle.
  Dataset apply(const std::string& plan_id) {
    WriteGuard g(*this);
    std::unique_lock lk(state_);
    require_init();
    auto& c = cycles_.back();
    bool known_elsewhere = false;
    for (std::size_t i = 0; i + 1 < cycles_.size(); ++i)
      for (const auto& p : cycles_[i].record.candidates)
        if (p.id == plan_id) known_elsewhere = true;
    if (known_elsewhere) throw ConflictError("plan " + plan_id + " belongs to a cycle that was already applied");

    Dataset next = select_and_advance(current_, c.record, plan_id);
    try {
      detail::write_atomically(dir_ / *c.record.after_snapshot, dataset_to_json(next).dump(2) + "\n");
    } catch (...) {
      c.record.selected.reset();
      c.record.after_snapshot.reset();
      throw;
    }
    StoredCycle n;
    n.record.cycle = next.cycle;
    n.record.threshold = cycle_threshold(next.cycle);
    n.record.before_snapshot = *c.record.after_snapshot;
    cycles_.push_back(std::move(n));
    current_ = next;
    save_manifest();
    return next;
  }

  Dataset snapshot(int cycle) const {
    std::shared_lock lk(state_);
    for (const auto& c : cycles_)
      if (c.record.cycle == cycle) return load_dataset(dir_ / c.record.before_snapshot);
    throw NotFoundError("no snapshot for cycle " + std::to_string(cycle));
  }

  std::filesystem::path plan_path(const std::string& id) const { return dir_ / "plans" / (id + ".json"); }
  std::filesystem::path manifest_path() const { return dir_ / "manifest.json"; }

private:
  // Non-blocking writer token.
  class WriteGuard {
  public:
    explicit WriteGuard(LineageStore& s) : lock_(s.writer_, std::try_to_lock) {
      if (!lock_.owns_lock()) throw ConflictError("another write to this lineage is in progress");
    }

  private:
    std::unique_lock<std::mutex> lock_;
  };

  void require_init() const {
    if (cycles_.empty()) throw NotFoundError("no dataset ingested in '" + dir_.string() + "'");
  }

  void save_manifest() const {
    nlohmann::json j;
    j["format"] = kManifestFormat;
    j["version"] = kManifestVersion;
    j["cycles"] = nlohmann::json::array();
    for (const auto& c : cycles_) {
      nlohmann::json r;
      r["cycle"] = c.record.cycle;
      r["threshold"] = c.record.threshold;
      r["before"] = c.record.before_snapshot;
      r["after"] = c.record.after_snapshot ? nlohmann::json(*c.record.after_snapshot) : nlohmann::json(nullptr);
      r["selected"] = c.record.selected ? nlohmann::json(*c.record.selected) : nlohmann::json(nullptr);
      r["candidates"] = c.documents;
      j["cycles"].push_back(std::move(r));
    }
    detail::write_atomically(manifest_path(), j.dump(2) + "\n");
  }

  void load() {
    std::ifstream in(manifest_path());
    if (!in) throw Error("cannot read '" + manifest_path().string() + "'");
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(e.what(), manifest_path().string());
    }
    if (j.value("format", "") != kManifestFormat || j.value("version", 0) != kManifestVersion)
      throw ValidationError("not a version-1 lineage manifest", manifest_path().string());
    cycles_.clear();
    for (const auto& r : j.at("cycles")) {
      StoredCycle c;
      c.record.cycle = r.at("cycle").get<int>();
      c.record.threshold = r.at("threshold").get<double>();
      c.record.before_snapshot = r.at("before").get<std::string>();
      if (!r.at("after").is_null()) c.record.after_snapshot = r.at("after").get<std::string>();
      if (!r.at("selected").is_null()) c.record.selected = r.at("selected").get<std::string>();
      for (const auto& d : r.at("candidates")) {
        c.documents.push_back(d);
        c.record.candidates.push_back(plan_from_json(d));
      }
      cycles_.push_back(std::move(c));
    }
    if (cycles_.empty()) throw ValidationError("lineage manifest lists no cycles", manifest_path().string());
    current_ = load_dataset(dir_ / cycles_.back().record.before_snapshot);
  }

  std::filesystem::path dir_;
  mutable std::shared_mutex state_;
  std::mutex writer_;
  std::vector<StoredCycle> cycles_;
  Dataset current_;
};

}  // namespace reconplan
