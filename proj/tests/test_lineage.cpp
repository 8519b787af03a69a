#include <gtest/gtest.h>

#include <atomic>
#include <fstream>
#include <thread>

#include "fixtures.hpp"
#include "reconplan/lineage.hpp"

using namespace reconplan;

namespace {

std::vector<Plan> candidates(const Dataset& ds, int k = 2, double budget = 60000) {
  PlannerConfig cfg;
  cfg.budget = budget;
  cfg.horizon = 30;
  cfg.alternatives = k;
  cfg.agent = AgentKind::QLearning;
  cfg.agent_config.episodes = 200;
  cfg.agent_config.epsilon_decay = 0.02;
  cfg.verification_rollouts = 0;
  return train_and_plan(ds, cfg).plans;
}

}  // namespace

TEST(Lineage, FreshDirectoryIsUninitialised) {
  LineageStore store(fx::scratch("lineage-fresh"));
  EXPECT_FALSE(store.initialised());
  EXPECT_THROW(store.current(), NotFoundError);
  EXPECT_THROW(store.apply("c1-p0"), NotFoundError);
  EXPECT_TRUE(store.cycles().empty());
}

TEST(Lineage, InitRefusesToOverwrite) {
  auto dir = fx::scratch("lineage-init");
  LineageStore store(dir);
  auto ds = fx::load("six-unit.csv");
  store.init(ds);
  EXPECT_THROW(store.init(ds), ConflictError);
  auto other = fx::load("district.csv");
  store.init(other, true);
  EXPECT_EQ(store.current(), other);
  EXPECT_TRUE(std::filesystem::exists(dir / "manifest.json"));
  EXPECT_TRUE(std::filesystem::exists(dir / snapshot_name(1)));
}

TEST(Lineage, InitRejectsInvalidDatasets) {
  LineageStore store(fx::scratch("lineage-invalid"));
  auto ds = fx::load("six-unit.csv");
  ds.roads.push_back(fx::road("1", "nowhere", 1, 1.0));
  EXPECT_THROW(store.init(ds), ValidationError);
  EXPECT_FALSE(store.initialised());
}

TEST(Lineage, CandidatesApplyAndReload) {
  auto dir = fx::scratch("lineage-reload");
  auto ds = fx::load("six-unit.csv");
  std::vector<std::string> applied;
  {
    LineageStore store(dir);
    store.init(ds);
    EXPECT_TRUE(store.plan_documents(1).empty());
    auto plans = candidates(ds);
    ASSERT_FALSE(plans.empty());
    store.set_candidates(1, plans, *Instance::make(ds));
    EXPECT_EQ(store.plan_documents(1).size(), plans.size());
    EXPECT_TRUE(std::filesystem::exists(store.plan_path("c1-p0")));
    ASSERT_TRUE(store.find_plan("c1-p0"));
    EXPECT_EQ(store.find_plan("c1-p0")->at("items").size(), plans[0].items.size());
    EXPECT_FALSE(store.find_plan("c7-p0"));

    auto next = store.apply("c1-p0");
    applied = plans[0].items;
    EXPECT_EQ(next.cycle, 2);
    EXPECT_EQ(store.current_cycle(), 2);
    EXPECT_THROW(store.apply("c1-p0"), ConflictError);
    EXPECT_THROW(store.set_candidates(1, plans, *Instance::make(ds)), ConflictError);
  }
  LineageStore reopened(dir);
  ASSERT_TRUE(reopened.initialised());
  EXPECT_EQ(reopened.current_cycle(), 2);
  EXPECT_EQ(reopened.current(), apply_plan(ds, applied));
  EXPECT_EQ(reopened.snapshot(1), ds);
  EXPECT_THROW(reopened.snapshot(5), NotFoundError);
  auto cycles = reopened.cycles();
  ASSERT_EQ(cycles.size(), 2u);
  EXPECT_EQ(cycles[0].record.selected, "c1-p0");
  EXPECT_EQ(cycles[0].record.after_snapshot, snapshot_name(2));
  EXPECT_EQ(cycles[0].record.candidates[0].items, applied);
  EXPECT_NEAR(cycles[1].record.threshold, 7.2, 1e-12);
  EXPECT_THROW(reopened.apply("c1-p0"), ConflictError);
}

TEST(Lineage, UnknownPlanIsNotFound) {
  LineageStore store(fx::scratch("lineage-unknown"));
  store.init(fx::load("six-unit.csv"));
  EXPECT_THROW(store.apply("c1-p0"), NotFoundError);
}

TEST(Lineage, StaleCandidatesAreAConflict) {
  LineageStore store(fx::scratch("lineage-stale"));
  auto ds = fx::load("six-unit.csv");
  store.init(ds);
  auto plans = candidates(ds);
  store.set_candidates(1, plans, *Instance::make(ds));
  store.apply(plans[0].id);
  EXPECT_THROW(store.set_candidates(1, plans, *Instance::make(ds)), ConflictError);
}

TEST(Lineage, ThreeCyclesKeepEveryPreviousSnapshot) {
  auto dir = fx::scratch("lineage-three");
  LineageStore store(dir);
  auto ds = fx::load("twenty-unit.json");
  store.init(ds);
  std::vector<Dataset> seen{ds};
  for (int c = 1; c <= 3; ++c) {
    auto cur = store.current();
    auto plans = candidates(cur, 1, 20000);
    ASSERT_FALSE(plans.empty()) << "cycle " << c;
    store.set_candidates(c, plans, *Instance::make(cur));
    seen.push_back(store.apply(plans[0].id));
  }
  for (int c = 1; c <= 4; ++c) EXPECT_EQ(store.snapshot(c), seen[static_cast<std::size_t>(c - 1)]);
}

TEST(Lineage, ConcurrentAppliesAdmitExactlyOneWinner) {
  auto ds = fx::load("six-unit.csv");
  auto plans = candidates(ds, 3);
  ASSERT_GE(plans.size(), 2u);
  for (int round = 0; round < 10; ++round) {
    LineageStore store(fx::scratch("lineage-race"));
    store.init(ds);
    store.set_candidates(1, plans, *Instance::make(ds));
    std::atomic<int> ok{0}, conflict{0}, other{0};
    std::vector<std::jthread> threads;
    for (std::size_t t = 0; t < 8; ++t) {
      threads.emplace_back([&, t] {
        try {
          store.apply(plans[t % plans.size()].id);
          ++ok;
        } catch (const ConflictError&) {
          ++conflict;
        } catch (...) {
          ++other;
        }
      });
    }
    threads.clear();
    EXPECT_EQ(ok.load(), 1);
    EXPECT_EQ(conflict.load(), 7);
    EXPECT_EQ(other.load(), 0);
    EXPECT_EQ(store.current_cycle(), 2);
  }
}

TEST(Lineage, CorruptManifestIsRejected) {
  auto dir = fx::scratch("lineage-corrupt");
  std::ofstream(dir / "manifest.json") << "{\"format\": \"something\"}";
  EXPECT_THROW(LineageStore{dir}, ValidationError);
  std::ofstream(dir / "manifest.json") << "not json";
  EXPECT_THROW(LineageStore{dir}, ValidationError);
}
