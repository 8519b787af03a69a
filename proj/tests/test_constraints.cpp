#include <gtest/gtest.h>

#include <random>

#include "fixtures.hpp"

using namespace reconplan;

TEST(Threshold, CycleTable) {
  const double expected[] = {8.0, 7.2, 6.4, 5.6, 4.8, 4.0, 3.2, 2.4, 1.6, 0.8};
  for (int c = 1; c <= 10; ++c) EXPECT_NEAR(threshold_for_cycle(c), expected[c - 1], 1e-12) << "cycle " << c;
}

TEST(Threshold, OutOfRangeCycles) {
  EXPECT_THROW(threshold_for_cycle(0), ValidationError);
  EXPECT_THROW(threshold_for_cycle(11), ValidationError);
  EXPECT_THROW(threshold_for_cycle(-3), ValidationError);
}

TEST(CheckPlan, CostOverrunReportsNegativeSlack) {
  auto inst = Instance::make(fx::load("six-unit.csv"));
  const std::vector<std::string> plan{"1"};
  auto v = check_plan(*inst, plan, 29980, 30, 8.0);
  EXPECT_FALSE(v.feasible);
  EXPECT_FALSE(v.cost.pass);
  EXPECT_DOUBLE_EQ(v.cost.slack, -20.0);
  EXPECT_TRUE(v.duration.pass);
  EXPECT_TRUE(v.priority.pass);
}

TEST(CheckPlan, DurationAndPriorityMargins) {
  auto inst = Instance::make(fx::load("six-unit.csv"));
  const std::vector<std::string> plan{"1", "6-5", "5"};  // priorities 10, 8, 5
  auto v = check_plan(*inst, plan, 1e6, 18, 8.0);
  EXPECT_DOUBLE_EQ(v.duration.slack, 18 - (12 + 1.5 + 5));
  EXPECT_FALSE(v.duration.pass);
  EXPECT_NEAR(v.priority.margin, 23.0 / 3.0 - 8.0, 1e-12);
  EXPECT_FALSE(v.priority.pass);
  EXPECT_TRUE(v.dependencies.pass);
}

TEST(CheckPlan, HospitalBeforeItsBridgeFails) {
  auto inst = Instance::make(fx::load("river-town.csv"));
  auto v = check_plan(*inst, std::vector<std::string>{"hospital", "bridge"}, 1e9, 1e9, 0.8);
  EXPECT_FALSE(v.feasible);
  ASSERT_EQ(v.dependencies.violations.size(), 1u);
  EXPECT_EQ(v.dependencies.violations[0], (std::pair<std::string, std::string>{"hospital", "bridge"}));

  auto missing = check_plan(*inst, std::vector<std::string>{"university"}, 1e9, 1e9, 0.8);
  EXPECT_FALSE(missing.dependencies.pass);

  EXPECT_TRUE(check_plan(*inst, std::vector<std::string>{"bridge", "hospital", "university"}, 1e9, 1e9, 0.8).feasible);
}

TEST(CheckPlan, ToleranceAtTheBoundary) {
  auto inst = Instance::make(fx::load("six-unit.csv"));
  const std::vector<std::string> plan{"1", "4-2"};
  EXPECT_TRUE(check_plan(*inst, plan, 34000, 14, 9.0).feasible);
  EXPECT_FALSE(check_plan(*inst, plan, 33999, 14, 9.0).feasible);
  EXPECT_FALSE(check_plan(*inst, plan, 34000, 13.99, 9.0).feasible);
  EXPECT_FALSE(check_plan(*inst, plan, 34000, 14, 9.01).feasible);
}

TEST(CheckPlan, StrictFloorRejectsLowItems) {
  auto inst = Instance::make(fx::load("six-unit.csv"));
  const std::vector<std::string> plan{"1", "6-5", "5"};
  EXPECT_TRUE(check_plan(*inst, plan, 1e6, 100, 5.0).feasible);
  EXPECT_FALSE(check_plan(*inst, plan, 1e6, 100, 5.0, CheckOptions{8}).feasible);
}

TEST(CheckPlan, UnknownAndDuplicateItems) {
  auto inst = Instance::make(fx::load("six-unit.csv"));
  EXPECT_THROW(check_plan(*inst, std::vector<std::string>{"nope"}, 1, 1, 1), NotFoundError);
  EXPECT_THROW(check_plan(*inst, std::vector<std::string>{"1", "1"}, 1e6, 100, 1), ValidationError);
}

TEST(CheckPlan, AgreesWithDefinitionOnEveryOrdering) {
  auto inst = Instance::make(fx::load("six-unit.csv"));
  std::size_t n = 0, feasible = 0;
  for (double th : {8.0, 7.2, 5.6}) {
    fx::for_each_ordering(*inst, [&](const std::vector<std::size_t>& p) {
      const bool want = fx::feasible_by_definition(*inst, p, 60000, 30, th);
      EXPECT_EQ(check_plan(*inst, p, 60000, 30, th).feasible, want);
      ++n;
      feasible += want;
    });
  }
  EXPECT_EQ(n, 3u * 1956u);
  EXPECT_GT(feasible, 0u);
}

TEST(CheckPlan, ResourceVerdictsIgnoreOrder) {
  auto inst = Instance::make(fx::load("district.csv"));
  std::vector<std::size_t> plan = inst->items.damaged();
  std::mt19937_64 rng(11);
  auto base = check_plan(*inst, plan, 80000, 30, 8.0);
  for (int i = 0; i < 200; ++i) {
    std::shuffle(plan.begin(), plan.end(), rng);
    auto v = check_plan(*inst, plan, 80000, 30, 8.0);
    EXPECT_NEAR(v.cost.slack, base.cost.slack, 1e-6);
    EXPECT_NEAR(v.duration.slack, base.duration.slack, 1e-9);
    EXPECT_NEAR(v.priority.margin, base.priority.margin, 1e-9);
  }
}

TEST(CheckPlan, LooserLimitsKeepFeasiblePlansFeasible) {
  auto inst = Instance::make(fx::load("six-unit.csv"));
  fx::for_each_ordering(*inst, [&](const std::vector<std::size_t>& p) {
    if (!check_plan(*inst, p, 60000, 30, 8.0).feasible) return;
    EXPECT_TRUE(check_plan(*inst, p, 90000, 30, 8.0).feasible);
    EXPECT_TRUE(check_plan(*inst, p, 60000, 45, 8.0).feasible);
    EXPECT_TRUE(check_plan(*inst, p, 60000, 30, 6.4).feasible);
  });
}

TEST(FeasibleActions, ZeroBudgetLeavesNothing) {
  auto inst = Instance::make(fx::load("six-unit.csv"));
  EXPECT_TRUE(feasible_actions(*inst, {}, 0, 30).empty());
}

TEST(FeasibleActions, OnlyTheBridgeOpensTheRiverTown) {
  auto inst = Instance::make(fx::load("river-town.csv"));
  auto acts = feasible_actions(*inst, {}, 1e9, 1e9);
  ASSERT_EQ(acts.size(), 1u);
  EXPECT_EQ(inst->items[acts[0]].id, "bridge");
  const std::vector<std::size_t> partial{inst->items.at("bridge")};
  EXPECT_EQ(inst->ids(feasible_actions(*inst, partial, 1e9, 1e9)), (std::vector<std::string>{"hospital", "university"}));
}

TEST(FeasibleActions, MatchesBruteForceFilter) {
  auto inst = Instance::make(fx::load("six-unit.csv"));
  const auto damaged = inst->items.damaged();
  fx::for_each_ordering(*inst, [&](const std::vector<std::size_t>& p) {
    if (p.size() > 3) return;
    double cost = 0, time = 0;
    for (auto v : p) cost += inst->items[v].cost, time += inst->items[v].time;
    const double rb = 60000 - cost, rt = 30 - time;
    std::vector<std::size_t> want;
    for (auto x : damaged) {
      if (std::find(p.begin(), p.end(), x) != p.end()) continue;
      if (inst->items[x].cost > rb || inst->items[x].time > rt) continue;
      bool ok = true;
      for (auto b : inst->deps.blockers(x)) ok = ok && std::find(p.begin(), p.end(), b) != p.end();
      if (ok) want.push_back(x);
    }
    EXPECT_EQ(feasible_actions(*inst, p, rb, rt), want);
  });
}

TEST(FeasibleActions, ExtendingAFeasiblePrefixKeepsDependenciesSatisfied) {
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    auto inst = Instance::make(fx::load("district.csv"));
    std::mt19937_64 rng(seed);
    std::vector<std::size_t> plan;
    double rb = 1e9, rt = 1e9;
    for (;;) {
      auto acts = feasible_actions(*inst, plan, rb, rt);
      if (acts.empty()) break;
      auto x = acts[std::uniform_int_distribution<std::size_t>(0, acts.size() - 1)(rng)];
      plan.push_back(x);
      rb -= inst->items[x].cost;
      rt -= inst->items[x].time;
    }
    EXPECT_EQ(plan.size(), inst->items.damaged().size());
    EXPECT_TRUE(check_plan(*inst, plan, 1e9, 1e9, 0.8).dependencies.pass);
  }
}
