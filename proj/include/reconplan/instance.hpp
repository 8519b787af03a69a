#pragma once

#include <memory>
#include <vector>

#include "city_model.hpp"
#include "metrics.hpp"

namespace reconplan {

// Everything derived once from a dataset snapshot and shared read-only by the
// constraint checks, environments and planners.
struct Instance {
  Dataset dataset;
  ItemTable items;
  DependencyGraph deps;
  DistanceTable distances;
  BenefitModel benefit;
  std::vector<char> start_intact;
  std::vector<double> start_unit_values;

  static std::shared_ptr<const Instance> make(Dataset ds, BenefitConfig cfg = {}) {
    validate(ds);
    auto inst = std::make_shared<Instance>();
    inst->dataset = std::move(ds);
    inst->items = ItemTable(inst->dataset);
    inst->deps = build_dependency_graph(inst->dataset, inst->items);
    inst->distances = DistanceTable(inst->dataset);
    inst->benefit = BenefitModel(inst->dataset, inst->items, inst->distances, cfg);
    inst->start_intact = intact_mask(inst->items);
    inst->start_unit_values = inst->benefit.intact_unit_values(inst->start_intact);
    return inst;
  }

  std::size_t size() const noexcept { return items.size(); }

  // S(x) against the intact set at the start of planning.
  double start_benefit(std::size_t x) const { return benefit.value(x, start_intact, start_unit_values); }

  PlanEvaluation evaluate(std::span<const std::size_t> plan, double horizon) const {
    return plan_benefit(items, benefit, plan, horizon);
  }

  std::vector<std::string> ids(std::span<const std::size_t> plan) const {
    std::vector<std::string> out;
    out.reserve(plan.size());
    for (auto v : plan) out.push_back(items[v].id);
    return out;
  }
};

using InstancePtr = std::shared_ptr<const Instance>;

}  // namespace reconplan
