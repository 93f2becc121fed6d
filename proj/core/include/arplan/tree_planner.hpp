#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "arplan/cost_model.hpp"
#include "arplan/plan.hpp"
#include "arplan/simulator.hpp"
#include "arplan/topology.hpp"

namespace arplan {

struct BasicPlan {
  Placement initial_place;
  Placement final_place;
  std::optional<Placement> rearrange_place;
  double finish_time = 0.0;
};

/// Bottom-up block placement for every node of the subtree at `node`.
/// Servers own all blocks; a switch gives each of its n servers
/// floor(N/n) blocks (one more for the first N mod n), preferring blocks
/// the server already holds and never assigning a block twice.
std::map<NodeId, BasicPlan> generate_basic_plan(const Topology& topo, const NodeId& node,
                                                int num_total_servers);

/// Round-trip estimate for moving every block of `place` out of `child`
/// through its uplink: one step, B = placed floats, w = distinct senders.
double all_transfer_out_time(const Topology& topo, const NodeId& child, const Placement& place,
                             int total_blocks, Floats S);

struct CandidateCost {
  PlanKind kind;
  CostBreakdown cost;
};

struct RearrangeDecision {
  NodeId child;
  std::vector<NodeId> subset;
  double time_origin = 0.0;
  double time_rearrange = 0.0;
  bool adopted = false;
};

struct SubPlanChoice {
  NodeId switch_id;
  /// Empty for a single-child switch, which has nothing to reduce.
  std::optional<PlanKind> chosen;
  std::vector<CandidateCost> candidates;
  std::vector<RearrangeDecision> rearrangements;
  double start_time = 0.0;
  double finish_time = 0.0;
  std::size_t local_steps = 0;
};

struct PlannerOptions {
  bool allow_rearrangement = true;
  int max_hcps_steps = 3;
};

struct GenTreeReport {
  /// One entry per switch, postorder with children in document order.
  std::vector<SubPlanChoice> choices;
  /// Verified linear AllReduce plan.
  Plan plan;
  /// The same schedule as a dependency graph of per-switch tasks, for
  /// concurrent simulation (ReduceScatter tasks then AllGather tasks).
  std::vector<SimTask> tasks;
  double predicted_total = 0.0;

  const SubPlanChoice& choice(const NodeId& sw) const;
};

/// Runs the placement, rearrangement and selection passes and composes
/// the final plan. Throws InternalError if the result fails verification.
GenTreeReport gentree(const Topology& topo, Floats S, const PlannerOptions& opts = {});

/// Conservative single-level parameters for the subtree at `node`: max
/// alpha, beta, epsilon and min w_t over every link inside the subtree,
/// max gamma and delta over its servers.
ModelParams subtree_params(const Topology& topo, std::size_t node);

}  // namespace arplan
