#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "arplan/cost_model.hpp"
#include "arplan/plan.hpp"
#include "arplan/topology.hpp"

namespace arplan {

/// A chain of steps that starts once every task in `deps` has finished.
struct SimTask {
  std::string name;
  std::vector<Step> steps;
  std::vector<std::size_t> deps;
};

struct StepTiming {
  std::string task;
  std::string label;
  double start = 0.0;
  double alpha_time = 0.0;
  double comm_time = 0.0;
  double compute_time = 0.0;
  double gamma_time = 0.0;  // compute split at the slowest server
  double delta_time = 0.0;
  double end() const { return start + alpha_time + comm_time + compute_time; }
};

struct SimResult {
  std::vector<StepTiming> steps;  // in start order
  /// latency/compute/memory follow the critical path; incast is the
  /// extra time over an epsilon-free run; bandwidth is the rest of the
  /// critical-path communication.
  CostBreakdown breakdown;
  double total = 0.0;
  std::vector<std::string> critical_path;
};

struct SimOptions {
  /// Receives "time\tevent\tlink|server\tdetail" lines when set.
  std::ostream* trace = nullptr;
  /// Skip the epsilon-free rerun; incast attribution is then 0.
  bool attribute_incast = true;
};

/// Runs the plan's steps as one chain.
SimResult simulate(const Plan& plan, const Topology& topo, const SimOptions& opts = {});

/// Runs a task graph; `n` and `S` size the blocks of reduce ops. Throws
/// ValidationError on unknown servers and InternalError on a dependency
/// cycle.
SimResult simulate_concurrent(const std::vector<SimTask>& tasks, int n, Floats S,
                              const Topology& topo, const SimOptions& opts = {});

}  // namespace arplan
