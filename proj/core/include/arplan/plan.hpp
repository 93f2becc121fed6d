#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "arplan/cost_model.hpp"
#include "arplan/topology.hpp"

namespace arplan {

using BlockId = int;
using Floats = std::uint64_t;

/// Size of block `b` when S floats are split into N blocks: the first
/// S mod N blocks carry one extra float.
Floats block_size(BlockId b, int N, Floats S);

struct Transfer {
  NodeId src;
  NodeId dst;
  BlockId block = 0;
  Floats size = 0;

  bool operator==(const Transfer&) const = default;
  auto operator<=>(const Transfer&) const = default;
};

/// Combines `fan_in` partials of one block on one server in a single
/// pass: (fan_in - 1) * size ops and (fan_in + 1) * size memory accesses.
struct ReduceOp {
  NodeId server;
  BlockId block = 0;
  int fan_in = 2;

  bool operator==(const ReduceOp&) const = default;
};

struct Step {
  std::vector<Transfer> transfers;
  std::vector<ReduceOp> reduces;
  std::string label;
};

/// An explicit AllReduce schedule. Servers are listed in rank order;
/// server i contributes tag (i, b) for every block b.
struct Plan {
  int n = 0;
  Floats size = 0;
  std::vector<NodeId> servers;
  std::vector<Step> steps;
  /// Index of the first AllGather step (== steps.size() for a plan that
  /// is only a ReduceScatter).
  std::size_t allgather_begin = 0;
};

/// server -> blocks, in a fixed server order. Within one scope of a final
/// placement each block belongs to exactly one server; an initial
/// placement may list one block at several servers (one partial each).
struct PlacementEntry {
  NodeId server;
  std::vector<BlockId> blocks;

  bool operator==(const PlacementEntry&) const = default;
};
using Placement = std::vector<PlacementEntry>;

// --- builders ---------------------------------------------------------------

/// A group of servers that reduce-scatters a common block set. Member i
/// finishes owning `chunks[i]`; every member starts with a partial of
/// every block in the union of the chunks.
struct ReduceGroup {
  std::vector<NodeId> members;
  std::vector<std::vector<BlockId>> chunks;
};

/// ReduceScatter steps for `kind` run concurrently over several disjoint
/// groups of equal size. Supported: CPS, HCPS, Ring, RHD (power-of-two
/// group size). Block sizes follow block_size(b, total_blocks, S).
std::vector<Step> reduce_scatter_steps(const PlanKind& kind, std::span<const ReduceGroup> groups,
                                       int total_blocks, Floats S);

/// Full AllReduce (ReduceScatter then AllGather) over `servers` in the
/// given order. ACPS degenerates to a direct one-block-per-server scatter.
Plan build_plan(const PlanKind& kind, const std::vector<NodeId>& servers, Floats S);

/// Single ReduceScatter step moving every block straight to its final
/// owner. `total_blocks` and S size the blocks.
Plan build_acps(const Placement& initial, const Placement& final_place, int total_blocks, Floats S);

/// The matching AllGather of a ReduceScatter plan: steps reversed,
/// transfers flipped, reduces dropped.
Plan reverse_to_allgather(const Plan& rs);

/// rs followed by reverse_to_allgather(rs).
Plan complete_allreduce(const Plan& rs);

// --- verification -----------------------------------------------------------

struct VerificationReport {
  enum class Kind { Ok, MissingTag, DuplicateTag, BadTransfer, BadReduce, UnknownServer };

  bool ok = true;
  Kind kind = Kind::Ok;
  std::optional<std::size_t> step;  // first failing step, if step-local
  std::string message;
};

/// Symbolic execution over contribution tags. Transfers in a step read
/// the state at step start. A reduce combines all partials that arrived
/// for (server, block) in the step, plus the local one when fan_in is one
/// more than the arrivals; an arrival without a reduce overwrites. The
/// plan passes iff every server ends with the full tag set of every block
/// and no tag was ever counted twice.
VerificationReport verify_allreduce(const Plan& plan, int n);

// --- aggregates -------------------------------------------------------------

struct ServerAggregate {
  Floats sent = 0;
  Floats received = 0;
  Floats mem_ops = 0;
  Floats compute_ops = 0;
  int max_fan_in = 0;

  bool operator==(const ServerAggregate&) const = default;
};

/// Exact per-server totals over the whole plan. Throws ValidationError
/// when a plan server is missing from `topo`.
std::map<NodeId, ServerAggregate> plan_aggregates(const Plan& plan, const Topology& topo);

/// Sum over steps of the per-step maximum over servers, term by term:
/// the quantities the time model charges along the critical path.
ServerAggregate critical_path_aggregates(const Plan& plan);

}  // namespace arplan
