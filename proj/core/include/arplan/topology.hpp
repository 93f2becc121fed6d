#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace arplan {

using NodeId = std::string;

/// Parameters of the link between a node and its parent. Units are
/// seconds and seconds per float (4-byte element).
struct LinkParams {
  double alpha = 0.0;    // start-up latency per step
  double beta = 0.0;     // inverse bandwidth
  double epsilon = 0.0;  // incast slope per excess flow
  int w_t = 1;           // incast fan-in threshold

  bool operator==(const LinkParams&) const = default;
};

struct ComputeParams {
  double gamma = 0.0;  // per reduce op
  double delta = 0.0;  // per memory read/write

  bool operator==(const ComputeParams&) const = default;
};

enum class NodeKind { Switch, Server };

struct Node {
  NodeId id;
  NodeKind kind = NodeKind::Switch;
  std::optional<NodeId> parent;
  std::optional<LinkParams> uplink;
  std::optional<ComputeParams> compute;

  bool operator==(const Node&) const = default;
};

/// A validated, immutable rooted tree of switches and servers.
///
/// Nodes are addressed either by their string id or by their index in
/// document order. Children keep document order, which drives every
/// deterministic tie-break downstream (server numbering, placements).
class Topology {
 public:
  /// Validates the node list and builds the adjacency. Throws
  /// ValidationError on any broken invariant.
  static Topology from_nodes(std::vector<Node> nodes);

  const std::vector<Node>& nodes() const { return nodes_; }
  const Node& node(std::size_t index) const { return nodes_.at(index); }
  std::size_t size() const { return nodes_.size(); }

  bool contains(std::string_view id) const;
  /// Throws ValidationError for an unknown id.
  std::size_t index_of(std::string_view id) const;

  std::size_t root() const { return root_; }
  std::optional<std::size_t> parent(std::size_t index) const;
  std::span<const std::size_t> children(std::size_t index) const {
    return children_.at(index);
  }
  bool is_server(std::size_t index) const {
    return nodes_.at(index).kind == NodeKind::Server;
  }

  /// All servers in depth-first order with children visited in document
  /// order. The position of a server in this list is its global rank.
  const std::vector<std::size_t>& servers() const { return servers_; }
  std::size_t num_servers() const { return servers_.size(); }
  /// Global rank of a server node; throws for non-servers.
  std::size_t server_rank(std::size_t index) const;

  /// Servers of the subtree rooted at `index`, in global rank order.
  std::vector<std::size_t> servers_under(std::size_t index) const;
  std::size_t num_servers_under(std::size_t index) const {
    return subtree_servers_.at(index);
  }

  std::size_t depth(std::size_t index) const { return depth_.at(index); }
  /// Height of the tree (max node depth).
  std::size_t depth() const;

  /// Node indices from `index` up to (excluding) `ancestor`.
  std::vector<std::size_t> path_up(std::size_t index, std::size_t ancestor) const;
  std::size_t lowest_common_ancestor(std::size_t a, std::size_t b) const;

  bool operator==(const Topology& other) const { return nodes_ == other.nodes_; }

 private:
  std::vector<Node> nodes_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<std::vector<std::size_t>> children_;
  std::vector<std::optional<std::size_t>> parent_;
  std::vector<std::size_t> depth_;
  std::vector<std::size_t> subtree_servers_;
  std::vector<std::size_t> servers_;
  std::vector<std::size_t> rank_;  // node index -> server rank (or npos)
  std::size_t root_ = 0;
};

/// Parses a topology JSON document (`{"nodes": [...]}`). Throws
/// ParseError on malformed text and ValidationError on invariant breaks.
Topology parse_topology(std::string_view text);

/// Serializes to the same document format; parse(serialize(t)) == t.
std::string serialize_topology(const Topology& topo);

/// Server ids under `node`, in global rank order.
std::vector<NodeId> servers_under(const Topology& topo, std::string_view node);

/// Aggregate bandwidth of all of `sw`'s child uplinks divided by the
/// bandwidth of `child`'s uplink.
double convergence_ratio(const Topology& topo, std::string_view sw,
                         std::string_view child);

}  // namespace arplan
