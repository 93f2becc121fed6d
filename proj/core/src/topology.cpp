#include "arplan/topology.hpp"

#include <algorithm>
#include <limits>
#include <set>

#include "arplan/error.hpp"
#include "json.hpp"

namespace arplan {

namespace {

constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

void validate_link(const Node& n) {
  const LinkParams& l = *n.uplink;
  if (!(l.alpha >= 0.0)) throw ValidationError("node '" + n.id + "': alpha must be >= 0");
  if (!(l.beta > 0.0)) throw ValidationError("node '" + n.id + "': beta must be > 0");
  if (!(l.epsilon >= 0.0)) throw ValidationError("node '" + n.id + "': epsilon must be >= 0");
  if (l.w_t < 1) throw ValidationError("node '" + n.id + "': w_t must be >= 1");
}

}  // namespace

Topology Topology::from_nodes(std::vector<Node> nodes) {
  Topology t;
  t.nodes_ = std::move(nodes);
  const std::size_t n = t.nodes_.size();
  if (n == 0) throw ValidationError("topology has no nodes");

  for (std::size_t i = 0; i < n; ++i) {
    const Node& node = t.nodes_[i];
    if (node.id.empty()) throw ValidationError("node id must be non-empty");
    if (!t.index_.emplace(node.id, i).second)
      throw ValidationError("duplicate node id '" + node.id + "'");
  }

  t.children_.assign(n, {});
  t.parent_.assign(n, std::nullopt);
  std::size_t root = kNone;
  for (std::size_t i = 0; i < n; ++i) {
    const Node& node = t.nodes_[i];
    if (!node.parent) {
      if (root != kNone)
        throw ValidationError("multiple roots: '" + t.nodes_[root].id + "' and '" + node.id + "'");
      root = i;
      if (node.uplink) throw ValidationError("root '" + node.id + "' must not have an uplink");
      continue;
    }
    auto it = t.index_.find(*node.parent);
    if (it == t.index_.end())
      throw ValidationError("node '" + node.id + "' has unknown parent '" + *node.parent + "'");
    if (it->second == i) throw ValidationError("node '" + node.id + "' is its own parent");
    if (!node.uplink) throw ValidationError("node '" + node.id + "' is missing uplink parameters");
    validate_link(node);
    t.parent_[i] = it->second;
    t.children_[it->second].push_back(i);
  }
  if (root == kNone) throw ValidationError("topology has no root (cycle)");
  t.root_ = root;

  for (std::size_t i = 0; i < n; ++i) {
    const Node& node = t.nodes_[i];
    if (node.kind == NodeKind::Server) {
      if (!node.compute) throw ValidationError("server '" + node.id + "' is missing compute parameters");
      if (!(node.compute->gamma >= 0.0) || !(node.compute->delta >= 0.0))
        throw ValidationError("server '" + node.id + "': gamma and delta must be >= 0");
      if (!t.children_[i].empty()) throw ValidationError("server '" + node.id + "' has children");
    } else {
      if (node.compute) throw ValidationError("switch '" + node.id + "' must not have compute parameters");
      if (t.children_[i].empty()) throw ValidationError("switch '" + node.id + "' is a leaf");
    }
  }

  // Iterative DFS from the root; anything unreached sits on a cycle.
  t.depth_.assign(n, 0);
  t.subtree_servers_.assign(n, 0);
  t.rank_.assign(n, kNone);
  std::vector<std::size_t> order;
  order.reserve(n);
  std::vector<std::size_t> stack{root};
  std::vector<bool> seen(n, false);
  while (!stack.empty()) {
    const std::size_t v = stack.back();
    stack.pop_back();
    if (seen[v]) throw ValidationError("cycle detected at '" + t.nodes_[v].id + "'");
    seen[v] = true;
    order.push_back(v);
    if (t.nodes_[v].kind == NodeKind::Server) {
      t.rank_[v] = t.servers_.size();
      t.servers_.push_back(v);
    }
    const auto& ch = t.children_[v];
    for (auto it = ch.rbegin(); it != ch.rend(); ++it) {
      t.depth_[*it] = t.depth_[v] + 1;
      stack.push_back(*it);
    }
  }
  if (order.size() != n) {
    for (std::size_t i = 0; i < n; ++i)
      if (!seen[i]) throw ValidationError("node '" + t.nodes_[i].id + "' is not connected to the root (cycle)");
  }
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const std::size_t v = *it;
    if (t.nodes_[v].kind == NodeKind::Server) t.subtree_servers_[v] = 1;
    if (t.parent_[v]) t.subtree_servers_[*t.parent_[v]] += t.subtree_servers_[v];
  }
  if (t.servers_.size() < 2)
    throw ValidationError("topology needs at least 2 servers, found " + std::to_string(t.servers_.size()));
  return t;
}

bool Topology::contains(std::string_view id) const {
  return index_.count(std::string(id)) != 0;
}

std::size_t Topology::index_of(std::string_view id) const {
  auto it = index_.find(std::string(id));
  if (it == index_.end()) throw ValidationError("unknown node id '" + std::string(id) + "'");
  return it->second;
}

std::optional<std::size_t> Topology::parent(std::size_t index) const {
  return parent_.at(index);
}

std::size_t Topology::server_rank(std::size_t index) const {
  const std::size_t r = rank_.at(index);
  if (r == kNone) throw ValidationError("node '" + nodes_[index].id + "' is not a server");
  return r;
}

std::vector<std::size_t> Topology::servers_under(std::size_t index) const {
  std::vector<std::size_t> out;
  out.reserve(subtree_servers_.at(index));
  std::vector<std::size_t> stack{index};
  while (!stack.empty()) {
    const std::size_t v = stack.back();
    stack.pop_back();
    if (nodes_[v].kind == NodeKind::Server) out.push_back(v);
    const auto& ch = children_[v];
    for (auto it = ch.rbegin(); it != ch.rend(); ++it) stack.push_back(*it);
  }
  return out;
}

std::size_t Topology::depth() const {
  return *std::max_element(depth_.begin(), depth_.end());
}

std::vector<std::size_t> Topology::path_up(std::size_t index, std::size_t ancestor) const {
  std::vector<std::size_t> out;
  std::size_t v = index;
  while (v != ancestor) {
    out.push_back(v);
    const auto p = parent_.at(v);
    if (!p) throw InternalError("path_up: '" + nodes_[ancestor].id + "' is not an ancestor");
    v = *p;
  }
  return out;
}

std::size_t Topology::lowest_common_ancestor(std::size_t a, std::size_t b) const {
  while (depth_[a] > depth_[b]) a = *parent_[a];
  while (depth_[b] > depth_[a]) b = *parent_[b];
  while (a != b) {
    a = *parent_[a];
    b = *parent_[b];
  }
  return a;
}

// ---------------------------------------------------------------------------

namespace {

using nlohmann::json;

void reject_unknown_keys(const json& obj, std::initializer_list<std::string_view> allowed,
                         const std::string& where) {
  for (const auto& [key, _] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw ParseError(where + ": unknown key '" + key + "'");
  }
}

double get_number(const json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end() || !it->is_number())
    throw ParseError(where + ": '" + key + "' must be a number");
  return it->get<double>();
}

LinkParams parse_link(const json& j, const std::string& where) {
  if (!j.is_object()) throw ParseError(where + ": uplink must be an object or null");
  reject_unknown_keys(j, {"alpha", "beta", "epsilon", "w_t"}, where + ".uplink");
  LinkParams l;
  l.alpha = get_number(j, "alpha", where);
  l.beta = get_number(j, "beta", where);
  l.epsilon = get_number(j, "epsilon", where);
  auto it = j.find("w_t");
  if (it == j.end() || !it->is_number_integer())
    throw ParseError(where + ": 'w_t' must be an integer");
  l.w_t = it->get<int>();
  return l;
}

ComputeParams parse_compute(const json& j, const std::string& where) {
  if (!j.is_object()) throw ParseError(where + ": compute must be an object");
  reject_unknown_keys(j, {"gamma", "delta"}, where + ".compute");
  return {get_number(j, "gamma", where), get_number(j, "delta", where)};
}

}  // namespace

Topology parse_topology(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("topology: ") + e.what());
  }
  if (!doc.is_object()) throw ParseError("topology: top level must be an object");
  reject_unknown_keys(doc, {"nodes"}, "topology");
  auto nodes_it = doc.find("nodes");
  if (nodes_it == doc.end() || !nodes_it->is_array())
    throw ParseError("topology: 'nodes' must be an array");

  std::vector<Node> nodes;
  nodes.reserve(nodes_it->size());
  std::size_t pos = 0;
  for (const json& jn : *nodes_it) {
    const std::string where = "nodes[" + std::to_string(pos++) + "]";
    if (!jn.is_object()) throw ParseError(where + ": must be an object");
    reject_unknown_keys(jn, {"id", "kind", "parent", "uplink", "compute"}, where);
    Node n;
    auto id = jn.find("id");
    if (id == jn.end() || !id->is_string()) throw ParseError(where + ": 'id' must be a string");
    n.id = id->get<std::string>();
    auto kind = jn.find("kind");
    if (kind == jn.end() || !kind->is_string()) throw ParseError(where + ": 'kind' must be a string");
    if (*kind == "switch") {
      n.kind = NodeKind::Switch;
    } else if (*kind == "server") {
      n.kind = NodeKind::Server;
    } else {
      throw ParseError(where + ": 'kind' must be \"switch\" or \"server\"");
    }
    if (auto p = jn.find("parent"); p != jn.end() && !p->is_null()) {
      if (!p->is_string()) throw ParseError(where + ": 'parent' must be a string or null");
      n.parent = p->get<std::string>();
    }
    if (auto u = jn.find("uplink"); u != jn.end() && !u->is_null()) n.uplink = parse_link(*u, where);
    if (auto c = jn.find("compute"); c != jn.end() && !c->is_null()) n.compute = parse_compute(*c, where);
    nodes.push_back(std::move(n));
  }
  return Topology::from_nodes(std::move(nodes));
}

std::string serialize_topology(const Topology& topo) {
  json nodes = json::array();
  for (const Node& n : topo.nodes()) {
    json jn;
    jn["id"] = n.id;
    jn["kind"] = n.kind == NodeKind::Server ? "server" : "switch";
    jn["parent"] = n.parent ? json(*n.parent) : json(nullptr);
    if (n.uplink) {
      jn["uplink"] = {{"alpha", n.uplink->alpha},
                      {"beta", n.uplink->beta},
                      {"epsilon", n.uplink->epsilon},
                      {"w_t", n.uplink->w_t}};
    } else {
      jn["uplink"] = nullptr;
    }
    if (n.compute) jn["compute"] = {{"gamma", n.compute->gamma}, {"delta", n.compute->delta}};
    nodes.push_back(std::move(jn));
  }
  return json{{"nodes", nodes}}.dump(2);
}

std::vector<NodeId> servers_under(const Topology& topo, std::string_view node) {
  std::vector<NodeId> out;
  for (std::size_t s : topo.servers_under(topo.index_of(node))) out.push_back(topo.node(s).id);
  return out;
}

double convergence_ratio(const Topology& topo, std::string_view sw, std::string_view child) {
  const std::size_t a = topo.index_of(sw);
  const std::size_t c = topo.index_of(child);
  if (topo.parent(c) != a)
    throw ValidationError("'" + std::string(child) + "' is not a child of '" + std::string(sw) + "'");
  double total = 0.0;
  for (std::size_t ch : topo.children(a)) total += 1.0 / topo.node(ch).uplink->beta;
  return total / (1.0 / topo.node(c).uplink->beta);
}

}  // namespace arplan
