#pragma once

#include <random>
#include <string>
#include <vector>

#include "arplan/presets.hpp"
#include "arplan/topology.hpp"

namespace arplan::testing {

inline std::vector<NodeId> server_ids(int n, const std::string& prefix = "s") {
  std::vector<NodeId> out;
  for (int i = 0; i < n; ++i) out.push_back(prefix + std::to_string(i));
  return out;
}

inline std::vector<NodeId> server_ids(const Topology& topo) {
  std::vector<NodeId> out;
  for (std::size_t i : topo.servers()) out.push_back(topo.node(i).id);
  return out;
}

// Random tree with arity 1..8 and depth <= max_depth, capped at max_servers.
inline Topology random_tree(std::mt19937& rng, int max_depth = 4, int max_servers = 64) {
  presets::TopologyBuilder b;
  b.root("r");
  int servers = 0, switches = 0;
  std::uniform_int_distribution<int> arity(1, 8);
  std::uniform_int_distribution<int> coin(0, 2);
  std::uniform_real_distribution<double> bw(0.5, 2.0);
  auto link = [&](const LinkParams& base) {
    LinkParams l = base;
    l.beta = base.beta * bw(rng);
    return l;
  };
  auto grow = [&](auto&& self, const std::string& sw, int depth) -> void {
    const int k = arity(rng);
    int made = 0;
    for (int c = 0; c < k && servers < max_servers; ++c) {
      if (depth + 1 < max_depth && coin(rng) == 0 && servers + 2 <= max_servers) {
        const std::string id = "w" + std::to_string(switches++);
        b.add_switch(id, sw, link(presets::kRootSwitchLink));
        self(self, id, depth + 1);
      } else {
        b.add_server("h" + std::to_string(servers++), sw, link(presets::kMiddleSwitchLink));
      }
      ++made;
    }
    if (made == 0) b.add_server("h" + std::to_string(servers++), sw, presets::kMiddleSwitchLink);
  };
  grow(grow, "r", 0);
  if (servers < 2) b.add_server("h" + std::to_string(servers++), "r", presets::kMiddleSwitchLink);
  return b.build();
}

}  // namespace arplan::testing
