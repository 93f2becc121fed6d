#include "arplan/presets.hpp"

#include "arplan/error.hpp"

namespace arplan::presets {

ModelParams middle_switch_params() {
  ModelParams p;
  p.alpha = kMiddleSwitchLink.alpha;
  p.beta = kMiddleSwitchLink.beta;
  p.epsilon = kMiddleSwitchLink.epsilon;
  p.w_t = kMiddleSwitchLink.w_t;
  p.gamma = kServerCompute.gamma;
  p.delta = kServerCompute.delta;
  return p;
}

TopologyBuilder& TopologyBuilder::root(const std::string& id) {
  nodes_.push_back(Node{id, NodeKind::Switch, std::nullopt, std::nullopt, std::nullopt});
  return *this;
}

TopologyBuilder& TopologyBuilder::add_switch(const std::string& id, const std::string& parent,
                                             LinkParams uplink) {
  nodes_.push_back(Node{id, NodeKind::Switch, parent, uplink, std::nullopt});
  return *this;
}

TopologyBuilder& TopologyBuilder::add_server(const std::string& id, const std::string& parent,
                                             LinkParams uplink, ComputeParams compute) {
  nodes_.push_back(Node{id, NodeKind::Server, parent, uplink, compute});
  return *this;
}

TopologyBuilder& TopologyBuilder::add_servers(const std::string& prefix, int count,
                                              const std::string& parent, LinkParams uplink,
                                              ComputeParams compute) {
  for (int k = 0; k < count; ++k) add_server(prefix + std::to_string(k), parent, uplink, compute);
  return *this;
}

Topology TopologyBuilder::build() const { return Topology::from_nodes(nodes_); }

Topology single_switch(int n, LinkParams link, ComputeParams compute) {
  TopologyBuilder b;
  b.root("sw").add_servers("s", n, "sw", link, compute);
  return b.build();
}

Topology symmetric(int middles, int per_middle) {
  TopologyBuilder b;
  b.root("root");
  for (int m = 0; m < middles; ++m) {
    const std::string sw = "m" + std::to_string(m);
    b.add_switch(sw, "root", kRootSwitchLink);
    b.add_servers(sw + "s", per_middle, sw, kMiddleSwitchLink);
  }
  return b.build();
}

Topology asymmetric_384() {
  TopologyBuilder b;
  b.root("root");
  for (int m = 0; m < 16; ++m) {
    const std::string sw = "m" + std::to_string(m);
    b.add_switch(sw, "root", kRootSwitchLink);
    b.add_servers(sw + "s", m < 8 ? 32 : 16, sw, kMiddleSwitchLink);
  }
  return b.build();
}

Topology cross_dc_384() {
  TopologyBuilder b;
  b.root("xdc");
  for (int dc = 0; dc < 2; ++dc) {
    const std::string droot = "dc" + std::to_string(dc);
    b.add_switch(droot, "xdc", kCrossDcLink);
    for (int m = 0; m < 8; ++m) {
      const std::string sw = droot + "m" + std::to_string(m);
      b.add_switch(sw, droot, kRootSwitchLink);
      b.add_servers(sw + "s", dc == 0 ? 32 : 16, sw, kMiddleSwitchLink);
    }
  }
  return b.build();
}

Topology two_by_three() {
  TopologyBuilder b;
  b.root("root")
      .add_switch("sw1", "root", kRootSwitchLink)
      .add_servers("a", 3, "sw1", kMiddleSwitchLink)
      .add_switch("sw2", "root", kRootSwitchLink)
      .add_servers("b", 3, "sw2", kMiddleSwitchLink);
  return b.build();
}

Topology three_plus_four() {
  TopologyBuilder b;
  b.root("root")
      .add_switch("sw1", "root", kRootSwitchLink)
      .add_servers("a", 3, "sw1", kMiddleSwitchLink)
      .add_switch("sw2", "root", kRootSwitchLink)
      .add_servers("b", 4, "sw2", kMiddleSwitchLink);
  return b.build();
}

Topology by_name(const std::string& name) {
  if (name == "ss24") return single_switch(24);
  if (name == "ss32") return single_switch(32);
  if (name == "sym384") return symmetric(16, 24);
  if (name == "sym512") return symmetric(16, 32);
  if (name == "asy384") return asymmetric_384();
  if (name == "cdc384") return cross_dc_384();
  if (name == "sym6") return two_by_three();
  if (name == "asy7") return three_plus_four();
  throw ValidationError("unknown preset topology '" + name + "'");
}

std::vector<std::string> names() {
  return {"ss24", "ss32", "sym384", "sym512", "asy384", "cdc384", "sym6", "asy7"};
}

}  // namespace arplan::presets
