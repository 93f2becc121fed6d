#pragma once

#include <string>
#include <vector>

#include "arplan/cost_model.hpp"
#include "arplan/topology.hpp"

namespace arplan::presets {

// Fitted per-level parameters for the reference simulation setup.
inline constexpr LinkParams kCrossDcLink{3.00e-2, 6.40e-9, 6.00e-11, 9};
inline constexpr LinkParams kRootSwitchLink{6.58e-3, 6.40e-10, 6.00e-12, 9};
inline constexpr LinkParams kMiddleSwitchLink{6.58e-3, 6.40e-9, 1.22e-10, 9};
inline constexpr ComputeParams kServerCompute{6.00e-10, 1.87e-10};

/// Middle-switch link combined with server compute: the parameter row
/// used for single-switch (star) closed-form evaluation.
ModelParams middle_switch_params();

/// Incrementally builds a node list in document order.
class TopologyBuilder {
 public:
  TopologyBuilder& root(const std::string& id);
  TopologyBuilder& add_switch(const std::string& id, const std::string& parent, LinkParams uplink);
  TopologyBuilder& add_server(const std::string& id, const std::string& parent, LinkParams uplink,
                              ComputeParams compute = kServerCompute);
  /// Adds `count` servers named `<prefix><k>` under `parent`.
  TopologyBuilder& add_servers(const std::string& prefix, int count, const std::string& parent,
                               LinkParams uplink, ComputeParams compute = kServerCompute);
  Topology build() const;

 private:
  std::vector<Node> nodes_;
};

/// One switch with `n` servers (SS24, SS32, ...).
Topology single_switch(int n, LinkParams link = kMiddleSwitchLink,
                       ComputeParams compute = kServerCompute);

/// Root with `middles` middle switches of `per_middle` servers each
/// (SYM384 = 16 x 24, SYM512 = 16 x 32).
Topology symmetric(int middles, int per_middle);

/// 16 middle switches; the first 8 carry 32 servers, the last 8 carry 16.
Topology asymmetric_384();

/// Two data centers joined through a cross-DC link: DC0 has 8 middle
/// switches x 32 servers, DC1 has 8 x 16.
Topology cross_dc_384();

/// Root with two switches of three servers each.
Topology two_by_three();

/// Root with two switches of three and four servers.
Topology three_plus_four();

/// Named reference topology: ss24, ss32, sym384, sym512, asy384, cdc384,
/// sym6, asy7. Throws ValidationError for other names.
Topology by_name(const std::string& name);
std::vector<std::string> names();

}  // namespace arplan::presets
