#include "arplan/plan.hpp"

#include <algorithm>
#include <unordered_map>

#include "arplan/error.hpp"

namespace arplan {

Floats block_size(BlockId b, int N, Floats S) {
  const auto n = static_cast<Floats>(N);
  return S / n + (static_cast<Floats>(b) < S % n ? 1 : 0);
}

Plan reverse_to_allgather(const Plan& rs) {
  Plan ag;
  ag.n = rs.n;
  ag.size = rs.size;
  ag.servers = rs.servers;
  ag.allgather_begin = 0;
  ag.steps.reserve(rs.steps.size());
  for (auto it = rs.steps.rbegin(); it != rs.steps.rend(); ++it) {
    Step s;
    s.label = it->label.rfind("ag: ", 0) == 0 ? it->label.substr(4) : "ag: " + it->label;
    s.transfers.reserve(it->transfers.size());
    for (const Transfer& t : it->transfers) s.transfers.push_back({t.dst, t.src, t.block, t.size});
    ag.steps.push_back(std::move(s));
  }
  return ag;
}

Plan complete_allreduce(const Plan& rs) {
  Plan out = rs;
  Plan ag = reverse_to_allgather(rs);
  out.allgather_begin = out.steps.size();
  for (Step& s : ag.steps) out.steps.push_back(std::move(s));
  return out;
}

namespace {

// Per-step, per-server accumulation shared by both aggregate views.
std::unordered_map<std::string, ServerAggregate> step_totals(const Step& step, const Plan& plan) {
  std::unordered_map<std::string, ServerAggregate> acc;
  for (const Transfer& t : step.transfers) {
    acc[t.src].sent += t.size;
    acc[t.dst].received += t.size;
  }
  for (const ReduceOp& r : step.reduces) {
    const Floats sz = block_size(r.block, plan.n, plan.size);
    auto& a = acc[r.server];
    a.mem_ops += static_cast<Floats>(r.fan_in + 1) * sz;
    a.compute_ops += static_cast<Floats>(r.fan_in - 1) * sz;
    a.max_fan_in = std::max(a.max_fan_in, r.fan_in);
  }
  return acc;
}

}  // namespace

std::map<NodeId, ServerAggregate> plan_aggregates(const Plan& plan, const Topology& topo) {
  std::map<NodeId, ServerAggregate> out;
  for (const NodeId& s : plan.servers) {
    if (!topo.contains(s) || !topo.is_server(topo.index_of(s)))
      throw ValidationError("plan server '" + s + "' is not a server of the topology");
    out[s];
  }
  for (const Step& step : plan.steps) {
    for (const auto& [server, a] : step_totals(step, plan)) {
      auto it = out.find(server);
      if (it == out.end()) throw ValidationError("plan step references unknown server '" + server + "'");
      it->second.sent += a.sent;
      it->second.received += a.received;
      it->second.mem_ops += a.mem_ops;
      it->second.compute_ops += a.compute_ops;
      it->second.max_fan_in = std::max(it->second.max_fan_in, a.max_fan_in);
    }
  }
  return out;
}

ServerAggregate critical_path_aggregates(const Plan& plan) {
  ServerAggregate total;
  for (const Step& step : plan.steps) {
    ServerAggregate mx;
    for (const auto& [_, a] : step_totals(step, plan)) {
      mx.sent = std::max(mx.sent, a.sent);
      mx.received = std::max(mx.received, a.received);
      mx.mem_ops = std::max(mx.mem_ops, a.mem_ops);
      mx.compute_ops = std::max(mx.compute_ops, a.compute_ops);
      mx.max_fan_in = std::max(mx.max_fan_in, a.max_fan_in);
    }
    total.sent += mx.sent;
    total.received += mx.received;
    total.mem_ops += mx.mem_ops;
    total.compute_ops += mx.compute_ops;
    total.max_fan_in = std::max(total.max_fan_in, mx.max_fan_in);
  }
  return total;
}

}  // namespace arplan
