#include "arplan/json_io.hpp"

#include <json.hpp>
#include <map>
#include <set>

#include "arplan/error.hpp"

namespace arplan {

using nlohmann::json;

namespace {

json cost_json(const CostBreakdown& c) {
  json j = {{"latency", c.latency}, {"bandwidth", c.bandwidth}, {"compute", c.compute},
            {"memory", c.memory},   {"incast", c.incast},       {"total", c.total}};
  if (c.combined) j["combined"] = true;
  return j;
}

json params_json(const ModelParams& p) {
  json j = {{"alpha", p.alpha}, {"beta", p.beta},       {"gamma", p.gamma},
            {"delta", p.delta}, {"epsilon", p.epsilon}, {"w_t", p.w_t}};
  if (p.combined) j["combined"] = *p.combined;
  return j;
}

json plan_json(const Plan& plan) {
  json steps = json::array();
  for (const Step& s : plan.steps) {
    json tr = json::array(), rd = json::array();
    for (const Transfer& t : s.transfers)
      tr.push_back({{"src", t.src}, {"dst", t.dst}, {"block", t.block}, {"size", t.size}});
    for (const ReduceOp& r : s.reduces)
      rd.push_back({{"server", r.server}, {"block", r.block}, {"fan_in", r.fan_in}});
    steps.push_back({{"label", s.label}, {"transfers", tr}, {"reduces", rd}});
  }
  return {{"n", plan.n},           {"size", plan.size}, {"servers", plan.servers},
          {"allgather_begin", plan.allgather_begin}, {"steps", steps}};
}

json parse(std::string_view text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed JSON: ") + e.what());
  }
}

template <typename T>
T get(const json& j, const char* key) {
  if (!j.contains(key)) throw ParseError(std::string("missing key '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ParseError(std::string("bad value for '") + key + "'");
  }
}

}  // namespace

std::string to_json(const Plan& plan) { return plan_json(plan).dump(2); }

Plan plan_from_json(std::string_view text) {
  const json j = parse(text);
  if (!j.is_object()) throw ParseError("plan must be a JSON object");
  Plan plan;
  plan.n = get<int>(j, "n");
  if (plan.n < 2) throw ValidationError("plan needs n >= 2");
  const json& steps = j.contains("steps") ? j.at("steps") : throw ParseError("missing key 'steps'");
  if (!steps.is_array()) throw ParseError("'steps' must be an array");
  std::vector<NodeId> seen_order;
  std::set<NodeId> seen;
  auto note = [&](const NodeId& s) {
    if (seen.insert(s).second) seen_order.push_back(s);
  };
  std::map<BlockId, Floats> block_sizes;
  for (const json& js : steps) {
    Step s;
    s.label = js.value("label", "");
    for (const json& t : js.value("transfers", json::array())) {
      Transfer tr{get<std::string>(t, "src"), get<std::string>(t, "dst"), get<int>(t, "block"),
                  get<Floats>(t, "size")};
      note(tr.src);
      note(tr.dst);
      block_sizes[tr.block] = std::max(block_sizes[tr.block], tr.size);
      s.transfers.push_back(std::move(tr));
    }
    for (const json& r : js.value("reduces", json::array())) {
      ReduceOp op{get<std::string>(r, "server"), get<int>(r, "block"), get<int>(r, "fan_in")};
      note(op.server);
      s.reduces.push_back(std::move(op));
    }
    plan.steps.push_back(std::move(s));
  }
  plan.servers = j.contains("servers") ? get<std::vector<NodeId>>(j, "servers") : seen_order;
  if (j.contains("size")) {
    plan.size = get<Floats>(j, "size");
  } else {
    // Reconstruct S from the transferred block sizes.
    if (static_cast<int>(block_sizes.size()) != plan.n)
      throw ParseError("plan has no 'size' and does not transfer every block");
    for (const auto& [_, sz] : block_sizes) plan.size += sz;
  }
  plan.allgather_begin = j.value("allgather_begin", plan.steps.size());
  return plan;
}

std::string to_json(const CostBreakdown& cost) { return cost_json(cost).dump(2); }

std::string to_json(const ModelParams& params) { return params_json(params).dump(2); }

ModelParams params_from_json(std::string_view text) {
  json j = parse(text);
  if (j.is_object() && j.contains("params")) j = j.at("params");
  if (!j.is_object()) throw ParseError("parameters must be a JSON object");
  static const std::set<std::string> known{"alpha", "beta", "gamma", "delta", "epsilon", "w_t", "combined"};
  for (const auto& [key, _] : j.items())
    if (!known.count(key)) throw ParseError("unknown parameter '" + key + "'");
  ModelParams p;
  p.alpha = j.value("alpha", 0.0);
  p.beta = j.value("beta", 0.0);
  p.gamma = j.value("gamma", 0.0);
  p.delta = j.value("delta", 0.0);
  p.epsilon = j.value("epsilon", 0.0);
  if (!j.contains("w_t") || !j.at("w_t").is_number_integer()) throw ParseError("'w_t' must be an integer");
  p.w_t = j.at("w_t").get<int>();
  if (j.contains("combined")) p.combined = j.at("combined").get<double>();
  for (double v : {p.alpha, p.beta, p.gamma, p.delta, p.epsilon})
    if (v < 0) throw ValidationError("parameters must be non-negative");
  if (p.combined && *p.combined < 0) throw ValidationError("parameters must be non-negative");
  if (p.w_t < 1) throw ValidationError("w_t must be >= 1");
  return p;
}

std::string to_json(const SimResult& r) {
  json steps = json::array();
  for (const StepTiming& s : r.steps)
    steps.push_back({{"task", s.task},
                     {"label", s.label},
                     {"start", s.start},
                     {"alpha_time", s.alpha_time},
                     {"comm_time", s.comm_time},
                     {"compute_time", s.compute_time}});
  return json{{"total", r.total},
              {"breakdown", cost_json(r.breakdown)},
              {"critical_path", r.critical_path},
              {"steps", steps}}
      .dump(2);
}

std::string to_json(const FitResult& r) {
  json scan = json::array();
  for (const auto& [w, sse] : r.w_t_scan) scan.push_back({{"w_t", w}, {"sse", std::isfinite(sse) ? json(sse) : json()}});
  return json{{"params", params_json(r.params)},
              {"residual_sse", r.residual_sse},
              {"w_t_scan", scan},
              {"warnings", r.warnings}}
      .dump(2);
}

std::string to_json(const GenTreeReport& report, bool include_plan) {
  json switches = json::array();
  for (const SubPlanChoice& c : report.choices) {
    json cands = json::array();
    for (const CandidateCost& cc : c.candidates)
      cands.push_back({{"kind", cc.kind.to_string()}, {"total", cc.cost.total}, {"cost", cost_json(cc.cost)}});
    json rearranged = json::array(), decisions = json::array();
    for (const RearrangeDecision& d : c.rearrangements) {
      if (d.adopted) rearranged.push_back(d.child);
      decisions.push_back({{"child", d.child},
                           {"subset_size", d.subset.size()},
                           {"time_origin", d.time_origin},
                           {"time_rearrange", d.time_rearrange},
                           {"adopted", d.adopted}});
    }
    switches.push_back({{"switch", c.switch_id},
                        {"chosen", c.chosen ? c.chosen->to_string() : "none"},
                        {"candidates", cands},
                        {"rearranged_children", rearranged},
                        {"rearrangement_decisions", decisions},
                        {"start_time", c.start_time},
                        {"finish_time", c.finish_time}});
  }
  json j = {{"switches", switches}, {"predicted_total", report.predicted_total}};
  if (include_plan) j["plan"] = plan_json(report.plan);
  return j.dump(2);
}

}  // namespace arplan
