#include "cli.hpp"

#include <cctype>
#include <CLI11.hpp>
#include <fmt/format.h>

#include <cmath>
#include <fstream>
#include <json.hpp>
#include <ostream>
#include <sstream>

#include "arplan/cost_model.hpp"
#include "arplan/error.hpp"
#include "arplan/fitting.hpp"
#include "arplan/json_io.hpp"
#include "arplan/plan.hpp"
#include "arplan/presets.hpp"
#include "arplan/simulator.hpp"
#include "arplan/topology.hpp"
#include "arplan/tree_planner.hpp"

namespace arplan::cli {

namespace {

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_to(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write '" + path + "'");
  f << text;
  if (!f) throw IoError("write failed for '" + path + "'");
}

std::string g6(double v) { return fmt::format("{:.6g}", v); }

Floats parse_size(const std::string& text) {
  double v = 0;
  try {
    std::size_t used = 0;
    v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
  } catch (const std::exception&) {
    throw ValidationError("bad --size '" + text + "'");
  }
  if (!(v >= 1) || v != std::floor(v) || v > 1e18)
    throw ValidationError("--size must be a whole number of floats >= 1");
  return static_cast<Floats>(v);
}

Topology load_topology(const std::string& path, const std::string& preset) {
  if (!preset.empty()) return presets::by_name(preset);
  if (path.empty()) throw ValidationError("one of --topology or --preset is required");
  return parse_topology(read_file(path));
}

ModelParams load_params(const std::string& source) {
  if (source == "middle-switch") return presets::middle_switch_params();
  return params_from_json(read_file(source));
}

std::string breakdown_tsv(const CostBreakdown& c, const std::vector<std::pair<std::string, double>>& extra) {
  std::string s = "term\tseconds\n";
  for (const auto& [k, v] : std::vector<std::pair<std::string, double>>{{"latency", c.latency},
                                                                          {"bandwidth", c.bandwidth},
                                                                          {"compute", c.compute},
                                                                          {"memory", c.memory},
                                                                          {"incast", c.incast}})
    s += k + "\t" + g6(v) + "\n";
  for (const auto& [k, v] : extra) s += k + "\t" + g6(v) + "\n";
  s += "total\t" + g6(c.total) + "\n";
  return s;
}

std::vector<NodeId> server_ids(const Topology& topo) {
  std::vector<NodeId> ids;
  for (std::size_t s : topo.servers()) ids.push_back(topo.node(s).id);
  return ids;
}

// --- subcommands ------------------------------------------------------------

struct FitArgs {
  std::string input, output;
  std::optional<int> wt_min, wt_max;
  std::optional<double> bandwidth;
};

void cmd_fit(const FitArgs& a, std::ostream& out) {
  const auto data = parse_measurements_csv(read_file(a.input));
  FitResult r = fit_params(data, a.wt_min, a.wt_max);
  if (a.bandwidth) {
    const auto [beta, gamma] = split_combined(*r.params.combined, *a.bandwidth);
    r.params.beta = beta;
    r.params.gamma = gamma;
  }
  write_to(a.output, to_json(r) + "\n", out);
}

struct PredictArgs {
  std::string params, kind, fanins, format = "tsv";
  int n = 0;
  std::string size;
};

void cmd_predict(const PredictArgs& a, std::ostream& out) {
  const ModelParams params = load_params(a.params);
  std::string spec = a.kind;
  if (!a.fanins.empty()) {
    std::string k;
    for (char ch : a.kind) k += static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    if (k != "hcps" && k != "cps") throw ValidationError("--fanins only applies to hcps");
    spec = "hcps:" + a.fanins;
  }
  const PlanKind kind = PlanKind::parse(spec);
  const Floats S = parse_size(a.size);
  const CostBreakdown cost = closed_form_cost(kind, a.n, static_cast<double>(S), params);
  const OptimalityFlags flags = optimality_flags(cost, a.n, static_cast<double>(S), params);
  std::vector<std::pair<std::string, double>> extra;
  if (kind.type == PlanKind::Type::RHD && !is_power_of_two(a.n)) {
    // Folded into bandwidth/compute/memory above; listed for reference.
    const double Sd = static_cast<double>(S);
    const double bw = params.combined ? Sd * *params.combined : 2 * Sd * params.beta + Sd * params.gamma;
    extra.emplace_back("of_which_non_power_of_two", bw + 3 * Sd * params.delta);
  }
  if (a.format == "json") {
    nlohmann::json j = nlohmann::json::parse(to_json(cost));
    nlohmann::json doc = {{"kind", kind.to_string()},
                          {"n", a.n},
                          {"size", S},
                          {"cost", j},
                          {"delta_optimal", flags.delta_optimal},
                          {"epsilon_optimal", flags.epsilon_optimal}};
    for (const auto& [k, v] : extra) doc[k] = v;
    out << doc.dump(2) << "\n";
  } else {
    out << breakdown_tsv(cost, extra);
  }
}

struct PlanArgs {
  std::string topology, preset, size, output, report;
  bool no_rearrange = false;
  int max_hcps_steps = 3;
};

void cmd_plan(const PlanArgs& a, std::ostream& out) {
  const Topology topo = load_topology(a.topology, a.preset);
  PlannerOptions opts;
  opts.allow_rearrangement = !a.no_rearrange;
  opts.max_hcps_steps = a.max_hcps_steps;
  const GenTreeReport rep = gentree(topo, parse_size(a.size), opts);
  if (!a.report.empty()) write_to(a.report, to_json(rep, false) + "\n", out);
  if (a.output.empty()) {
    out << to_json(rep.plan) << "\n";
    return;
  }
  write_to(a.output, to_json(rep.plan) + "\n", out);
  out << "switch\tchosen\trearranged\tstart\tfinish\n";
  for (const auto& c : rep.choices) {
    std::string re;
    for (const auto& d : c.rearrangements)
      if (d.adopted) re += (re.empty() ? "" : ",") + d.child;
    out << c.switch_id << "\t" << (c.chosen ? c.chosen->to_string() : "none") << "\t"
        << (re.empty() ? "-" : re) << "\t" << g6(c.start_time) << "\t" << g6(c.finish_time) << "\n";
  }
}

struct SimulateArgs {
  std::string topology, preset, plan, trace;
};

void cmd_simulate(const SimulateArgs& a, std::ostream& out, std::ostream& err) {
  const Topology topo = load_topology(a.topology, a.preset);
  const Plan plan = plan_from_json(read_file(a.plan));
  const auto check = verify_allreduce(plan, plan.n);
  if (!check.ok) err << "warning: plan is not a complete AllReduce: " << check.message << "\n";
  SimOptions opts;
  std::ofstream trace;
  if (!a.trace.empty()) {
    trace.open(a.trace, std::ios::binary);
    if (!trace) throw IoError("cannot write '" + a.trace + "'");
    trace << "time\tevent\tlink|server\tdetail\n";
    opts.trace = &trace;
  }
  const SimResult r = simulate(plan, topo, opts);
  out << to_json(r) << "\n";
}

struct CompareArgs {
  std::string topology, preset, size, baselines = "ring,rhd,cps", format = "tsv";
  bool no_rearrange = false;
};

struct Row {
  std::string name;
  std::optional<double> predicted, simulated;
};

void cmd_compare(const CompareArgs& a, std::ostream& out) {
  const Topology topo = load_topology(a.topology, a.preset);
  const Floats S = parse_size(a.size);
  const int N = static_cast<int>(topo.num_servers());
  std::vector<Row> rows;

  auto run_gentree = [&](bool rearrange, const std::string& name) {
    PlannerOptions opts;
    opts.allow_rearrangement = rearrange;
    const GenTreeReport rep = gentree(topo, S, opts);
    SimOptions so;
    so.attribute_incast = false;
    const double sim = simulate_concurrent(rep.tasks, rep.plan.n, rep.plan.size, topo, so).total;
    rows.push_back({name, rep.predicted_total, sim});
  };
  run_gentree(true, "gentree");
  if (a.no_rearrange) run_gentree(false, "gentree*");

  const ModelParams params = subtree_params(topo, topo.root());
  std::stringstream list(a.baselines);
  std::string item;
  while (std::getline(list, item, ',')) {
    if (item.empty()) continue;
    const PlanKind kind = PlanKind::parse(item);
    if (kind.type == PlanKind::Type::HCPS || kind.type == PlanKind::Type::ACPS)
      throw ValidationError("baseline '" + item + "' is not supported; use ring, rhd, cps or rb");
    if (kind.type == PlanKind::Type::RHD && !is_power_of_two(N)) {
      rows.push_back({kind.to_string(), std::nullopt, std::nullopt});
      continue;
    }
    SimOptions so;
    so.attribute_incast = false;
    const double sim = simulate(build_plan(kind, server_ids(topo), S), topo, so).total;
    rows.push_back({kind.to_string(), closed_form_cost(kind, N, static_cast<double>(S), params).total, sim});
  }

  const double base = *rows.front().simulated;
  if (a.format == "json") {
    nlohmann::json arr = nlohmann::json::array();
    for (const Row& r : rows) {
      nlohmann::json j = {{"algorithm", r.name}};
      j["predicted"] = r.predicted ? nlohmann::json(*r.predicted) : nlohmann::json();
      j["simulated"] = r.simulated ? nlohmann::json(*r.simulated) : nlohmann::json();
      j["speedup"] = r.simulated ? nlohmann::json(*r.simulated / base) : nlohmann::json();
      arr.push_back(j);
    }
    out << arr.dump(2) << "\n";
    return;
  }
  out << "algorithm\tpredicted\tsimulated\tspeedup\n";
  for (const Row& r : rows) {
    if (!r.simulated) {
      out << r.name << "\tn/a\tn/a\tn/a\n";
      continue;
    }
    out << r.name << "\t" << g6(*r.predicted) << "\t" << g6(*r.simulated) << "\t" << g6(*r.simulated / base)
        << "\n";
  }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"AllReduce plan modelling, generation and simulation"};
  app.name("arplan");
  app.require_subcommand(1);

  FitArgs fit;
  auto* f = app.add_subcommand("fit", "Fit model parameters from Co-located PS timings");
  f->add_option("--input", fit.input, "CSV with header n,s,t")->required();
  f->add_option("--wt-min", fit.wt_min, "Smallest w_t to scan");
  f->add_option("--wt-max", fit.wt_max, "Largest w_t to scan");
  f->add_option("--bandwidth", fit.bandwidth, "Link bandwidth in floats/s; splits 2*beta+gamma");
  f->add_option("--output", fit.output, "Output JSON (default stdout)");

  PredictArgs pred;
  auto* p = app.add_subcommand("predict", "Closed-form cost of one plan kind on a single switch");
  p->add_option("--params", pred.params, "Parameter JSON, or 'middle-switch'")->required();
  p->add_option("--kind", pred.kind, "rb, ring, rhd, cps or hcps")->required();
  p->add_option("--n", pred.n, "Server count")->required();
  p->add_option("--size", pred.size, "Data size in floats")->required();
  p->add_option("--fanins", pred.fanins, "HCPS fan-ins, e.g. 8,3");
  p->add_option("--format", pred.format, "tsv or json")->check(CLI::IsMember({"tsv", "json"}));

  PlanArgs plan;
  auto* pl = app.add_subcommand("plan", "Generate a GenTree plan for a topology");
  pl->add_option("--topology", plan.topology, "Topology JSON");
  pl->add_option("--preset", plan.preset, "Built-in topology name");
  pl->add_option("--size", plan.size, "Data size in floats")->required();
  pl->add_option("--output", plan.output, "Plan JSON (default stdout)");
  pl->add_option("--report", plan.report, "Decision report JSON");
  pl->add_flag("--no-rearrange", plan.no_rearrange, "Disable data rearrangement");
  pl->add_option("--max-hcps-steps", plan.max_hcps_steps, "Longest HCPS factorization considered");

  SimulateArgs sim;
  auto* s = app.add_subcommand("simulate", "Flow-level simulation of a plan");
  s->add_option("--topology", sim.topology, "Topology JSON");
  s->add_option("--preset", sim.preset, "Built-in topology name");
  s->add_option("--plan", sim.plan, "Plan JSON")->required();
  s->add_option("--trace", sim.trace, "Per-event TSV output");

  CompareArgs cmp;
  auto* c = app.add_subcommand("compare", "GenTree against baseline plans");
  c->add_option("--topology", cmp.topology, "Topology JSON");
  c->add_option("--preset", cmp.preset, "Built-in topology name");
  c->add_option("--size", cmp.size, "Data size in floats")->required();
  c->add_option("--baselines", cmp.baselines, "Comma-separated list (ring,rhd,cps,rb)");
  c->add_flag("--no-rearrange", cmp.no_rearrange, "Add a GenTree row without rearrangement");
  c->add_option("--format", cmp.format, "tsv or json")->check(CLI::IsMember({"tsv", "json"}));

  std::string topo_preset;
  auto* t = app.add_subcommand("topo", "Print a built-in topology as JSON");
  t->add_option("--preset", topo_preset, "One of: " + [] {
    std::string s;
    for (const auto& n : presets::names()) s += (s.empty() ? "" : ", ") + n;
    return s;
  }())->required();

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*f) cmd_fit(fit, out);
    else if (*p) cmd_predict(pred, out);
    else if (*pl) cmd_plan(plan, out);
    else if (*s) cmd_simulate(sim, out, err);
    else if (*c) cmd_compare(cmp, out);
    else if (*t) out << serialize_topology(presets::by_name(topo_preset)) << "\n";
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const InternalError& e) {
    err << "internal error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace arplan::cli
