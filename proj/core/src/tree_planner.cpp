#include "arplan/tree_planner.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <tuple>

#include "arplan/error.hpp"

namespace arplan {

namespace {

Floats floats_of(const std::vector<BlockId>& blocks, int N, Floats S) {
  Floats total = 0;
  for (BlockId b : blocks) total += block_size(b, N, S);
  return total;
}

std::vector<std::size_t> subtree_nodes(const Topology& topo, std::size_t node) {
  std::vector<std::size_t> out;
  std::vector<std::size_t> stack{node};
  while (!stack.empty()) {
    const std::size_t v = stack.back();
    stack.pop_back();
    out.push_back(v);
    for (std::size_t c : topo.children(v)) stack.push_back(c);
  }
  return out;
}

ModelParams link_params(const LinkParams& l) {
  ModelParams p;
  p.alpha = l.alpha;
  p.beta = l.beta;
  p.epsilon = l.epsilon;
  p.w_t = l.w_t;
  return p;
}

// Doubles the communication terms: the AllGather mirrors every move.
CostBreakdown round_trip(double A, double B, double C, double D, double w, const ModelParams& p) {
  return model_eval(2 * A, 2 * B, C, D, w, p);
}

// Direct-move estimate from `initial` to `final_place` within one scope.
CostBreakdown direct_move_cost(const Placement& initial, const Placement& final_place, int N,
                               Floats S, const ModelParams& params) {
  std::map<BlockId, NodeId> owner;
  for (const auto& e : final_place)
    for (BlockId b : e.blocks) owner[b] = e.server;
  std::set<std::pair<NodeId, BlockId>> held;
  for (const auto& e : initial)
    for (BlockId b : e.blocks) held.emplace(e.server, b);

  std::map<NodeId, Floats> sent, recv;
  std::map<NodeId, std::set<NodeId>> srcs, dsts;
  std::map<std::pair<NodeId, BlockId>, int> arrivals;
  for (const auto& e : initial)
    for (BlockId b : e.blocks) {
      const NodeId& dst = owner.at(b);
      if (dst == e.server) continue;
      const Floats sz = block_size(b, N, S);
      sent[e.server] += sz;
      recv[dst] += sz;
      srcs[dst].insert(e.server);
      dsts[e.server].insert(dst);
      ++arrivals[{dst, b}];
    }
  if (arrivals.empty()) return {};
  double B = 0, w = 0;
  for (const auto& [s, v] : sent) B = std::max(B, static_cast<double>(v));
  for (const auto& [s, v] : recv) B = std::max(B, static_cast<double>(v));
  for (const auto& [s, v] : srcs) w = std::max(w, static_cast<double>(v.size()) + 1);
  for (const auto& [s, v] : dsts) w = std::max(w, static_cast<double>(v.size()) + 1);
  std::map<NodeId, double> C, D;
  for (const auto& [key, count] : arrivals) {
    const int fan_in = count + (held.count(key) ? 1 : 0);
    if (fan_in < 2) continue;
    const double sz = static_cast<double>(block_size(key.second, N, S));
    C[key.first] += (fan_in - 1) * sz;
    D[key.first] += (fan_in + 1) * sz;
  }
  double Cmax = 0, Dmax = 0;
  for (const auto& [s, v] : C) Cmax = std::max(Cmax, v);
  for (const auto& [s, v] : D) Dmax = std::max(Dmax, v);
  return round_trip(1, B, Cmax, Dmax, w, params);
}

std::map<NodeId, std::vector<BlockId>> as_map(const Placement& p) {
  std::map<NodeId, std::vector<BlockId>> m;
  for (const auto& e : p) m[e.server] = e.blocks;
  return m;
}

// Tie-break key after the total: fewer steps, larger first fan-in, then
// CPS < HCPS < RHD < Ring.
std::tuple<int, int, int> tie_key(const PlanKind& k, int c) {
  int f0 = 2, order = 0;
  switch (k.type) {
    case PlanKind::Type::CPS: f0 = c; order = 0; break;
    case PlanKind::Type::HCPS: f0 = k.fanins.front(); order = 1; break;
    case PlanKind::Type::RHD: order = 2; break;
    case PlanKind::Type::Ring: order = 3; break;
    default: order = 4; break;
  }
  return {k.steps(c), -f0, order};
}

std::string merged_label(const std::vector<std::string>& parts) {
  std::vector<std::string> uniq;
  for (const auto& p : parts)
    if (!p.empty() && std::find(uniq.begin(), uniq.end(), p) == uniq.end()) uniq.push_back(p);
  std::string out;
  const std::size_t shown = std::min<std::size_t>(uniq.size(), 3);
  for (std::size_t i = 0; i < shown; ++i) out += (i ? "; " : "") + uniq[i];
  if (uniq.size() > shown) out += "; +" + std::to_string(uniq.size() - shown) + " more";
  return out;
}

std::vector<Step> merge_aligned(const std::vector<const std::vector<Step>*>& seqs) {
  std::size_t len = 0;
  for (auto* s : seqs) len = std::max(len, s->size());
  std::vector<Step> out(len);
  for (std::size_t k = 0; k < len; ++k) {
    std::vector<std::string> labels;
    for (auto* s : seqs) {
      if (k >= s->size()) continue;
      const Step& st = (*s)[k];
      out[k].transfers.insert(out[k].transfers.end(), st.transfers.begin(), st.transfers.end());
      out[k].reduces.insert(out[k].reduces.end(), st.reduces.begin(), st.reduces.end());
      labels.push_back(st.label);
    }
    out[k].label = merged_label(labels);
  }
  return out;
}

std::vector<Step> reversed_steps(const std::vector<Step>& rs) {
  Plan p;
  p.steps = rs;
  return reverse_to_allgather(p).steps;
}

class Planner {
 public:
  Planner(const Topology& topo, Floats S, const PlannerOptions& opts)
      : topo_(topo), S_(S), N_(static_cast<int>(topo.num_servers())), opts_(opts),
        finish_(topo.size(), 0.0), linear_(topo.size()), task_of_(topo.size()) {
    basic_ = generate_basic_plan(topo, topo.node(topo.root()).id, N_);
  }

  GenTreeReport run() {
    visit(topo_.root());
    GenTreeReport report;
    report.choices = std::move(choices_);
    report.predicted_total = finish_[topo_.root()];

    Plan rs;
    rs.n = N_;
    rs.size = S_;
    for (std::size_t s : topo_.servers()) rs.servers.push_back(topo_.node(s).id);
    rs.steps = linear_[topo_.root()];
    rs.allgather_begin = rs.steps.size();
    report.plan = complete_allreduce(rs);
    const auto check = verify_allreduce(report.plan, N_);
    if (!check.ok) throw InternalError("composed plan failed verification: " + check.message);

    // AllGather tasks mirror the ReduceScatter tree top-down.
    const std::size_t T = tasks_.size();
    report.tasks = tasks_;
    for (std::size_t t = 0; t < T; ++t) {
      SimTask ag;
      ag.name = tasks_[t].name + " ag";
      ag.steps = reversed_steps(tasks_[t].steps);
      ag.deps = {parent_task_[t] ? T + *parent_task_[t] : t};
      report.tasks.push_back(std::move(ag));
    }
    return report;
  }

 private:
  Placement effective_final(std::size_t child) const {
    const BasicPlan& bp = basic_.at(topo_.node(child).id);
    return bp.rearrange_place ? *bp.rearrange_place : bp.final_place;
  }

  void visit(std::size_t a) {
    const auto children = topo_.children(a);
    for (std::size_t c : children)
      if (!topo_.is_server(c)) visit(c);

    const NodeId& aid = topo_.node(a).id;
    BasicPlan& bp = basic_.at(aid);
    SubPlanChoice choice;
    choice.switch_id = aid;

    if (opts_.allow_rearrangement && children.size() > 1)
      for (std::size_t c : children) consider_rearrangement(a, c, choice);

    double start = 0.0;
    for (std::size_t c : children) start = std::max(start, finish_[c]);

    Placement initial;
    for (std::size_t c : children) {
      auto part = effective_final(c);
      initial.insert(initial.end(), part.begin(), part.end());
    }
    bp.initial_place = initial;

    std::vector<Step> local;
    double best_time = 0.0;
    if (children.size() > 1) {
      const bool rearranged = std::any_of(choice.rearrangements.begin(), choice.rearrangements.end(),
                                          [](const RearrangeDecision& d) { return d.adopted; });
      std::vector<ReduceGroup> groups;
      if (!rearranged && symmetric_groups(a, initial, bp.final_place, groups)) {
        local = select_symmetric(a, groups, choice, best_time);
      } else {
        const ModelParams params = subtree_params(topo_, a);
        const CostBreakdown est = direct_move_cost(initial, bp.final_place, N_, S_, params);
        choice.chosen = PlanKind::acps();
        choice.candidates.push_back({PlanKind::acps(), est});
        best_time = est.total;
        local = build_acps(initial, bp.final_place, N_, S_).steps;
        for (Step& s : local) s.label = aid + " rs: acps";
      }
    }

    choice.start_time = start;
    choice.finish_time = start + best_time;
    choice.local_steps = local.size();
    finish_[a] = choice.finish_time;
    bp.finish_time = choice.finish_time;

    std::vector<const std::vector<Step>*> seqs;
    SimTask task;
    task.name = aid;
    for (std::size_t c : children) {
      if (topo_.is_server(c)) continue;
      seqs.push_back(&linear_[c]);
      const std::size_t ct = *task_of_[c];
      task.deps.push_back(ct);
    }
    linear_[a] = merge_aligned(seqs);
    linear_[a].insert(linear_[a].end(), local.begin(), local.end());
    task.steps = std::move(local);
    task_of_[a] = tasks_.size();
    for (std::size_t dep : task.deps) parent_task_[dep] = tasks_.size();
    tasks_.push_back(std::move(task));
    parent_task_.push_back(std::nullopt);
    choices_.push_back(std::move(choice));
  }

  void consider_rearrangement(std::size_t a, std::size_t c, SubPlanChoice& choice) {
    if (topo_.is_server(c)) return;
    const std::size_t n_i = topo_.num_servers_under(c);
    if (n_i < 2) return;
    const NodeId& cid = topo_.node(c).id;
    const double r = convergence_ratio(topo_, topo_.node(a).id, cid);
    const double raw = std::ceil(static_cast<double>(n_i) / r - 1e-12);
    const std::size_t k = static_cast<std::size_t>(std::clamp(raw, 1.0, static_cast<double>(n_i)));
    if (k >= n_i) return;

    BasicPlan& cp = basic_.at(cid);
    const Placement& fin = cp.final_place;
    std::vector<NodeId> subset;
    for (std::size_t j = 0; j < k; ++j) subset.push_back(fin[j].server);
    Placement rp;
    for (const NodeId& s : subset) rp.push_back({s, {}});
    for (std::size_t j = 0; j < fin.size(); ++j) {
      auto& dst = rp[j % k].blocks;
      dst.insert(dst.end(), fin[j].blocks.begin(), fin[j].blocks.end());
    }
    for (auto& e : rp) std::sort(e.blocks.begin(), e.blocks.end());

    RearrangeDecision d;
    d.child = cid;
    d.subset = subset;
    d.time_origin = all_transfer_out_time(topo_, cid, fin, N_, S_);
    const double move = direct_move_cost(fin, rp, N_, S_, subtree_params(topo_, c)).total;
    d.time_rearrange = move + all_transfer_out_time(topo_, cid, rp, N_, S_);
    d.adopted = d.time_rearrange < d.time_origin;
    if (d.adopted) {
      cp.rearrange_place = rp;
      finish_[c] += move;
      cp.finish_time = finish_[c];
      Step step = build_acps(fin, rp, N_, S_).steps.front();
      step.label = cid + " rearrange";
      linear_[c].push_back(step);
      tasks_[*task_of_[c]].steps.push_back(step);
      for (auto& ch : choices_)
        if (ch.switch_id == cid) ch.finish_time = finish_[c];
    }
    choice.rearrangements.push_back(std::move(d));
  }

  // Groups take the j-th server of every child. They are valid when the
  // members of each group hold identical block sets and the switch's
  // final placement splits each set among the members.
  bool symmetric_groups(std::size_t a, const Placement& initial, const Placement& final_place,
                        std::vector<ReduceGroup>& groups) const {
    const auto children = topo_.children(a);
    const std::size_t per = topo_.num_servers_under(children.front());
    for (std::size_t c : children)
      if (topo_.num_servers_under(c) != per) return false;
    const auto held = as_map(initial);
    const auto owns = as_map(final_place);
    std::vector<std::vector<std::size_t>> under;
    for (std::size_t c : children) under.push_back(topo_.servers_under(c));
    for (std::size_t j = 0; j < per; ++j) {
      ReduceGroup g;
      std::vector<BlockId> common;
      for (std::size_t k = 0; k < children.size(); ++k) {
        const NodeId& s = topo_.node(under[k][j]).id;
        auto h = held.find(s);
        if (h == held.end()) return false;
        std::vector<BlockId> set = h->second;
        std::sort(set.begin(), set.end());
        if (k == 0) common = set;
        else if (set != common) return false;
        auto o = owns.find(s);
        std::vector<BlockId> chunk = o == owns.end() ? std::vector<BlockId>{} : o->second;
        std::sort(chunk.begin(), chunk.end());
        g.members.push_back(s);
        g.chunks.push_back(std::move(chunk));
      }
      std::vector<BlockId> all;
      for (const auto& ch : g.chunks) all.insert(all.end(), ch.begin(), ch.end());
      std::sort(all.begin(), all.end());
      if (all != common) return false;
      groups.push_back(std::move(g));
    }
    return true;
  }

  std::vector<Step> select_symmetric(std::size_t a, const std::vector<ReduceGroup>& groups,
                                     SubPlanChoice& choice, double& best_time) {
    const int c = static_cast<int>(groups.front().members.size());
    Floats Sg = 0;
    for (const auto& g : groups) {
      Floats total = 0;
      for (const auto& ch : g.chunks) total += floats_of(ch, N_, S_);
      Sg = std::max(Sg, total);
    }
    const ModelParams params = subtree_params(topo_, a);
    std::vector<PlanKind> kinds{PlanKind::cps()};
    for (auto& f : enumerate_hcps_factorizations(c, opts_.max_hcps_steps))
      if (f.size() > 1) kinds.push_back(PlanKind::hcps(f));
    kinds.push_back(PlanKind::ring());
    if (is_power_of_two(c)) kinds.push_back(PlanKind::rhd());

    std::size_t best = 0;
    for (std::size_t i = 0; i < kinds.size(); ++i) {
      choice.candidates.push_back({kinds[i], closed_form_cost(kinds[i], c, static_cast<double>(Sg), params)});
      const auto& cur = choice.candidates[i];
      const auto& top = choice.candidates[best];
      if (cur.cost.total < top.cost.total ||
          (cur.cost.total == top.cost.total && tie_key(cur.kind, c) < tie_key(top.kind, c)))
        best = i;
    }
    choice.chosen = kinds[best];
    best_time = choice.candidates[best].cost.total;
    auto steps = reduce_scatter_steps(kinds[best], groups, N_, S_);
    for (std::size_t k = 0; k < steps.size(); ++k)
      steps[k].label = topo_.node(a).id + " rs: " + kinds[best].to_string() + " step " + std::to_string(k);
    return steps;
  }

  const Topology& topo_;
  Floats S_;
  int N_;
  PlannerOptions opts_;
  std::map<NodeId, BasicPlan> basic_;
  std::vector<double> finish_;
  std::vector<std::vector<Step>> linear_;
  std::vector<std::optional<std::size_t>> task_of_;
  std::vector<SimTask> tasks_;
  std::vector<std::optional<std::size_t>> parent_task_;
  std::vector<SubPlanChoice> choices_;
};

void basic_rec(const Topology& topo, std::size_t node, int N, std::map<NodeId, BasicPlan>& out) {
  const NodeId& id = topo.node(node).id;
  if (topo.is_server(node)) {
    std::vector<BlockId> all(N);
    for (int b = 0; b < N; ++b) all[b] = b;
    BasicPlan bp;
    bp.initial_place = {{id, all}};
    bp.final_place = bp.initial_place;
    out[id] = std::move(bp);
    return;
  }
  for (std::size_t c : topo.children(node)) basic_rec(topo, c, N, out);

  BasicPlan bp;
  for (std::size_t c : topo.children(node)) {
    const auto& f = out.at(topo.node(c).id).final_place;
    bp.initial_place.insert(bp.initial_place.end(), f.begin(), f.end());
  }
  const int n = static_cast<int>(topo.num_servers_under(node));
  const int base = N / n;
  int remain = N % n;
  std::vector<bool> taken(N, false);
  std::vector<int> shortfall;
  for (const auto& [server, blocks] : bp.initial_place) {
    int quota = base;
    if (remain > 0) {
      ++quota;
      --remain;
    }
    PlacementEntry e{server, {}};
    for (BlockId b : blocks) {
      if (quota == 0) break;
      if (taken[b]) continue;
      taken[b] = true;
      e.blocks.push_back(b);
      --quota;
    }
    bp.final_place.push_back(std::move(e));
    shortfall.push_back(quota);
  }
  // A server whose own blocks were all claimed earlier tops up from the
  // lowest free blocks.
  BlockId next = 0;
  for (std::size_t i = 0; i < bp.final_place.size(); ++i)
    for (; shortfall[i] > 0; --shortfall[i]) {
      while (taken[next]) ++next;
      taken[next] = true;
      bp.final_place[i].blocks.push_back(next);
    }
  for (auto& e : bp.final_place) std::sort(e.blocks.begin(), e.blocks.end());
  out[id] = std::move(bp);
}

}  // namespace

std::map<NodeId, BasicPlan> generate_basic_plan(const Topology& topo, const NodeId& node,
                                                int num_total_servers) {
  if (num_total_servers < static_cast<int>(topo.num_servers()))
    throw ValidationError("fewer blocks than servers");
  std::map<NodeId, BasicPlan> out;
  basic_rec(topo, topo.index_of(node), num_total_servers, out);
  return out;
}

double all_transfer_out_time(const Topology& topo, const NodeId& child, const Placement& place,
                             int total_blocks, Floats S) {
  const Node& node = topo.node(topo.index_of(child));
  if (!node.uplink) throw ValidationError("'" + child + "' has no uplink");
  double B = 0;
  int senders = 0;
  for (const auto& e : place) {
    if (e.blocks.empty()) continue;
    ++senders;
    B += static_cast<double>(floats_of(e.blocks, total_blocks, S));
  }
  if (senders == 0) return 0.0;
  return round_trip(1, B, 0, 0, senders, link_params(*node.uplink)).total;
}

ModelParams subtree_params(const Topology& topo, std::size_t node) {
  ModelParams p;
  bool first_link = true;
  for (std::size_t v : subtree_nodes(topo, node)) {
    const Node& nd = topo.node(v);
    if (v != node && nd.uplink) {
      const LinkParams& l = *nd.uplink;
      p.alpha = std::max(p.alpha, l.alpha);
      p.beta = std::max(p.beta, l.beta);
      p.epsilon = std::max(p.epsilon, l.epsilon);
      p.w_t = first_link ? l.w_t : std::min(p.w_t, l.w_t);
      first_link = false;
    }
    if (nd.compute) {
      p.gamma = std::max(p.gamma, nd.compute->gamma);
      p.delta = std::max(p.delta, nd.compute->delta);
    }
  }
  return p;
}

const SubPlanChoice& GenTreeReport::choice(const NodeId& sw) const {
  for (const auto& c : choices)
    if (c.switch_id == sw) return c;
  throw ValidationError("no plan choice for '" + sw + "'");
}

GenTreeReport gentree(const Topology& topo, Floats S, const PlannerOptions& opts) {
  if (S < 1) throw ValidationError("data size must be at least 1 float");
  if (opts.max_hcps_steps < 1) throw ValidationError("max HCPS steps must be >= 1");
  return Planner(topo, S, opts).run();
}

}  // namespace arplan
