#include "arplan/simulator.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <ostream>
#include <unordered_map>

#include <fmt/format.h>

#include "arplan/error.hpp"

namespace arplan {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kBatch = 1e-9;  // relative completion batching window

enum class Phase { Waiting, Alpha, Comm, Compute, Done };

struct Flow {
  std::size_t task = 0;
  std::vector<int> route;  // link ids: 2*node (+0 up, +1 down)
  double size = 0.0;
  double remaining = 0.0;
  double rate = 0.0;
  std::size_t src = 0, dst = 0;
};

struct PreparedStep {
  std::vector<Flow> flows;
  double alpha = 0.0;
  double compute = 0.0, gamma = 0.0, delta = 0.0;
};

struct TaskState {
  Phase phase = Phase::Waiting;
  std::size_t step = 0;
  double phase_end = 0.0;
  double comm_start = 0.0;
  std::size_t open_flows = 0;
  std::size_t timing = 0;  // index into result steps
  double finish = 0.0;
  int waiting_on = 0;
  std::vector<std::size_t> timings;
};

class Engine {
 public:
  Engine(const std::vector<SimTask>& tasks, int n, Floats S, const Topology& topo, bool zero_eps,
         std::ostream* trace)
      : tasks_(tasks), n_(n), S_(S), topo_(topo), zero_eps_(zero_eps), trace_(trace),
        state_(tasks.size()), dependents_(tasks.size()), link_count_(2 * topo.size(), 0) {
    for (std::size_t t = 0; t < tasks.size(); ++t)
      for (std::size_t d : tasks[t].deps) {
        if (d >= tasks.size()) throw ValidationError("task dependency out of range");
        dependents_[d].push_back(t);
        ++state_[t].waiting_on;
      }
  }

  SimResult run() {
    for (std::size_t t = 0; t < tasks_.size(); ++t)
      if (state_[t].waiting_on == 0) start_task(t);
    settle();
    while (true) {
      if (dirty_) solve_rates();
      double next = kInf;
      for (const auto& s : state_)
        if (s.phase == Phase::Alpha || s.phase == Phase::Compute) next = std::min(next, s.phase_end);
      double dt = kInf;
      for (const Flow& f : active_) dt = std::min(dt, f.remaining / f.rate);
      if (now_ + dt < next) next = now_ + dt;
      if (next == kInf) break;
      advance(next);
      settle();
    }
    for (std::size_t t = 0; t < tasks_.size(); ++t)
      if (state_[t].phase != Phase::Done) throw InternalError("task dependency cycle");
    return finish_result();
  }

 private:
  void log(const std::string& event, const std::string& where, const std::string& detail) {
    if (trace_) *trace_ << fmt::format("{:.9g}\t{}\t{}\t{}\n", now_, event, where, detail);
  }

  std::size_t server_index(const NodeId& id) {
    if (!topo_.contains(id)) throw ValidationError("plan references unknown server '" + id + "'");
    const std::size_t idx = topo_.index_of(id);
    if (!topo_.is_server(idx)) throw ValidationError("'" + id + "' is not a server");
    return idx;
  }

  std::vector<int> route(std::size_t src, std::size_t dst) {
    const std::size_t lca = topo_.lowest_common_ancestor(src, dst);
    std::vector<int> r;
    for (std::size_t v : topo_.path_up(src, lca)) r.push_back(static_cast<int>(2 * v));
    auto down = topo_.path_up(dst, lca);
    for (auto it = down.rbegin(); it != down.rend(); ++it) r.push_back(static_cast<int>(2 * *it + 1));
    return r;
  }

  const LinkParams& link(int id) const { return *topo_.node(static_cast<std::size_t>(id / 2)).uplink; }

  PreparedStep prepare(std::size_t task, const Step& step) {
    PreparedStep p;
    std::map<std::pair<std::size_t, std::size_t>, double> pairs;
    for (const Transfer& t : step.transfers) {
      const std::size_t s = server_index(t.src), d = server_index(t.dst);
      if (s == d) throw ValidationError("self transfer on '" + t.src + "'");
      pairs[{s, d}] += static_cast<double>(t.size);
    }
    for (const auto& [key, size] : pairs) {
      Flow f;
      f.task = task;
      f.src = key.first;
      f.dst = key.second;
      f.route = route(key.first, key.second);
      f.size = f.remaining = size;
      for (int l : f.route) p.alpha = std::max(p.alpha, link(l).alpha);
      if (size > 0) p.flows.push_back(std::move(f));
    }
    std::unordered_map<std::size_t, std::pair<double, double>> per_server;
    for (const ReduceOp& r : step.reduces) {
      const std::size_t s = server_index(r.server);
      const ComputeParams& cp = *topo_.node(s).compute;
      const double sz = static_cast<double>(block_size(r.block, n_, S_));
      auto& acc = per_server[s];
      acc.first += (r.fan_in - 1) * sz * cp.gamma;
      acc.second += (r.fan_in + 1) * sz * cp.delta;
    }
    // Deterministic argmax: lowest node index among equals.
    std::size_t best = std::numeric_limits<std::size_t>::max();
    for (const auto& [s, gd] : per_server) {
      const double total = gd.first + gd.second;
      if (total > p.compute || (total == p.compute && s < best && total > 0)) {
        p.compute = total;
        p.gamma = gd.first;
        p.delta = gd.second;
        best = s;
      }
    }
    return p;
  }

  void start_task(std::size_t t) {
    log("task_start", tasks_[t].name, "");
    begin_step(t);
  }

  void begin_step(std::size_t t) {
    TaskState& s = state_[t];
    if (s.step >= tasks_[t].steps.size()) {
      s.phase = Phase::Done;
      s.finish = now_;
      log("task_end", tasks_[t].name, "");
      for (std::size_t d : dependents_[t]) {
        state_[d].waiting_on -= 1;
        if (state_[d].waiting_on == 0) pending_starts_.push_back(d);
      }
      return;
    }
    const Step& step = tasks_[t].steps[s.step];
    prepared_[t] = prepare(t, step);
    StepTiming timing;
    timing.task = tasks_[t].name;
    timing.label = step.label;
    timing.start = now_;
    timing.alpha_time = prepared_[t].alpha;
    s.timing = result_.steps.size();
    s.timings.push_back(s.timing);
    result_.steps.push_back(timing);
    log("step_start", tasks_[t].name, step.label);
    s.phase = Phase::Alpha;
    s.phase_end = now_ + prepared_[t].alpha;
    if (prepared_[t].alpha <= 0) begin_comm(t);
  }

  void begin_comm(std::size_t t) {
    TaskState& s = state_[t];
    s.phase = Phase::Comm;
    s.comm_start = now_;
    auto& flows = prepared_[t].flows;
    s.open_flows = flows.size();
    for (Flow& f : flows) {
      log("flow_start", topo_.node(f.src).id + "->" + topo_.node(f.dst).id, fmt::format("{:.9g}", f.size));
      for (int l : f.route) ++link_count_[l];
      active_.push_back(std::move(f));
    }
    flows.clear();
    dirty_ = true;
    if (s.open_flows == 0) begin_compute(t);
  }

  void begin_compute(std::size_t t) {
    TaskState& s = state_[t];
    StepTiming& timing = result_.steps[s.timing];
    timing.comm_time = now_ - s.comm_start;
    timing.compute_time = prepared_[t].compute;
    timing.gamma_time = prepared_[t].gamma;
    timing.delta_time = prepared_[t].delta;
    s.phase = Phase::Compute;
    s.phase_end = now_ + prepared_[t].compute;
    if (prepared_[t].compute <= 0) end_step(t);
  }

  void end_step(std::size_t t) {
    TaskState& s = state_[t];
    log("step_end", tasks_[t].name, tasks_[t].steps[s.step].label);
    ++s.step;
    begin_step(t);
  }

  // Fires every transition due at the current time, including ones that
  // zero-length phases trigger.
  void settle() {
    bool changed = true;
    while (changed) {
      changed = false;
      while (!pending_starts_.empty()) {
        const std::size_t t = pending_starts_.front();
        pending_starts_.erase(pending_starts_.begin());
        start_task(t);
        changed = true;
      }
      for (std::size_t t = 0; t < state_.size(); ++t) {
        TaskState& s = state_[t];
        if (s.phase == Phase::Alpha && s.phase_end <= now_) {
          begin_comm(t);
          changed = true;
        } else if (s.phase == Phase::Comm && s.open_flows == 0) {
          begin_compute(t);
          changed = true;
        } else if (s.phase == Phase::Compute && s.phase_end <= now_) {
          end_step(t);
          changed = true;
        }
      }
    }
  }

  void advance(double next) {
    const double dt = next - now_;
    // Flows finishing within the batching window complete together.
    std::vector<Flow> keep;
    keep.reserve(active_.size());
    std::size_t done = 0;
    for (Flow& f : active_) {
      const double left = f.remaining - f.rate * dt;
      if (left <= kBatch * f.size || f.remaining / f.rate <= dt * (1 + kBatch)) {
        for (int l : f.route) --link_count_[l];
        state_[f.task].open_flows -= 1;
        ++done;
      } else {
        f.remaining = left;
        keep.push_back(std::move(f));
      }
    }
    now_ = next;
    if (done) {
      dirty_ = true;
      log("flows_done", "-", fmt::format("{}", done));
    }
    active_ = std::move(keep);
  }

  double capacity(int l) const {
    const LinkParams& p = link(l);
    const double w = static_cast<double>(link_count_[l]) + 1.0;
    const double eps = zero_eps_ ? 0.0 : p.epsilon;
    return 1.0 / (p.beta + std::max(w - static_cast<double>(p.w_t), 0.0) * eps);
  }

  // Progressive filling: raise all unfrozen flows together until a link
  // saturates, freeze its flows, repeat.
  void solve_rates() {
    dirty_ = false;
    if (active_.empty()) return;
    std::unordered_map<int, std::vector<std::size_t>> on_link;
    for (std::size_t i = 0; i < active_.size(); ++i)
      for (int l : active_[i].route) on_link[l].push_back(i);
    std::vector<int> links;
    links.reserve(on_link.size());
    for (const auto& [l, _] : on_link) links.push_back(l);
    std::sort(links.begin(), links.end());
    std::unordered_map<int, double> residual;
    std::unordered_map<int, std::size_t> unfrozen;
    for (int l : links) {
      residual[l] = capacity(l);
      unfrozen[l] = on_link[l].size();
    }
    std::vector<bool> frozen(active_.size(), false);
    std::size_t left = active_.size();
    while (left > 0) {
      double level = kInf;
      for (int l : links)
        if (unfrozen[l] > 0) level = std::min(level, residual[l] / static_cast<double>(unfrozen[l]));
      for (int l : links) {
        if (unfrozen[l] == 0) continue;
        if (residual[l] / static_cast<double>(unfrozen[l]) > level * (1 + 1e-12)) continue;
        for (std::size_t i : on_link[l]) {
          if (frozen[i]) continue;
          frozen[i] = true;
          --left;
          active_[i].rate = level;
          for (int m : active_[i].route) {
            residual[m] -= level;
            --unfrozen[m];
          }
        }
      }
    }
  }

  SimResult finish_result() {
    double makespan = 0.0;
    std::size_t last = 0;
    bool any = false;
    for (std::size_t t = 0; t < state_.size(); ++t)
      if (!any || state_[t].finish >= makespan) {
        makespan = state_[t].finish;
        last = t;
        any = true;
      }
    result_.total = makespan;
    if (!any) return result_;

    // Walk back through the dependency that released each task last.
    std::vector<std::size_t> path_tasks;
    std::size_t cur = last;
    while (true) {
      path_tasks.push_back(cur);
      const auto& deps = tasks_[cur].deps;
      if (deps.empty()) break;
      std::size_t pick = deps.front();
      for (std::size_t d : deps)
        if (state_[d].finish > state_[pick].finish) pick = d;
      cur = pick;
    }
    std::reverse(path_tasks.begin(), path_tasks.end());
    CostBreakdown& b = result_.breakdown;
    for (std::size_t t : path_tasks)
      for (std::size_t i : state_[t].timings) {
        const StepTiming& st = result_.steps[i];
        b.latency += st.alpha_time;
        b.bandwidth += st.comm_time;
        b.compute += st.gamma_time;
        b.memory += st.delta_time;
        result_.critical_path.push_back(st.label);
      }
    b.total = b.latency + b.bandwidth + b.compute + b.memory;
    return result_;
  }

  const std::vector<SimTask>& tasks_;
  int n_;
  Floats S_;
  const Topology& topo_;
  bool zero_eps_;
  std::ostream* trace_;
  std::vector<TaskState> state_;
  std::vector<std::vector<std::size_t>> dependents_;
  std::vector<int> link_count_;
  std::unordered_map<std::size_t, PreparedStep> prepared_;
  std::vector<Flow> active_;
  std::vector<std::size_t> pending_starts_;
  bool dirty_ = false;
  double now_ = 0.0;
  SimResult result_;
};

}  // namespace

SimResult simulate_concurrent(const std::vector<SimTask>& tasks, int n, Floats S,
                              const Topology& topo, const SimOptions& opts) {
  SimResult res = Engine(tasks, n, S, topo, false, opts.trace).run();
  if (opts.attribute_incast) {
    const SimResult base = Engine(tasks, n, S, topo, true, nullptr).run();
    CostBreakdown& b = res.breakdown;
    const double incast = std::clamp(res.total - base.total, 0.0, b.bandwidth);
    b.bandwidth -= incast;
    b.incast = incast;
    b.total = b.latency + b.bandwidth + b.compute + b.memory + b.incast;
  }
  return res;
}

SimResult simulate(const Plan& plan, const Topology& topo, const SimOptions& opts) {
  for (const NodeId& s : plan.servers)
    if (!topo.contains(s) || !topo.is_server(topo.index_of(s)))
      throw ValidationError("plan server '" + s + "' is not a server of the topology");
  std::vector<SimTask> tasks(1);
  tasks[0].name = "plan";
  tasks[0].steps = plan.steps;
  return simulate_concurrent(tasks, plan.n, plan.size, topo, opts);
}

}  // namespace arplan
