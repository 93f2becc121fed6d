#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "arplan/error.hpp"
#include "arplan/presets.hpp"
#include "arplan/simulator.hpp"
#include "arplan/tree_planner.hpp"
#include "support.hpp"

using namespace arplan;
using arplan::testing::server_ids;

namespace {

Plan one_step(int n, Floats S, std::vector<Transfer> transfers) {
  Plan p;
  p.n = n;
  p.size = S;
  p.servers = server_ids(n);
  p.steps.push_back(Step{std::move(transfers), {}, "x"});
  p.allgather_begin = 1;
  return p;
}

double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

}  // namespace

TEST(Simulator, SingleTransfer) {
  const Topology t = presets::single_switch(2);
  const Plan p = one_step(2, 1'000'000, {{"s0", "s1", 0, 1'000'000}});
  const SimResult r = simulate(p, t);
  const LinkParams l = presets::kMiddleSwitchLink;
  EXPECT_NEAR(r.total, l.alpha + 1e6 * l.beta, 1e-15);
  EXPECT_EQ(r.breakdown.incast, 0.0);
  EXPECT_EQ(r.breakdown.compute, 0.0);
}

TEST(Simulator, IncastLinearRegime) {
  // Fourteen senders into one receiver: w = 15, six flows over w_t = 9.
  const Topology t = presets::single_switch(15);
  std::vector<Transfer> tr;
  for (int i = 1; i < 15; ++i) tr.push_back({"s" + std::to_string(i), "s0", 0, 1000});
  const SimResult r = simulate(one_step(15, 15000, tr), t);
  const LinkParams l = presets::kMiddleSwitchLink;
  const double comm = 14 * 1000 * (l.beta + 6 * l.epsilon);
  EXPECT_LT(rel(r.total, l.alpha + comm), 1e-12);
  EXPECT_LT(rel(r.breakdown.incast, 14 * 1000 * 6 * l.epsilon), 1e-9);
}

TEST(Simulator, BelowThresholdNoIncast) {
  const Topology t = presets::single_switch(9);
  std::vector<Transfer> tr;
  for (int i = 1; i < 9; ++i) tr.push_back({"s" + std::to_string(i), "s0", 0, 1000});
  const SimResult r = simulate(one_step(9, 9000, tr), t);
  EXPECT_EQ(r.breakdown.incast, 0.0);
}

TEST(Simulator, EmptyStepPlan) {
  const Topology t = presets::single_switch(3);
  const SimResult r = simulate(one_step(3, 30, {}), t);
  EXPECT_EQ(r.total, 0.0);
  EXPECT_EQ(r.breakdown.compute, 0.0);
  EXPECT_EQ(r.breakdown.bandwidth, 0.0);
}

TEST(Simulator, MatchesClosedForm) {
  const ModelParams params = presets::middle_switch_params();
  for (int N : {2, 4, 8, 12, 16, 24}) {
    const Topology t = presets::single_switch(N);
    const Floats S = static_cast<Floats>(N) * 100'000;
    std::vector<PlanKind> kinds{PlanKind::ring(), PlanKind::cps(), PlanKind::reduce_broadcast()};
    if (is_power_of_two(N)) kinds.push_back(PlanKind::rhd());
    for (const auto& f : enumerate_hcps_factorizations(N, 3))
      if (f.size() > 1) kinds.push_back(PlanKind::hcps(f));
    for (const PlanKind& k : kinds) {
      const SimResult r = simulate(build_plan(k, server_ids(N), S), t);
      const CostBreakdown c = closed_form_cost(k, N, static_cast<double>(S), params);
      EXPECT_LT(rel(r.total, c.total), 1e-9) << k.to_string() << " N=" << N;
      EXPECT_LT(rel(r.breakdown.memory, c.memory), 1e-9) << k.to_string();
    }
  }
}

TEST(Simulator, RingHasNoIncast) {
  const SimResult r = simulate(build_plan(PlanKind::ring(), server_ids(16), 1'600'000), presets::single_switch(16));
  EXPECT_EQ(r.breakdown.incast, 0.0);
}

TEST(Simulator, DisjointSiblingsDoNotInterfere) {
  const Topology t = presets::by_name("sym6");
  const Plan a = build_plan(PlanKind::cps(), {"a0", "a1", "a2"}, 3000);
  const Plan b = build_plan(PlanKind::cps(), {"b0", "b1", "b2"}, 3000);
  const SimResult ra = simulate(a, t);
  std::vector<SimTask> tasks{{"a", a.steps, {}}, {"b", b.steps, {}}};
  const SimResult both = simulate_concurrent(tasks, 3, 3000, t);
  EXPECT_DOUBLE_EQ(both.total, ra.total);
}

TEST(Simulator, DependenciesSerialize) {
  const Topology t = presets::by_name("sym6");
  const Plan a = build_plan(PlanKind::cps(), {"a0", "a1", "a2"}, 3000);
  const double one = simulate(a, t).total;
  std::vector<SimTask> tasks{{"first", a.steps, {}}, {"second", a.steps, {0}}};
  EXPECT_NEAR(simulate_concurrent(tasks, 3, 3000, t).total, 2 * one, 1e-15);
  tasks[0].deps = {1};
  EXPECT_THROW(simulate_concurrent(tasks, 3, 3000, t), InternalError);
}

TEST(Simulator, UnknownServer) {
  Plan p = one_step(2, 100, {{"s0", "ghost", 0, 50}});
  EXPECT_THROW(simulate(p, presets::single_switch(2)), ValidationError);
}

TEST(Simulator, MonotoneInBetaAndThreshold) {
  const Plan p = build_plan(PlanKind::cps(), server_ids(16), 1'600'000);
  double prev = 0.0;
  for (double scale : {0.5, 1.0, 2.0, 4.0}) {
    LinkParams l = presets::kMiddleSwitchLink;
    l.beta *= scale;
    const double total = simulate(p, presets::single_switch(16, l)).total;
    EXPECT_GT(total, prev);
    prev = total;
  }
  prev = 1e300;
  for (int w_t : {1, 4, 9, 16, 32}) {
    LinkParams l = presets::kMiddleSwitchLink;
    l.w_t = w_t;
    const double total = simulate(p, presets::single_switch(16, l)).total;
    EXPECT_LE(total, prev);
    prev = total;
  }
}

TEST(Simulator, TraceAndDeterminism) {
  const Topology t = presets::by_name("asy7");
  const GenTreeReport rep = gentree(t, 7'000'000);
  std::ostringstream a, b;
  SimOptions oa, ob;
  oa.trace = &a;
  ob.trace = &b;
  const SimResult ra = simulate(rep.plan, t, oa);
  const SimResult rb = simulate(rep.plan, t, ob);
  EXPECT_EQ(a.str(), b.str());
  EXPECT_EQ(ra.total, rb.total);
  EXPECT_NE(a.str().find("flow_start"), std::string::npos);
  EXPECT_NE(a.str().find("step_end"), std::string::npos);
}

TEST(Simulator, BreakdownSumsToTotal) {
  const Topology t = presets::by_name("sym384");
  const GenTreeReport rep = gentree(t, 10'000'000);
  const SimResult r = simulate_concurrent(rep.tasks, rep.plan.n, rep.plan.size, t);
  const CostBreakdown& b = r.breakdown;
  EXPECT_NEAR(b.latency + b.bandwidth + b.compute + b.memory + b.incast, r.total, 1e-9 * r.total);
  EXPECT_FALSE(r.critical_path.empty());
}
