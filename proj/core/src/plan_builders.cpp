#include <algorithm>
#include <map>
#include <set>
#include <tuple>

#include "arplan/error.hpp"
#include "arplan/plan.hpp"

namespace arplan {

namespace {

struct Move {
  NodeId src;
  NodeId dst;
  BlockId block;
};

// Turns raw moves into a step. Every destination already holds a partial
// of the block, so the reduce fan-in is arrivals + 1.
Step make_step(const std::vector<Move>& moves, int total_blocks, Floats S, std::string label) {
  Step step;
  step.label = std::move(label);
  std::map<std::pair<NodeId, BlockId>, int> arrivals;
  for (const Move& m : moves) {
    step.transfers.push_back({m.src, m.dst, m.block, block_size(m.block, total_blocks, S)});
    ++arrivals[{m.dst, m.block}];
  }
  for (const auto& [key, count] : arrivals) step.reduces.push_back({key.first, key.second, count + 1});
  return step;
}

void check_groups(std::span<const ReduceGroup> groups) {
  if (groups.empty()) throw ValidationError("no reduce groups");
  const std::size_t c = groups.front().members.size();
  for (const ReduceGroup& g : groups) {
    if (g.members.size() != c) throw ValidationError("reduce groups differ in size");
    if (g.chunks.size() != c) throw ValidationError("reduce group needs one chunk per member");
  }
  if (c < 2) throw ValidationError("reduce groups need at least 2 members");
}

void send_chunk(std::vector<Move>& moves, const NodeId& src, const NodeId& dst,
                const std::vector<BlockId>& chunk) {
  for (BlockId b : chunk) moves.push_back({src, dst, b});
}

// Item lists are halved between partners each round; the member with a 0
// bit keeps the first ceil(n/2) items. With p items and p members, member
// v ends owning item v.
std::vector<std::vector<Move>> rhd_rounds(const std::vector<NodeId>& members,
                                          const std::vector<std::vector<BlockId>>& items) {
  const int p = static_cast<int>(members.size());
  const int L = ceil_log2(p);
  std::vector<std::vector<int>> held(p);
  for (int v = 0; v < p; ++v)
    for (int i = 0; i < static_cast<int>(items.size()); ++i) held[v].push_back(i);
  std::vector<std::vector<Move>> rounds;
  for (int k = 0; k < L; ++k) {
    const int shift = L - 1 - k;
    std::vector<Move> moves;
    std::vector<std::vector<int>> next(p);
    for (int v = 0; v < p; ++v) {
      const int partner = v ^ (1 << shift);
      const auto& list = held[v];
      const auto half = static_cast<std::ptrdiff_t>((list.size() + 1) / 2);
      const bool low = ((v >> shift) & 1) == 0;
      std::vector<int> keep(low ? list.begin() : list.begin() + half, low ? list.begin() + half : list.end());
      std::vector<int> give(low ? list.begin() + half : list.begin(), low ? list.end() : list.begin() + half);
      for (int item : give) send_chunk(moves, members[v], members[partner], items[item]);
      next[v] = std::move(keep);
    }
    held = std::move(next);
    rounds.push_back(std::move(moves));
  }
  return rounds;
}

std::vector<int> digits_of(int i, const std::vector<int>& radix) {
  std::vector<int> d(radix.size());
  for (std::size_t k = 0; k < radix.size(); ++k) {
    d[k] = i % radix[k];
    i /= radix[k];
  }
  return d;
}

std::vector<std::vector<Move>> group_rounds(const PlanKind& kind, const ReduceGroup& g) {
  const int c = static_cast<int>(g.members.size());
  std::vector<std::vector<Move>> rounds;
  switch (kind.type) {
    case PlanKind::Type::CPS:
    case PlanKind::Type::ACPS: {
      std::vector<Move> moves;
      for (int i = 0; i < c; ++i)
        for (int j = 0; j < c; ++j)
          if (i != j) send_chunk(moves, g.members[i], g.members[j], g.chunks[j]);
      rounds.push_back(std::move(moves));
      break;
    }
    case PlanKind::Type::HCPS: {
      const auto& f = kind.fanins;
      long long prod = 1;
      for (int x : f) {
        if (x < 2) throw ValidationError("HCPS fan-ins must be >= 2");
        prod *= x;
      }
      if (prod != c)
        throw ValidationError("HCPS fan-ins " + kind.to_string() + " do not multiply to " +
                              std::to_string(c));
      std::vector<std::vector<int>> digits(c);
      for (int i = 0; i < c; ++i) digits[i] = digits_of(i, f);
      // held[i]: chunk indices whose digits 0..k-1 agree with member i.
      std::vector<std::vector<int>> held(c);
      for (int i = 0; i < c; ++i)
        for (int q = 0; q < c; ++q) held[i].push_back(q);
      for (std::size_t k = 0; k < f.size(); ++k) {
        std::vector<Move> moves;
        std::vector<std::vector<int>> next(c);
        for (int i = 0; i < c; ++i) {
          for (int q : held[i]) {
            if (digits[q][k] == digits[i][k]) {
              next[i].push_back(q);
              continue;
            }
            // Peer differs from i only in digit k, where it matches q.
            int peer = i;
            int scale = 1;
            for (std::size_t t = 0; t < k; ++t) scale *= f[t];
            peer += (digits[q][k] - digits[i][k]) * scale;
            send_chunk(moves, g.members[i], g.members[peer], g.chunks[q]);
          }
        }
        held = std::move(next);
        rounds.push_back(std::move(moves));
      }
      break;
    }
    case PlanKind::Type::Ring:
      for (int j = 0; j < c - 1; ++j) {
        std::vector<Move> moves;
        for (int i = 0; i < c; ++i) {
          const int q = ((i - j - 1) % c + c) % c;
          send_chunk(moves, g.members[i], g.members[(i + 1) % c], g.chunks[q]);
        }
        rounds.push_back(std::move(moves));
      }
      break;
    case PlanKind::Type::RHD:
      if (!is_power_of_two(c)) throw ValidationError("group RHD needs a power-of-two group size");
      rounds = rhd_rounds(g.members, g.chunks);
      break;
    case PlanKind::Type::ReduceBroadcast:
      throw ValidationError("reduce-broadcast is not a group ReduceScatter");
  }
  return rounds;
}

std::string round_label(const PlanKind& kind, std::size_t k) {
  return "rs: " + kind.to_string() + " step " + std::to_string(k);
}

void check_servers(const std::vector<NodeId>& servers) {
  if (servers.size() < 2) throw ValidationError("AllReduce needs at least 2 servers");
  std::set<NodeId> seen;
  for (const NodeId& s : servers)
    if (!seen.insert(s).second) throw ValidationError("duplicate server '" + s + "'");
}

}  // namespace

std::vector<Step> reduce_scatter_steps(const PlanKind& kind, std::span<const ReduceGroup> groups,
                                       int total_blocks, Floats S) {
  check_groups(groups);
  std::vector<std::vector<Move>> merged;
  for (const ReduceGroup& g : groups) {
    auto rounds = group_rounds(kind, g);
    if (merged.size() < rounds.size()) merged.resize(rounds.size());
    for (std::size_t k = 0; k < rounds.size(); ++k)
      merged[k].insert(merged[k].end(), rounds[k].begin(), rounds[k].end());
  }
  std::vector<Step> steps;
  for (std::size_t k = 0; k < merged.size(); ++k)
    steps.push_back(make_step(merged[k], total_blocks, S, round_label(kind, k)));
  return steps;
}

Plan build_plan(const PlanKind& kind, const std::vector<NodeId>& servers, Floats S) {
  check_servers(servers);
  if (S < 1) throw ValidationError("data size must be at least 1 float");
  const int N = static_cast<int>(servers.size());
  Plan rs;
  rs.n = N;
  rs.size = S;
  rs.servers = servers;

  std::vector<std::vector<BlockId>> single(N);
  for (int b = 0; b < N; ++b) single[b] = {b};
  std::vector<BlockId> all(N);
  for (int b = 0; b < N; ++b) all[b] = b;

  if (kind.type == PlanKind::Type::ReduceBroadcast) {
    std::vector<Move> moves;
    for (int i = 1; i < N; ++i)
      for (BlockId b : all) moves.push_back({servers[i], servers[0], b});
    rs.steps.push_back(make_step(moves, N, S, "rs: rb reduce"));
  } else if (kind.type == PlanKind::Type::RHD && !is_power_of_two(N)) {
    // Fold the first r even ranks into their odd neighbours, run the
    // power-of-two core over all N blocks, unfold in the AllGather.
    const int p = 1 << (ceil_log2(N) - 1);
    const int r = N - p;
    std::vector<Move> fold;
    std::vector<NodeId> core;
    for (int i = 0; i < r; ++i) {
      for (BlockId b : all) fold.push_back({servers[2 * i], servers[2 * i + 1], b});
      core.push_back(servers[2 * i + 1]);
    }
    for (int i = 2 * r; i < N; ++i) core.push_back(servers[i]);
    rs.steps.push_back(make_step(fold, N, S, "rs: rhd fold"));
    auto rounds = rhd_rounds(core, single);
    for (std::size_t k = 0; k < rounds.size(); ++k)
      rs.steps.push_back(make_step(rounds[k], N, S, round_label(kind, k)));
  } else {
    ReduceGroup g{servers, single};
    rs.steps = reduce_scatter_steps(kind, std::span<const ReduceGroup>(&g, 1), N, S);
  }
  rs.allgather_begin = rs.steps.size();
  return complete_allreduce(rs);
}

Plan build_acps(const Placement& initial, const Placement& final_place, int total_blocks, Floats S) {
  if (total_blocks < 1) throw ValidationError("block count must be positive");
  std::map<BlockId, NodeId> owner;
  for (const PlacementEntry& e : final_place)
    for (BlockId b : e.blocks) {
      if (b < 0 || b >= total_blocks) throw ValidationError("block " + std::to_string(b) + " out of range");
      if (!owner.emplace(b, e.server).second)
        throw ValidationError("block " + std::to_string(b) + " has two final owners");
    }
  std::set<std::pair<NodeId, BlockId>> held;
  std::set<BlockId> initial_blocks;
  for (const PlacementEntry& e : initial)
    for (BlockId b : e.blocks) {
      if (!owner.count(b))
        throw ValidationError("block " + std::to_string(b) + " has no final owner");
      if (!held.emplace(e.server, b).second)
        throw ValidationError("server '" + e.server + "' lists block " + std::to_string(b) + " twice");
      initial_blocks.insert(b);
    }
  for (const auto& [b, _] : owner)
    if (!initial_blocks.count(b))
      throw ValidationError("block " + std::to_string(b) + " is not held initially");

  Plan plan;
  plan.n = total_blocks;
  plan.size = S;
  std::set<NodeId> seen;
  for (const auto* place : {&initial, &final_place})
    for (const PlacementEntry& e : *place)
      if (seen.insert(e.server).second) plan.servers.push_back(e.server);

  Step step;
  step.label = "rs: acps";
  std::map<std::pair<NodeId, BlockId>, int> arrivals;
  for (const PlacementEntry& e : initial)
    for (BlockId b : e.blocks) {
      const NodeId& dst = owner.at(b);
      if (dst == e.server) continue;
      step.transfers.push_back({e.server, dst, b, block_size(b, total_blocks, S)});
      ++arrivals[{dst, b}];
    }
  for (const auto& [key, count] : arrivals) {
    const int fan_in = count + (held.count(key) ? 1 : 0);
    if (fan_in >= 2) step.reduces.push_back({key.first, key.second, fan_in});
  }
  plan.steps.push_back(std::move(step));
  plan.allgather_begin = plan.steps.size();
  return plan;
}

}  // namespace arplan
