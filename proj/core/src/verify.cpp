#include <cstdint>
#include <map>
#include <unordered_map>

#include "arplan/plan.hpp"

namespace arplan {

namespace {

using Kind = VerificationReport::Kind;

class TagSet {
 public:
  explicit TagSet(int n = 0) : words_((n + 63) / 64, 0) {}

  void set(int i) { words_[i / 64] |= std::uint64_t{1} << (i % 64); }
  bool intersects(const TagSet& o) const {
    for (std::size_t w = 0; w < words_.size(); ++w)
      if (words_[w] & o.words_[w]) return true;
    return false;
  }
  void merge(const TagSet& o) {
    for (std::size_t w = 0; w < words_.size(); ++w) words_[w] |= o.words_[w];
  }
  int count() const {
    int c = 0;
    for (auto w : words_) c += __builtin_popcountll(w);
    return c;
  }

 private:
  std::vector<std::uint64_t> words_;
};

VerificationReport fail(Kind kind, std::optional<std::size_t> step, std::string msg) {
  return {false, kind, step, std::move(msg)};
}

std::string where(const NodeId& server, BlockId b) {
  return "server '" + server + "' block " + std::to_string(b);
}

}  // namespace

VerificationReport verify_allreduce(const Plan& plan, int n) {
  if (n < 1 || static_cast<int>(plan.servers.size()) != n)
    return fail(Kind::UnknownServer, std::nullopt,
                "plan lists " + std::to_string(plan.servers.size()) + " servers, expected " +
                    std::to_string(n));
  std::unordered_map<NodeId, int> rank;
  for (int i = 0; i < n; ++i)
    if (!rank.emplace(plan.servers[i], i).second)
      return fail(Kind::UnknownServer, std::nullopt, "duplicate server '" + plan.servers[i] + "'");
  const int blocks = n;

  // state[server][block]
  std::vector<std::vector<TagSet>> state(n, std::vector<TagSet>(blocks, TagSet(n)));
  for (int i = 0; i < n; ++i)
    for (int b = 0; b < blocks; ++b) state[i][b].set(i);

  for (std::size_t si = 0; si < plan.steps.size(); ++si) {
    const Step& step = plan.steps[si];
    std::map<std::pair<int, int>, std::vector<int>> arrivals;  // (dst, block) -> srcs
    for (const Transfer& t : step.transfers) {
      auto s = rank.find(t.src);
      auto d = rank.find(t.dst);
      if (s == rank.end()) return fail(Kind::UnknownServer, si, "unknown server '" + t.src + "'");
      if (d == rank.end()) return fail(Kind::UnknownServer, si, "unknown server '" + t.dst + "'");
      if (s->second == d->second) return fail(Kind::BadTransfer, si, "self transfer at " + where(t.src, t.block));
      if (t.block < 0 || t.block >= blocks)
        return fail(Kind::BadTransfer, si, "block " + std::to_string(t.block) + " out of range");
      if (t.size != block_size(t.block, n, plan.size))
        return fail(Kind::BadTransfer, si, "wrong size for block " + std::to_string(t.block));
      arrivals[{d->second, t.block}].push_back(s->second);
    }
    std::map<std::pair<int, int>, int> fan_in;
    for (const ReduceOp& r : step.reduces) {
      auto s = rank.find(r.server);
      if (s == rank.end()) return fail(Kind::UnknownServer, si, "unknown server '" + r.server + "'");
      if (r.block < 0 || r.block >= blocks || r.fan_in < 2)
        return fail(Kind::BadReduce, si, "malformed reduce at " + where(r.server, r.block));
      if (!fan_in.emplace(std::pair{s->second, r.block}, r.fan_in).second)
        return fail(Kind::BadReduce, si, "two reduces at " + where(r.server, r.block));
    }
    for (const auto& [key, f] : fan_in)
      if (!arrivals.count(key))
        return fail(Kind::MissingTag, si, "reduce without input at " + where(plan.servers[key.first], key.second));

    // All reads see the state at step start.
    auto next = state;
    for (const auto& [key, srcs] : arrivals) {
      const auto [dst, b] = key;
      const int count = static_cast<int>(srcs.size());
      auto it = fan_in.find(key);
      TagSet acc(n);
      bool keep_local = false;
      if (it == fan_in.end()) {
        if (count != 1)
          return fail(Kind::BadReduce, si, std::to_string(count) + " arrivals without a reduce at " +
                                               where(plan.servers[dst], b));
      } else if (it->second == count + 1) {
        keep_local = true;
      } else if (it->second > count + 1) {
        return fail(Kind::MissingTag, si, "reduce expects " + std::to_string(it->second) +
                                              " partials, got " + std::to_string(count + 1) + " at " +
                                              where(plan.servers[dst], b));
      } else if (it->second != count) {
        return fail(Kind::BadReduce, si, "fan-in " + std::to_string(it->second) + " does not match " +
                                             std::to_string(count) + " arrivals at " +
                                             where(plan.servers[dst], b));
      }
      if (keep_local) acc = state[dst][b];
      for (int src : srcs) {
        if (acc.intersects(state[src][b]))
          return fail(Kind::DuplicateTag, si, "tag counted twice at " + where(plan.servers[dst], b));
        acc.merge(state[src][b]);
      }
      next[dst][b] = std::move(acc);
    }
    state = std::move(next);
  }

  for (int i = 0; i < n; ++i)
    for (int b = 0; b < blocks; ++b)
      if (state[i][b].count() != n)
        return fail(Kind::MissingTag, std::nullopt,
                    where(plan.servers[i], b) + " ends with " + std::to_string(state[i][b].count()) +
                        " of " + std::to_string(n) + " contributions");
  return {};
}

}  // namespace arplan
