#include "arplan/cost_model.hpp"

#include <algorithm>
#include <cctype>
#include <functional>
#include <numeric>
#include <sstream>

#include "arplan/error.hpp"

namespace arplan {

bool is_power_of_two(long long n) { return n > 0 && (n & (n - 1)) == 0; }

int ceil_log2(long long n) {
  int k = 0;
  while ((1LL << k) < n) ++k;
  return k;
}

CostBreakdown model_eval(double A, double B, double C, double D, double w,
                         const ModelParams& params) {
  CostBreakdown out;
  out.latency = A * params.alpha;
  if (params.combined) {
    out.bandwidth = (B / 2.0) * *params.combined;
    out.compute = 0.0;
    out.combined = true;
  } else {
    out.bandwidth = B * params.beta;
    out.compute = C * params.gamma;
  }
  out.memory = D * params.delta;
  out.incast = std::max(w - static_cast<double>(params.w_t), 0.0) * B * params.epsilon;
  out.total = out.latency + out.bandwidth + out.compute + out.memory + out.incast;
  return out;
}

// --- PlanKind ---------------------------------------------------------------

int PlanKind::steps(int n) const {
  switch (type) {
    case Type::ReduceBroadcast:
    case Type::CPS:
    case Type::ACPS:
      return 2;
    case Type::Ring:
      return 2 * (n - 1);
    case Type::RHD:
      return 2 * ceil_log2(n);
    case Type::HCPS:
      return 2 * static_cast<int>(fanins.size());
  }
  return 0;
}

std::string PlanKind::to_string() const {
  switch (type) {
    case Type::ReduceBroadcast: return "rb";
    case Type::Ring: return "ring";
    case Type::RHD: return "rhd";
    case Type::CPS: return "cps";
    case Type::ACPS: return "acps";
    case Type::HCPS: {
      std::string s = "hcps [";
      for (std::size_t i = 0; i < fanins.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(fanins[i]);
      }
      return s + "]";
    }
  }
  return "?";
}

namespace {

std::vector<int> parse_fanins(const std::string& text) {
  std::vector<int> out;
  std::string cur;
  auto flush = [&] {
    if (cur.empty()) return;
    try {
      std::size_t used = 0;
      int v = std::stoi(cur, &used);
      if (used != cur.size()) throw std::invalid_argument(cur);
      out.push_back(v);
    } catch (const std::exception&) {
      throw ValidationError("bad fan-in '" + cur + "'");
    }
    cur.clear();
  };
  for (char ch : text) {
    if (ch == ',' || ch == 'x' || ch == 'X' || ch == ' ' || ch == '[' || ch == ']') {
      flush();
    } else {
      cur += ch;
    }
  }
  flush();
  if (out.empty()) throw ValidationError("empty fan-in list");
  return out;
}

}  // namespace

PlanKind PlanKind::parse(const std::string& raw) {
  std::string text;
  for (char ch : raw) text += static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  auto trim = [](std::string s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.erase(s.begin());
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.pop_back();
    return s;
  };
  text = trim(text);
  if (text == "rb" || text == "reduce-broadcast" || text == "reduce_broadcast") return reduce_broadcast();
  if (text == "ring") return ring();
  if (text == "rhd") return rhd();
  if (text == "cps") return cps();
  if (text == "acps") return acps();
  if (text.rfind("hcps", 0) == 0) {
    std::string rest = trim(text.substr(4));
    if (!rest.empty() && rest.front() == ':') rest.erase(rest.begin());
    return hcps(parse_fanins(rest));
  }
  if (!text.empty() && std::isdigit(static_cast<unsigned char>(text.front())) &&
      text.find('x') != std::string::npos)
    return hcps(parse_fanins(text));
  throw ValidationError("unknown plan kind '" + raw + "'");
}

// --- Closed forms -----------------------------------------------------------

namespace {

Rational rmax0(const Rational& v) { return v > 0 ? v : Rational(0); }

void check_common(int N, const Rational& S) {
  if (N < 2) throw ValidationError("AllReduce needs N >= 2 servers");
  if (S <= 0) throw ValidationError("data size must be positive");
}

void check_fanins(const std::vector<int>& f, int N) {
  if (f.empty()) throw ValidationError("HCPS needs at least one fan-in");
  long long prod = 1;
  for (int x : f) {
    if (x < 2) throw ValidationError("HCPS fan-ins must be >= 2");
    prod *= x;
    if (prod > N) break;
  }
  if (prod != N)
    throw ValidationError("HCPS fan-ins " + PlanKind::hcps(f).to_string() +
                          " do not multiply to N=" + std::to_string(N));
}

}  // namespace

CostCoefficients closed_form_coefficients(const PlanKind& kind, int N, const Rational& S, int w_t) {
  check_common(N, S);
  const Rational n(N);
  const Rational rs = Rational(N - 1) * S / n;  // (N-1)S/N
  CostCoefficients c;
  switch (kind.type) {
    case PlanKind::Type::ReduceBroadcast:
      c.A = 2;
      c.B = 2 * Rational(N - 1) * S;
      c.C = Rational(N - 1) * S;
      c.D = Rational(N + 1) * S;
      c.E = c.B * rmax0(Rational(N - w_t));
      break;
    case PlanKind::Type::Ring:
      c.A = 2 * (N - 1);
      c.B = 2 * rs;
      c.C = rs;
      c.D = 3 * rs;
      // One flow per link: fan-in 2.
      c.E = c.B * rmax0(Rational(2 - w_t));
      break;
    case PlanKind::Type::RHD: {
      const int chi = is_power_of_two(N) ? 0 : 1;
      c.A = 2 * ceil_log2(N);
      c.B = 2 * rs + chi * 2 * S;
      c.C = rs + chi * S;
      c.D = 3 * rs + chi * 3 * S;
      c.E = c.B * rmax0(Rational(2 - w_t));
      break;
    }
    case PlanKind::Type::CPS:
      c.A = 2;
      c.B = 2 * rs;
      c.C = rs;
      c.D = Rational(N + 1) * S / n;
      c.E = c.B * rmax0(Rational(N - w_t));
      break;
    case PlanKind::Type::HCPS: {
      check_fanins(kind.fanins, N);
      const auto m = static_cast<int>(kind.fanins.size());
      c.A = 2 * m;
      c.B = 2 * rs;
      c.C = rs;
      // Step i reduces S / prod_{j<=i} f_j floats per server with fan-in
      // f_i; ReduceScatter and AllGather both see the same fan-in.
      Rational prefix(1);
      for (int f : kind.fanins) {
        prefix *= f;
        c.D += Rational(f + 1) * S / prefix;
        c.E += 2 * rmax0(Rational(f - w_t)) * Rational(f - 1) * S / prefix;
      }
      break;
    }
    case PlanKind::Type::ACPS:
      throw ValidationError("asymmetric CPS has no closed form; simulate it instead");
  }
  return c;
}

CostCoefficients classic_coefficients(const PlanKind& kind, int N, const Rational& S) {
  check_common(N, S);
  const Rational rs = Rational(N - 1) * S / Rational(N);
  CostCoefficients c;
  switch (kind.type) {
    case PlanKind::Type::ReduceBroadcast:
      c.A = 2;
      c.B = 2 * Rational(N - 1) * S;
      c.C = 2 * Rational(N - 1) * S;
      break;
    case PlanKind::Type::CPS:
      c.A = 2;
      c.B = 2 * rs;
      c.C = rs;
      break;
    case PlanKind::Type::Ring:
      c.A = 2 * (N - 1);
      c.B = 2 * rs;
      c.C = rs;
      break;
    case PlanKind::Type::RHD: {
      const int chi = is_power_of_two(N) ? 0 : 1;
      c.A = 2 * ceil_log2(N);
      c.B = 2 * rs + chi * 2 * S;
      c.C = rs + chi * S;
      break;
    }
    case PlanKind::Type::HCPS:
      check_fanins(kind.fanins, N);
      c.A = 2 * static_cast<int>(kind.fanins.size());
      c.B = 2 * rs;
      c.C = rs;
      break;
    case PlanKind::Type::ACPS:
      throw ValidationError("asymmetric CPS has no closed form");
  }
  return c;
}

CostBreakdown evaluate(const CostCoefficients& c, const ModelParams& params) {
  CostBreakdown out;
  const double A = static_cast<double>(c.A);
  const double B = static_cast<double>(c.B);
  out.latency = A * params.alpha;
  if (params.combined) {
    out.bandwidth = static_cast<double>(c.B / 2) * *params.combined;
    out.combined = true;
  } else {
    out.bandwidth = B * params.beta;
    out.compute = static_cast<double>(c.C) * params.gamma;
  }
  out.memory = static_cast<double>(c.D) * params.delta;
  out.incast = static_cast<double>(c.E) * params.epsilon;
  out.total = out.latency + out.bandwidth + out.compute + out.memory + out.incast;
  return out;
}

CostBreakdown closed_form_cost(const PlanKind& kind, int N, double S, const ModelParams& params) {
  return evaluate(closed_form_coefficients(kind, N, Rational(S), params.w_t), params);
}

Rational memory_lower_bound_coefficient(int N, const Rational& S) {
  if (N < 2) throw ValidationError("AllReduce needs N >= 2 servers");
  return Rational(N + 1) * S / Rational(N);
}

double memory_lower_bound(int N, double S, double delta) {
  return static_cast<double>(memory_lower_bound_coefficient(N, Rational(S))) * delta;
}

double bandwidth_optimal_traffic(int N, double S) {
  if (N < 2) throw ValidationError("AllReduce needs N >= 2 servers");
  return static_cast<double>(2 * Rational(N - 1) * Rational(S) / Rational(N));
}

OptimalityFlags optimality_flags(const CostCoefficients& c, int N, const Rational& S) {
  return {c.D == memory_lower_bound_coefficient(N, S), c.E == 0};
}

OptimalityFlags optimality_flags(const CostBreakdown& cost, int N, double S,
                                 const ModelParams& params) {
  return {cost.memory == memory_lower_bound(N, S, params.delta), cost.incast == 0.0};
}

std::vector<std::vector<int>> enumerate_hcps_factorizations(int N, int max_steps) {
  std::vector<std::vector<int>> out;
  if (N < 2 || max_steps < 1) return out;
  std::vector<int> cur;
  std::function<void(int, int)> rec = [&](int remaining, int len) {
    if (static_cast<int>(cur.size()) == len) {
      if (remaining == 1) out.push_back(cur);
      return;
    }
    // Descending first entry keeps each length bucket in descending
    // lexicographic order.
    for (int f = remaining; f >= 2; --f) {
      if (remaining % f) continue;
      cur.push_back(f);
      rec(remaining / f, len);
      cur.pop_back();
    }
  };
  for (int len = 1; len <= max_steps; ++len) rec(N, len);
  return out;
}

}  // namespace arplan
