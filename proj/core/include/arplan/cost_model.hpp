#pragma once

#include <boost/multiprecision/cpp_int.hpp>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace arplan {

using Rational = boost::multiprecision::cpp_rational;

/// Coefficients of the five-term time model. `combined`, when set, is a
/// fitted (2*beta + gamma) aggregate that replaces beta and gamma.
struct ModelParams {
  double alpha = 0.0;
  double beta = 0.0;
  double gamma = 0.0;
  double delta = 0.0;
  double epsilon = 0.0;
  int w_t = 1;
  std::optional<double> combined;
};

/// Per-term time split, in seconds.
struct CostBreakdown {
  double latency = 0.0;
  double bandwidth = 0.0;
  double compute = 0.0;
  double memory = 0.0;
  double incast = 0.0;
  double total = 0.0;
  /// Set when bandwidth carries (B/2)*combined and compute is folded in.
  bool combined = false;
};

/// T = A*alpha + B*beta + C*gamma + D*delta + max(w - w_t, 0)*B*epsilon.
CostBreakdown model_eval(double A, double B, double C, double D, double w,
                         const ModelParams& params);

struct PlanKind {
  enum class Type { ReduceBroadcast, Ring, RHD, CPS, HCPS, ACPS };

  Type type = Type::CPS;
  std::vector<int> fanins;  // HCPS only

  static PlanKind reduce_broadcast() { return {Type::ReduceBroadcast, {}}; }
  static PlanKind ring() { return {Type::Ring, {}}; }
  static PlanKind rhd() { return {Type::RHD, {}}; }
  static PlanKind cps() { return {Type::CPS, {}}; }
  static PlanKind hcps(std::vector<int> f) { return {Type::HCPS, std::move(f)}; }
  static PlanKind acps() { return {Type::ACPS, {}}; }

  /// Number of plan steps (the latency coefficient) for `n` servers.
  int steps(int n) const;

  /// "rb", "ring", "rhd", "cps", "acps" or "hcps [8,3]".
  std::string to_string() const;
  /// Accepts the to_string forms plus "hcps:8,3" / "8x3". Throws
  /// ValidationError on anything else.
  static PlanKind parse(const std::string& text);

  bool operator==(const PlanKind&) const = default;
};

/// Exact coefficients of one plan's cost: A steps, B floats on the wire,
/// C reduce ops, D memory ops (all per critical-path server), and E the
/// incast weight sum(max(w - w_t, 0) * B_step).
struct CostCoefficients {
  Rational A, B, C, D, E;
};

/// Coefficients of the closed-form row for `kind` on a single switch.
/// Throws ValidationError for ACPS, N < 2, S <= 0 or a bad factorization.
CostCoefficients closed_form_coefficients(const PlanKind& kind, int N, const Rational& S, int w_t);

/// Three-term (alpha, beta, gamma) coefficients of the classic model;
/// only A, B and C are populated.
CostCoefficients classic_coefficients(const PlanKind& kind, int N, const Rational& S);

/// Converts exact coefficients into seconds.
CostBreakdown evaluate(const CostCoefficients& c, const ModelParams& params);

CostBreakdown closed_form_cost(const PlanKind& kind, int N, double S, const ModelParams& params);

/// (N+1)/N * S * delta.
double memory_lower_bound(int N, double S, double delta);
Rational memory_lower_bound_coefficient(int N, const Rational& S);

/// 2(N-1)/N * S floats.
double bandwidth_optimal_traffic(int N, double S);

struct OptimalityFlags {
  bool delta_optimal = false;
  bool epsilon_optimal = false;
};

/// Flags from exact coefficients.
OptimalityFlags optimality_flags(const CostCoefficients& c, int N, const Rational& S);
/// Flags from a breakdown produced by closed_form_cost.
OptimalityFlags optimality_flags(const CostBreakdown& cost, int N, double S,
                                 const ModelParams& params);

/// All ordered fan-in lists with every entry >= 2, product N and length
/// in [1, max_steps]. Shorter lists first, then lexicographically
/// descending.
std::vector<std::vector<int>> enumerate_hcps_factorizations(int N, int max_steps);

bool is_power_of_two(long long n);
int ceil_log2(long long n);

}  // namespace arplan
