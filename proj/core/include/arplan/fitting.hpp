#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "arplan/cost_model.hpp"

namespace arplan {

/// Mean time of one Co-located PS AllReduce of s floats over n servers.
struct Measurement {
  int n = 0;
  double s = 0.0;
  double t = 0.0;
};

struct FitResult {
  /// alpha, combined (2*beta + gamma), delta, epsilon and w_t; beta and
  /// gamma stay 0 until split_combined is applied.
  ModelParams params;
  double residual_sse = 0.0;
  std::vector<std::pair<int, double>> w_t_scan;
  std::vector<std::string> warnings;
};

/// Co-located PS time under the fitted form:
/// 2a + (n-1)s/n k + (n+1)s/n d + max(n - w_t, 0) 2(n-1)s/n e.
double cps_model_time(const ModelParams& params, int n, double s);

/// Non-negative least squares for each w_t in [wt_min, wt_max] (default
/// 2..max n); the lowest residual wins, ties toward the smaller w_t.
/// Repeated (n, s) rows are averaged first. Throws ValidationError when
/// the system is underdetermined or every coefficient is clamped away.
FitResult fit_params(std::span<const Measurement> data, std::optional<int> wt_min = std::nullopt,
                     std::optional<int> wt_max = std::nullopt);

/// beta = 1 / bandwidth, gamma = k - 2 beta. Throws ValidationError if
/// gamma would be negative or bandwidth is not positive.
std::pair<double, double> split_combined(double k, double link_bandwidth);

/// Parses `n,s,t` CSV text (header required). Throws ParseError with the
/// offending line number.
std::vector<Measurement> parse_measurements_csv(std::string_view text);

}  // namespace arplan
