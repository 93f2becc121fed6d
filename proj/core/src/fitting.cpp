#include "arplan/fitting.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "arplan/error.hpp"

namespace arplan {

namespace {

constexpr int kTerms = 4;  // alpha, k, delta, epsilon

Eigen::RowVector4d regressors(int n, double s, int w_t) {
  const double nn = n;
  return {2.0, (nn - 1) * s / nn, (nn + 1) * s / nn,
          std::max(nn - w_t, 0.0) * 2.0 * (nn - 1) * s / nn};
}

struct Solve {
  Eigen::Vector4d coef = Eigen::Vector4d::Zero();
  double sse = 0.0;
  bool ok = false;
};

// Least squares on the active columns, dropping the most negative
// coefficient until all are non-negative.
Solve clamped_least_squares(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  std::vector<int> active;
  for (int j = 0; j < kTerms; ++j)
    if (X.col(j).norm() > 0) active.push_back(j);
  Solve out;
  while (!active.empty()) {
    Eigen::MatrixXd A(X.rows(), static_cast<Eigen::Index>(active.size()));
    Eigen::VectorXd scale(active.size());
    for (std::size_t j = 0; j < active.size(); ++j) {
      scale(j) = X.col(active[j]).norm();
      A.col(j) = X.col(active[j]) / scale(j);
    }
    const Eigen::VectorXd z = A.colPivHouseholderQr().solve(y);
    int worst = -1;
    double worst_val = 0.0;
    for (std::size_t j = 0; j < active.size(); ++j) {
      const double c = z(j) / scale(j);
      if (c < worst_val) {
        worst_val = c;
        worst = static_cast<int>(j);
      }
    }
    if (worst < 0) {
      out.coef.setZero();
      for (std::size_t j = 0; j < active.size(); ++j) out.coef(active[j]) = z(j) / scale(j);
      out.sse = (X * out.coef - y).squaredNorm();
      out.ok = true;
      return out;
    }
    active.erase(active.begin() + worst);
  }
  return out;
}

}  // namespace

double cps_model_time(const ModelParams& p, int n, double s) {
  const double k = p.combined ? *p.combined : 2 * p.beta + p.gamma;
  return regressors(n, s, p.w_t).dot(Eigen::Vector4d(p.alpha, k, p.delta, p.epsilon));
}

FitResult fit_params(std::span<const Measurement> data, std::optional<int> wt_min,
                     std::optional<int> wt_max) {
  if (data.size() < 8)
    throw ValidationError("need at least 8 measurements, got " + std::to_string(data.size()));
  std::map<std::pair<int, double>, std::pair<double, int>> rows;
  std::set<int> ns;
  std::set<double> ss;
  for (const Measurement& m : data) {
    if (m.n < 2 || m.s < 1 || !(m.t > 0) || !std::isfinite(m.t) || !std::isfinite(m.s))
      throw ValidationError("invalid measurement (n=" + std::to_string(m.n) + ")");
    auto& acc = rows[{m.n, m.s}];
    acc.first += m.t;
    acc.second += 1;
    ns.insert(m.n);
    ss.insert(m.s);
  }
  if (ns.size() < 2) throw ValidationError("need at least 2 distinct server counts");
  if (ss.size() < 2) throw ValidationError("need at least 2 distinct data sizes");

  const int lo = wt_min.value_or(2);
  const int hi = wt_max.value_or(*ns.rbegin());
  if (lo < 1 || hi < lo) throw ValidationError("invalid w_t range");

  Eigen::VectorXd y(static_cast<Eigen::Index>(rows.size()));
  std::vector<std::pair<int, double>> keys;
  for (const auto& [key, acc] : rows) {
    y(static_cast<Eigen::Index>(keys.size())) = acc.first / acc.second;
    keys.push_back(key);
  }

  auto solve_at = [&](int w_t) {
    Eigen::MatrixXd X(static_cast<Eigen::Index>(keys.size()), kTerms);
    for (std::size_t i = 0; i < keys.size(); ++i)
      X.row(static_cast<Eigen::Index>(i)) = regressors(keys[i].first, keys[i].second, w_t);
    Solve sol = clamped_least_squares(X, y);
    // An incast term below rounding noise is no incast at all.
    if (sol.ok && (X.col(3) * sol.coef(3)).cwiseAbs().maxCoeff() <= 1e-9 * y.cwiseAbs().maxCoeff()) {
      X.col(3).setZero();
      sol = clamped_least_squares(X, y);
    }
    return sol;
  };
  auto adopt = [](FitResult& r, const Solve& sol, int w_t) {
    r.residual_sse = sol.sse;
    r.params = ModelParams{};
    r.params.alpha = sol.coef(0);
    r.params.combined = sol.coef(1);
    r.params.delta = sol.coef(2);
    r.params.epsilon = sol.coef(3);
    r.params.w_t = w_t;
  };

  FitResult best;
  bool have = false;
  for (int w_t = lo; w_t <= hi; ++w_t) {
    const Solve sol = solve_at(w_t);
    if (!sol.ok) {
      best.w_t_scan.emplace_back(w_t, std::numeric_limits<double>::infinity());
      continue;
    }
    best.w_t_scan.emplace_back(w_t, sol.sse);
    if (!have || sol.sse < best.residual_sse) {
      have = true;
      adopt(best, sol, w_t);
    }
  }
  if (!have) throw ValidationError("degenerate fit: every coefficient was clamped to zero");
  // Without incast the data only bound w_t from below by the largest n.
  if (best.params.epsilon == 0.0 && best.params.w_t < *ns.rbegin()) {
    const int w_t = std::clamp(*ns.rbegin(), lo, hi);
    if (const Solve sol = solve_at(w_t); sol.ok) adopt(best, sol, w_t);
  }

  if (*ns.begin() > 4)
    best.warnings.push_back("smallest server count is above 4; delta and 2*beta+gamma are poorly separated");
  if (*ns.rbegin() <= best.params.w_t)
    best.warnings.push_back("no measurement has n above w_t; epsilon is not identifiable and is reported as 0");
  return best;
}

std::pair<double, double> split_combined(double k, double link_bandwidth) {
  if (!(link_bandwidth > 0)) throw ValidationError("link bandwidth must be positive");
  const double beta = 1.0 / link_bandwidth;
  const double gamma = k - 2 * beta;
  if (gamma < 0) throw ValidationError("combined coefficient is below 2*beta; gamma would be negative");
  return {beta, gamma};
}

std::vector<Measurement> parse_measurements_csv(std::string_view text) {
  std::vector<Measurement> out;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  bool header = false;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(trim(cell));
    if (!header) {
      if (cells != std::vector<std::string>{"n", "s", "t"})
        throw ParseError("line " + std::to_string(lineno) + ": expected header 'n,s,t'");
      header = true;
      continue;
    }
    if (cells.size() != 3) throw ParseError("line " + std::to_string(lineno) + ": expected 3 columns");
    Measurement m;
    double n = 0;
    try {
      std::size_t used = 0;
      n = std::stod(cells[0], &used);
      if (used != cells[0].size()) throw std::invalid_argument("n");
      m.s = std::stod(cells[1], &used);
      if (used != cells[1].size()) throw std::invalid_argument("s");
      m.t = std::stod(cells[2], &used);
      if (used != cells[2].size()) throw std::invalid_argument("t");
    } catch (const std::exception&) {
      throw ParseError("line " + std::to_string(lineno) + ": malformed number");
    }
    if (n != std::floor(n) || m.s != std::floor(m.s))
      throw ParseError("line " + std::to_string(lineno) + ": n and s must be integers");
    m.n = static_cast<int>(n);
    out.push_back(m);
  }
  if (!header) throw ParseError("missing header 'n,s,t'");
  return out;
}

}  // namespace arplan
