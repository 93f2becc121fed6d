#pragma once

#include <string>
#include <string_view>

#include "arplan/cost_model.hpp"
#include "arplan/fitting.hpp"
#include "arplan/plan.hpp"
#include "arplan/simulator.hpp"
#include "arplan/tree_planner.hpp"

namespace arplan {

// Every writer emits sorted keys, two-space indentation and round-trip
// float precision. Readers throw ParseError on malformed text and
// ValidationError on bad values.

std::string to_json(const Plan& plan);
Plan plan_from_json(std::string_view text);

std::string to_json(const CostBreakdown& cost);

std::string to_json(const ModelParams& params);
/// Accepts a bare parameter object or a fit result (uses its "params").
ModelParams params_from_json(std::string_view text);

std::string to_json(const SimResult& result);
std::string to_json(const FitResult& result);
std::string to_json(const GenTreeReport& report, bool include_plan = true);

}  // namespace arplan
