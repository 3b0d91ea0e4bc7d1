#pragma once

#include <vector>

#include "aqc/ode/solvers.hpp"
#include "aqc/physics_de/de_function.hpp"

namespace aqc::ode {

enum class Mode { train, infer };

/// Integrates the bound dynamics from z0 over the grid. Train mode unrolls RK4
/// with cfg.substeps steps per interval on the DE's tape; infer mode runs
/// dopri5, or cfg.method with cfg.substeps steps when that is euler or rk4. Returns one N x d state per interval.
std::vector<Var> ode_solve(const physics::BoundDE& de, const Var& z0, const TimeGrid& grid,
                           const SolverConfig& cfg, Mode mode);

}  // namespace aqc::ode
