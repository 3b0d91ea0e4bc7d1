#include "aqc/ode/ode_solve.hpp"

namespace aqc::ode {

std::vector<Var> ode_solve(const physics::BoundDE& de, const Var& z0, const TimeGrid& grid,
                           const SolverConfig& cfg, Mode mode) {
    z0.value().check_finite("ode_solve initial state");
    if (mode == Mode::train || cfg.method != Method::dopri5) {
        cfg.validate();
        return fixed_step_integrate([&de](double t, const Var& z) { return de(t, z); }, z0, grid,
                                    mode == Mode::train ? Method::rk4 : cfg.method, cfg.substeps);
    }
    const auto states = dopri5_integrate(
        [&de](double t, const Tensor& z) { return de(t, num::constant(z)).value(); }, z0.value(), grid,
        cfg);
    std::vector<Var> out;
    out.reserve(states.size());
    for (const auto& s : states) out.push_back(num::constant(s));
    return out;
}

}  // namespace aqc::ode
