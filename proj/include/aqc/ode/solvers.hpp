#pragma once

// Explicit integrators for dz/dt = f(t, z).
//
// The fixed-step methods run on Vars so that every stage is recorded on the
// caller's tape; the adaptive Dormand-Prince method runs on plain Tensors and
// is used for inference only.

#include <cstddef>
#include <functional>
#include <vector>

#include "aqc/numcore/autodiff.hpp"

namespace aqc::ode {

using num::Tensor;
using num::Var;

enum class Method { euler, rk4, dopri5 };

struct SolverConfig {
    Method method = Method::dopri5;
    double rtol = 1e-5;
    double atol = 1e-5;
    double h_init = 0.1;
    int max_steps = 100000;
    double safety = 0.9;
    double factor_min = 0.2;
    double factor_max = 10.0;
    int substeps = 2;  // fixed-step methods only

    /// ConfigError on non-positive tolerances, steps or a factor range that
    /// does not bracket 1.
    void validate() const;
};

/// Strictly increasing times starting at 0.
class TimeGrid {
public:
    explicit TimeGrid(std::vector<double> times);
    /// 0, 1, ..., steps.
    static TimeGrid uniform(std::size_t steps);

    const std::vector<double>& times() const { return times_; }
    std::size_t intervals() const { return times_.size() - 1; }

private:
    std::vector<double> times_;
};

using VarField = std::function<Var(double, const Var&)>;
using TensorField = std::function<Tensor(double, const Tensor&)>;

/// Euler or RK4 with `substeps` equal steps per grid interval. Returns the
/// states at t_1 .. t_n. NumericError names the step index when a state turns
/// non-finite.
std::vector<Var> fixed_step_integrate(const VarField& f, const Var& z0, const TimeGrid& grid,
                                      Method method, int substeps);

struct Dopri5Stats {
    int accepted = 0;
    int rejected = 0;
    int evaluations = 0;
    std::vector<int> accepted_per_interval;
};

/// Dormand-Prince 5(4) with embedded error control. Steps are clipped so the
/// solution lands exactly on every grid time. NumericError with the current t
/// and h when max_steps is exceeded.
std::vector<Tensor> dopri5_integrate(const TensorField& f, const Tensor& z0, const TimeGrid& grid,
                                     const SolverConfig& cfg, Dopri5Stats* stats = nullptr);

}  // namespace aqc::ode
