#include "aqc/ode/solvers.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>

#include "aqc/errors.hpp"

namespace aqc::ode {

void SolverConfig::validate() const {
    if (!(rtol > 0.0) || !(atol > 0.0)) throw ConfigError("solver: tolerances must be positive");
    if (!(h_init > 0.0)) throw ConfigError("solver: h_init must be positive");
    if (max_steps <= 0) throw ConfigError("solver: max_steps must be positive");
    if (substeps <= 0) throw ConfigError("solver: substeps must be positive");
    if (!(safety > 0.0)) throw ConfigError("solver: safety must be positive");
    if (!(factor_min > 0.0 && factor_min < 1.0 && factor_max > 1.0)) {
        throw ConfigError("solver: need 0 < factor_min < 1 < factor_max");
    }
}

TimeGrid::TimeGrid(std::vector<double> times) : times_(std::move(times)) {
    if (times_.size() < 2) throw ConfigError("time grid needs at least two points");
    if (times_.front() != 0.0) throw ConfigError("time grid must start at 0");
    for (std::size_t i = 1; i < times_.size(); ++i) {
        if (!(times_[i] > times_[i - 1]) || !std::isfinite(times_[i])) {
            throw ConfigError("time grid must be strictly increasing and finite");
        }
    }
}

TimeGrid TimeGrid::uniform(std::size_t steps) {
    std::vector<double> t(steps + 1);
    for (std::size_t i = 0; i <= steps; ++i) t[i] = static_cast<double>(i);
    return TimeGrid(std::move(t));
}

// ---- fixed step ----------------------------------------------------------------

namespace {

Var axpy(const Var& z, double h, const Var& k) { return num::add(z, num::affine(k, h)); }

Var euler_step(const VarField& f, double t, const Var& z, double h) { return axpy(z, h, f(t, z)); }

Var rk4_step(const VarField& f, double t, const Var& z, double h) {
    const Var k1 = f(t, z);
    const Var k2 = f(t + 0.5 * h, axpy(z, 0.5 * h, k1));
    const Var k3 = f(t + 0.5 * h, axpy(z, 0.5 * h, k2));
    const Var k4 = f(t + h, axpy(z, h, k3));
    const Var sum = num::add(num::add(k1, num::affine(k2, 2.0)), num::add(num::affine(k3, 2.0), k4));
    return axpy(z, h / 6.0, sum);
}

}  // namespace

std::vector<Var> fixed_step_integrate(const VarField& f, const Var& z0, const TimeGrid& grid,
                                      Method method, int substeps) {
    if (substeps < 1) throw ConfigError("fixed-step integrator: substeps must be >= 1");
    if (method == Method::dopri5) throw ConfigError("fixed-step integrator: dopri5 is adaptive");
    const auto& times = grid.times();
    std::vector<Var> out;
    out.reserve(grid.intervals());
    Var z = z0;
    std::size_t step = 0;
    for (std::size_t i = 0; i + 1 < times.size(); ++i) {
        const double h = (times[i + 1] - times[i]) / substeps;
        for (int s = 0; s < substeps; ++s, ++step) {
            const double t = times[i] + s * h;
            try {
                z = method == Method::euler ? euler_step(f, t, z, h) : rk4_step(f, t, z, h);
            } catch (const NumericError& e) {
                throw NumericError("integrator produced a non-finite state at step " +
                                   std::to_string(step) + " (t = " + std::to_string(t) +
                                   "): " + e.what());
            }
        }
        out.push_back(z);
    }
    return out;
}

// ---- Dormand-Prince -------------------------------------------------------------

namespace {

constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                 b6 = 11.0 / 84;
// Fifth-order weights minus the embedded fourth-order weights.
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;

using Vec = std::vector<double>;

Tensor eval(const TensorField& f, double t, const Tensor& shape_like, const Vec& y, int& count) {
    ++count;
    Tensor out = f(t, Tensor(shape_like.shape(), y));
    if (out.shape() != shape_like.shape()) {
        throw DimensionError("dopri5: derivative shape " + num::to_string(out.shape()) +
                             " differs from state " + num::to_string(shape_like.shape()));
    }
    return out;
}

}  // namespace

std::vector<Tensor> dopri5_integrate(const TensorField& f, const Tensor& z0, const TimeGrid& grid,
                                     const SolverConfig& cfg, Dopri5Stats* stats) {
    cfg.validate();
    z0.check_finite("dopri5 initial state");
    const std::size_t n = z0.size();
    const auto& times = grid.times();
    Dopri5Stats local;
    Dopri5Stats& st = stats ? *stats : local;
    st = Dopri5Stats{};

    Vec y(z0.values().begin(), z0.values().end());
    Vec tmp(n), y_new(n);
    double t = times.front();
    double h = cfg.h_init;
    Tensor k1 = eval(f, t, z0, y, st.evaluations);
    std::vector<Tensor> out;
    out.reserve(grid.intervals());
    int steps = 0;

    auto stage = [&](std::initializer_list<std::pair<double, const Tensor*>> terms, double hh) {
        for (std::size_t c = 0; c < n; ++c) {
            double s = 0.0;
            for (const auto& [a, k] : terms) s += a * (*k)[c];
            tmp[c] = y[c] + hh * s;
        }
        return tmp;
    };

    for (std::size_t i = 1; i < times.size(); ++i) {
        const double t_end = times[i];
        int accepted_here = 0;
        while (t < t_end) {
            if (steps++ >= cfg.max_steps) {
                std::ostringstream msg;
                msg << "dopri5: exceeded max_steps " << cfg.max_steps << " at t = " << t << ", h = " << h;
                throw NumericError(msg.str());
            }
            const bool last = t + h >= t_end - 1e-12 * std::max(1.0, std::abs(t_end));
            const double hs = last ? t_end - t : h;

            const Tensor k2 = eval(f, t + c2 * hs, z0, stage({{a21, &k1}}, hs), st.evaluations);
            const Tensor k3 = eval(f, t + c3 * hs, z0, stage({{a31, &k1}, {a32, &k2}}, hs), st.evaluations);
            const Tensor k4 = eval(f, t + c4 * hs, z0, stage({{a41, &k1}, {a42, &k2}, {a43, &k3}}, hs),
                                   st.evaluations);
            const Tensor k5 = eval(f, t + c5 * hs, z0,
                                   stage({{a51, &k1}, {a52, &k2}, {a53, &k3}, {a54, &k4}}, hs),
                                   st.evaluations);
            const Tensor k6 = eval(f, t + hs, z0,
                                   stage({{a61, &k1}, {a62, &k2}, {a63, &k3}, {a64, &k4}, {a65, &k5}}, hs),
                                   st.evaluations);
            for (std::size_t c = 0; c < n; ++c) {
                y_new[c] = y[c] + hs * (b1 * k1[c] + b3 * k3[c] + b4 * k4[c] + b5 * k5[c] + b6 * k6[c]);
                if (!std::isfinite(y_new[c])) {
                    std::ostringstream msg;
                    msg << "dopri5: non-finite state at t = " << t << ", h = " << hs;
                    throw NumericError(msg.str());
                }
            }
            const double t_new = last ? t_end : t + hs;
            const Tensor k7 = eval(f, t_new, z0, y_new, st.evaluations);

            double acc = 0.0;
            for (std::size_t c = 0; c < n; ++c) {
                const double err = hs * (e1 * k1[c] + e3 * k3[c] + e4 * k4[c] + e5 * k5[c] +
                                         e6 * k6[c] + e7 * k7[c]);
                const double scale = cfg.atol + cfg.rtol * std::max(std::abs(y[c]), std::abs(y_new[c]));
                acc += (err / scale) * (err / scale);
            }
            const double norm = n ? std::sqrt(acc / static_cast<double>(n)) : 0.0;
            const double factor =
                norm == 0.0 ? cfg.factor_max
                            : std::clamp(cfg.safety * std::pow(norm, -0.2), cfg.factor_min, cfg.factor_max);

            if (norm <= 1.0) {
                y.swap(y_new);
                t = t_new;
                k1 = k7;  // first-same-as-last
                ++st.accepted;
                ++accepted_here;
                h = hs * factor;
            } else {
                ++st.rejected;
                h = hs * factor;
            }
        }
        st.accepted_per_interval.push_back(accepted_here);
        out.emplace_back(z0.shape(), y);
    }
    return out;
}

}  // namespace aqc::ode
