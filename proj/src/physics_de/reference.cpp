#include "aqc/physics_de/reference.hpp"

#include <cmath>

#include "aqc/errors.hpp"
#include "aqc/ode/solvers.hpp"

namespace aqc::physics {

namespace {

void check_square(const Tensor& m, const char* what) {
    if (m.rank() != 2 || m.rows() != m.cols()) {
        throw DimensionError(std::string(what) + ": expected a square matrix, got " +
                             num::to_string(m.shape()));
    }
}

Tensor as_column(const Tensor& x0, std::size_t n, const char* what) {
    if (x0.size() != n) {
        throw DimensionError(std::string(what) + ": initial state " + num::to_string(x0.shape()) +
                             " does not match " + std::to_string(n) + " nodes");
    }
    return x0.reshaped({n, 1});
}

Tensor integrate_linear(const Tensor& a, const Tensor& x0, double t, const char* what) {
    if (!(t >= 0.0) || !std::isfinite(t)) throw ContractError(std::string(what) + ": t must be >= 0");
    const Tensor x = as_column(x0, a.rows(), what);
    if (t == 0.0) return x;
    ode::SolverConfig cfg;
    cfg.rtol = kReferenceTolerance;
    cfg.atol = kReferenceTolerance;
    cfg.h_init = std::min(0.1, t);
    cfg.max_steps = 10'000'000;
    const auto states = ode::dopri5_integrate(
        [&a](double, const Tensor& z) { return num::matmul(a, z); }, x, ode::TimeGrid({0.0, t}), cfg);
    return states.back();
}

}  // namespace

Tensor diffusion_operator(const Tensor& w, double k) {
    check_square(w, "diffusion reference");
    if (!(k > 0.0)) throw ContractError("diffusion reference: k must be positive");
    const std::size_t n = w.rows();
    Tensor a = Tensor::zeros(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        double degree = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (w(i, j) < 0.0) throw ContractError("diffusion reference: W must be nonnegative");
            if (w(i, j) != w(j, i)) throw ContractError("diffusion reference: W must be symmetric");
            if (i != j) {
                degree += w(i, j);
                a(i, j) = k * w(i, j);
            }
        }
        a(i, i) = -k * degree;
    }
    return a;
}

Tensor advection_operator(const Tensor& v) {
    check_square(v, "advection reference");
    const std::size_t n = v.rows();
    Tensor a = Tensor::zeros(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        if (v(i, i) != 0.0) throw ContractError("advection reference: V must have a zero diagonal");
        double out = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (v(i, j) < 0.0) {
                throw ContractError("advection reference: negative velocity on edge " + std::to_string(i) +
                                    " -> " + std::to_string(j));
            }
            out += v(i, j);
            a(j, i) = v(i, j);
        }
        a(i, i) = -out;
    }
    return a;
}

Tensor simulate_diffusion_reference(const Tensor& w, const Tensor& x0, double k, double t) {
    return integrate_linear(diffusion_operator(w, k), x0, t, "diffusion reference");
}

Tensor simulate_advection_reference(const Tensor& v, const Tensor& x0, double t) {
    return integrate_linear(advection_operator(v), x0, t, "advection reference");
}

}  // namespace aqc::physics
