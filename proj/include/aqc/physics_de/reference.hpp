#pragma once

// Linear reference dynamics on a graph, integrated with the adaptive solver.
// Both operators have zero column sums, so total mass is conserved.

#include "aqc/numcore/tensor.hpp"

namespace aqc::physics {

using num::Tensor;

/// Tolerances used by the reference simulators.
inline constexpr double kReferenceTolerance = 1e-10;

/// X(t) for dX/dt = -k (D - W) X with D(i,i) = sum_j W(i,j).
/// W must be square, symmetric and nonnegative; k > 0; t >= 0.
Tensor simulate_diffusion_reference(const Tensor& w, const Tensor& x0, double k, double t);

/// X(t) for dX_i/dt = sum_j X_j V(j,i) - X_i sum_j V(i,j), where V(i,j) >= 0
/// is the velocity along edge i -> j and the diagonal is zero.
Tensor simulate_advection_reference(const Tensor& v, const Tensor& x0, double t);

/// -k (D - W): the diffusion generator.
Tensor diffusion_operator(const Tensor& w, double k);
/// V^T - diag(V 1): the advection generator.
Tensor advection_operator(const Tensor& v);

}  // namespace aqc::physics
