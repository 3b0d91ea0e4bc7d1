#pragma once

#include "aqc/numcore/tensor.hpp"

namespace aqc::num {

/// D^{-1/2} W D^{-1/2} with D(i,i) = sum_j |W(i,j)|; zero-degree rows and
/// columns are left at zero.
Tensor normalized_adjacency(const Tensor& w);

/// Solves A X = B for symmetric positive definite A by Cholesky
/// factorization. Throws NumericError when a pivot falls below
/// `pivot_floor` times the largest diagonal entry.
Tensor cholesky_solve(const Tensor& a, const Tensor& b, double pivot_floor = 1e-12);

}  // namespace aqc::num
