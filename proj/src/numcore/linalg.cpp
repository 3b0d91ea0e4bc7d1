#include "aqc/numcore/linalg.hpp"

#include <algorithm>
#include <cmath>

#include "aqc/errors.hpp"

namespace aqc::num {

Tensor normalized_adjacency(const Tensor& w) {
    if (w.rank() != 2 || w.rows() != w.cols()) {
        throw DimensionError("normalized_adjacency: expected a square matrix, got " +
                             to_string(w.shape()));
    }
    const std::size_t n = w.rows();
    std::vector<double> s(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double d = 0.0;
        for (std::size_t j = 0; j < n; ++j) d += std::abs(w(i, j));
        s[i] = d > 0.0 ? 1.0 / std::sqrt(d) : 0.0;
    }
    Tensor out = Tensor::zeros(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) out(i, j) = w(i, j) * (s[i] * s[j]);
    return out;
}

Tensor cholesky_solve(const Tensor& a, const Tensor& b, double pivot_floor) {
    const std::size_t n = a.rows();
    if (a.cols() != n || b.rows() != n) {
        throw DimensionError("cholesky_solve: incompatible shapes " + to_string(a.shape()) +
                             " and " + to_string(b.shape()));
    }
    double scale = 0.0;
    for (std::size_t i = 0; i < n; ++i) scale = std::max(scale, std::abs(a(i, i)));
    const double floor = pivot_floor * std::max(scale, 1e-300);

    Tensor l = Tensor::zeros(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        double d = a(j, j);
        for (std::size_t k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
        if (!(d > floor)) {
            throw NumericError("cholesky_solve: matrix is singular or not positive definite (pivot " +
                               std::to_string(j) + ")");
        }
        l(j, j) = std::sqrt(d);
        for (std::size_t i = j + 1; i < n; ++i) {
            double s = a(i, j);
            for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
            l(i, j) = s / l(j, j);
        }
    }
    const std::size_t m = b.cols();
    Tensor x = b;
    for (std::size_t c = 0; c < m; ++c) {
        for (std::size_t i = 0; i < n; ++i) {
            double s = x(i, c);
            for (std::size_t k = 0; k < i; ++k) s -= l(i, k) * x(k, c);
            x(i, c) = s / l(i, i);
        }
        for (std::size_t i = n; i-- > 0;) {
            double s = x(i, c);
            for (std::size_t k = i + 1; k < n; ++k) s -= l(k, i) * x(k, c);
            x(i, c) = s / l(i, i);
        }
    }
    return x;
}

}  // namespace aqc::num
