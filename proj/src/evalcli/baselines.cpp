#include "aqc/evalcli/baselines.hpp"

#include <algorithm>

#include "aqc/errors.hpp"
#include "aqc/numcore/linalg.hpp"

namespace aqc::eval {

Tensor ha_forecast(const Tensor& series, std::size_t origin, std::size_t horizon, std::size_t steps_per_day,
                   std::size_t days) {
    if (series.rank() != 2) throw DimensionError("ha_forecast: expected steps x nodes");
    if (steps_per_day == 0 || days == 0 || horizon == 0) throw ConfigError("ha_forecast: sizes must be positive");
    if (origin > series.rows()) throw DataError("ha_forecast: origin beyond the series");
    const std::size_t n = series.cols();
    Tensor out = Tensor::zeros(horizon, n);
    for (std::size_t k = 0; k < horizon; ++k) {
        const std::size_t target = origin + k;
        // Smallest whole number of days that lands before the origin.
        const std::size_t first_day = k / steps_per_day + 1;
        const std::size_t reach = (first_day + days - 1) * steps_per_day;
        if (reach > target) {
            throw DataError("ha_forecast: step " + std::to_string(target) + " needs " + std::to_string(days) +
                            " days of history before step " + std::to_string(origin));
        }
        for (std::size_t i = 0; i < n; ++i) {
            double sum = 0.0;
            for (std::size_t d = first_day; d < first_day + days; ++d) sum += series(target - d * steps_per_day, i);
            out(k, i) = sum / static_cast<double>(days);
        }
    }
    return out;
}

VarModel var_fit(const Tensor& series, std::size_t lags, bool allow_ridge) {
    if (series.rank() != 2) throw DimensionError("var_fit: expected steps x nodes");
    if (lags == 0) throw ConfigError("var_fit: lags must be positive");
    const std::size_t s = series.rows(), n = series.cols();
    if (s <= lags) {
        throw DataError("var_fit: " + std::to_string(s) + " steps are too few for " + std::to_string(lags) + " lags");
    }
    std::vector<double> mean(n, 0.0);
    for (std::size_t t = 0; t < s; ++t)
        for (std::size_t i = 0; i < n; ++i) mean[i] += series(t, i);
    for (double& m : mean) m /= static_cast<double>(s);

    const std::size_t p = 1 + lags * n, rows = s - lags;
    Tensor xtx = Tensor::zeros(p, p), xty = Tensor::zeros(p, n);
    std::vector<double> x(p);
    for (std::size_t r = 0; r < rows; ++r) {
        const std::size_t t = r + lags;
        x[0] = 1.0;
        for (std::size_t k = 0; k < lags; ++k)
            for (std::size_t j = 0; j < n; ++j) x[1 + k * n + j] = series(t - k - 1, j) - mean[j];
        for (std::size_t a = 0; a < p; ++a) {
            for (std::size_t b = 0; b < p; ++b) xtx(a, b) += x[a] * x[b];
            for (std::size_t i = 0; i < n; ++i) xty(a, i) += x[a] * (series(t, i) - mean[i]);
        }
    }

    VarModel m;
    m.lags = lags;
    Tensor beta;
    try {
        beta = num::cholesky_solve(xtx, xty, 1e-10);
    } catch (const NumericError&) {
        if (!allow_ridge) throw NumericError("var_fit: singular design matrix");
        double diag = 0.0;
        for (std::size_t a = 0; a < p; ++a) diag = std::max(diag, xtx(a, a));
        for (std::size_t a = 0; a < p; ++a) xtx(a, a) += kVarRidge * diag;
        beta = num::cholesky_solve(xtx, xty, 1e-14);
        m.ridge_used = true;
    }

    m.intercept = Tensor::zeros(1, n);
    for (std::size_t k = 0; k < lags; ++k) {
        Tensor a = Tensor::zeros(n, n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) a(i, j) = beta(1 + k * n + j, i);
        m.coef.push_back(std::move(a));
    }
    for (std::size_t i = 0; i < n; ++i) {
        double c = mean[i] + beta(0, i);
        for (std::size_t k = 0; k < lags; ++k)
            for (std::size_t j = 0; j < n; ++j) c -= m.coef[k](i, j) * mean[j];
        m.intercept(0, i) = c;
    }
    return m;
}

Tensor var_forecast(const VarModel& m, const Tensor& recent, std::size_t horizon) {
    const std::size_t n = m.intercept.cols();
    if (recent.rank() != 2 || recent.cols() != n || recent.rows() < m.lags) {
        throw DimensionError("var_forecast: need at least " + std::to_string(m.lags) + " x " + std::to_string(n) +
                             " recent values, got " + num::to_string(recent.shape()));
    }
    // Rolling buffer: the last `lags` observed rows, then the forecasts.
    std::vector<std::vector<double>> hist;
    for (std::size_t t = recent.rows() - m.lags; t < recent.rows(); ++t) {
        hist.emplace_back(n);
        for (std::size_t i = 0; i < n; ++i) hist.back()[i] = recent(t, i);
    }
    Tensor out = Tensor::zeros(horizon, n);
    for (std::size_t h = 0; h < horizon; ++h) {
        std::vector<double> next(n);
        for (std::size_t i = 0; i < n; ++i) {
            double v = m.intercept(0, i);
            for (std::size_t k = 0; k < m.lags; ++k) {
                const auto& prev = hist[hist.size() - 1 - k];
                for (std::size_t j = 0; j < n; ++j) v += m.coef[k](i, j) * prev[j];
            }
            next[i] = v;
            out(h, i) = v;
        }
        hist.push_back(std::move(next));
    }
    return out;
}

}  // namespace aqc::eval
