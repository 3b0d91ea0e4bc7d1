#pragma once

// Historical-average and vector-autoregression baselines.

#include <vector>

#include "aqc/numcore/tensor.hpp"

namespace aqc::eval {

using num::Tensor;

inline constexpr std::size_t kStepsPerDay = 8;
inline constexpr std::size_t kHaDays = 4;

/// Forecast of rows [origin, origin + horizon) of `series` (S x N) using
/// rows before `origin` only. Each target step gets the mean of the `days`
/// most recent same-time-of-day values observed before the origin. DataError
/// if those reach before row 0.
Tensor ha_forecast(const Tensor& series, std::size_t origin, std::size_t horizon,
                   std::size_t steps_per_day = kStepsPerDay, std::size_t days = kHaDays);

/// x_t = intercept + sum_k coef[k] x_{t-k-1}.
struct VarModel {
    std::size_t lags = 0;
    Tensor intercept;           // 1 x N
    std::vector<Tensor> coef;   // lags entries, N x N; row i is equation i
    bool ridge_used = false;
};

inline constexpr std::size_t kVarLags = 3;
inline constexpr double kVarRidge = 1e-6;

/// Least squares on mean-centred data with an intercept. When the normal
/// equations are near singular a ridge of kVarRidge times their largest
/// diagonal entry is added if `allow_ridge`; otherwise NumericError.
/// DataError if the series has no more rows than `lags`.
VarModel var_fit(const Tensor& series, std::size_t lags = kVarLags, bool allow_ridge = true);

/// Recursive forecast from the last `lags` rows of `recent`; horizon x N.
Tensor var_forecast(const VarModel& m, const Tensor& recent, std::size_t horizon);

}  // namespace aqc::eval
