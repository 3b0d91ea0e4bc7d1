#pragma once

#include <cstdint>

#include "aqc/numcore/tensor.hpp"

namespace aqc::data {

using num::Tensor;

/// One forecasting example on the 3-hour grid. Concentrations stay in ug/m3;
/// the model applies its own normalization.
struct WindowSample {
    Tensor x_hist;    // T x N
    Tensor p_hist;    // T x N x 2, wind (u, v) in m/s
    Tensor x_future;  // tau x N
    std::int64_t start_step = 0;  // index of the first history step in the series
    std::int64_t start_time = 0;  // unix seconds of the first history step

    std::size_t history() const { return x_hist.rows(); }
    std::size_t horizon() const { return x_future.rows(); }
    std::size_t nodes() const { return x_hist.cols(); }

    /// N x 2 wind at the last history step.
    Tensor last_wind() const;
};

}  // namespace aqc::data
