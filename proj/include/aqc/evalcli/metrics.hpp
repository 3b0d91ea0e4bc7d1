#pragma once

// Forecast error metrics and the sudden-change protocol.

#include <span>
#include <string>
#include <vector>

#include "aqc/numcore/tensor.hpp"

namespace aqc::eval {

using num::Tensor;

struct MetricsReport {
    std::string label;  // "24h", "48h", "72h" or "<n> steps"
    double mae = 0.0;   // ug/m3
    double rmse = 0.0;  // ug/m3
    std::size_t n_points = 0;
};

/// 8, 16 and 24 three-hour steps are labelled 24h, 48h and 72h.
std::string horizon_label(std::size_t steps);
/// Inverse of horizon_label for the three standard labels; ConfigError otherwise.
std::size_t horizon_steps(const std::string& label);

/// MAE and RMSE over paired points. DataError when empty.
MetricsReport metrics_over(std::span<const double> pred, std::span<const double> truth);

/// Metrics over the first `steps` rows of every (steps x N) forecast. With
/// `masks`, only points whose mask entry is nonzero count. DimensionError on
/// shape mismatches; DataError if nothing is selected.
MetricsReport compute_metrics(const std::vector<Tensor>& pred, const std::vector<Tensor>& truth, std::size_t steps,
                              const std::vector<Tensor>* masks = nullptr);

struct SuddenChangeSpec {
    double level_threshold = 50.0;  // ug/m3
    double delta_threshold = 20.0;  // ug/m3
    std::size_t lookahead = 1;      // steps of 3 hours

    /// Beijing 50, Shenzhen 20; ConfigError for other names.
    static SuddenChangeSpec for_city(const std::string& city);
    /// ConfigError unless thresholds and lookahead are positive.
    void validate() const;
};

/// 1 where truth(t, i) > level and |truth(t + lookahead, i) - truth(t, i)| >
/// delta, else 0. The last `lookahead` steps are never flagged. DataError
/// for series shorter than 2 steps.
Tensor sudden_change_mask(const Tensor& truth, const SuddenChangeSpec& spec);

}  // namespace aqc::eval
