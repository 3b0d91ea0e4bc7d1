#include "aqc/evalcli/metrics.hpp"

#include <cmath>

#include "aqc/errors.hpp"

namespace aqc::eval {

std::string horizon_label(std::size_t steps) {
    switch (steps) {
        case 8: return "24h";
        case 16: return "48h";
        case 24: return "72h";
        default: return std::to_string(steps) + " steps";
    }
}

std::size_t horizon_steps(const std::string& label) {
    if (label == "24h") return 8;
    if (label == "48h") return 16;
    if (label == "72h") return 24;
    throw ConfigError("unknown horizon '" + label + "' (expected 24h, 48h or 72h)");
}

MetricsReport metrics_over(std::span<const double> pred, std::span<const double> truth) {
    if (pred.size() != truth.size()) {
        throw DimensionError("metrics: " + std::to_string(pred.size()) + " predictions vs " +
                             std::to_string(truth.size()) + " truths");
    }
    if (pred.empty()) throw DataError("metrics: no points selected");
    double abs_sum = 0.0, sq_sum = 0.0;
    for (std::size_t k = 0; k < pred.size(); ++k) {
        const double e = pred[k] - truth[k];
        abs_sum += std::abs(e);
        sq_sum += e * e;
    }
    const double n = static_cast<double>(pred.size());
    return {std::to_string(pred.size()) + " points", abs_sum / n, std::sqrt(sq_sum / n), pred.size()};
}

MetricsReport compute_metrics(const std::vector<Tensor>& pred, const std::vector<Tensor>& truth, std::size_t steps,
                              const std::vector<Tensor>* masks) {
    if (pred.size() != truth.size() || (masks && masks->size() != pred.size())) {
        throw DimensionError("metrics: forecast, truth and mask counts differ");
    }
    std::vector<double> p, t;
    for (std::size_t w = 0; w < pred.size(); ++w) {
        if (pred[w].shape() != truth[w].shape() || pred[w].rank() != 2) {
            throw DimensionError("metrics: forecast " + num::to_string(pred[w].shape()) + " vs truth " +
                                 num::to_string(truth[w].shape()));
        }
        if (masks && (*masks)[w].shape() != pred[w].shape()) throw DimensionError("metrics: mask shape differs");
        if (steps > pred[w].rows()) {
            throw DimensionError("metrics: horizon of " + std::to_string(steps) + " steps exceeds forecast length " +
                                 std::to_string(pred[w].rows()));
        }
        const std::size_t n = pred[w].cols();
        for (std::size_t k = 0; k < steps * n; ++k) {
            if (masks && (*masks)[w][k] == 0.0) continue;
            p.push_back(pred[w][k]);
            t.push_back(truth[w][k]);
        }
    }
    MetricsReport r = metrics_over(p, t);
    r.label = horizon_label(steps);
    return r;
}

SuddenChangeSpec SuddenChangeSpec::for_city(const std::string& city) {
    if (city == "beijing") return {50.0, 20.0, 1};
    if (city == "shenzhen") return {20.0, 20.0, 1};
    throw ConfigError("unknown city '" + city + "' (expected beijing or shenzhen)");
}

void SuddenChangeSpec::validate() const {
    if (!(level_threshold > 0.0) || !(delta_threshold > 0.0) || lookahead == 0) {
        throw ConfigError("sudden-change thresholds and lookahead must be positive");
    }
}

Tensor sudden_change_mask(const Tensor& truth, const SuddenChangeSpec& spec) {
    spec.validate();
    if (truth.rank() != 2) throw DimensionError("sudden_change_mask: expected steps x nodes");
    if (truth.rows() < 2) throw DataError("sudden_change_mask: need at least 2 steps");
    const std::size_t s = truth.rows(), n = truth.cols();
    Tensor mask = Tensor::zeros(s, n);
    for (std::size_t t = 0; t + spec.lookahead < s; ++t)
        for (std::size_t i = 0; i < n; ++i) {
            const double x = truth(t, i);
            if (x > spec.level_threshold && std::abs(truth(t + spec.lookahead, i) - x) > spec.delta_threshold) {
                mask(t, i) = 1.0;
            }
        }
    return mask;
}

}  // namespace aqc::eval
