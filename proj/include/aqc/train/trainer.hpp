#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "aqc/seq_model/model.hpp"

namespace aqc::train {

using num::Parameter;
using num::Tensor;
using num::Var;

struct TrainConfig {
    std::size_t batch_size = 32;
    double lr0 = 5e-4;
    double decay_rate = 0.1;
    std::vector<std::size_t> decay_steps = {30, 60};
    std::size_t max_epochs = 100;
    std::size_t patience = 20;
    std::uint64_t seed = 42;
    double clip_norm = 5.0;  // <= 0 disables clipping

    /// ConfigError unless sizes and rates are positive and patience <= max_epochs.
    void validate() const;
};

nlohmann::json to_json(const TrainConfig& cfg);
/// Missing keys keep their defaults; unknown keys raise ConfigError.
TrainConfig train_config_from_json(const nlohmann::json& j);

/// lr0 * decay_rate^(number of decay steps <= epoch).
double lr_schedule(std::size_t epoch, const TrainConfig& cfg);

/// Mean absolute error over every entry of every step.
Var mae_loss(const std::vector<Var>& pred, const std::vector<Tensor>& truth);
double mae(const Tensor& pred, const Tensor& truth);

struct EarlyStop {
    bool stop = false;
    std::size_t best_epoch = 0;
};

/// Stops once the best (lowest, first occurrence) validation error is
/// `patience` epochs old.
EarlyStop early_stopping(const std::vector<double>& val_history, std::size_t patience);

/// Adam with bias correction; beta1 0.9, beta2 0.999, eps 1e-8.
class Adam {
public:
    explicit Adam(std::vector<Parameter*> params);

    /// Applies one update from the current gradients, then zeroes them.
    /// NumericError naming the Parameter if a gradient is not finite.
    void step(double lr);

    std::size_t steps() const { return t_; }
    const std::vector<Tensor>& first_moments() const { return m_; }
    const std::vector<Tensor>& second_moments() const { return v_; }

    static constexpr double kBeta1 = 0.9;
    static constexpr double kBeta2 = 0.999;
    static constexpr double kEps = 1e-8;

private:
    std::vector<Parameter*> params_;
    std::vector<Tensor> m_, v_;
    std::size_t t_ = 0;
};

/// Rescales all gradients so their joint L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
double clip_gradients(const std::vector<Parameter*>& params, double max_norm);

struct EpochLog {
    std::size_t epoch = 0;
    double lr = 0.0;
    double train_mae = 0.0;  // normalized units, mean over training windows
    double val_mae = 0.0;    // ug/m3
};

struct TrainResult {
    std::vector<EpochLog> log;
    std::size_t best_epoch = 0;
    double best_val_mae = 0.0;
};

/// Validation MAE in ug/m3 of deterministic forecasts.
double evaluate_mae(const model::AirPhyNet& model, const std::vector<data::WindowSample>& windows);

/// Mini-batch training with seeded shuffling and reparameterization noise.
/// After every epoch the model is validated; the best parameters are restored
/// into `model` on return. `on_epoch` sees each log row as it is produced.
TrainResult train_loop(model::AirPhyNet& model, const std::vector<data::WindowSample>& train,
                       const std::vector<data::WindowSample>& val, const TrainConfig& cfg,
                       const std::function<void(const EpochLog&)>& on_epoch = {});

/// Header line of the training log CSV.
inline constexpr const char* kLogHeader = "epoch,lr,train_mae,val_mae";
std::string format_log_row(const EpochLog& row);

}  // namespace aqc::train
