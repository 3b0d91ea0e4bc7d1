#include "aqc/train/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <set>

#include "aqc/errors.hpp"

namespace aqc::train {

// ---- config --------------------------------------------------------------------

void TrainConfig::validate() const {
    if (batch_size == 0) throw ConfigError("train config: batch_size must be positive");
    if (!(lr0 >= 0.0) || !std::isfinite(lr0)) throw ConfigError("train config: lr0 must be >= 0");
    if (!(decay_rate > 0.0)) throw ConfigError("train config: decay_rate must be positive");
    if (max_epochs == 0) throw ConfigError("train config: max_epochs must be positive");
    if (patience == 0 || patience > max_epochs) {
        throw ConfigError("train config: patience must be in [1, max_epochs]");
    }
}

nlohmann::json to_json(const TrainConfig& cfg) {
    return {{"batch_size", cfg.batch_size}, {"lr0", cfg.lr0},
            {"decay_rate", cfg.decay_rate}, {"decay_steps", cfg.decay_steps},
            {"max_epochs", cfg.max_epochs}, {"patience", cfg.patience},
            {"seed", cfg.seed},             {"clip_norm", cfg.clip_norm}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("config section 'train' must be an object");
    static const std::set<std::string> keys = {"batch_size", "lr0",      "decay_rate", "decay_steps",
                                               "max_epochs", "patience", "seed",       "clip_norm"};
    for (const auto& [key, _] : j.items()) {
        if (!keys.count(key)) throw ConfigError("unknown key '" + key + "' in section 'train'");
    }
    TrainConfig cfg;
    try {
        if (j.contains("batch_size")) cfg.batch_size = j.at("batch_size").get<std::size_t>();
        if (j.contains("lr0")) cfg.lr0 = j.at("lr0").get<double>();
        if (j.contains("decay_rate")) cfg.decay_rate = j.at("decay_rate").get<double>();
        if (j.contains("decay_steps")) cfg.decay_steps = j.at("decay_steps").get<std::vector<std::size_t>>();
        if (j.contains("max_epochs")) cfg.max_epochs = j.at("max_epochs").get<std::size_t>();
        if (j.contains("patience")) cfg.patience = j.at("patience").get<std::size_t>();
        if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
        if (j.contains("clip_norm")) cfg.clip_norm = j.at("clip_norm").get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("train config: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

double lr_schedule(std::size_t epoch, const TrainConfig& cfg) {
    double lr = cfg.lr0;
    for (std::size_t s : cfg.decay_steps)
        if (s <= epoch) lr *= cfg.decay_rate;
    return lr;
}

// ---- loss ----------------------------------------------------------------------

Var mae_loss(const std::vector<Var>& pred, const std::vector<Tensor>& truth) {
    if (pred.size() != truth.size() || pred.empty()) {
        throw DimensionError("mae_loss: " + std::to_string(pred.size()) + " predicted steps vs " +
                             std::to_string(truth.size()) + " true steps");
    }
    Var total;
    std::size_t count = 0;
    for (std::size_t k = 0; k < pred.size(); ++k) {
        if (pred[k].shape() != truth[k].shape()) {
            throw DimensionError("mae_loss: step " + std::to_string(k) + " shapes " + num::to_string(pred[k].shape()) +
                                 " and " + num::to_string(truth[k].shape()) + " differ");
        }
        const Var s = num::sum(num::abs(num::sub(pred[k], num::constant(truth[k]))));
        total = total.defined() ? num::add(total, s) : s;
        count += truth[k].size();
    }
    return num::affine(total, 1.0 / static_cast<double>(count));
}

double mae(const Tensor& pred, const Tensor& truth) {
    if (pred.shape() != truth.shape()) {
        throw DimensionError("mae: shapes " + num::to_string(pred.shape()) + " and " +
                             num::to_string(truth.shape()) + " differ");
    }
    if (pred.size() == 0) throw DimensionError("mae: empty input");
    double s = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) s += std::abs(pred[i] - truth[i]);
    return s / static_cast<double>(pred.size());
}

EarlyStop early_stopping(const std::vector<double>& val_history, std::size_t patience) {
    if (val_history.empty()) throw ContractError("early_stopping: empty history");
    std::size_t best = 0;
    for (std::size_t e = 1; e < val_history.size(); ++e)
        if (val_history[e] < val_history[best]) best = e;
    return {val_history.size() - 1 - best >= patience, best};
}

// ---- optimizer -----------------------------------------------------------------

Adam::Adam(std::vector<Parameter*> params) : params_(std::move(params)) {
    for (const auto* p : params_) {
        m_.emplace_back(p->value().shape(), 0.0);
        v_.emplace_back(p->value().shape(), 0.0);
    }
}

void Adam::step(double lr) {
    for (const auto* p : params_)
        for (double g : p->grad().values())
            if (!std::isfinite(g)) throw NumericError("non-finite gradient in parameter " + p->name());
    ++t_;
    const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
    for (std::size_t k = 0; k < params_.size(); ++k) {
        auto value = params_[k]->value().values();
        const auto grad = params_[k]->grad().values();
        auto m = m_[k].values();
        auto v = v_[k].values();
        for (std::size_t i = 0; i < value.size(); ++i) {
            m[i] = kBeta1 * m[i] + (1.0 - kBeta1) * grad[i];
            v[i] = kBeta2 * v[i] + (1.0 - kBeta2) * grad[i] * grad[i];
            const double mhat = m[i] / c1, vhat = v[i] / c2;
            value[i] -= lr * mhat / (std::sqrt(vhat) + kEps);
        }
        params_[k]->zero_grad();
    }
}

double clip_gradients(const std::vector<Parameter*>& params, double max_norm) {
    double sq = 0.0;
    for (const auto* p : params)
        for (double g : p->grad().values()) sq += g * g;
    const double norm = std::sqrt(sq);
    if (max_norm > 0.0 && norm > max_norm) {
        const double scale = max_norm / norm;
        for (auto* p : params) p->grad() *= scale;
    }
    return norm;
}

// ---- loop ----------------------------------------------------------------------

double evaluate_mae(const model::AirPhyNet& model, const std::vector<data::WindowSample>& windows) {
    if (windows.empty()) throw ConfigError("evaluation split is empty");
    double s = 0.0;
    std::size_t n = 0;
    for (const auto& w : windows) {
        const Tensor pred = model.predict(w);
        for (std::size_t i = 0; i < pred.size(); ++i) s += std::abs(pred[i] - w.x_future[i]);
        n += pred.size();
    }
    return s / static_cast<double>(n);
}

namespace {

std::vector<Tensor> normalized_truth(const model::AirPhyNet& model,
                                     const std::vector<const data::WindowSample*>& batch) {
    const auto& norm = *model.normalization();
    const std::size_t n = model.nodes(), horizon = model.config().horizon;
    std::vector<Tensor> out;
    for (std::size_t k = 0; k < horizon; ++k) {
        Tensor t = Tensor::zeros(batch.size() * n, 1);
        for (std::size_t b = 0; b < batch.size(); ++b) {
            if (batch[b]->x_future.rows() != horizon || batch[b]->x_future.cols() != n) {
                throw ShapeError("window target must be " + std::to_string(horizon) + " x " + std::to_string(n) +
                                 ", got " + num::to_string(batch[b]->x_future.shape()));
            }
            for (std::size_t i = 0; i < n; ++i) t[b * n + i] = norm.normalize(batch[b]->x_future(k, i));
        }
        out.push_back(std::move(t));
    }
    return out;
}

}  // namespace

TrainResult train_loop(model::AirPhyNet& model, const std::vector<data::WindowSample>& train,
                       const std::vector<data::WindowSample>& val, const TrainConfig& cfg,
                       const std::function<void(const EpochLog&)>& on_epoch) {
    cfg.validate();
    if (train.empty()) throw ConfigError("training split is empty");
    if (val.empty()) throw ConfigError("validation split is empty");
    if (!model.normalization()) throw ConfigError("model has no normalization statistics");

    const auto params = model.parameters().all();
    model.parameters().zero_grad();
    Adam adam(params);
    num::Rng shuffle_rng(cfg.seed);
    num::Rng noise_rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);

    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), 0);

    TrainResult result;
    std::vector<double> history;
    std::vector<Tensor> best;
    for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        const double lr = lr_schedule(epoch, cfg);
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        double loss_sum = 0.0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), start + cfg.batch_size);
            std::vector<const data::WindowSample*> batch;
            for (std::size_t i = start; i < end; ++i) batch.push_back(&train[order[i]]);
            num::Tape tape;
            const auto pred = model.forward_normalized(batch, {ode::Mode::train, &tape, &noise_rng, nullptr});
            const Var loss = mae_loss(pred, normalized_truth(model, batch));
            loss_sum += loss.value().item() * static_cast<double>(batch.size());
            tape.backward(loss);
            clip_gradients(params, cfg.clip_norm);
            adam.step(lr);
            if (!(model.dynamics().diffusion_coefficient() > 0.0)) {
                throw NumericError("diffusion coefficient left the positive range after an update");
            }
        }
        EpochLog row{epoch, lr, loss_sum / static_cast<double>(train.size()), evaluate_mae(model, val)};
        result.log.push_back(row);
        history.push_back(row.val_mae);
        if (on_epoch) on_epoch(row);

        const EarlyStop es = early_stopping(history, cfg.patience);
        if (es.best_epoch == epoch) {
            best.clear();
            for (const auto* p : params) best.push_back(p->value());
        }
        if (es.stop) break;
    }
    const EarlyStop final_state = early_stopping(history, cfg.patience);
    result.best_epoch = final_state.best_epoch;
    result.best_val_mae = history[final_state.best_epoch];
    for (std::size_t k = 0; k < params.size(); ++k) params[k]->value() = best[k];
    return result;
}

std::string format_log_row(const EpochLog& row) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%zu,%.10g,%.10g,%.10g", row.epoch, row.lr, row.train_mae, row.val_mae);
    return buf;
}

}  // namespace aqc::train
