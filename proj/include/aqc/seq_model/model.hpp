#pragma once

// Encoder / latent ODE / decoder forecaster.
//
// A GRU shared across nodes reads each node's normalized history; a two-layer
// head maps the final hidden state to (mu, log sigma) of the latent initial
// state; the learned dynamics carry the latent state over the horizon; a
// shared affine decoder reads one value per node and step.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "aqc/data_io/window.hpp"
#include "aqc/ode/ode_solve.hpp"
#include "aqc/physics_de/de_function.hpp"

namespace aqc::model {

using num::Parameter;
using num::Tape;
using num::Tensor;
using num::Var;

struct ModelConfig {
    std::size_t history = 24;  // T
    std::size_t horizon = 24;  // tau
    std::size_t gru_hidden = 64;
    std::size_t head_hidden = 50;
    physics::DEConfig de;
    ode::SolverConfig solver;
    std::uint64_t seed = 42;

    /// ConfigError on zero sizes or an invalid solver configuration.
    void validate() const;
};

nlohmann::json to_json(const ModelConfig& cfg);
/// Missing keys keep their defaults; unknown keys raise ConfigError.
ModelConfig model_config_from_json(const nlohmann::json& j);

/// PM2.5 standardization, fitted on training data.
struct Normalization {
    double mean = 0.0;
    double std = 1.0;

    double normalize(double x) const { return (x - mean) / std; }
    double denormalize(double z) const { return z * std + mean; }
};

/// GRU weights bound to a tape. Gates are packed in (r, z, n) order.
struct GRUVars {
    Var w_x;   // 1 x 3H
    Var w_h;   // H x 2H (reset, update)
    Var w_hn;  // H x H  (candidate)
    Var b;     // 1 x 3H
};

/// r = s(x Wr + h Ur + br), u = s(x Wu + h Uu + bu),
/// n = tanh(x Wn + (r * h) Un + bn), h' = (1 - u) * h + u * n.
Var gru_step(const GRUVars& g, const Var& x, const Var& h);

/// Train: mu + sigma * eps. Infer: mu.
Var reparameterize(const Var& mu, const Var& sigma, const Tensor& eps, ode::Mode mode);

struct ForwardOptions {
    ode::Mode mode = ode::Mode::infer;
    Tape* tape = nullptr;
    /// Source of reparameterization noise in train mode.
    num::Rng* noise = nullptr;
    /// Fixed noise ((B N) x d) overriding `noise`, for gradient checks.
    const Tensor* eps = nullptr;
};

class AirPhyNet {
public:
    AirPhyNet(const ModelConfig& cfg, geo::ScaledLaplacian distance);

    AirPhyNet(const AirPhyNet&) = delete;
    AirPhyNet& operator=(const AirPhyNet&) = delete;

    const ModelConfig& config() const { return cfg_; }
    std::size_t nodes() const { return dynamics_->distance_laplacian().matrix.rows(); }

    num::ParameterStore& parameters() { return store_; }
    const num::ParameterStore& parameters() const { return store_; }
    physics::DEFunction& dynamics() { return *dynamics_; }
    const physics::DEFunction& dynamics() const { return *dynamics_; }

    void set_normalization(const Normalization& n);
    const std::optional<Normalization>& normalization() const { return norm_; }

    struct Latent {
        Var mu, sigma;
    };
    /// Runs the GRU and head over the batch; (B N) x d each.
    Latent encode(std::span<const data::WindowSample* const> batch, Tape* tape) const;

    /// Normalized predictions, one (B N) x 1 Var per horizon step, samples
    /// stacked in batch order. Infer mode solves each sample on its own so the
    /// adaptive step control never couples samples.
    std::vector<Var> forward_normalized(std::span<const data::WindowSample* const> batch,
                                        const ForwardOptions& opt) const;

    /// Deterministic forecast in ug/m3, tau x N.
    Tensor predict(const data::WindowSample& sample) const;

private:
    void check_sample(const data::WindowSample& s) const;
    GRUVars bind_gru(Tape* tape) const;

    ModelConfig cfg_;
    num::ParameterStore store_;
    std::unique_ptr<physics::DEFunction> dynamics_;
    Parameter* gru_wx_ = nullptr;
    Parameter* gru_wh_ = nullptr;
    Parameter* gru_whn_ = nullptr;
    Parameter* gru_b_ = nullptr;
    Parameter* head_w1_ = nullptr;
    Parameter* head_b1_ = nullptr;
    Parameter* head_w2_ = nullptr;
    Parameter* head_b2_ = nullptr;
    Parameter* dec_w_ = nullptr;
    Parameter* dec_b_ = nullptr;
    std::optional<Normalization> norm_;
};

}  // namespace aqc::model
