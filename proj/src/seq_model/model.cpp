#include "aqc/seq_model/model.hpp"

#include <cmath>
#include <random>
#include <set>

#include "aqc/errors.hpp"

namespace aqc::model {

// ---- config --------------------------------------------------------------------

void ModelConfig::validate() const {
    if (history == 0 || horizon == 0 || gru_hidden == 0 || head_hidden == 0) {
        throw ConfigError("model config: history, horizon and layer sizes must be positive");
    }
    if (de.latent_dim == 0 || de.cheb_order == 0 || de.cheb_layers == 0 || de.flow_hidden == 0) {
        throw ConfigError("model config: DE sizes must be positive");
    }
    if (!(de.k_init > 0.0)) throw ConfigError("model config: k_init must be positive");
    solver.validate();
}

namespace {

const char* gate_name(physics::GateMode g) {
    switch (g) {
        case physics::GateMode::learned: return "learned";
        case physics::GateMode::diffusion_only: return "diffusion_only";
        case physics::GateMode::advection_only: return "advection_only";
    }
    return "learned";
}

physics::GateMode parse_gate(const std::string& s) {
    if (s == "learned") return physics::GateMode::learned;
    if (s == "diffusion_only") return physics::GateMode::diffusion_only;
    if (s == "advection_only") return physics::GateMode::advection_only;
    throw ConfigError("unknown gate mode '" + s + "' (expected learned, diffusion_only or advection_only)");
}

const char* method_name(ode::Method m) {
    switch (m) {
        case ode::Method::euler: return "euler";
        case ode::Method::rk4: return "rk4";
        case ode::Method::dopri5: return "dopri5";
    }
    return "dopri5";
}

ode::Method parse_method(const std::string& s) {
    if (s == "euler") return ode::Method::euler;
    if (s == "rk4") return ode::Method::rk4;
    if (s == "dopri5") return ode::Method::dopri5;
    throw ConfigError("unknown solver method '" + s + "'");
}

void check_keys(const nlohmann::json& j, const char* section, std::initializer_list<const char*> allowed) {
    if (!j.is_object()) throw ConfigError(std::string("config section '") + section + "' must be an object");
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [key, _] : j.items()) {
        if (!ok.count(key)) throw ConfigError(std::string("unknown key '") + key + "' in section '" + section + "'");
    }
}

template <typename T>
void read(const nlohmann::json& j, const char* key, T& out) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config key '") + key + "': " + e.what());
    }
}

}  // namespace

nlohmann::json to_json(const ModelConfig& cfg) {
    return {
        {"history", cfg.history},
        {"horizon", cfg.horizon},
        {"gru_hidden", cfg.gru_hidden},
        {"head_hidden", cfg.head_hidden},
        {"seed", cfg.seed},
        {"de",
         {{"latent_dim", cfg.de.latent_dim},
          {"cheb_order", cfg.de.cheb_order},
          {"cheb_layers", cfg.de.cheb_layers},
          {"flow_hidden", cfg.de.flow_hidden},
          {"activation", cfg.de.activation == physics::Activation::tanh ? "tanh" : "identity"},
          {"gate", gate_name(cfg.de.gate)},
          {"k_init", cfg.de.k_init}}},
        {"solver",
         {{"method", method_name(cfg.solver.method)},
          {"rtol", cfg.solver.rtol},
          {"atol", cfg.solver.atol},
          {"h_init", cfg.solver.h_init},
          {"max_steps", cfg.solver.max_steps},
          {"safety", cfg.solver.safety},
          {"factor_min", cfg.solver.factor_min},
          {"factor_max", cfg.solver.factor_max},
          {"substeps", cfg.solver.substeps}}},
    };
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
    ModelConfig cfg;
    check_keys(j, "model", {"history", "horizon", "gru_hidden", "head_hidden", "seed", "de", "solver"});
    read(j, "history", cfg.history);
    read(j, "horizon", cfg.horizon);
    read(j, "gru_hidden", cfg.gru_hidden);
    read(j, "head_hidden", cfg.head_hidden);
    read(j, "seed", cfg.seed);
    if (j.contains("de")) {
        const auto& d = j.at("de");
        check_keys(d, "de", {"latent_dim", "cheb_order", "cheb_layers", "flow_hidden", "activation", "gate", "k_init"});
        read(d, "latent_dim", cfg.de.latent_dim);
        read(d, "cheb_order", cfg.de.cheb_order);
        read(d, "cheb_layers", cfg.de.cheb_layers);
        read(d, "flow_hidden", cfg.de.flow_hidden);
        read(d, "k_init", cfg.de.k_init);
        std::string act = "tanh", gate = gate_name(cfg.de.gate);
        read(d, "activation", act);
        read(d, "gate", gate);
        if (act != "tanh" && act != "identity") throw ConfigError("unknown activation '" + act + "'");
        cfg.de.activation = act == "tanh" ? physics::Activation::tanh : physics::Activation::identity;
        cfg.de.gate = parse_gate(gate);
    }
    if (j.contains("solver")) {
        const auto& s = j.at("solver");
        check_keys(s, "solver",
                   {"method", "rtol", "atol", "h_init", "max_steps", "safety", "factor_min", "factor_max", "substeps"});
        std::string method = method_name(cfg.solver.method);
        read(s, "method", method);
        cfg.solver.method = parse_method(method);
        read(s, "rtol", cfg.solver.rtol);
        read(s, "atol", cfg.solver.atol);
        read(s, "h_init", cfg.solver.h_init);
        read(s, "max_steps", cfg.solver.max_steps);
        read(s, "safety", cfg.solver.safety);
        read(s, "factor_min", cfg.solver.factor_min);
        read(s, "factor_max", cfg.solver.factor_max);
        read(s, "substeps", cfg.solver.substeps);
    }
    cfg.validate();
    return cfg;
}

// ---- building blocks -----------------------------------------------------------

Var gru_step(const GRUVars& g, const Var& x, const Var& h) {
    const std::size_t hidden = h.value().cols();
    if (g.w_h.value().rows() != hidden || g.w_x.value().cols() != 3 * hidden) {
        throw DimensionError("gru_step: hidden state " + num::to_string(h.shape()) +
                             " does not match weights " + num::to_string(g.w_h.shape()));
    }
    const Var gx = num::add(num::matmul(x, g.w_x), g.b);  // (B N) x 3H
    const Var gh = num::matmul(h, g.w_h);                  // (B N) x 2H
    const Var r = num::sigmoid(num::add(num::slice_cols(gx, 0, hidden), num::slice_cols(gh, 0, hidden)));
    const Var u = num::sigmoid(
        num::add(num::slice_cols(gx, hidden, 2 * hidden), num::slice_cols(gh, hidden, 2 * hidden)));
    const Var n = num::tanh(num::add(num::slice_cols(gx, 2 * hidden, 3 * hidden), num::matmul(num::mul(r, h), g.w_hn)));
    // (1 - u) * h + u * n
    return num::add(num::mul(num::affine(u, -1.0, 1.0), h), num::mul(u, n));
}

Var reparameterize(const Var& mu, const Var& sigma, const Tensor& eps, ode::Mode mode) {
    if (mode == ode::Mode::infer) return mu;
    if (eps.shape() != mu.shape()) {
        throw DimensionError("reparameterize: noise " + num::to_string(eps.shape()) + " does not match " +
                             num::to_string(mu.shape()));
    }
    return num::add(mu, num::mul(sigma, num::constant(eps)));
}

// ---- model ---------------------------------------------------------------------

AirPhyNet::AirPhyNet(const ModelConfig& cfg, geo::ScaledLaplacian distance) : cfg_(cfg) {
    cfg_.validate();
    const std::size_t n = distance.matrix.rows();
    if (distance.matrix.rank() != 2 || distance.matrix.cols() != n || n < 2) {
        throw DimensionError("model needs an N x N distance Laplacian with N >= 2");
    }
    num::Rng rng(cfg_.seed);
    const std::size_t h = cfg_.gru_hidden, d = cfg_.de.latent_dim, a = cfg_.head_hidden;
    gru_wx_ = &store_.add("gru.w_x", num::uniform_init(1, 3 * h, h, rng));
    gru_wh_ = &store_.add("gru.w_h", num::uniform_init(h, 2 * h, h, rng));
    gru_whn_ = &store_.add("gru.w_hn", num::uniform_init(h, h, h, rng));
    gru_b_ = &store_.add("gru.b", num::uniform_init(1, 3 * h, h, rng));
    head_w1_ = &store_.add("head.w1", num::uniform_init(h, a, h, rng));
    head_b1_ = &store_.add("head.b1", num::uniform_init(1, a, h, rng));
    head_w2_ = &store_.add("head.w2", num::uniform_init(a, 2 * d, a, rng));
    head_b2_ = &store_.add("head.b2", num::uniform_init(1, 2 * d, a, rng));
    dynamics_ = std::make_unique<physics::DEFunction>(store_, cfg_.de, std::move(distance), rng);
    dec_w_ = &store_.add("decoder.w", num::uniform_init(d, 1, d, rng));
    dec_b_ = &store_.add("decoder.b", num::uniform_init(1, 1, d, rng));
}

void AirPhyNet::set_normalization(const Normalization& n) {
    if (!std::isfinite(n.mean) || !(n.std > 0.0) || !std::isfinite(n.std)) {
        throw ConfigError("normalization needs a finite mean and a positive std");
    }
    norm_ = n;
}

void AirPhyNet::check_sample(const data::WindowSample& s) const {
    if (s.x_hist.rank() != 2 || s.x_hist.rows() != cfg_.history) {
        throw ShapeError("history must be " + std::to_string(cfg_.history) + " x N, got " +
                         num::to_string(s.x_hist.shape()));
    }
    if (s.x_hist.cols() != nodes()) {
        throw ShapeError("sample has " + std::to_string(s.x_hist.cols()) + " nodes, model expects " +
                         std::to_string(nodes()));
    }
    const auto& p = s.p_hist.shape();
    if (p.size() != 3 || p[0] != cfg_.history || p[1] != nodes() || p[2] != 2) {
        throw ShapeError("wind history must be " + std::to_string(cfg_.history) + " x " + std::to_string(nodes()) +
                         " x 2, got " + num::to_string(p));
    }
}

GRUVars AirPhyNet::bind_gru(Tape* tape) const {
    return {num::use(*gru_wx_, tape), num::use(*gru_wh_, tape), num::use(*gru_whn_, tape), num::use(*gru_b_, tape)};
}

AirPhyNet::Latent AirPhyNet::encode(std::span<const data::WindowSample* const> batch, Tape* tape) const {
    if (!norm_) throw ConfigError("model has no normalization statistics");
    if (batch.empty()) throw ContractError("encode: empty batch");
    for (const auto* s : batch) check_sample(*s);
    const std::size_t n = nodes(), rows = batch.size() * n;
    const GRUVars g = bind_gru(tape);
    Var h = num::constant(Tensor::zeros(rows, cfg_.gru_hidden));
    for (std::size_t t = 0; t < cfg_.history; ++t) {
        Tensor x = Tensor::zeros(rows, 1);
        for (std::size_t b = 0; b < batch.size(); ++b)
            for (std::size_t i = 0; i < n; ++i) x[b * n + i] = norm_->normalize(batch[b]->x_hist(t, i));
        h = gru_step(g, num::constant(std::move(x)), h);
    }
    const Var a = num::tanh(num::add(num::matmul(h, num::use(*head_w1_, tape)), num::use(*head_b1_, tape)));
    const Var out = num::add(num::matmul(a, num::use(*head_w2_, tape)), num::use(*head_b2_, tape));
    const std::size_t d = cfg_.de.latent_dim;
    return {num::slice_cols(out, 0, d), num::exp(num::slice_cols(out, d, 2 * d))};
}

std::vector<Var> AirPhyNet::forward_normalized(std::span<const data::WindowSample* const> batch,
                                               const ForwardOptions& opt) const {
    if (opt.mode == ode::Mode::infer && batch.size() > 1) {
        std::vector<std::vector<Var>> per;
        for (const auto* s : batch) per.push_back(forward_normalized({&s, 1}, opt));
        std::vector<Var> out;
        for (std::size_t k = 0; k < cfg_.horizon; ++k) {
            std::vector<Var> parts;
            for (const auto& p : per) parts.push_back(p[k]);
            out.push_back(num::concat_rows(parts));
        }
        return out;
    }
    const Latent lat = encode(batch, opt.tape);
    Tensor eps;
    if (opt.mode == ode::Mode::train) {
        if (opt.eps) {
            eps = *opt.eps;
        } else {
            if (!opt.noise) throw ConfigError("train-mode forward needs a noise source");
            eps = Tensor(lat.mu.shape(), 0.0);
            std::normal_distribution<double> gauss(0.0, 1.0);
            for (double& v : eps.values()) v = gauss(*opt.noise);
        }
    }
    const Var z0 = reparameterize(lat.mu, lat.sigma, eps, opt.mode);

    auto bound = dynamics_->bind(opt.tape);
    std::vector<Var> winds;
    for (const auto* s : batch) winds.push_back(num::constant(s->last_wind()));
    bound.with_winds(winds);
    const auto states = ode::ode_solve(bound, z0, ode::TimeGrid::uniform(cfg_.horizon), cfg_.solver, opt.mode);

    const Var w = num::use(*dec_w_, opt.tape), b = num::use(*dec_b_, opt.tape);
    std::vector<Var> out;
    out.reserve(states.size());
    for (const auto& z : states) out.push_back(num::add(num::matmul(z, w), b));
    return out;
}

Tensor AirPhyNet::predict(const data::WindowSample& sample) const {
    const data::WindowSample* one = &sample;
    const auto steps = forward_normalized({&one, 1}, ForwardOptions{});
    const std::size_t n = nodes();
    Tensor out = Tensor::zeros(cfg_.horizon, n);
    for (std::size_t k = 0; k < cfg_.horizon; ++k)
        for (std::size_t i = 0; i < n; ++i) out(k, i) = norm_->denormalize(steps[k].value()[i]);
    return out;
}

}  // namespace aqc::model
