#include "aqc/physics_de/de_function.hpp"

#include <cmath>

#include "aqc/errors.hpp"

namespace aqc::physics {

Var flow_potential(const Var& wind, const Var& w1, const Var& b1, const Var& w2) {
    if (wind.value().rank() != 2 || wind.value().cols() != 2) {
        throw DimensionError("flow net expects N x 2 wind components, got " +
                             num::to_string(wind.shape()));
    }
    return num::matmul(num::tanh(num::add(num::matmul(wind, w1), b1)), w2);
}

Var flow_field_adjacency(const Var& wind, const Var& w1, const Var& b1, const Var& w2) {
    return num::pairwise_difference(flow_potential(wind, w1, b1, w2));
}

Var flow_field_laplacian(const Var& w_p) { return num::neg(num::normalized_adjacency(w_p)); }

Var cheb_branch(const Var& lap, const Var& h0, const std::vector<std::vector<Var>>& theta,
                Activation act) {
    const std::size_t n = h0.value().rows();
    if (lap.value().rows() != n || lap.value().cols() == 0 || n % lap.value().cols() != 0) {
        throw DimensionError("cheb_branch: Laplacian " + num::to_string(lap.shape()) +
                             " does not match features " + num::to_string(h0.shape()));
    }
    Var total = h0;
    Var h = h0;
    for (const auto& layer : theta) {
        if (layer.empty()) throw ContractError("cheb_branch: layer with no coefficients");
        Var power = h;
        Var acc = num::matmul(power, layer[0]);
        for (std::size_t k = 1; k < layer.size(); ++k) {
            power = num::block_matmul(lap, power);
            acc = num::add(acc, num::matmul(power, layer[k]));
        }
        h = act == Activation::tanh ? num::tanh(acc) : acc;
        total = num::add(total, h);
    }
    return total;
}

GatedFusion gated_fusion(const Var& h_diff, const Var& h_adv, const Var& w_diff, const Var& w_adv,
                         const Var& bias) {
    if (h_diff.shape() != h_adv.shape()) {
        throw DimensionError("gated_fusion: branch shapes " + num::to_string(h_diff.shape()) + " and " +
                             num::to_string(h_adv.shape()) + " differ");
    }
    Var alpha = num::sigmoid(
        num::add(num::add(num::matmul(h_diff, w_diff), num::matmul(h_adv, w_adv)), bias));
    Var fused = num::add(num::mul(alpha, h_diff), num::mul(num::affine(alpha, -1.0, 1.0), h_adv));
    return {alpha, fused};
}

// ---- DEFunction ---------------------------------------------------------------

DEFunction::DEFunction(num::ParameterStore& store, const DEConfig& cfg, geo::ScaledLaplacian distance,
                       num::Rng& rng)
    : cfg_(cfg), distance_(std::move(distance)) {
    const std::size_t d = cfg.latent_dim, h = cfg.flow_hidden;
    if (d == 0 || cfg.cheb_order == 0 || cfg.cheb_layers == 0 || h == 0) {
        throw ConfigError("DE config: dimensions, order and layer count must be positive");
    }
    if (!(cfg.k_init > 0.0)) throw ConfigError("DE config: k_init must be positive");

    // softplus^{-1}(k) = log(e^k - 1)
    k_raw_ = &store.add("de.k_raw", Tensor::scalar(std::log(std::expm1(cfg.k_init))));

    flow_.w1 = &store.add("de.flow.w1", num::uniform_init(2, h, 2, rng));
    flow_.b1 = &store.add("de.flow.b1", num::uniform_init(1, h, 2, rng));
    flow_.w2 = &store.add("de.flow.w2", num::uniform_init(h, 1, h, rng));

    auto make_branch = [&](const std::string& prefix, ChebBranchParams& branch) {
        branch.activation = cfg.activation;
        for (std::size_t l = 0; l < cfg.cheb_layers; ++l) {
            std::vector<Parameter*> layer;
            for (std::size_t k = 0; k < cfg.cheb_order; ++k) {
                layer.push_back(&store.add(
                    prefix + ".layer" + std::to_string(l) + ".theta" + std::to_string(k),
                    num::uniform_init(d, d, d * cfg.cheb_order, rng)));
            }
            branch.theta.push_back(std::move(layer));
        }
    };
    make_branch("de.diff", diff_);
    make_branch("de.adv", adv_);

    fusion_.w_diff = &store.add("de.gate.w_diff", num::uniform_init(d, d, 2 * d, rng));
    fusion_.w_adv = &store.add("de.gate.w_adv", num::uniform_init(d, d, 2 * d, rng));
    fusion_.bias = &store.add("de.gate.bias", num::uniform_init(1, d, 2 * d, rng));
}

void DEFunction::set_distance_laplacian(geo::ScaledLaplacian l) { distance_ = std::move(l); }

double DEFunction::diffusion_coefficient() const {
    const double x = k_raw_->value().item();
    return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

BoundDE DEFunction::bind(Tape* tape) {
    BoundDE b;
    b.tape_ = tape;
    b.gate_ = cfg_.gate;
    b.activation_ = cfg_.activation;
    b.k_ = num::softplus(num::use(*k_raw_, tape));
    b.lap_single_ = num::constant(distance_.matrix);
    b.lap_ = b.lap_single_;
    b.flow_w1_ = num::use(*flow_.w1, tape);
    b.flow_b1_ = num::use(*flow_.b1, tape);
    b.flow_w2_ = num::use(*flow_.w2, tape);
    auto bind_branch = [tape](const ChebBranchParams& branch) {
        std::vector<std::vector<Var>> out;
        for (const auto& layer : branch.theta) {
            std::vector<Var> vars;
            for (Parameter* p : layer) vars.push_back(num::use(*p, tape));
            out.push_back(std::move(vars));
        }
        return out;
    };
    b.diff_theta_ = bind_branch(diff_);
    b.adv_theta_ = bind_branch(adv_);
    b.fuse_w_diff_ = num::use(*fusion_.w_diff, tape);
    b.fuse_w_adv_ = num::use(*fusion_.w_adv, tape);
    b.fuse_bias_ = num::use(*fusion_.bias, tape);
    return b;
}

// ---- BoundDE ------------------------------------------------------------------

void BoundDE::with_wind(const Var& wind_last) { with_winds({wind_last}); }

void BoundDE::with_winds(const std::vector<Var>& winds_last) {
    if (winds_last.empty()) throw ContractError("DE function: no wind samples");
    std::vector<Var> blocks;
    blocks.reserve(winds_last.size());
    for (const Var& w : winds_last) {
        blocks.push_back(flow_field_laplacian(flow_field_adjacency(w, flow_w1_, flow_b1_, flow_w2_)));
    }
    m_ = blocks.size() == 1 ? blocks[0] : num::concat_rows(blocks);
}

const Var& BoundDE::distance_blocks(const Var& z) const {
    const std::size_t rows = z.value().rows(), n = lap_single_.value().rows();
    if (lap_.value().rows() != rows && rows % n == 0 && rows > n) {
        lap_ = num::concat_rows(std::vector<Var>(rows / n, lap_single_));
    }
    return lap_;
}

BoundDE::Parts BoundDE::evaluate(const Var& z) const {
    Parts parts;
    switch (gate_) {
        case GateMode::diffusion_only:
            parts.h_diff = cheb_branch(distance_blocks(z), z, diff_theta_, activation_);
            parts.alpha = num::constant(Tensor(z.shape(), 1.0));
            parts.derivative = num::neg(num::mul(k_, parts.h_diff));
            return parts;
        case GateMode::advection_only:
            if (!m_.defined()) throw ConfigError("DE function: flow-field Laplacian M is not set");
            parts.h_adv = cheb_branch(m_, z, adv_theta_, activation_);
            parts.alpha = num::constant(Tensor(z.shape(), 0.0));
            parts.derivative = num::neg(parts.h_adv);
            return parts;
        case GateMode::learned:
            break;
    }
    if (!m_.defined()) throw ConfigError("DE function: flow-field Laplacian M is not set");
    parts.h_diff = cheb_branch(distance_blocks(z), z, diff_theta_, activation_);
    parts.h_adv = cheb_branch(m_, z, adv_theta_, activation_);
    parts.alpha = num::sigmoid(num::add(
        num::add(num::matmul(parts.h_diff, fuse_w_diff_), num::matmul(parts.h_adv, fuse_w_adv_)),
        fuse_bias_));
    // -(alpha * k * H_diff + (1 - alpha) * H_adv)
    parts.derivative = num::neg(num::add(num::mul(parts.alpha, num::mul(k_, parts.h_diff)),
                                         num::mul(num::affine(parts.alpha, -1.0, 1.0), parts.h_adv)));
    return parts;
}

Var BoundDE::operator()(double /*t*/, const Var& z) const { return evaluate(z).derivative; }

}  // namespace aqc::physics
