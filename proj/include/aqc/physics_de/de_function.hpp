#pragma once

// Learned diffusion-advection dynamics on the sensor graph.
//
//   dz/dt = -alpha * k * H_diff - (1 - alpha) * H_adv
//
// H_diff and H_adv are residual Chebyshev graph convolutions over the
// distance Laplacian L and the flow-field Laplacian M; alpha is a sigmoid gate
// computed from both branch outputs; k = softplus(k_raw) is the learned
// diffusion coefficient.

#include <cstddef>
#include <vector>

#include "aqc/geo_graph/graph.hpp"
#include "aqc/numcore/autodiff.hpp"
#include "aqc/numcore/parameters.hpp"

namespace aqc::physics {

using num::Parameter;
using num::Tape;
using num::Tensor;
using num::Var;

enum class Activation { tanh, identity };

/// Which branches feed the derivative. The single-branch modes pin alpha to 1
/// (diffusion only) or 0 (advection only).
enum class GateMode { learned, diffusion_only, advection_only };

struct DEConfig {
    std::size_t latent_dim = 16;
    std::size_t cheb_order = 3;   // K: powers L^0 .. L^{K-1}
    std::size_t cheb_layers = 2;  // L'
    std::size_t flow_hidden = 16;
    Activation activation = Activation::tanh;
    GateMode gate = GateMode::learned;
    double k_init = 0.1;
};

/// Two-layer map from per-node wind (u, v) to a scalar potential p. The output
/// layer has no bias: a shared offset cancels in p_i - p_j.
struct FlowNetParams {
    Parameter* w1 = nullptr;  // 2 x h
    Parameter* b1 = nullptr;  // 1 x h
    Parameter* w2 = nullptr;  // h x 1
};

struct ChebBranchParams {
    // theta[layer][k], each d x d
    std::vector<std::vector<Parameter*>> theta;
    Activation activation = Activation::tanh;
};

struct FusionParams {
    Parameter* w_diff = nullptr;  // d x d
    Parameter* w_adv = nullptr;   // d x d
    Parameter* bias = nullptr;    // 1 x d
};

// ---- building blocks (values or recorded, depending on their inputs) -------

/// p = tanh(P w1 + b1) w2, one scalar per node.
Var flow_potential(const Var& wind, const Var& w1, const Var& b1, const Var& w2);

/// W_p(i,j) = p_i - p_j for p = FlowNet(wind); exactly antisymmetric.
Var flow_field_adjacency(const Var& wind, const Var& w1, const Var& b1, const Var& w2);

/// Scaled flow-field Laplacian with lambda_max = 2, i.e. -D^{-1/2} W_p D^{-1/2}.
Var flow_field_laplacian(const Var& w_p);

/// H = sum_{l=0}^{L'} H^{(l)}, H^{(0)} = h0,
/// H^{(l)} = act(sum_k Lap^k H^{(l-1)} theta_k).
/// A batch stacks B samples: h0 is (B N) x d and lap holds B blocks of N x N
/// (see num::block_matmul).
Var cheb_branch(const Var& lap, const Var& h0, const std::vector<std::vector<Var>>& theta,
                Activation act);

struct GatedFusion {
    Var alpha;
    Var fused;
};

/// alpha = sigmoid(H_diff W1 + H_adv W2 + b); fused = alpha H_diff + (1 - alpha) H_adv.
GatedFusion gated_fusion(const Var& h_diff, const Var& h_adv, const Var& w_diff, const Var& w_adv,
                         const Var& bias);

class BoundDE;

/// Trainable parameters of the dynamics plus the fixed distance Laplacian.
class DEFunction {
public:
    DEFunction(num::ParameterStore& store, const DEConfig& cfg, geo::ScaledLaplacian distance,
               num::Rng& rng);

    const DEConfig& config() const { return cfg_; }
    const geo::ScaledLaplacian& distance_laplacian() const { return distance_; }
    void set_distance_laplacian(geo::ScaledLaplacian l);

    Parameter& k_raw() { return *k_raw_; }
    const FlowNetParams& flow() const { return flow_; }
    const ChebBranchParams& diffusion() const { return diff_; }
    const ChebBranchParams& advection() const { return adv_; }
    const FusionParams& fusion() const { return fusion_; }

    /// Effective diffusion coefficient softplus(k_raw) > 0.
    double diffusion_coefficient() const;

    /// Parameter values as Vars on `tape` (constants when null). The
    /// flow-field Laplacian is left unset; see BoundDE::with_wind.
    BoundDE bind(Tape* tape);

private:
    DEConfig cfg_;
    geo::ScaledLaplacian distance_;
    Parameter* k_raw_ = nullptr;
    FlowNetParams flow_;
    ChebBranchParams diff_;
    ChebBranchParams adv_;
    FusionParams fusion_;
};

/// DEFunction evaluated against one tape and one flow-field Laplacian.
class BoundDE {
public:
    /// Builds M from the wind at the last observed step (N x 2 of u, v).
    void with_wind(const Var& wind_last);
    /// Batched form: one N x 2 wind matrix per sample. States passed to the
    /// field are then the samples' N x d blocks stacked by rows.
    void with_winds(const std::vector<Var>& winds_last);
    /// Sets M directly.
    void set_flow_laplacian(const Var& m) { m_ = m; }
    const Var& flow_laplacian() const { return m_; }

    /// dz/dt at state z (N x d). Time is accepted for solver compatibility;
    /// the field is autonomous. ConfigError if M has not been set.
    Var operator()(double t, const Var& z) const;

    /// The same evaluation with the gate exposed, for diagnostics and tests.
    struct Parts {
        Var h_diff, h_adv, alpha, derivative;
    };
    Parts evaluate(const Var& z) const;

    Tape* tape() const { return tape_; }

private:
    friend class DEFunction;
    Tape* tape_ = nullptr;
    GateMode gate_ = GateMode::learned;
    Activation activation_ = Activation::tanh;
    Var k_;
    Var lap_single_;
    mutable Var lap_;  // lap_single_ tiled once per batch sample
    const Var& distance_blocks(const Var& z) const;
    Var m_;
    Var flow_w1_, flow_b1_, flow_w2_;
    std::vector<std::vector<Var>> diff_theta_, adv_theta_;
    Var fuse_w_diff_, fuse_w_adv_, fuse_bias_;
};

}  // namespace aqc::physics
