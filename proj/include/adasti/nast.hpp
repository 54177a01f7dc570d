#pragma once

// Noise-aware spatio-temporal denoiser. Each residual layer applies
//   X_tem = GateAttn_tem(X_in, U)
//   X_gcn = Norm(GCN(X_tem, A) + X_tem)
//   X_spa = Norm(GateAttn_spa(X_tem, U) + X_tem)
//   X'    = Norm(MLP(X_gcn + X_spa))
// inside a DiffWave-style residual/skip stack.

#include <optional>

#include "adasti/aux_block.hpp"
#include "adasti/layers.hpp"
#include "adasti/model_config.hpp"
#include "adasti/stc.hpp"

namespace adasti {

enum class Axis { temporal, spatial };

/// Self-attention (Q,K,V from X) and cross-attention (Q,K from U, V from X)
/// blended by a learned sigmoid gate. Without gating only the cross branch exists.
struct GatedAttention {
    std::optional<nn::Attention> self;
    nn::Attention cross;
    std::optional<nn::Linear> gate_self, gate_cross;
    Index gate_bias = -1;

    static GatedAttention create(ParamStore& store, const std::string& name, Index width, Index heads, bool gated,
                                 Rng& rng);

    bool gated() const { return self.has_value(); }

    struct Parts {
        ad::Var R_self, R_cross, G, R;
    };
    /// Inputs are [N, L, C]. `pe` ([L, C] or empty) is added to X before the
    /// temporal self-attention projections.
    Parts parts(Context& ctx, const ad::Var& X, const ad::Var& U, Axis axis, const Tensor& pe = {}) const;
    ad::Var operator()(Context& ctx, const ad::Var& X, const ad::Var& U, Axis axis, const Tensor& pe = {}) const;
};

/// Cross-attention alone: softmax(U W_q (U W_k)^T / sqrt(d)) X W_v along `axis`.
ad::Var cross_attention(Context& ctx, const nn::Attention& attn, const ad::Var& X, const ad::Var& U, Axis axis);

struct Nast {
    GatedAttention tem, spa;
    nn::Gcn gcn;
    nn::LayerNorm norm_gcn, norm_spa, norm_out;
    nn::Mlp mlp;
    std::optional<AuxS4Gcgru> aux;

    static Nast create(ParamStore& store, const std::string& name, const ModelConfig& cfg, Rng& rng);
    ad::Var operator()(Context& ctx, const ad::Var& X_in, const ad::Var& U, const Tensor& a_hat,
                       const Tensor& pe) const;
};

/// Sinusoidal table of the diffusion step followed by two SiLU-activated affine maps.
struct StepEmbedding {
    nn::Linear proj1, proj2;
    Index dim = 0;
    Index steps = 0;  // T; valid steps are 1..T

    static StepEmbedding create(ParamStore& store, const std::string& name, Index dim, Index steps, Rng& rng);
    static Tensor sinusoidal(Index t, Index dim);
    ad::Var operator()(Context& ctx, Index t) const;
};

/// Noise-estimator inputs; all matrices are [N, L].
struct DenoiserInput {
    Tensor X_ta_t;  // noisy targets, 0 off-target
    ad::Var X_c;    // pre-imputation (may carry gradients)
    Tensor M_ta, M_co;
    Index t = 1;
    ad::Var U;      // [N, L, C_h]
};

struct ResidualLayer {
    nn::Linear step_proj;
    Nast nast;
    nn::Linear mid, out;
};

class Denoiser {
public:
    static Denoiser create(ParamStore& store, const ModelConfig& cfg, Rng& rng);
    /// Estimated noise on every entry, [N, L].
    ad::Var operator()(Context& ctx, const DenoiserInput& in, const Tensor& a_hat, const Tensor& pe) const;

    nn::Linear input;
    StepEmbedding embedding;
    std::vector<ResidualLayer> layers;
    nn::Linear skip_proj, output;
};

}  // namespace adasti
