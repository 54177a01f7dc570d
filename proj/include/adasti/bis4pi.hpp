#pragma once

// Bidirectional S4 pre-imputation. Each direction runs
//   Y = W_x X + b_x -> S4 -> replace observed -> feature attention
//   -> replace observed -> S4 -> replace observed
// and the two directional outputs are averaged on missing entries.

#include "adasti/data.hpp"
#include "adasti/layers.hpp"
#include "adasti/model_config.hpp"

namespace adasti {

/// Graph-level intermediate tensors of one direction, all [N, L] and in natural time order.
struct DirectionalVars {
    ad::Var Y_c, H, H_c, C, C_c, X_hat, X_c;
};

struct PreImputationVars {
    ad::Var X_c;
    DirectionalVars fwd, bwd;
};

/// Plain-value snapshot of one direction.
struct DirectionalTrace {
    data::Matrix Y_c, H, H_c, C, C_c, X_hat, X_c_dir;
};

struct PreImputation {
    data::Matrix X_c;
    DirectionalTrace trace_f, trace_b;
};

enum class Direction { forward, backward };

/// H^c = X*M + H*(1-M); observed entries are copied bit-exactly.
data::Matrix masked_replace(const data::Matrix& X, const data::Mask& M, const data::Matrix& H);
ad::Var masked_replace(const Tensor& X, const Tensor& M, const ad::Var& H);

Tensor to_tensor(const data::Matrix& m);
Tensor to_tensor(const data::Mask& m);
data::Matrix to_matrix(const Tensor& t);

/// One transformer-encoder layer whose tokens are the nodes of a single timestamp.
/// Each token is the lifted scalar value plus a learned per-node embedding.
struct FeatureAttention {
    nn::Linear lift, proj;
    Index node_embedding = -1;
    nn::Attention attn;
    nn::LayerNorm norm1, norm2;
    nn::Mlp ffn;

    static FeatureAttention create(ParamStore& store, const std::string& name, Index nodes, Index width, Index heads,
                                   Rng& rng);
    /// [N, L] -> [N, L].
    ad::Var operator()(Context& ctx, const ad::Var& x) const;
};

/// Y^c = W_x X + b_x, mixing across nodes at every timestamp.
struct LinearFill {
    Index weight = -1, bias = -1;

    static LinearFill create(ParamStore& store, const std::string& name, Index nodes, Rng& rng);
    ad::Var operator()(Context& ctx, const ad::Var& x) const;
};

struct DirectionalNet {
    LinearFill fill;
    nn::S4Layer s4_first, s4_second;
    FeatureAttention feature;

    static DirectionalNet create(ParamStore& store, const std::string& name, const ModelConfig& cfg, Rng& rng);
    /// Runs the pipeline on X (zero-filled where M=0) in the given time order.
    DirectionalVars operator()(Context& ctx, const Tensor& X, const Tensor& M) const;
};

class Bis4pi {
public:
    static Bis4pi create(ParamStore& store, const ModelConfig& cfg, Rng& rng);

    DirectionalVars directional(Context& ctx, const Tensor& X, const Tensor& M, Direction dir) const;
    PreImputationVars forward(Context& ctx, const Tensor& X, const Tensor& M) const;

    /// Value-only convenience wrappers.
    DirectionalTrace directional_trace(const ParamStore& store, const data::Matrix& X, const data::Mask& M,
                                       Direction dir) const;
    PreImputation run(const ParamStore& store, const data::Matrix& X, const data::Mask& M) const;

private:
    DirectionalNet fwd_, bwd_;
};

/// l1 + l2 + l3, each an MAE over entries with M=1. With `literal` the first two
/// terms compare against H^c and C^c (identically zero); otherwise against H and C.
ad::Var reconstruction_loss(const Tensor& X, const Tensor& M, const DirectionalVars& trace, bool literal = false);
double reconstruction_loss(const data::Matrix& X, const data::Mask& M, const DirectionalTrace& trace,
                           bool literal = false);

/// MAE between the directional outputs over entries with M=0 (0 if none).
ad::Var consistency_loss(const PreImputationVars& pre, const Tensor& M);
double consistency_loss(const PreImputation& pre, const data::Mask& M);

/// Mean |a - x| over entries where mask != 0.
ad::Var masked_mae(const ad::Var& a, const Tensor& x, const Tensor& mask);

}  // namespace adasti
