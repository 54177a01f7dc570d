#pragma once

// Spatio-temporal conditionalizer:
//   U_in  = Conv(X^c)
//   Y_tem = Norm(Attn_tem(U_in) + U_in)
//   Y_gcn = Norm(GCN(Y_tem, A) + U_in)
//   Y_spa = Norm(Attn_spa(Y_tem) + U_in)
//   Y_sum = U_in + Y_tem + Y_gcn + Y_spa
//   U     = Norm(MLP(Y_sum) + Y_sum)

#include <optional>

#include "adasti/aux_block.hpp"
#include "adasti/layers.hpp"
#include "adasti/model_config.hpp"

namespace adasti {

/// Conditional tensor U, stored [N, L, C_h].
struct ConditionInfo {
    Tensor U;
    Index channels() const { return U.dim(2); }
};

struct StcIntermediates {
    ad::Var U_in, Y_tem, Y_gcn, Y_spa, Y_sum, U;
};

class Stc {
public:
    static Stc create(ParamStore& store, const ModelConfig& cfg, Rng& rng);

    /// X_c is [N, L]; `a_hat` the normalized adjacency; `pe` is [L, C_h] or empty.
    StcIntermediates forward(Context& ctx, const ad::Var& X_c, const Tensor& a_hat, const Tensor& pe) const;
    ConditionInfo run(const ParamStore& store, const Tensor& X_c, const Tensor& a_hat, const Tensor& pe) const;

    nn::Linear lift;
    Index kernel = 1;
    nn::Attention attn_tem, attn_spa;
    nn::Gcn gcn;
    nn::LayerNorm norm_tem, norm_gcn, norm_spa, norm_out;
    nn::Mlp mlp;
    std::optional<AuxS4Gcgru> aux;
};

}  // namespace adasti
