#pragma once

#include <string>

#include "adasti/common.hpp"

namespace adasti {

/// Where the optional S4 + graph-convolutional GRU block is inserted.
enum class AuxPlacement { none, nast, stc };

AuxPlacement parse_aux_placement(const std::string& s);
std::string to_string(AuxPlacement p);

/// Architecture hyperparameters shared by all sub-networks.
struct ModelConfig {
    Index nodes = 0;   // N
    Index length = 24; // L

    Index channels = 64;       // C_h, attention width
    Index mlp_hidden = 2048;   // projection after attention
    Index heads = 8;
    Index layers = 4;          // residual layers R
    Index step_embedding = 128;
    Index state_dim = 64;      // S4 state size d
    Index feature_width = 64;  // pre-imputation feature-attention width
    Index feature_heads = 8;
    Index stc_kernel = 1;
    Index diffusion_steps = 50;  // T, bounds the step embedding      // temporal width of the STC input convolution
    bool positional_encoding = true;

    bool use_bis4pi = true;          // false: temporal linear interpolation pre-imputation
    bool gated_attention = true;     // false: cross-attention only
    bool share_directions = false;   // forward/backward pre-imputation share weights
    bool literal_reconstruction = false;  // l1/l2 against the masked-replaced tensors
    AuxPlacement aux = AuxPlacement::none;

    void validate() const;
};

}  // namespace adasti
