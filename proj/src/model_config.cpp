#include "adasti/model_config.hpp"

namespace adasti {

AuxPlacement parse_aux_placement(const std::string& s) {
    if (s == "none") return AuxPlacement::none;
    if (s == "nast") return AuxPlacement::nast;
    if (s == "stc") return AuxPlacement::stc;
    throw ContractError("unknown auxiliary block placement '" + s + "' (expected none, nast or stc)");
}

std::string to_string(AuxPlacement p) {
    switch (p) {
        case AuxPlacement::nast: return "nast";
        case AuxPlacement::stc: return "stc";
        default: return "none";
    }
}

void ModelConfig::validate() const {
    require(nodes >= 1, "model: nodes must be >= 1");
    require(length >= 1, "model: length must be >= 1");
    require(channels >= 1 && heads >= 1 && channels % heads == 0, "model: channels must be a positive multiple of heads");
    require(feature_width >= 1 && feature_heads >= 1 && feature_width % feature_heads == 0,
            "model: feature_width must be a positive multiple of feature_heads");
    require(mlp_hidden >= 1 && layers >= 1 && state_dim >= 1, "model: mlp_hidden, layers and state_dim must be >= 1");
    require(step_embedding >= 2 && step_embedding % 2 == 0, "model: step_embedding must be even");
    require(diffusion_steps >= 1, "model: diffusion_steps must be >= 1");
    require(stc_kernel >= 1 && stc_kernel % 2 == 1, "model: stc_kernel must be odd");
}

}  // namespace adasti
