#pragma once

// Non-learned imputers used as reference points and as the pre-imputation
// substitute when the S4 pre-imputation network is disabled.

#include "adasti/data.hpp"

namespace adasti {

/// Missing entries take their node's observed mean; a node with no observations
/// takes the global observed mean (0 if nothing is observed at all).
data::Matrix baseline_mean(const data::Matrix& X, const data::Mask& M);

/// Per node, linear interpolation in time between the nearest observed entries
/// and constant extrapolation at the edges; fully missing nodes fall back to
/// baseline_mean.
data::Matrix baseline_tli(const data::Matrix& X, const data::Mask& M);

}  // namespace adasti
