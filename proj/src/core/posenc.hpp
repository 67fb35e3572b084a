#pragma once

#include "core/sequence.hpp"
#include "core/tensor.hpp"

namespace fmnet {

// Sinusoidal position code for one frame, broadcast over the spatial grid:
// channel 2k carries sin(pos / 10000^(2k/c)), channel 2k+1 the matching cos.
// Channels count must be even. No parameters; same (pos,h,w,c) always yields
// the same tensor.
Tensor positional_embedding(size_t pos, size_t h, size_t w, size_t c);

// p_i = f_i + PE(positions[i]). Positions are indices into the ORIGINAL full
// clip, not into a masked subsequence.
FeatureSequence add_positional(const FeatureSequence& seq,
                               const std::vector<size_t>& positions);

}  // namespace fmnet
