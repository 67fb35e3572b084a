#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "core/rng.hpp"
#include "core/sequence.hpp"
#include "core/tensor.hpp"

namespace fmnet {

// Which frame indices of an N-frame clip stay visible to the temporal
// encoder. Retained indices are strictly increasing and non-empty.
struct MaskPlan {
  size_t n_frames = 0;
  std::vector<size_t> retained;

  double ratio() const {
    return static_cast<double>(n_frames - retained.size()) /
           static_cast<double>(n_frames);
  }
  void validate() const;
};

// n_retain indices sampled uniformly without replacement
MaskPlan random_mask_plan(size_t n_frames, size_t n_retain, uint64_t seed);
MaskPlan random_mask_plan(size_t n_frames, size_t n_retain, Rng& rng);

// Deterministic placement: retained index k is floor((k+1)*N/(n_retain+1))-1
// for k = 0..n_retain-1; n_retain = N keeps every frame.
MaskPlan uniform_mask_plan(size_t n_frames, size_t n_retain);

MaskPlan identity_mask_plan(size_t n_frames);

// `mask N=<n> keep=<i,j,...> ratio=<pct>`
std::string mask_plan_log_line(const MaskPlan& plan);

// One learnable feature map shared by every masked position; gradient
// contributions from all masked slots accumulate into the same tensor.
struct MaskToken {
  Tensor value;  // [c,h,w]

  static MaskToken init(size_t c, size_t h, size_t w, Rng& rng);
};

// subsequence at the retained indices, original order kept
FeatureSequence apply_mask(const FeatureSequence& p_full, const MaskPlan& plan);

// Full-length sequence: retained slots carry t_um entries, masked slots the
// shared token; position codes for the ORIGINAL indices 0..N-1 are then
// added to every slot.
FeatureSequence complete_sequence(const FeatureSequence& t_um,
                                  const MaskPlan& plan, const MaskToken& token);

}  // namespace fmnet
