#pragma once

#include <vector>

#include "core/tensor.hpp"

namespace fmnet {

// Ordered clip of frames, each [3,H,W] in [0,1]. Frame i sits at position i.
struct FrameSequence {
  std::vector<Tensor> frames;

  size_t length() const { return frames.size(); }
};

// Per-frame feature maps [c,h,w] plus the original clip positions they came
// from. Positions stay strictly increasing through masking.
struct FeatureSequence {
  std::vector<Tensor> maps;
  std::vector<size_t> source_positions;

  size_t length() const { return maps.size(); }

  void validate() const {
    require(maps.size() == source_positions.size(), ErrorCode::kShapeMismatch,
            "FeatureSequence: positions do not match maps");
    require(!maps.empty(), ErrorCode::kInvalidArgument,
            "FeatureSequence: empty sequence");
    const Shape& s = maps[0].shape();
    require(s.size() == 3, ErrorCode::kShapeMismatch,
            "FeatureSequence: maps must be [c,h,w]");
    for (const Tensor& m : maps)
      require(m.shape() == s, ErrorCode::kShapeMismatch,
              "FeatureSequence: inconsistent map shapes");
    for (size_t i = 1; i < source_positions.size(); ++i)
      require(source_positions[i - 1] < source_positions[i],
              ErrorCode::kInvalidArgument,
              "FeatureSequence: positions must strictly increase");
  }
};

}  // namespace fmnet
