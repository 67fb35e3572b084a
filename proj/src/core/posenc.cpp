#include "core/posenc.hpp"

#include <cmath>

namespace fmnet {

Tensor positional_embedding(size_t pos, size_t h, size_t w, size_t c) {
  require(c % 2 == 0, ErrorCode::kInvalidArgument,
          "positional_embedding: channel count must be even");
  require(h > 0 && w > 0, ErrorCode::kInvalidArgument,
          "positional_embedding: empty spatial dims");
  Tensor pe = Tensor::zeros({c, h, w});
  double* p = pe.data();
  const size_t hw = h * w;
  for (size_t k = 0; 2 * k < c; ++k) {
    const double angle =
        static_cast<double>(pos) /
        std::pow(10000.0, 2.0 * static_cast<double>(k) / static_cast<double>(c));
    const double s = std::sin(angle);
    const double co = std::cos(angle);
    std::fill(p + (2 * k) * hw, p + (2 * k + 1) * hw, s);
    std::fill(p + (2 * k + 1) * hw, p + (2 * k + 2) * hw, co);
  }
  return pe;
}

FeatureSequence add_positional(const FeatureSequence& seq,
                               const std::vector<size_t>& positions) {
  seq.validate();
  require(positions.size() == seq.length(), ErrorCode::kShapeMismatch,
          "add_positional: positions length does not match sequence");
  const Shape& s = seq.maps[0].shape();
  FeatureSequence out;
  out.source_positions = seq.source_positions;
  out.maps.reserve(seq.length());
  for (size_t i = 0; i < seq.length(); ++i)
    out.maps.push_back(
        add(seq.maps[i], positional_embedding(positions[i], s[1], s[2], s[0])));
  return out;
}

}  // namespace fmnet
