#pragma once

#include <string>
#include <vector>

#include "core/tensor.hpp"

namespace fmnet {

struct LossConfig {
  double lambda = 0.85;  // variance-term weight, in [0,1]
  double alpha = 10.0;   // overall scale, > 0
};

struct OpwConfig {
  double beta = 5.0;  // visibility sharpness, > 0
};

// Scale-invariant log-depth loss over pixels with valid ground truth
// (d_star > 0): alpha * sqrt(mean(u^2) - lambda/n^2 * (sum u)^2) with
// u = log d - log d_star. Differentiable w.r.t. d. A radicand below 1e-18
// clamps the loss (and its gradient) to zero.
Tensor scale_invariant_loss(const Tensor& d, const Tensor& d_star,
                            const LossConfig& cfg);

struct DepthMetrics {
  double rel = 0;    // mean |d - d*| / d*
  double rmse = 0;   // sqrt(mean (d - d*)^2)
  double log10 = 0;  // mean |log10 d - log10 d*|
  double d1 = 0, d2 = 0, d3 = 0;  // max(d/d*, d*/d) < 1.25^i
};

// Accumulates valid pixels across frames so a whole video reduces to one row.
class DepthMetricAccumulator {
 public:
  void add(const Tensor& d, const Tensor& d_star);
  DepthMetrics finalize() const;  // errors when nothing was accumulated

 private:
  double rel_ = 0, sq_ = 0, log10_ = 0, d1_ = 0, d2_ = 0, d3_ = 0;
  size_t n_ = 0;
};

DepthMetrics depth_metrics(const Tensor& d, const Tensor& d_star);

// One consecutive-pair consistency term. flow_back maps frame t+1 pixels to
// their source in frame t; depth_t and frame_t are warped by it, the
// photometric error gates the depth difference, and the result is averaged
// over ALL pixels (n = H*W). Pure evaluation, no gradients.
double opw_pair(const Tensor& depth_t, const Tensor& depth_t1,
                const Tensor& flow_back, const Tensor& frame_t,
                const Tensor& frame_t1, const OpwConfig& cfg);

// Same term split into the part covered by a 0/1 visibility map and the
// rest; visible_part + occluded_part == opw_pair up to summation order.
struct OpwPairParts {
  double opw_t = 0;
  double visible_part = 0;
};
OpwPairParts opw_pair_parts(const Tensor& depth_t, const Tensor& depth_t1,
                            const Tensor& flow_back, const Tensor& frame_t,
                            const Tensor& frame_t1, const Tensor& visibility,
                            const OpwConfig& cfg);

// Sum of opw_pair over the T-1 consecutive pairs of a video; T >= 2.
double opw_video(const std::vector<Tensor>& depths,
                 const std::vector<Tensor>& flows,
                 const std::vector<Tensor>& frames, const OpwConfig& cfg);

std::vector<double> opw_video_pairs(const std::vector<Tensor>& depths,
                                    const std::vector<Tensor>& flows,
                                    const std::vector<Tensor>& frames,
                                    const OpwConfig& cfg);

}  // namespace fmnet
