#include "core/losses.hpp"

#include <cmath>

#include "core/numeric.hpp"

namespace fmnet {

Tensor scale_invariant_loss(const Tensor& d, const Tensor& d_star,
                            const LossConfig& cfg) {
  require(d.defined() && d_star.defined(), ErrorCode::kInvalidArgument,
          "scale_invariant_loss: undefined operand");
  require(d.shape() == d_star.shape(), ErrorCode::kShapeMismatch,
          "scale_invariant_loss: prediction/ground-truth shape mismatch");
  require(cfg.lambda >= 0.0 && cfg.lambda <= 1.0, ErrorCode::kInvalidArgument,
          "scale_invariant_loss: lambda outside [0,1]");
  require(cfg.alpha > 0.0, ErrorCode::kInvalidArgument,
          "scale_invariant_loss: alpha must be positive");

  std::vector<uint8_t> valid(d_star.numel());
  std::vector<double> gt_logs;
  for (size_t i = 0; i < d_star.numel(); ++i) {
    valid[i] = d_star.at(i) > 0.0 ? 1 : 0;
    if (valid[i]) gt_logs.push_back(std::log(d_star.at(i)));
  }
  require(!gt_logs.empty(), ErrorCode::kInvalidArgument,
          "scale_invariant_loss: no pixels with valid ground truth");
  const size_t count = gt_logs.size();
  const double n = static_cast<double>(count);

  Tensor u = sub(log_t(masked_select(d, valid)),
                 Tensor::from({count}, std::move(gt_logs)));
  Tensor radicand = sub(scale(sum(square(u)), 1.0 / n),
                        scale(square(sum(u)), cfg.lambda / (n * n)));
  if (radicand.value() < 1e-18) return Tensor::scalar(0.0);
  return scale(sqrt_t(radicand), cfg.alpha);
}

void DepthMetricAccumulator::add(const Tensor& d, const Tensor& d_star) {
  require(d.defined() && d_star.defined() && d.shape() == d_star.shape(),
          ErrorCode::kShapeMismatch, "depth_metrics: shape mismatch");
  for (size_t i = 0; i < d.numel(); ++i) {
    const double gt = d_star.at(i);
    if (gt <= 0.0) continue;
    const double dv = d.at(i);
    require(dv > 0.0, ErrorCode::kDomain,
            "depth_metrics: non-positive predicted depth");
    ++n_;
    rel_ += std::fabs(dv - gt) / gt;
    sq_ += (dv - gt) * (dv - gt);
    log10_ += std::fabs(std::log10(dv) - std::log10(gt));
    const double ratio = std::max(dv / gt, gt / dv);
    if (ratio < 1.25) d1_ += 1.0;
    if (ratio < 1.5625) d2_ += 1.0;
    if (ratio < 1.953125) d3_ += 1.0;
  }
}

DepthMetrics DepthMetricAccumulator::finalize() const {
  require(n_ > 0, ErrorCode::kInvalidArgument,
          "depth_metrics: no pixels with valid ground truth");
  const double n = static_cast<double>(n_);
  DepthMetrics m;
  m.rel = rel_ / n;
  m.rmse = std::sqrt(sq_ / n);
  m.log10 = log10_ / n;
  m.d1 = d1_ / n;
  m.d2 = d2_ / n;
  m.d3 = d3_ / n;
  return m;
}

DepthMetrics depth_metrics(const Tensor& d, const Tensor& d_star) {
  DepthMetricAccumulator acc;
  acc.add(d, d_star);
  return acc.finalize();
}

namespace {

void check_pair_shapes(const Tensor& depth_t, const Tensor& depth_t1,
                       const Tensor& flow_back, const Tensor& frame_t,
                       const Tensor& frame_t1) {
  require(depth_t.rank() == 3 && depth_t.dim(0) == 1, ErrorCode::kShapeMismatch,
          "opw_pair: depth must be [1,h,w]");
  const size_t h = depth_t.dim(1), w = depth_t.dim(2);
  require(depth_t1.shape() == depth_t.shape(), ErrorCode::kShapeMismatch,
          "opw_pair: depth shapes differ");
  require(flow_back.rank() == 3 && flow_back.dim(0) == 2 &&
              flow_back.dim(1) == h && flow_back.dim(2) == w,
          ErrorCode::kShapeMismatch, "opw_pair: flow must be [2,h,w]");
  require(frame_t.rank() == 3 && frame_t.dim(0) == 3 && frame_t.dim(1) == h &&
              frame_t.dim(2) == w && frame_t1.shape() == frame_t.shape(),
          ErrorCode::kShapeMismatch, "opw_pair: frames must be [3,h,w]");
}

}  // namespace

OpwPairParts opw_pair_parts(const Tensor& depth_t, const Tensor& depth_t1,
                            const Tensor& flow_back, const Tensor& frame_t,
                            const Tensor& frame_t1, const Tensor& visibility,
                            const OpwConfig& cfg) {
  check_pair_shapes(depth_t, depth_t1, flow_back, frame_t, frame_t1);
  require(cfg.beta > 0.0, ErrorCode::kInvalidArgument,
          "opw_pair: beta must be positive");
  const size_t h = depth_t.dim(1), w = depth_t.dim(2), hw = h * w;
  const bool split = visibility.defined();
  if (split)
    require(visibility.rank() == 3 && visibility.dim(0) == 1 &&
                visibility.dim(1) == h && visibility.dim(2) == w,
            ErrorCode::kShapeMismatch, "opw_pair: visibility must be [1,h,w]");

  std::vector<double> warped_depth(hw);
  std::vector<double> warped_frame(3 * hw);
  warp_bilinear_raw(depth_t.data(), 1, h, w, flow_back.data(),
                    warped_depth.data());
  warp_bilinear_raw(frame_t.data(), 3, h, w, flow_back.data(),
                    warped_frame.data());

  std::vector<double> terms(hw);
  std::vector<double> visible_terms;
  for (size_t p = 0; p < hw; ++p) {
    double err2 = 0.0;
    for (size_t ch = 0; ch < 3; ++ch) {
      const double e = frame_t1.at(ch * hw + p) - warped_frame[ch * hw + p];
      err2 += e * e;
    }
    const double mask = std::exp(-cfg.beta * err2);
    terms[p] = mask * std::fabs(depth_t1.at(p) - warped_depth[p]);
    if (split && visibility.at(p) != 0.0) visible_terms.push_back(terms[p]);
  }
  OpwPairParts parts;
  parts.opw_t = pairwise_sum(terms) / static_cast<double>(hw);
  parts.visible_part =
      split ? pairwise_sum(visible_terms) / static_cast<double>(hw) : 0.0;
  return parts;
}

double opw_pair(const Tensor& depth_t, const Tensor& depth_t1,
                const Tensor& flow_back, const Tensor& frame_t,
                const Tensor& frame_t1, const OpwConfig& cfg) {
  return opw_pair_parts(depth_t, depth_t1, flow_back, frame_t, frame_t1,
                        Tensor(), cfg)
      .opw_t;
}

std::vector<double> opw_video_pairs(const std::vector<Tensor>& depths,
                                    const std::vector<Tensor>& flows,
                                    const std::vector<Tensor>& frames,
                                    const OpwConfig& cfg) {
  require(depths.size() >= 2, ErrorCode::kInvalidArgument,
          "opw_video: need at least two frames");
  require(frames.size() == depths.size(), ErrorCode::kShapeMismatch,
          "opw_video: frame count does not match depth count");
  require(flows.size() == depths.size() - 1, ErrorCode::kShapeMismatch,
          "opw_video: need one backward flow per consecutive pair");
  std::vector<double> pairs(depths.size() - 1);
  for (size_t t = 0; t + 1 < depths.size(); ++t)
    pairs[t] = opw_pair(depths[t], depths[t + 1], flows[t], frames[t],
                        frames[t + 1], cfg);
  return pairs;
}

double opw_video(const std::vector<Tensor>& depths,
                 const std::vector<Tensor>& flows,
                 const std::vector<Tensor>& frames, const OpwConfig& cfg) {
  return pairwise_sum(opw_video_pairs(depths, flows, frames, cfg));
}

}  // namespace fmnet
