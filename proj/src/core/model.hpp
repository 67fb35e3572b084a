#pragma once

#include <string>
#include <utility>
#include <vector>

#include "core/conv_transformer.hpp"
#include "core/losses.hpp"
#include "core/masking.hpp"
#include "core/sequence.hpp"
#include "core/synth.hpp"
#include "core/tensor.hpp"

namespace fmnet {

enum class Variant { kBaseline, kTransformer, kFMNet };

std::string variant_name(Variant v);
Variant variant_from_name(const std::string& name);

struct FMNetConfig {
  Variant variant = Variant::kFMNet;
  size_t n = 12;         // frames per input sequence
  size_t n_retain = 2;   // frames kept visible during masked training
  size_t frame_h = 32, frame_w = 32;
  std::vector<size_t> extractor_channels = {8, 16, 16};  // stride 1,2,2,...
  std::vector<size_t> predictor_channels = {};  // empty: halve per up stage
  size_t encoder_depth = 6;
  size_t decoder_depth = 1;
  double loss_lambda = 0.85;
  double loss_alpha = 10.0;
  double lr = 1e-4;
  size_t lr_decay_steps = 0;  // 0: constant learning rate
  double lr_decay = 0.1;
  uint64_t seed = 0;

  size_t feature_channels() const { return extractor_channels.back(); }
  size_t downsample() const {
    return size_t{1} << (extractor_channels.size() - 1);
  }
  std::vector<size_t> resolved_predictor_channels() const;
  void validate() const;

  // apply_json overlays fields present in the document onto *this
  void apply_json(const std::string& text);
  std::string to_json() const;
};

// Spatial extractor -> positional codes -> masking -> temporal encoder ->
// completion with the shared token -> temporal decoder -> per-frame depth
// predictor fused with extractor skips. The baseline variant skips the whole
// temporal path; the transformer variant runs it without masking.
class FMNetModel {
 public:
  static FMNetModel init(const FMNetConfig& cfg);

  const FMNetConfig& config() const { return cfg_; }
  size_t step() const { return step_; }
  void set_step(size_t s) { step_ = s; }
  double current_lr() const;

  struct Extracted {
    FeatureSequence features;
    std::vector<std::vector<Tensor>> skips;  // per frame, shallow to deep
  };
  Extracted spatial_features(const FrameSequence& clip) const;

  // depth for every frame of the clip; plan picks the encoder's input frames
  std::vector<Tensor> forward(const FrameSequence& clip,
                              const MaskPlan& plan) const;
  // per-frame pipeline without temporal modules
  std::vector<Tensor> baseline_forward(const FrameSequence& clip) const;
  // dispatch by variant: baseline ignores the plan, transformer forces the
  // identity plan
  std::vector<Tensor> predict(const FrameSequence& clip,
                              const MaskPlan& plan) const;

  Tensor predict_depth(const Tensor& temporal_map,
                       const std::vector<Tensor>& frame_skips) const;

  std::vector<std::pair<std::string, Tensor>> named_params() const;

  void save(const std::string& archive_path) const;
  static FMNetModel load(const std::string& archive_path);

  ConvTransformerStack& encoder() { return encoder_; }
  const ConvTransformerStack& encoder() const { return encoder_; }
  ConvTransformerStack& decoder() { return decoder_; }
  MaskToken& token() { return token_; }
  ConvUnit& head() { return head_; }
  std::vector<ConvUnit>& extractor() { return extractor_; }

 private:
  FMNetConfig cfg_;
  std::vector<ConvUnit> extractor_;
  ConvTransformerStack encoder_, decoder_;
  MaskToken token_;
  struct UpStage {
    ConvUnit up, ffm;
  };
  std::vector<UpStage> predictor_;
  ConvUnit head_;
  size_t step_ = 0;

  bool has_temporal() const { return cfg_.variant != Variant::kBaseline; }
};

struct TrainBatchItem {
  FrameSequence frames;
  std::vector<Tensor> gt_depths;  // [1,H,W] per frame
};

// How the fmnet variant draws its training plans; other variants always see
// the identity plan.
enum class MaskSampling { kRandom, kUniform };

// One SGD step: fresh mask plan per clip (fmnet variant only), loss averaged
// over every frame of every clip, parameters updated in place. A non-finite
// loss aborts before any parameter is touched. When used_plans is given it is
// replaced with the per-clip plans of this step.
double train_step(FMNetModel& model, const std::vector<TrainBatchItem>& batch,
                  Rng& mask_rng, MaskSampling sampling = MaskSampling::kRandom,
                  std::vector<MaskPlan>* used_plans = nullptr);

FrameSequence clip_window(const Clip& clip, size_t start, size_t len);
std::vector<Tensor> clip_depth_window(const Clip& clip, size_t start,
                                      size_t len);

}  // namespace fmnet
