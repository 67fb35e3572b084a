#include "core/model.hpp"

#include <cmath>
#include <cstdio>
#include <map>
#include <set>

#include <json.hpp>

#include "core/archive.hpp"
#include "core/error.hpp"
#include "core/posenc.hpp"
#include "core/rng.hpp"

namespace fmnet {

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::kBaseline: return "baseline";
    case Variant::kTransformer: return "transformer";
    case Variant::kFMNet: return "fmnet";
  }
  fail(ErrorCode::kInvalidArgument, "unknown variant");
}

Variant variant_from_name(const std::string& name) {
  if (name == "baseline") return Variant::kBaseline;
  if (name == "transformer") return Variant::kTransformer;
  if (name == "fmnet") return Variant::kFMNet;
  fail(ErrorCode::kInvalidArgument, "unknown variant '" + name + "'");
}

std::vector<size_t> FMNetConfig::resolved_predictor_channels() const {
  if (!predictor_channels.empty()) return predictor_channels;
  std::vector<size_t> chans;
  size_t cur = feature_channels();
  for (size_t i = 0; i + 1 < extractor_channels.size(); ++i) {
    cur = std::max<size_t>(1, cur / 2);
    chans.push_back(cur);
  }
  return chans;
}

void FMNetConfig::validate() const {
  require(n >= 1, ErrorCode::kInvalidArgument, "n must be >= 1");
  require(n_retain >= 1 && n_retain <= n, ErrorCode::kInvalidArgument,
          "n_retain must be in [1, n]");
  require(!extractor_channels.empty(), ErrorCode::kInvalidArgument,
          "extractor needs at least one stage");
  for (size_t c : extractor_channels)
    require(c >= 1, ErrorCode::kInvalidArgument, "stage channels must be >= 1");
  require(feature_channels() % 2 == 0, ErrorCode::kInvalidArgument,
          "feature channels must be even for the positional code");
  size_t ds = downsample();
  require(frame_h % ds == 0 && frame_w % ds == 0, ErrorCode::kInvalidArgument,
          "frame size must be divisible by the extractor downsample factor");
  require(frame_h >= ds && frame_w >= ds, ErrorCode::kInvalidArgument,
          "frame too small for the extractor");
  if (!predictor_channels.empty())
    require(predictor_channels.size() + 1 == extractor_channels.size(),
            ErrorCode::kInvalidArgument,
            "predictor needs one up stage per extractor stride");
  require(encoder_depth >= 1 && decoder_depth >= 1, ErrorCode::kInvalidArgument,
          "temporal depths must be >= 1");
  require(loss_alpha > 0.0, ErrorCode::kInvalidArgument, "alpha must be > 0");
  require(loss_lambda >= 0.0 && loss_lambda <= 1.0, ErrorCode::kInvalidArgument,
          "lambda must be in [0, 1]");
  require(lr >= 0.0, ErrorCode::kInvalidArgument, "lr must be >= 0");
  require(lr_decay > 0.0, ErrorCode::kDomain, "lr decay factor must be > 0");
}

void FMNetConfig::apply_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kInvalidArgument, std::string("bad config json: ") +
                                          e.what());
  }
  require(j.is_object(), ErrorCode::kInvalidArgument,
          "config must be a json object");
  try {
    if (j.contains("variant")) variant = variant_from_name(j["variant"]);
    if (j.contains("n")) n = j["n"].get<size_t>();
    if (j.contains("n_retain")) n_retain = j["n_retain"].get<size_t>();
    if (j.contains("frame_h")) frame_h = j["frame_h"].get<size_t>();
    if (j.contains("frame_w")) frame_w = j["frame_w"].get<size_t>();
    if (j.contains("extractor_channels"))
      extractor_channels = j["extractor_channels"].get<std::vector<size_t>>();
    if (j.contains("predictor_channels"))
      predictor_channels = j["predictor_channels"].get<std::vector<size_t>>();
    if (j.contains("encoder_depth"))
      encoder_depth = j["encoder_depth"].get<size_t>();
    if (j.contains("decoder_depth"))
      decoder_depth = j["decoder_depth"].get<size_t>();
    if (j.contains("loss_lambda")) loss_lambda = j["loss_lambda"].get<double>();
    if (j.contains("loss_alpha")) loss_alpha = j["loss_alpha"].get<double>();
    if (j.contains("lr")) lr = j["lr"].get<double>();
    if (j.contains("lr_decay_steps"))
      lr_decay_steps = j["lr_decay_steps"].get<size_t>();
    if (j.contains("lr_decay")) lr_decay = j["lr_decay"].get<double>();
    if (j.contains("seed")) seed = j["seed"].get<uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kInvalidArgument, std::string("bad config field: ") +
                                          e.what());
  }
}

std::string FMNetConfig::to_json() const {
  nlohmann::json j;
  j["variant"] = variant_name(variant);
  j["n"] = n;
  j["n_retain"] = n_retain;
  j["frame_h"] = frame_h;
  j["frame_w"] = frame_w;
  j["extractor_channels"] = extractor_channels;
  j["predictor_channels"] = predictor_channels;
  j["encoder_depth"] = encoder_depth;
  j["decoder_depth"] = decoder_depth;
  j["loss_lambda"] = loss_lambda;
  j["loss_alpha"] = loss_alpha;
  j["lr"] = lr;
  j["lr_decay_steps"] = lr_decay_steps;
  j["lr_decay"] = lr_decay;
  j["seed"] = seed;
  return j.dump(2);
}

FMNetModel FMNetModel::init(const FMNetConfig& cfg) {
  cfg.validate();
  FMNetModel m;
  m.cfg_ = cfg;
  Rng rng = substream(cfg.seed, "init");

  size_t in_ch = 3;
  for (size_t ch : cfg.extractor_channels) {
    m.extractor_.push_back(init_conv(ch, in_ch, 3, rng));
    in_ch = ch;
  }

  size_t c = cfg.feature_channels();
  if (m.has_temporal()) {
    m.encoder_ = ConvTransformerStack::init(cfg.encoder_depth, c, rng);
    m.decoder_ = ConvTransformerStack::init(cfg.decoder_depth, c, rng);
    size_t fh = cfg.frame_h / cfg.downsample();
    size_t fw = cfg.frame_w / cfg.downsample();
    m.token_ = MaskToken::init(c, fh, fw, rng);
  }

  std::vector<size_t> up_ch = cfg.resolved_predictor_channels();
  size_t cur = c;
  for (size_t k = 0; k < up_ch.size(); ++k) {
    UpStage stage;
    stage.up = init_conv(up_ch[k], cur, 3, rng);
    size_t skip_ch = cfg.extractor_channels[up_ch.size() - 1 - k];
    stage.ffm = init_conv(up_ch[k], up_ch[k] + skip_ch, 3, rng);
    m.predictor_.push_back(stage);
    cur = up_ch[k];
  }
  m.head_ = init_conv(1, cur, 1, rng);
  return m;
}

double FMNetModel::current_lr() const {
  if (cfg_.lr_decay_steps == 0) return cfg_.lr;
  double drops = std::floor(double(step_) / double(cfg_.lr_decay_steps));
  return cfg_.lr * std::pow(cfg_.lr_decay, drops);
}

FMNetModel::Extracted FMNetModel::spatial_features(
    const FrameSequence& clip) const {
  require(clip.length() > 0, ErrorCode::kInvalidArgument, "empty clip");
  Extracted out;
  for (size_t t = 0; t < clip.length(); ++t) {
    const Tensor& frame = clip.frames[t];
    require(frame.shape().size() == 3 && frame.shape()[0] == 3 &&
                frame.shape()[1] == cfg_.frame_h &&
                frame.shape()[2] == cfg_.frame_w,
            ErrorCode::kShapeMismatch, "frame does not match the model size");
    Tensor x = frame;
    std::vector<Tensor> skips;
    for (size_t s = 0; s < extractor_.size(); ++s) {
      size_t stride = (s == 0) ? 1 : 2;
      x = relu(conv2d(x, extractor_[s].w, extractor_[s].b, stride));
      if (s + 1 < extractor_.size()) skips.push_back(x);
    }
    out.features.maps.push_back(x);
    out.features.source_positions.push_back(t);
    out.skips.push_back(std::move(skips));
  }
  return out;
}

Tensor FMNetModel::predict_depth(const Tensor& temporal_map,
                                 const std::vector<Tensor>& frame_skips) const {
  require(frame_skips.size() == predictor_.size(), ErrorCode::kShapeMismatch,
          "skip count does not match the predictor");
  Tensor x = temporal_map;
  for (size_t k = 0; k < predictor_.size(); ++k) {
    x = relu(conv2d(upsample2(x), predictor_[k].up.w, predictor_[k].up.b));
    const Tensor& skip = frame_skips[predictor_.size() - 1 - k];
    Tensor fused = concat0({x, skip});
    x = relu(conv2d(fused, predictor_[k].ffm.w, predictor_[k].ffm.b));
  }
  return softplus(conv2d(x, head_.w, head_.b));
}

std::vector<Tensor> FMNetModel::baseline_forward(
    const FrameSequence& clip) const {
  Extracted ex = spatial_features(clip);
  std::vector<Tensor> depths;
  for (size_t t = 0; t < clip.length(); ++t)
    depths.push_back(predict_depth(ex.features.maps[t], ex.skips[t]));
  return depths;
}

std::vector<Tensor> FMNetModel::forward(const FrameSequence& clip,
                                        const MaskPlan& plan) const {
  require(has_temporal(), ErrorCode::kState,
          "baseline variant has no temporal path");
  require(plan.n_frames == clip.length(), ErrorCode::kShapeMismatch,
          "mask plan length does not match the clip");
  Extracted ex = spatial_features(clip);
  FeatureSequence coded =
      add_positional(ex.features, ex.features.source_positions);
  FeatureSequence visible = apply_mask(coded, plan);
  FeatureSequence encoded = encoder_.forward(visible);
  FeatureSequence full = complete_sequence(encoded, plan, token_);
  FeatureSequence decoded = decoder_.forward(full);
  std::vector<Tensor> depths;
  for (size_t t = 0; t < clip.length(); ++t)
    depths.push_back(predict_depth(decoded.maps[t], ex.skips[t]));
  return depths;
}

std::vector<Tensor> FMNetModel::predict(const FrameSequence& clip,
                                        const MaskPlan& plan) const {
  switch (cfg_.variant) {
    case Variant::kBaseline: return baseline_forward(clip);
    case Variant::kTransformer:
      return forward(clip, identity_mask_plan(clip.length()));
    case Variant::kFMNet: return forward(clip, plan);
  }
  fail(ErrorCode::kState, "unknown variant");
}

std::vector<std::pair<std::string, Tensor>> FMNetModel::named_params() const {
  std::vector<std::pair<std::string, Tensor>> out;
  auto unit = [&out](const std::string& prefix, const ConvUnit& u) {
    out.emplace_back(prefix + ".w", u.w);
    out.emplace_back(prefix + ".b", u.b);
  };
  for (size_t s = 0; s < extractor_.size(); ++s)
    unit("ext.S" + std::to_string(s), extractor_[s]);
  if (has_temporal()) {
    encoder_.named_params("enc", out);
    out.emplace_back("token", token_.value);
    decoder_.named_params("dec", out);
  }
  for (size_t k = 0; k < predictor_.size(); ++k) {
    unit("pred.up" + std::to_string(k), predictor_[k].up);
    unit("pred.ffm" + std::to_string(k), predictor_[k].ffm);
  }
  unit("pred.head", head_);
  return out;
}

namespace {

std::string meta_path_for(const std::string& archive_path) {
  return archive_path + ".json";
}

}  // namespace

void FMNetModel::save(const std::string& archive_path) const {
  std::vector<ArchiveEntry> entries;
  for (auto& [name, t] : named_params()) entries.push_back({name, t});
  write_archive(archive_path, entries);

  nlohmann::json meta;
  meta["config"] = nlohmann::json::parse(cfg_.to_json());
  meta["step"] = step_;
  std::FILE* f = std::fopen(meta_path_for(archive_path).c_str(), "wb");
  require(f != nullptr, ErrorCode::kIo,
          "cannot write " + meta_path_for(archive_path));
  std::string text = meta.dump(2);
  text.push_back('\n');
  std::fwrite(text.data(), 1, text.size(), f);
  std::fclose(f);
}

FMNetModel FMNetModel::load(const std::string& archive_path) {
  std::FILE* f = std::fopen(meta_path_for(archive_path).c_str(), "rb");
  require(f != nullptr, ErrorCode::kIo,
          "cannot read " + meta_path_for(archive_path));
  std::string text;
  char buf[4096];
  size_t got;
  while ((got = std::fread(buf, 1, sizeof(buf), f)) > 0) text.append(buf, got);
  std::fclose(f);

  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kIo, std::string("bad checkpoint meta: ") + e.what());
  }
  require(meta.contains("config") && meta.contains("step"), ErrorCode::kIo,
          "checkpoint meta missing fields");

  FMNetConfig cfg;
  cfg.apply_json(meta["config"].dump());
  FMNetModel m = init(cfg);
  m.step_ = meta["step"].get<size_t>();

  std::vector<ArchiveEntry> entries = read_archive(archive_path);
  std::map<std::string, Tensor> by_name;
  for (auto& e : entries) by_name.emplace(e.name, e.tensor);
  for (auto& [name, param] : m.named_params()) {
    auto it = by_name.find(name);
    require(it != by_name.end(), ErrorCode::kIo,
            "checkpoint missing tensor '" + name + "'");
    require(it->second.shape() == param.shape(), ErrorCode::kShapeMismatch,
            "checkpoint tensor '" + name + "' has the wrong shape");
    Tensor dst = param;
    std::copy(it->second.impl()->data.begin(), it->second.impl()->data.end(),
              dst.impl()->data.begin());
  }
  return m;
}

double train_step(FMNetModel& model, const std::vector<TrainBatchItem>& batch,
                  Rng& mask_rng, MaskSampling sampling,
                  std::vector<MaskPlan>* used_plans) {
  require(!batch.empty(), ErrorCode::kInvalidArgument, "empty batch");
  const FMNetConfig& cfg = model.config();
  if (used_plans) used_plans->clear();
  clear_graph();
  for (auto& [name, p] : model.named_params()) {
    (void)name;
    p.zero_grad();
  }

  size_t total_frames = 0;
  Tensor loss_sum = Tensor::scalar(0.0);
  LossConfig lc;
  lc.lambda = cfg.loss_lambda;
  lc.alpha = cfg.loss_alpha;
  for (const TrainBatchItem& item : batch) {
    require(item.frames.length() == cfg.n, ErrorCode::kShapeMismatch,
            "training clip length does not match the model");
    require(item.gt_depths.size() == item.frames.length(),
            ErrorCode::kShapeMismatch, "depth count does not match the clip");
    MaskPlan plan = identity_mask_plan(cfg.n);
    if (cfg.variant == Variant::kFMNet)
      plan = sampling == MaskSampling::kUniform
                 ? uniform_mask_plan(cfg.n, cfg.n_retain)
                 : random_mask_plan(cfg.n, cfg.n_retain, mask_rng);
    if (used_plans) used_plans->push_back(plan);
    std::vector<Tensor> pred = model.predict(item.frames, plan);
    for (size_t t = 0; t < pred.size(); ++t) {
      loss_sum = add(loss_sum,
                     scale_invariant_loss(pred[t], item.gt_depths[t], lc));
      ++total_frames;
    }
  }
  Tensor loss = scale(loss_sum, 1.0 / double(total_frames));
  double value = loss.value();
  require(std::isfinite(value), ErrorCode::kDomain,
          "non-finite training loss, parameters left untouched");

  backward(loss);
  double lr = model.current_lr();
  {
    NoGrad ng;
    for (auto& [name, p] : model.named_params()) {
      (void)name;
      Tensor param = p;
      auto& data = param.impl()->data;
      auto& grad = param.impl()->grad;
      if (grad.empty()) continue;
      for (size_t i = 0; i < data.size(); ++i) data[i] -= lr * grad[i];
    }
  }
  clear_graph();
  model.set_step(model.step() + 1);
  return value;
}

FrameSequence clip_window(const Clip& clip, size_t start, size_t len) {
  require(start + len <= clip.frames.size(), ErrorCode::kInvalidArgument,
          "window exceeds the clip");
  FrameSequence seq;
  for (size_t t = 0; t < len; ++t) seq.frames.push_back(clip.frames[start + t]);
  return seq;
}

std::vector<Tensor> clip_depth_window(const Clip& clip, size_t start,
                                      size_t len) {
  require(start + len <= clip.depths.size(), ErrorCode::kInvalidArgument,
          "window exceeds the clip");
  std::vector<Tensor> out;
  for (size_t t = 0; t < len; ++t) out.push_back(clip.depths[start + t]);
  return out;
}

}  // namespace fmnet
