#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "core/rng.hpp"
#include "core/tensor.hpp"

namespace fmnet {

// One rigid scene layer: a constant-depth rectangle or disk translating at a
// constant velocity. Velocities and start coordinates sit on the half-pixel
// grid so ground-truth warps stay exact under bilinear sampling.
struct LayerSpec {
  enum class Kind { kRect, kDisk };

  Kind kind = Kind::kRect;
  double depth = 1.0;
  double vx = 0.0, vy = 0.0;
  double albedo[3] = {0.5, 0.5, 0.5};
  double x0 = 0.0, y0 = 0.0;  // rect top-left / disk center at t = 0
  double lw = 0.0, lh = 0.0;  // rect extent
  double radius = 0.0;        // disk
};

struct SceneSpec {
  size_t h = 32, w = 32, t = 24;
  double bg_depth = 6.0;
  double bg_albedo[3] = {0.3, 0.3, 0.3};
  std::vector<LayerSpec> layers;  // ordered near to far
  double drift = 0.0;             // total relative brightness change, |.| <= 0.05

  // Background plane oscillating along an integer pixel direction (camera
  // sway): its offset at frame t is pan * triangle((t + pan_phase) mod 6)
  // with triangle = 0,1,2,3,2,1, so every frame pair carries 1 px of
  // background flow while the offset never strays more than 3 px from any
  // frame. A shared sinusoid s(u,v) over offset-anchored coordinates drives
  // both the background depth (bg_depth + bg_relief * s) and its shading
  // (albedo * (1 + bg_tex_amp * s)), so background depth structure is
  // readable from appearance and sways with the camera. Integer offsets keep
  // the warp stencil on single pixels, so visible warps stay bit-exact.
  double pan_vx = 0.0, pan_vy = 0.0;        // integer, |.| <= 1
  size_t pan_phase = 0;                     // < 6
  double bg_relief = 0.0;                   // depth amplitude, >= 0
  double bg_tex_amp = 0.0;                  // shading amplitude, <= 0.5
  double bg_freq_x = 0.0, bg_freq_y = 0.0;  // cycles per pixel
  double bg_phase = 0.0;

  // Per-pixel photometric noise amplitude, uniform in [-noise, noise] per
  // channel and frame, clamped to [0,1]. Independent across frames, so
  // per-frame prediction jitters while temporal aggregation can average it
  // out. Depth, flow, and visibility stay exact. seed drives the noise
  // stream only.
  double noise = 0.0;  // <= 0.2
  uint64_t seed = 0;

  // depth ordering, half-pixel alignment, and the >= 1 px border margin over
  // the whole clip
  void validate() const;
};

struct Clip {
  size_t t = 0, h = 0, w = 0;
  std::vector<Tensor> frames;  // T x [3,H,W]
  std::vector<Tensor> depths;  // T x [1,H,W]
  std::vector<Tensor> flows;   // T-1 x [2,H,W], backward flow t+1 => t
  std::vector<Tensor> vis;     // T-1 x [1,H,W], 1 where the warp is exact
};

// Z-buffered near-to-far rendering; flow and visibility come from layer
// ownership, not estimation. On pixels marked visible,
// bilinear(depth_t, flow) == depth_{t+1} bit-exactly.
Clip generate_clip(const SceneSpec& spec);

SceneSpec sample_scene_spec(size_t h, size_t w, size_t t, Rng& rng);

std::string scene_spec_to_json(const SceneSpec& spec);
SceneSpec scene_spec_from_json(const std::string& text);

struct DatasetConfig {
  size_t h = 32, w = 32, t = 24;
  size_t train_clips = 60, test_clips = 10;
};

// Writes manifest.json plus clips/clip_<id>.fmta (entries: frames [T,3,H,W],
// depth [T,1,H,W], flow [T-1,2,H,W], vis [T-1,1,H,W]). Refuses to touch an
// existing non-empty directory unless overwrite is set.
void build_dataset(const std::string& dir, const DatasetConfig& cfg,
                   uint64_t seed, bool overwrite);

class Dataset {
 public:
  static Dataset open(const std::string& dir);

  const DatasetConfig& config() const { return cfg_; }
  uint64_t seed() const { return seed_; }
  const std::vector<std::string>& train_ids() const { return train_ids_; }
  const std::vector<std::string>& test_ids() const { return test_ids_; }
  std::string clip_spec_json(const std::string& id) const;

  Clip load_clip(const std::string& id) const;

 private:
  std::string dir_;
  DatasetConfig cfg_;
  uint64_t seed_ = 0;
  std::vector<std::string> train_ids_, test_ids_;
  std::string manifest_raw_;
};

}  // namespace fmnet
