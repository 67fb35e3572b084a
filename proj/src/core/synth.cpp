#include "core/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "core/archive.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace fmnet {

namespace {

bool half_aligned(double v) { return std::floor(v * 2.0) == v * 2.0; }

// axis-aligned bounds of a layer's coverage at time t
void layer_bounds(const LayerSpec& l, double t, double& x_lo, double& x_hi,
                  double& y_lo, double& y_hi) {
  const double x = l.x0 + l.vx * t;
  const double y = l.y0 + l.vy * t;
  if (l.kind == LayerSpec::Kind::kRect) {
    x_lo = x;
    x_hi = x + l.lw;
    y_lo = y;
    y_hi = y + l.lh;
  } else {
    x_lo = x - l.radius;
    x_hi = x + l.radius;
    y_lo = y - l.radius;
    y_hi = y + l.radius;
  }
}

bool covers(const LayerSpec& l, double t, size_t ix, size_t iy) {
  const double x = l.x0 + l.vx * t;
  const double y = l.y0 + l.vy * t;
  if (l.kind == LayerSpec::Kind::kRect) {
    return ix >= x && ix < x + l.lw && iy >= y && iy < y + l.lh;
  }
  const double dx = static_cast<double>(ix) - x;
  const double dy = static_cast<double>(iy) - y;
  return dx * dx + dy * dy <= l.radius * l.radius;
}

// index into spec.layers, or -1 for background
int owner_at(const SceneSpec& spec, double t, size_t ix, size_t iy) {
  for (size_t l = 0; l < spec.layers.size(); ++l)
    if (covers(spec.layers[l], t, ix, iy)) return static_cast<int>(l);
  return -1;
}

// camera sway offset of the background at frame t, in pixels
double pan_offset(const SceneSpec& spec, size_t t) {
  static const double kTriangle[6] = {0.0, 1.0, 2.0, 3.0, 2.0, 1.0};
  return kTriangle[(t + spec.pan_phase) % 6];
}

// shared background sinusoid in offset-anchored coordinates; integer offsets
// and integer pixel indices keep the argument, and hence the value,
// identical for a pixel and its warp source
double bg_wave(const SceneSpec& spec, size_t ix, size_t iy, size_t t) {
  const double off = pan_offset(spec, t);
  const double u = static_cast<double>(ix) - spec.pan_vx * off;
  const double v = static_cast<double>(iy) - spec.pan_vy * off;
  const double two_pi = 6.283185307179586476925286766559;
  return std::sin(two_pi * (spec.bg_freq_x * u + spec.bg_freq_y * v) +
                  spec.bg_phase);
}

}  // namespace

void SceneSpec::validate() const {
  require(h >= 8 && w >= 8, ErrorCode::kInvalidArgument,
          "SceneSpec: frame extent too small");
  require(t >= 2, ErrorCode::kInvalidArgument,
          "SceneSpec: need at least two frames");
  require(bg_depth > 0.0, ErrorCode::kInvalidArgument,
          "SceneSpec: background depth must be positive");
  require(std::fabs(drift) <= 0.05 + 1e-12, ErrorCode::kInvalidArgument,
          "SceneSpec: brightness drift above 5%");
  require(noise >= 0.0 && noise <= 0.2, ErrorCode::kInvalidArgument,
          "SceneSpec: photometric noise amplitude outside [0, 0.2]");
  for (double p : {pan_vx, pan_vy})
    require(std::floor(p) == p && std::fabs(p) <= 1.0,
            ErrorCode::kInvalidArgument,
            "SceneSpec: pan direction must be an integer in [-1, 1]");
  require(pan_phase < 6, ErrorCode::kInvalidArgument,
          "SceneSpec: pan phase out of range");
  require(bg_relief >= 0.0 && bg_relief < bg_depth, ErrorCode::kInvalidArgument,
          "SceneSpec: background relief amplitude out of range");
  require(bg_tex_amp >= 0.0 && bg_tex_amp <= 0.5, ErrorCode::kInvalidArgument,
          "SceneSpec: background shading amplitude outside [0, 0.5]");
  for (double ch : bg_albedo)
    require(ch >= 0.0 && ch * (1.0 + bg_tex_amp) * 1.05 <= 1.0,
            ErrorCode::kInvalidArgument,
            "SceneSpec: background albedo leaves [0,1] under drift");
  double prev_depth = 0.0;
  for (const LayerSpec& l : layers) {
    require(l.depth > prev_depth, ErrorCode::kInvalidArgument,
            "SceneSpec: layers must be ordered near to far, depths strictly "
            "increasing");
    require(l.depth < bg_depth - bg_relief, ErrorCode::kInvalidArgument,
            "SceneSpec: layer depth must be nearer than background");
    prev_depth = l.depth;
    require(half_aligned(l.vx) && half_aligned(l.vy), ErrorCode::kInvalidArgument,
            "SceneSpec: velocities must sit on the half-pixel grid");
    require(half_aligned(l.x0) && half_aligned(l.y0), ErrorCode::kInvalidArgument,
            "SceneSpec: start coordinates must sit on the half-pixel grid");
    for (double ch : l.albedo)
      require(ch >= 0.0 && ch * 1.05 <= 1.0, ErrorCode::kInvalidArgument,
              "SceneSpec: albedo leaves [0,1] under drift");
    // linear motion: extremes at the clip endpoints
    for (double at : {0.0, static_cast<double>(t - 1)}) {
      double x_lo, x_hi, y_lo, y_hi;
      layer_bounds(l, at, x_lo, x_hi, y_lo, y_hi);
      require(x_lo >= 1.0 && y_lo >= 1.0 && x_hi <= static_cast<double>(w) - 1.0 &&
                  y_hi <= static_cast<double>(h) - 1.0,
              ErrorCode::kInvalidArgument,
              "SceneSpec: layer leaves the 1 px border margin");
    }
  }
}

Clip generate_clip(const SceneSpec& spec) {
  spec.validate();
  const size_t h = spec.h, w = spec.w, T = spec.t, hw = h * w;

  // per-frame ownership, reused for flow and visibility
  std::vector<std::vector<int>> owner(T, std::vector<int>(hw));
  for (size_t t = 0; t < T; ++t)
    for (size_t y = 0; y < h; ++y)
      for (size_t x = 0; x < w; ++x)
        owner[t][y * w + x] = owner_at(spec, static_cast<double>(t), x, y);

  Clip clip;
  clip.t = T;
  clip.h = h;
  clip.w = w;
  Rng noise_rng = substream(spec.seed, "noise");
  for (size_t t = 0; t < T; ++t) {
    const double brightness =
        1.0 + spec.drift * (T > 1 ? static_cast<double>(t) / (T - 1) : 0.0);
    Tensor frame = Tensor::zeros({3, h, w});
    Tensor depth = Tensor::zeros({1, h, w});
    for (size_t p = 0; p < hw; ++p) {
      const int o = owner[t][p];
      if (o < 0) {
        const double s = bg_wave(spec, p % w, p / w, t);
        for (size_t ch = 0; ch < 3; ++ch)
          frame.at(ch * hw + p) =
              spec.bg_albedo[ch] * (1.0 + spec.bg_tex_amp * s) * brightness;
        depth.at(p) = spec.bg_depth + spec.bg_relief * s;
      } else {
        const LayerSpec& l = spec.layers[static_cast<size_t>(o)];
        for (size_t ch = 0; ch < 3; ++ch)
          frame.at(ch * hw + p) = l.albedo[ch] * brightness;
        depth.at(p) = l.depth;
      }
    }
    if (spec.noise > 0.0)
      for (size_t i = 0; i < 3 * hw; ++i)
        frame.at(i) = std::clamp(
            frame.at(i) + noise_rng.uniform(-spec.noise, spec.noise), 0.0,
            1.0);
    clip.frames.push_back(frame);
    clip.depths.push_back(depth);
  }

  for (size_t t = 0; t + 1 < T; ++t) {
    Tensor flow = Tensor::zeros({2, h, w});
    Tensor vis = Tensor::zeros({1, h, w});
    for (size_t y = 0; y < h; ++y) {
      for (size_t x = 0; x < w; ++x) {
        const size_t p = y * w + x;
        const int o = owner[t + 1][p];
        const double step = pan_offset(spec, t + 1) - pan_offset(spec, t);
        double dx = -spec.pan_vx * step, dy = -spec.pan_vy * step;
        if (o >= 0) {
          dx = -spec.layers[static_cast<size_t>(o)].vx;
          dy = -spec.layers[static_cast<size_t>(o)].vy;
        }
        flow.at(p) = dx;
        flow.at(hw + p) = dy;
        const double sx = static_cast<double>(x) + dx;
        const double sy = static_cast<double>(y) + dy;
        bool visible = sx >= 0.0 && sx <= static_cast<double>(w - 1) &&
                       sy >= 0.0 && sy <= static_cast<double>(h - 1);
        if (visible) {
          // every sampling stencil pixel with nonzero weight must belong to
          // the same layer, otherwise the interpolated depth mixes layers;
          // zero-weight corners contribute exactly 0 and cannot contaminate
          const size_t x0 = static_cast<size_t>(std::floor(sx));
          const size_t y0 = static_cast<size_t>(std::floor(sy));
          const size_t x1 = std::min(x0 + 1, w - 1);
          const size_t y1 = std::min(y0 + 1, h - 1);
          const bool fx = sx != static_cast<double>(x0);
          const bool fy = sy != static_cast<double>(y0);
          visible = owner[t][y0 * w + x0] == o &&
                    (!fx || owner[t][y0 * w + x1] == o) &&
                    (!fy || owner[t][y1 * w + x0] == o) &&
                    (!(fx && fy) || owner[t][y1 * w + x1] == o);
        }
        vis.at(p) = visible ? 1.0 : 0.0;
      }
    }
    clip.flows.push_back(flow);
    clip.vis.push_back(vis);
  }
  return clip;
}

SceneSpec sample_scene_spec(size_t h, size_t w, size_t t, Rng& rng) {
  SceneSpec spec;
  spec.h = h;
  spec.w = w;
  spec.t = t;
  spec.bg_depth = rng.uniform(5.5, 7.5);
  for (double& ch : spec.bg_albedo) ch = rng.uniform(0.2, 0.45);
  spec.drift = rng.uniform(-0.05, 0.05);
  spec.noise = rng.uniform(0.15, 0.2);
  spec.seed = rng.next_u64();

  // camera sway is always nonzero so a background-only window still moves
  static const double kPan[8][2] = {{-1, -1}, {-1, 0}, {-1, 1}, {0, -1},
                                    {0, 1},   {1, -1}, {1, 0},  {1, 1}};
  const size_t pan = rng.below(8);
  spec.pan_vx = kPan[pan][0];
  spec.pan_vy = kPan[pan][1];
  spec.pan_phase = rng.below(6);
  spec.bg_relief = rng.uniform(0.5, 0.8);
  spec.bg_tex_amp = rng.uniform(0.35, 0.5);
  spec.bg_freq_x = 1.0 / static_cast<double>(5 + rng.below(5));
  spec.bg_freq_y = 1.0 / static_cast<double>(5 + rng.below(5));
  spec.bg_phase = rng.uniform(0.0, 6.283185307179586);

  const size_t n_layers = 1 + rng.below(2);
  const double depth_slot = 2.4 / static_cast<double>(n_layers);
  // the first layer always moves so every clip carries temporal signal
  const double moving_speeds[4] = {-1.0, -0.5, 0.5, 1.0};
  const double speeds[5] = {-1.0, -0.5, 0.0, 0.5, 1.0};
  bool any_motion = false;

  // place a layer along one axis so the whole trajectory keeps the 1 px
  // margin; shrink the velocity toward zero until a start interval exists
  const double span = static_cast<double>(t - 1);
  auto place_axis = [&rng, span](const LayerSpec& l, double side, double ext,
                                 double& v, double& pos) {
    for (;;) {
      const double lo_edge =
          (l.kind == LayerSpec::Kind::kRect) ? 1.0 : 1.0 + l.radius;
      const double hi_edge = (l.kind == LayerSpec::Kind::kRect)
                                 ? side - 1.0 - ext
                                 : side - 2.0 - l.radius;
      const double lo = lo_edge - std::min(0.0, v * span);
      const double hi = hi_edge - std::max(0.0, v * span);
      if (hi >= lo) {
        const double lo_half = std::ceil(lo * 2.0) / 2.0;
        const size_t steps =
            static_cast<size_t>(std::floor((hi - lo_half) * 2.0)) + 1;
        pos = lo_half + 0.5 * static_cast<double>(rng.below(steps));
        return;
      }
      if (v == 0.0)
        fail(ErrorCode::kInvalidArgument,
             "sample_scene_spec: layer too large for the frame");
      v = (std::fabs(v) <= 0.5) ? 0.0 : (v > 0 ? v - 0.5 : v + 0.5);
    }
  };

  for (size_t i = 0; i < n_layers; ++i) {
    LayerSpec l;
    l.kind = rng.below(2) == 0 ? LayerSpec::Kind::kRect : LayerSpec::Kind::kDisk;
    l.depth = 1.2 + depth_slot * static_cast<double>(i) +
              rng.uniform(0.0, depth_slot - 0.3);
    for (double& ch : l.albedo) ch = rng.uniform(0.4, 0.9);
    l.vx = i == 0 ? moving_speeds[rng.below(4)] : speeds[rng.below(5)];
    l.vy = speeds[rng.below(5)];

    const auto extent = [&](size_t side) {
      const size_t lo = std::max<size_t>(3, side / 5);
      const size_t hi = std::max<size_t>(lo + 1, (side * 2) / 5);
      return static_cast<double>(rng.uniform_int(static_cast<int>(lo),
                                                 static_cast<int>(hi)));
    };
    if (l.kind == LayerSpec::Kind::kRect) {
      l.lw = extent(w);
      l.lh = extent(h);
    } else {
      l.radius = static_cast<double>(rng.uniform_int(
          static_cast<int>(std::max<size_t>(2, w / 10)),
          static_cast<int>(std::max<size_t>(3, w / 6))));
    }

    place_axis(l, static_cast<double>(w), l.lw, l.vx, l.x0);
    place_axis(l, static_cast<double>(h), l.lh, l.vy, l.y0);
    any_motion = any_motion || l.vx != 0.0 || l.vy != 0.0;
    spec.layers.push_back(l);
  }

  if (!any_motion) {
    // static clips carry no temporal signal; re-place the nearest layer with
    // a forced drift (shrunk back only if even that cannot fit)
    LayerSpec& l = spec.layers[0];
    l.vx = 0.5;
    place_axis(l, static_cast<double>(w), l.lw, l.vx, l.x0);
  }

  std::sort(spec.layers.begin(), spec.layers.end(),
            [](const LayerSpec& a, const LayerSpec& b) {
              return a.depth < b.depth;
            });
  spec.validate();
  return spec;
}

std::string scene_spec_to_json(const SceneSpec& spec) {
  json j;
  j["h"] = spec.h;
  j["w"] = spec.w;
  j["t"] = spec.t;
  j["bg_depth"] = spec.bg_depth;
  j["bg_albedo"] = {spec.bg_albedo[0], spec.bg_albedo[1], spec.bg_albedo[2]};
  j["drift"] = spec.drift;
  j["noise"] = spec.noise;
  j["seed"] = spec.seed;
  j["pan_vx"] = spec.pan_vx;
  j["pan_vy"] = spec.pan_vy;
  j["pan_phase"] = spec.pan_phase;
  j["bg_relief"] = spec.bg_relief;
  j["bg_tex_amp"] = spec.bg_tex_amp;
  j["bg_freq_x"] = spec.bg_freq_x;
  j["bg_freq_y"] = spec.bg_freq_y;
  j["bg_phase"] = spec.bg_phase;
  j["layers"] = json::array();
  for (const LayerSpec& l : spec.layers) {
    json lj;
    lj["kind"] = l.kind == LayerSpec::Kind::kRect ? "rect" : "disk";
    lj["depth"] = l.depth;
    lj["vx"] = l.vx;
    lj["vy"] = l.vy;
    lj["albedo"] = {l.albedo[0], l.albedo[1], l.albedo[2]};
    lj["x0"] = l.x0;
    lj["y0"] = l.y0;
    lj["lw"] = l.lw;
    lj["lh"] = l.lh;
    lj["radius"] = l.radius;
    j["layers"].push_back(lj);
  }
  return j.dump();
}

SceneSpec scene_spec_from_json(const std::string& text) {
  json j = json::parse(text);
  SceneSpec spec;
  spec.h = j.at("h").get<size_t>();
  spec.w = j.at("w").get<size_t>();
  spec.t = j.at("t").get<size_t>();
  spec.bg_depth = j.at("bg_depth").get<double>();
  for (size_t i = 0; i < 3; ++i)
    spec.bg_albedo[i] = j.at("bg_albedo").at(i).get<double>();
  spec.drift = j.at("drift").get<double>();
  spec.noise = j.value("noise", 0.0);
  spec.seed = j.value("seed", uint64_t{0});
  spec.pan_vx = j.value("pan_vx", 0.0);
  spec.pan_vy = j.value("pan_vy", 0.0);
  spec.pan_phase = j.value("pan_phase", size_t{0});
  spec.bg_relief = j.value("bg_relief", 0.0);
  spec.bg_tex_amp = j.value("bg_tex_amp", 0.0);
  spec.bg_freq_x = j.value("bg_freq_x", 0.0);
  spec.bg_freq_y = j.value("bg_freq_y", 0.0);
  spec.bg_phase = j.value("bg_phase", 0.0);
  for (const json& lj : j.at("layers")) {
    LayerSpec l;
    l.kind = lj.at("kind").get<std::string>() == "rect"
                 ? LayerSpec::Kind::kRect
                 : LayerSpec::Kind::kDisk;
    l.depth = lj.at("depth").get<double>();
    l.vx = lj.at("vx").get<double>();
    l.vy = lj.at("vy").get<double>();
    for (size_t i = 0; i < 3; ++i)
      l.albedo[i] = lj.at("albedo").at(i).get<double>();
    l.x0 = lj.at("x0").get<double>();
    l.y0 = lj.at("y0").get<double>();
    l.lw = lj.at("lw").get<double>();
    l.lh = lj.at("lh").get<double>();
    l.radius = lj.at("radius").get<double>();
    spec.layers.push_back(l);
  }
  spec.validate();
  return spec;
}

namespace {

Tensor stack_tensors(const std::vector<Tensor>& parts) {
  Shape shape = parts[0].shape();
  shape.insert(shape.begin(), parts.size());
  std::vector<double> data;
  data.reserve(shape_numel(shape));
  for (const Tensor& p : parts)
    data.insert(data.end(), p.vec().begin(), p.vec().end());
  return Tensor::from(std::move(shape), std::move(data));
}

std::vector<Tensor> unstack_tensor(const Tensor& stacked) {
  require(stacked.rank() >= 2, ErrorCode::kShapeMismatch,
          "unstack: need a stacked leading axis");
  const size_t count = stacked.dim(0);
  Shape inner(stacked.shape().begin() + 1, stacked.shape().end());
  const size_t chunk = shape_numel(inner);
  std::vector<Tensor> parts;
  parts.reserve(count);
  for (size_t i = 0; i < count; ++i) {
    std::vector<double> data(stacked.data() + i * chunk,
                             stacked.data() + (i + 1) * chunk);
    parts.push_back(Tensor::from(inner, std::move(data)));
  }
  return parts;
}

}  // namespace

void build_dataset(const std::string& dir, const DatasetConfig& cfg,
                   uint64_t seed, bool overwrite) {
  require(cfg.train_clips + cfg.test_clips >= 1, ErrorCode::kInvalidArgument,
          "build_dataset: need at least one clip");
  require(cfg.t >= 2, ErrorCode::kInvalidArgument,
          "build_dataset: clips need at least two frames");
  const fs::path root(dir);
  if (fs::exists(root) && !fs::is_empty(root))
    require(overwrite, ErrorCode::kState,
            "build_dataset: target directory is not empty: " + dir);
  fs::create_directories(root / "clips");

  json manifest;
  manifest["h"] = cfg.h;
  manifest["w"] = cfg.w;
  manifest["t"] = cfg.t;
  manifest["seed"] = seed;
  manifest["train"] = json::array();
  manifest["test"] = json::array();
  manifest["clips"] = json::object();

  const size_t total = cfg.train_clips + cfg.test_clips;
  for (size_t i = 0; i < total; ++i) {
    const std::string id = "clip_" + std::to_string(i);
    Rng rng = substream(seed, "clip." + id);
    const SceneSpec spec = sample_scene_spec(cfg.h, cfg.w, cfg.t, rng);
    const Clip clip = generate_clip(spec);
    write_archive((root / "clips" / (id + ".fmta")).string(),
                  {{"frames", stack_tensors(clip.frames)},
                   {"depth", stack_tensors(clip.depths)},
                   {"flow", stack_tensors(clip.flows)},
                   {"vis", stack_tensors(clip.vis)}});
    manifest[i < cfg.train_clips ? "train" : "test"].push_back(id);
    manifest["clips"][id] = json::parse(scene_spec_to_json(spec));
  }

  std::ofstream os(root / "manifest.json", std::ios::trunc);
  require(os.good(), ErrorCode::kIo, "build_dataset: cannot write manifest");
  os << manifest.dump(2) << "\n";
  require(os.good(), ErrorCode::kIo, "build_dataset: manifest write failed");
}

Dataset Dataset::open(const std::string& dir) {
  Dataset ds;
  ds.dir_ = dir;
  std::ifstream is(fs::path(dir) / "manifest.json");
  require(is.good(), ErrorCode::kIo,
          "Dataset: cannot open manifest in " + dir);
  std::string raw((std::istreambuf_iterator<char>(is)),
                  std::istreambuf_iterator<char>());
  ds.manifest_raw_ = raw;
  json manifest = json::parse(raw);
  ds.cfg_.h = manifest.at("h").get<size_t>();
  ds.cfg_.w = manifest.at("w").get<size_t>();
  ds.cfg_.t = manifest.at("t").get<size_t>();
  ds.seed_ = manifest.at("seed").get<uint64_t>();
  for (const json& id : manifest.at("train"))
    ds.train_ids_.push_back(id.get<std::string>());
  for (const json& id : manifest.at("test"))
    ds.test_ids_.push_back(id.get<std::string>());
  ds.cfg_.train_clips = ds.train_ids_.size();
  ds.cfg_.test_clips = ds.test_ids_.size();
  return ds;
}

std::string Dataset::clip_spec_json(const std::string& id) const {
  json manifest = json::parse(manifest_raw_);
  require(manifest.at("clips").contains(id), ErrorCode::kIo,
          "Dataset: unknown clip id " + id);
  return manifest.at("clips").at(id).dump();
}

Clip Dataset::load_clip(const std::string& id) const {
  const auto entries =
      read_archive((fs::path(dir_) / "clips" / (id + ".fmta")).string());
  Clip clip;
  clip.frames = unstack_tensor(archive_get(entries, "frames"));
  clip.depths = unstack_tensor(archive_get(entries, "depth"));
  clip.flows = unstack_tensor(archive_get(entries, "flow"));
  clip.vis = unstack_tensor(archive_get(entries, "vis"));
  require(!clip.frames.empty(), ErrorCode::kIo, "Dataset: empty clip " + id);
  clip.t = clip.frames.size();
  clip.h = clip.frames[0].dim(1);
  clip.w = clip.frames[0].dim(2);
  require(clip.depths.size() == clip.t &&
              clip.flows.size() + 1 == clip.t && clip.vis.size() + 1 == clip.t,
          ErrorCode::kIo, "Dataset: inconsistent clip " + id);
  return clip;
}

}  // namespace fmnet
