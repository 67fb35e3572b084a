#include "core/runner.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>

#include <json.hpp>

#include "core/csv.hpp"
#include "core/error.hpp"
#include "core/svg.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace fmnet {

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  require(os.good(), ErrorCode::kIo, "cannot write " + path.string());
  os << text;
  require(os.good(), ErrorCode::kIo, "write failed: " + path.string());
}

void write_run_json(const fs::path& out_dir, const json& doc) {
  write_text(out_dir / "run.json", doc.dump(2) + "\n");
}

double arm_ratio(size_t n, size_t retain) {
  return 100.0 * static_cast<double>(n - retain) / static_cast<double>(n);
}

// sweep retains for the ratio modes; n itself is the no-masking arm
std::vector<size_t> sweep_retains(size_t n) {
  std::vector<size_t> out;
  for (size_t r : {size_t{1}, size_t{2}, size_t{4}, size_t{6}, n})
    if (r <= n && std::find(out.begin(), out.end(), r) == out.end())
      out.push_back(r);
  return out;
}

}  // namespace

double median(std::vector<double> v) {
  require(!v.empty(), ErrorCode::kInvalidArgument, "median of nothing");
  std::sort(v.begin(), v.end());
  const size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

void run_gen(const GenOptions& opts) {
  require(!opts.out_dir.empty(), ErrorCode::kInvalidArgument,
          "gen: output directory required");
  build_dataset(opts.out_dir, opts.dataset, opts.seed, opts.overwrite);
  json doc;
  doc["command"] = "gen";
  doc["out"] = opts.out_dir;
  doc["seed"] = opts.seed;
  doc["overwrite"] = opts.overwrite;
  doc["dataset"] = {{"h", opts.dataset.h},
                    {"w", opts.dataset.w},
                    {"t", opts.dataset.t},
                    {"train_clips", opts.dataset.train_clips},
                    {"test_clips", opts.dataset.test_clips}};
  write_run_json(opts.out_dir, doc);
}

FMNetModel train_model(const Dataset& data, FMNetConfig cfg, size_t steps,
                       size_t batch_clips, MaskSampling sampling,
                       uint64_t seed, const StepHook& hook) {
  require(steps >= 1, ErrorCode::kInvalidArgument, "train: steps must be >= 1");
  require(batch_clips >= 1, ErrorCode::kInvalidArgument,
          "train: batch_clips must be >= 1");
  require(!data.train_ids().empty(), ErrorCode::kState,
          "dataset has no training clips");
  cfg.seed = seed;
  cfg.validate();
  require(data.config().h == cfg.frame_h && data.config().w == cfg.frame_w,
          ErrorCode::kShapeMismatch,
          "dataset resolution does not match the model");
  require(data.config().t >= cfg.n, ErrorCode::kInvalidArgument,
          "clips are shorter than the training sequence length");

  std::vector<Clip> clips;
  clips.reserve(data.train_ids().size());
  for (const std::string& id : data.train_ids())
    clips.push_back(data.load_clip(id));

  FMNetModel model = FMNetModel::init(cfg);
  Rng order_rng = substream(seed, "order");
  Rng mask_rng = substream(seed, "mask");
  const size_t starts = data.config().t - cfg.n + 1;

  std::vector<MaskPlan> plans;
  for (size_t s = 0; s < steps; ++s) {
    std::vector<TrainBatchItem> batch;
    batch.reserve(batch_clips);
    for (size_t b = 0; b < batch_clips; ++b) {
      const Clip& c = clips[order_rng.below(clips.size())];
      const size_t start = order_rng.below(starts);
      batch.push_back({clip_window(c, start, cfg.n),
                       clip_depth_window(c, start, cfg.n)});
    }
    const double lr = model.current_lr();
    const double loss = train_step(model, batch, mask_rng, sampling, &plans);
    if (hook) hook(model, lr, loss, plans);
  }
  return model;
}

TrainResult run_train(const TrainOptions& opts) {
  Dataset data = Dataset::open(opts.data_dir);
  fs::create_directories(opts.out_dir);
  const fs::path out(opts.out_dir);

  std::string loss_csv = "step,lr,loss\n";
  std::string log;
  TrainResult res;
  bool first = true;
  FMNetModel model = train_model(
      data, opts.config, opts.steps, opts.batch_clips, opts.sampling,
      opts.seed,
      [&](const FMNetModel& m, double lr, double loss,
          const std::vector<MaskPlan>& plans) {
        const size_t step = m.step();
        if (first) res.first_loss = loss;
        first = false;
        res.last_loss = loss;
        loss_csv +=
            std::to_string(step) + "," + csv_num(lr) + "," + csv_num(loss) +
            "\n";
        if (opts.log_every &&
            ((step - 1) % opts.log_every == 0 || step == opts.steps)) {
          log += "step " + std::to_string(step) + " lr " + csv_num(lr) +
                 " loss " + csv_num(loss) + "\n";
          for (const MaskPlan& p : plans) log += mask_plan_log_line(p) + "\n";
        }
        if (opts.save_every && step % opts.save_every == 0 &&
            step != opts.steps)
          m.save((out / ("ckpt_" + std::to_string(step) + ".fmta")).string());
      });

  res.checkpoint = (out / "model.fmta").string();
  model.save(res.checkpoint);
  write_text(out / "loss.csv", loss_csv);
  write_text(out / "train.log", log);

  json doc;
  doc["command"] = "train";
  doc["data"] = opts.data_dir;
  doc["out"] = opts.out_dir;
  doc["steps"] = opts.steps;
  doc["batch_clips"] = opts.batch_clips;
  doc["save_every"] = opts.save_every;
  doc["log_every"] = opts.log_every;
  doc["sampling"] =
      opts.sampling == MaskSampling::kUniform ? "uniform" : "random";
  doc["seed"] = opts.seed;
  FMNetConfig cfg = opts.config;
  cfg.seed = opts.seed;
  doc["config"] = json::parse(cfg.to_json());
  write_run_json(out, doc);
  return res;
}

EvalResult evaluate_model(const Dataset& data, const FMNetModel* model,
                          const InferenceOptions& inf) {
  require(inf.oracle_depth || model != nullptr, ErrorCode::kInvalidArgument,
          "evaluate: need a model unless oracle_depth is set");
  require(!data.test_ids().empty(), ErrorCode::kState,
          "dataset has no test clips");

  OpwConfig oc;
  Rng infer_rng = substream(inf.seed, "infer_mask");
  DepthMetricAccumulator pooled;
  EvalResult res;
  size_t total_pairs = 0;

  NoGrad ng;
  for (const std::string& id : data.test_ids()) {
    const Clip clip = data.load_clip(id);
    std::vector<Tensor> pred;
    if (inf.oracle_depth) {
      pred = clip.depths;
    } else {
      const size_t n = model->config().n;
      require(clip.t >= n, ErrorCode::kInvalidArgument,
              "test clip shorter than the model sequence length");
      size_t retain = inf.retain < 0 ? model->config().n_retain
                                     : static_cast<size_t>(inf.retain);
      require(inf.retain < 0 ||
                  (retain >= 1 && retain <= n),
              ErrorCode::kInvalidArgument, "inference retain out of range");
      const size_t windows = clip.t / n;
      for (size_t w0 = 0; w0 < windows; ++w0) {
        MaskPlan plan;
        if (model->config().variant != Variant::kFMNet)
          plan = identity_mask_plan(n);
        else if (inf.random_mask)
          plan = random_mask_plan(n, retain, infer_rng);
        else
          plan = uniform_mask_plan(n, retain);
        std::vector<Tensor> d = model->predict(clip_window(clip, w0 * n, n),
                                               plan);
        for (Tensor& m : d) pred.push_back(std::move(m));
      }
    }

    const size_t covered = pred.size();
    require(covered >= 2, ErrorCode::kInvalidArgument,
            "need at least two evaluated frames per clip");
    VideoEval ve;
    ve.id = id;
    DepthMetricAccumulator acc;
    for (size_t t = 0; t < covered; ++t) {
      acc.add(pred[t], clip.depths[t]);
      pooled.add(pred[t], clip.depths[t]);
    }
    ve.depth = acc.finalize();
    for (size_t t = 0; t + 1 < covered; ++t) {
      const OpwPairParts parts =
          opw_pair_parts(pred[t], pred[t + 1], clip.flows[t], clip.frames[t],
                         clip.frames[t + 1], clip.vis[t], oc);
      ve.pair_opw.push_back(parts.opw_t);
      ve.pair_visible.push_back(parts.visible_part);
      ve.opw += parts.opw_t;
      ve.visible_part += parts.visible_part;
    }
    ve.mean_opw_t = ve.opw / static_cast<double>(covered - 1);
    total_pairs += covered - 1;
    res.opw += ve.opw;
    res.visible_part += ve.visible_part;
    res.videos.push_back(std::move(ve));
  }
  res.depth = pooled.finalize();
  res.mean_opw_t = res.opw / static_cast<double>(total_pairs);
  return res;
}

EvalResult run_eval(const EvalOptions& opts) {
  Dataset data = Dataset::open(opts.data_dir);

  std::optional<FMNetModel> model;
  const FMNetModel* mp = nullptr;
  if (!opts.inference.oracle_depth) {
    model = FMNetModel::load(opts.checkpoint);
    require(opts.n == 0 || opts.n == model->config().n,
            ErrorCode::kInvalidArgument,
            "requested N=" + std::to_string(opts.n) +
                " does not match the checkpoint N=" +
                std::to_string(model->config().n));
    mp = &*model;
  }

  EvalResult res = evaluate_model(data, mp, opts.inference);

  fs::create_directories(opts.out_dir);
  const fs::path out(opts.out_dir);

  std::string metrics = "video_id,REL,RMSE,log10,d1,d2,d3,OPW,mean_OPWt\n";
  auto metrics_row = [&](const std::string& id, const DepthMetrics& m,
                         double opw, double mean_opw_t) {
    metrics += id + "," + csv_num(m.rel) + "," + csv_num(m.rmse) + "," +
               csv_num(m.log10) + "," + csv_num(m.d1) + "," + csv_num(m.d2) +
               "," + csv_num(m.d3) + "," + csv_num(opw) + "," +
               csv_num(mean_opw_t) + "\n";
  };
  std::string pairs = "video_id,t,OPW_t,visible_part\n";
  for (const VideoEval& ve : res.videos) {
    metrics_row(ve.id, ve.depth, ve.opw, ve.mean_opw_t);
    for (size_t t = 0; t < ve.pair_opw.size(); ++t)
      pairs += ve.id + "," + std::to_string(t) + "," +
               csv_num(ve.pair_opw[t]) + "," + csv_num(ve.pair_visible[t]) +
               "\n";
  }
  metrics_row("_total", res.depth, res.opw, res.mean_opw_t);
  write_text(out / "metrics.csv", metrics);
  write_text(out / "opw_pairs.csv", pairs);

  json doc;
  doc["command"] = "eval";
  doc["data"] = opts.data_dir;
  doc["out"] = opts.out_dir;
  doc["seed"] = opts.inference.seed;
  doc["oracle_depth"] = opts.inference.oracle_depth;
  doc["infer_mask"] = opts.inference.random_mask ? "random" : "uniform";
  if (mp) {
    doc["checkpoint"] = opts.checkpoint;
    doc["n"] = mp->config().n;
    doc["retain"] = opts.inference.retain < 0
                        ? mp->config().n_retain
                        : static_cast<size_t>(opts.inference.retain);
    doc["config"] = json::parse(mp->config().to_json());
  }
  write_run_json(out, doc);
  return res;
}

AblateResult run_ablate(const AblateOptions& opts) {
  require(!opts.seeds.empty(), ErrorCode::kInvalidArgument,
          "ablate: at least one seed required");
  const std::set<std::string> modes = {"training-ratio", "inference-ratio",
                                       "sampling", "variants"};
  require(modes.count(opts.mode) == 1, ErrorCode::kInvalidArgument,
          "ablate: unknown mode: " + opts.mode);
  Dataset data = Dataset::open(opts.data_dir);
  const FMNetConfig& base = opts.config;

  auto eval_arm = [&](const FMNetModel& m, uint64_t seed, long long retain) {
    InferenceOptions inf;
    inf.seed = seed;
    inf.retain = retain;
    return evaluate_model(data, &m, inf);
  };
  auto record = [](AblateArm& arm, const EvalResult& ev) {
    arm.rmse.push_back(ev.depth.rmse);
    arm.opw.push_back(ev.opw);
    arm.mean_opw_t.push_back(ev.mean_opw_t);
  };

  AblateResult res;
  if (opts.mode == "training-ratio") {
    for (size_t retain : sweep_retains(base.n)) {
      FMNetConfig cfg = base;
      cfg.variant = Variant::kFMNet;
      cfg.n_retain = retain;
      AblateArm arm;
      arm.name = "retain_" + std::to_string(retain);
      arm.ratio = arm_ratio(base.n, retain);
      for (uint64_t seed : opts.seeds) {
        FMNetModel m = train_model(data, cfg, opts.steps, opts.batch_clips,
                                   MaskSampling::kRandom, seed);
        record(arm, eval_arm(m, seed, static_cast<long long>(retain)));
      }
      res.arms.push_back(std::move(arm));
    }
  } else if (opts.mode == "inference-ratio") {
    FMNetConfig cfg = base;
    cfg.variant = Variant::kFMNet;
    std::vector<FMNetModel> models;
    for (uint64_t seed : opts.seeds)
      models.push_back(train_model(data, cfg, opts.steps, opts.batch_clips,
                                   MaskSampling::kRandom, seed));
    for (size_t retain : sweep_retains(base.n)) {
      AblateArm arm;
      arm.name = "retain_" + std::to_string(retain);
      arm.ratio = arm_ratio(base.n, retain);
      for (size_t i = 0; i < opts.seeds.size(); ++i)
        record(arm, eval_arm(models[i], opts.seeds[i],
                             static_cast<long long>(retain)));
      res.arms.push_back(std::move(arm));
    }
  } else if (opts.mode == "sampling") {
    for (MaskSampling sampling :
         {MaskSampling::kRandom, MaskSampling::kUniform}) {
      FMNetConfig cfg = base;
      cfg.variant = Variant::kFMNet;
      AblateArm arm;
      arm.name = sampling == MaskSampling::kUniform ? "uniform" : "random";
      arm.ratio = arm_ratio(base.n, base.n_retain);
      for (uint64_t seed : opts.seeds) {
        FMNetModel m = train_model(data, cfg, opts.steps, opts.batch_clips,
                                   sampling, seed);
        record(arm, eval_arm(m, seed, -1));
      }
      res.arms.push_back(std::move(arm));
    }
  } else {  // variants
    for (Variant v :
         {Variant::kBaseline, Variant::kTransformer, Variant::kFMNet}) {
      FMNetConfig cfg = base;
      cfg.variant = v;
      AblateArm arm;
      arm.name = variant_name(v);
      arm.ratio =
          v == Variant::kFMNet ? arm_ratio(base.n, base.n_retain) : 0.0;
      for (uint64_t seed : opts.seeds) {
        FMNetModel m = train_model(data, cfg, opts.steps, opts.batch_clips,
                                   MaskSampling::kRandom, seed);
        record(arm, eval_arm(m, seed, -1));
      }
      res.arms.push_back(std::move(arm));
    }
  }

  for (AblateArm& arm : res.arms) {
    arm.median_rmse = median(arm.rmse);
    arm.median_opw = median(arm.opw);
    arm.median_mean_opw_t = median(arm.mean_opw_t);
  }

  fs::create_directories(opts.out_dir);
  const fs::path out(opts.out_dir);

  std::string sweep = "mode,arm,ratio,seed,RMSE,OPW,mean_OPWt\n";
  for (const AblateArm& arm : res.arms) {
    for (size_t i = 0; i < opts.seeds.size(); ++i)
      sweep += opts.mode + "," + arm.name + "," + csv_num(arm.ratio) + "," +
               std::to_string(opts.seeds[i]) + "," + csv_num(arm.rmse[i]) +
               "," + csv_num(arm.opw[i]) + "," + csv_num(arm.mean_opw_t[i]) +
               "\n";
    sweep += opts.mode + "," + arm.name + "," + csv_num(arm.ratio) +
             ",median," + csv_num(arm.median_rmse) + "," +
             csv_num(arm.median_opw) + "," + csv_num(arm.median_mean_opw_t) +
             "\n";
  }
  write_text(out / "sweep.csv", sweep);

  // ratio works as an x axis only when the arms differ on it
  std::set<double> ratios;
  for (const AblateArm& arm : res.arms) ratios.insert(arm.ratio);
  const bool by_ratio = ratios.size() == res.arms.size();
  auto plot = [&](const std::string& file, const std::string& y_label,
                  double AblateArm::*field) {
    PlotSeries s;
    s.label = "median";
    for (size_t i = 0; i < res.arms.size(); ++i)
      s.points.push_back({by_ratio ? res.arms[i].ratio
                                   : static_cast<double>(i),
                          res.arms[i].*field});
    std::sort(s.points.begin(), s.points.end());
    write_line_plot((out / file).string(), "ablation: " + opts.mode,
                    by_ratio ? "masking ratio (%)" : "arm index", y_label,
                    {s});
  };
  plot("rmse.svg", "RMSE", &AblateArm::median_rmse);
  plot("opw.svg", "OPW", &AblateArm::median_opw);

  json doc;
  doc["command"] = "ablate";
  doc["mode"] = opts.mode;
  doc["data"] = opts.data_dir;
  doc["out"] = opts.out_dir;
  doc["seeds"] = opts.seeds;
  doc["steps"] = opts.steps;
  doc["batch_clips"] = opts.batch_clips;
  doc["config"] = json::parse(base.to_json());
  write_run_json(out, doc);
  return res;
}

}  // namespace fmnet
