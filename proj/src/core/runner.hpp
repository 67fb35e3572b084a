#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "core/losses.hpp"
#include "core/model.hpp"
#include "core/synth.hpp"

namespace fmnet {

// Orchestration behind the CLI subcommands. Every run_* writes a run.json
// echo of its resolved options into the output directory; numeric output goes
// through csv_num so reruns are byte-identical.

struct GenOptions {
  std::string out_dir;
  DatasetConfig dataset;
  uint64_t seed = 0;
  bool overwrite = false;
};
void run_gen(const GenOptions& opts);

struct TrainOptions {
  std::string data_dir;
  std::string out_dir;
  FMNetConfig config;  // config.seed is replaced by the run seed
  size_t steps = 200;
  size_t batch_clips = 2;
  size_t save_every = 0;  // 0: final checkpoint only
  size_t log_every = 10;  // 0: no train.log step lines
  MaskSampling sampling = MaskSampling::kRandom;
  uint64_t seed = 0;
};
struct TrainResult {
  std::string checkpoint;  // final model archive
  double first_loss = 0;
  double last_loss = 0;
};
// Writes loss.csv, train.log, optional ckpt_<step>.fmta, final model.fmta.
TrainResult run_train(const TrainOptions& opts);

// Training loop without any file output; the hook sees the model after every
// completed step (model.step() is the 1-based step number).
using StepHook = std::function<void(const FMNetModel& model, double lr,
                                    double loss,
                                    const std::vector<MaskPlan>& plans)>;
FMNetModel train_model(const Dataset& data, FMNetConfig cfg, size_t steps,
                       size_t batch_clips, MaskSampling sampling,
                       uint64_t seed, const StepHook& hook = nullptr);

struct InferenceOptions {
  bool oracle_depth = false;  // ground-truth passthrough, needs no model
  bool random_mask = false;   // default: deterministic uniform placement
  uint64_t seed = 0;          // drives random inference plans only
  long long retain = -1;      // -1: model value; == N disables masking
};

struct VideoEval {
  std::string id;
  DepthMetrics depth;
  double opw = 0;  // summed over consecutive pairs
  double mean_opw_t = 0;
  double visible_part = 0;  // share of opw on ground-truth-visible pixels
  std::vector<double> pair_opw;
  std::vector<double> pair_visible;
};
struct EvalResult {
  std::vector<VideoEval> videos;
  DepthMetrics depth;  // pooled over every evaluated pixel
  double opw = 0;      // summed over videos
  double mean_opw_t = 0;
  double visible_part = 0;
};

// Partitions each test clip into floor(T/N) windows of N frames, predicts
// them all, pools depth metrics, and chains OPW over the whole covered
// prefix, cross-window pairs included. model may be null in oracle mode.
EvalResult evaluate_model(const Dataset& data, const FMNetModel* model,
                          const InferenceOptions& inf);

struct EvalOptions {
  std::string data_dir;
  std::string checkpoint;  // ignored in oracle mode
  std::string out_dir;
  size_t n = 0;  // 0: accept the checkpoint value; else must match it
  InferenceOptions inference;
};
// Writes metrics.csv (per-video rows plus _total) and opw_pairs.csv.
EvalResult run_eval(const EvalOptions& opts);

struct AblateOptions {
  std::string data_dir;
  std::string out_dir;
  // training-ratio | inference-ratio | sampling | variants
  std::string mode;
  FMNetConfig config;  // base; the swept field is overridden per arm
  std::vector<uint64_t> seeds = {1, 2, 3, 4, 5};
  size_t steps = 150;
  size_t batch_clips = 2;
};
struct AblateArm {
  std::string name;
  double ratio = 0;  // masking ratio of the arm, percent
  std::vector<double> rmse, opw, mean_opw_t;  // per seed, seed order
  double median_rmse = 0, median_opw = 0, median_mean_opw_t = 0;
};
struct AblateResult {
  std::vector<AblateArm> arms;
};
// Writes sweep.csv plus rmse.svg / opw.svg of the per-arm medians.
AblateResult run_ablate(const AblateOptions& opts);

double median(std::vector<double> v);

}  // namespace fmnet
