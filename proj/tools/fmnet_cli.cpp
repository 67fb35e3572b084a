// Command-line front end. Flags are assembled into the JSON option documents
// of the C API, so the shared library is the single execution path.
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fmnet/fmnet.h"

using nlohmann::json;

namespace {

int finish(fmnet_status status) {
  if (status != FMNET_OK)
    std::fprintf(stderr, "error: %s\n", fmnet_last_error());
  return static_cast<int>(status);
}

// overlays the --config document (if any) with the convenience flags
json model_config(const std::string& config_text, const CLI::Option* variant,
                  const std::string& variant_value, const CLI::Option* n,
                  size_t n_value, const CLI::Option* retain,
                  size_t retain_value, const CLI::Option* lr,
                  double lr_value) {
  json cfg = json::object();
  if (!config_text.empty()) {
    cfg = json::parse(config_text, nullptr, false);
    if (cfg.is_discarded() || !cfg.is_object()) {
      std::fprintf(stderr, "error: --config must be a JSON object\n");
      std::exit(2);
    }
  }
  if (variant->count()) cfg["variant"] = variant_value;
  if (n->count()) cfg["n"] = n_value;
  if (retain->count()) cfg["n_retain"] = retain_value;
  if (lr->count()) cfg["lr"] = lr_value;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"masked-frames video depth: data, training, evaluation"};
  app.require_subcommand(1);

  uint64_t seed = 0;
  std::string out, config_text;
  app.add_option("--seed", seed, "run seed, drives every substream");
  app.add_option("--out", out, "output directory");
  app.add_option("--config", config_text, "model config overrides (JSON)");

  auto* gen = app.add_subcommand("gen", "generate a synthetic video dataset");
  gen->fallthrough();
  size_t gh = 32, gw = 32, gt = 24, g_train = 60, g_test = 10;
  bool overwrite = false;
  gen->add_option("--height", gh, "frame height");
  gen->add_option("--width", gw, "frame width");
  gen->add_option("--frames", gt, "frames per clip");
  gen->add_option("--train-clips", g_train, "training clip count");
  gen->add_option("--test-clips", g_test, "test clip count");
  gen->add_flag("--overwrite", overwrite, "replace an existing dataset");

  auto* train = app.add_subcommand("train", "train a depth model");
  train->fallthrough();
  std::string data, variant = "fmnet", sampling = "random";
  size_t n = 12, retain = 2, steps = 200, batch = 2, save_every = 0,
         log_every = 10;
  double lr = 1e-4;
  train->add_option("--data", data, "dataset directory")->required();
  auto* variant_opt =
      train->add_option("--variant", variant,
                        "baseline | transformer | fmnet");
  auto* n_opt = train->add_option("--n", n, "frames per input sequence");
  auto* retain_opt =
      train->add_option("--retain", retain, "frames kept visible");
  auto* lr_opt = train->add_option("--lr", lr, "initial learning rate");
  train->add_option("--steps", steps, "SGD steps");
  train->add_option("--batch-clips", batch, "clips per step");
  train->add_option("--save-every", save_every,
                    "checkpoint period, 0 = final only");
  train->add_option("--log-every", log_every, "train.log period, 0 = off");
  train->add_option("--sampling", sampling,
                    "training mask sampling: random | uniform");

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  eval->fallthrough();
  std::string e_data, checkpoint, infer_mask = "uniform";
  size_t e_n = 0;
  long long e_retain = -1;
  bool oracle_depth = false;
  eval->add_option("--data", e_data, "dataset directory")->required();
  eval->add_option("--checkpoint", checkpoint, "model archive");
  eval->add_option("--n", e_n, "expected sequence length, must match");
  eval->add_option("--retain", e_retain,
                   "inference retain, -1 = checkpoint value");
  eval->add_option("--infer-mask", infer_mask,
                   "inference masking: uniform | random");
  eval->add_flag("--oracle-depth", oracle_depth,
                 "score the ground-truth depth itself");

  auto* ablate = app.add_subcommand("ablate", "run an ablation sweep");
  ablate->fallthrough();
  std::string a_data, mode, a_variant = "fmnet";
  std::vector<uint64_t> seeds = {1, 2, 3, 4, 5};
  size_t a_n = 12, a_retain = 2, a_steps = 150, a_batch = 2;
  double a_lr = 1e-4;
  ablate->add_option("--data", a_data, "dataset directory")->required();
  ablate
      ->add_option("--mode", mode,
                   "training-ratio | inference-ratio | sampling | variants")
      ->required();
  ablate->add_option("--seeds", seeds, "run seeds, one trend sample each");
  ablate->add_option("--steps", a_steps, "SGD steps per arm");
  ablate->add_option("--batch-clips", a_batch, "clips per step");
  auto* a_variant_opt = ablate->add_option("--variant", a_variant,
                                           "base variant (mode-dependent)");
  auto* a_n_opt = ablate->add_option("--n", a_n, "frames per input sequence");
  auto* a_retain_opt =
      ablate->add_option("--retain", a_retain, "base retain count");
  auto* a_lr_opt = ablate->add_option("--lr", a_lr, "initial learning rate");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  if (gen->parsed()) {
    json o = {{"out", out},       {"seed", seed},
              {"overwrite", overwrite}, {"h", gh},
              {"w", gw},          {"t", gt},
              {"train_clips", g_train}, {"test_clips", g_test}};
    return finish(fmnet_gen_run(o.dump().c_str()));
  }
  if (train->parsed()) {
    json o = {{"data", data},
              {"out", out},
              {"seed", seed},
              {"steps", steps},
              {"batch_clips", batch},
              {"save_every", save_every},
              {"log_every", log_every},
              {"sampling", sampling},
              {"config", model_config(config_text, variant_opt, variant,
                                      n_opt, n, retain_opt, retain, lr_opt,
                                      lr)}};
    return finish(fmnet_train_run(o.dump().c_str()));
  }
  if (eval->parsed()) {
    json o = {{"data", e_data},       {"out", out},
              {"seed", seed},         {"checkpoint", checkpoint},
              {"n", e_n},             {"retain", e_retain},
              {"infer_mask", infer_mask}, {"oracle_depth", oracle_depth}};
    return finish(fmnet_eval_run(o.dump().c_str()));
  }
  json o = {{"data", a_data},
            {"out", out},
            {"mode", mode},
            {"seeds", seeds},
            {"steps", a_steps},
            {"batch_clips", a_batch},
            {"config", model_config(config_text, a_variant_opt, a_variant,
                                    a_n_opt, a_n, a_retain_opt, a_retain,
                                    a_lr_opt, a_lr)}};
  return finish(fmnet_ablate_run(o.dump().c_str()));
}
