#include "fmnet/fmnet.h"

#include <string>

#include <json.hpp>

#include "core/error.hpp"
#include "core/runner.hpp"

using nlohmann::json;

namespace {

thread_local std::string g_last_error;

fmnet_status status_of(const fmnet::Error& e) {
  return e.code() == fmnet::ErrorCode::kInvalidArgument ? FMNET_ERR_USAGE
                                                        : FMNET_ERR_RUNTIME;
}

template <typename Fn>
fmnet_status guarded(Fn&& fn) {
  g_last_error.clear();
  try {
    fn();
    return FMNET_OK;
  } catch (const fmnet::Error& e) {
    g_last_error = e.what();
    return status_of(e);
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return FMNET_ERR_RUNTIME;
  }
}

// malformed or mistyped option documents are usage errors, not crashes
json parse_options(const char* text) {
  fmnet::require(text != nullptr, fmnet::ErrorCode::kInvalidArgument,
                 "options JSON is null");
  json doc = json::parse(text, nullptr, false);
  fmnet::require(!doc.is_discarded() && doc.is_object(),
                 fmnet::ErrorCode::kInvalidArgument,
                 "options must be a JSON object");
  return doc;
}

template <typename T>
T opt(const json& doc, const char* key, T fallback) {
  if (!doc.contains(key)) return fallback;
  try {
    return doc.at(key).get<T>();
  } catch (const json::exception&) {
    fmnet::fail(fmnet::ErrorCode::kInvalidArgument,
                std::string("bad type for option \"") + key + "\"");
  }
}

fmnet::MaskSampling sampling_of(const std::string& name) {
  if (name == "random") return fmnet::MaskSampling::kRandom;
  if (name == "uniform") return fmnet::MaskSampling::kUniform;
  fmnet::fail(fmnet::ErrorCode::kInvalidArgument,
              "sampling must be \"random\" or \"uniform\": " + name);
}

fmnet::FMNetConfig config_of(const json& doc) {
  fmnet::FMNetConfig cfg;
  if (doc.contains("config")) cfg.apply_json(doc.at("config").dump());
  return cfg;
}

}  // namespace

extern "C" {

const char* fmnet_version(void) { return "0.1.0"; }

const char* fmnet_last_error(void) { return g_last_error.c_str(); }

fmnet_status fmnet_gen_run(const char* options_json) {
  return guarded([&] {
    const json doc = parse_options(options_json);
    fmnet::GenOptions o;
    o.out_dir = opt<std::string>(doc, "out", "");
    o.seed = opt<uint64_t>(doc, "seed", 0);
    o.overwrite = opt<bool>(doc, "overwrite", false);
    o.dataset.h = opt<size_t>(doc, "h", o.dataset.h);
    o.dataset.w = opt<size_t>(doc, "w", o.dataset.w);
    o.dataset.t = opt<size_t>(doc, "t", o.dataset.t);
    o.dataset.train_clips = opt<size_t>(doc, "train_clips",
                                        o.dataset.train_clips);
    o.dataset.test_clips = opt<size_t>(doc, "test_clips",
                                       o.dataset.test_clips);
    fmnet::run_gen(o);
  });
}

fmnet_status fmnet_train_run(const char* options_json) {
  return guarded([&] {
    const json doc = parse_options(options_json);
    fmnet::TrainOptions o;
    o.data_dir = opt<std::string>(doc, "data", "");
    o.out_dir = opt<std::string>(doc, "out", "");
    fmnet::require(!o.data_dir.empty() && !o.out_dir.empty(),
                   fmnet::ErrorCode::kInvalidArgument,
                   "train: \"data\" and \"out\" are required");
    o.config = config_of(doc);
    o.steps = opt<size_t>(doc, "steps", o.steps);
    o.batch_clips = opt<size_t>(doc, "batch_clips", o.batch_clips);
    o.save_every = opt<size_t>(doc, "save_every", o.save_every);
    o.log_every = opt<size_t>(doc, "log_every", o.log_every);
    o.sampling = sampling_of(opt<std::string>(doc, "sampling", "random"));
    o.seed = opt<uint64_t>(doc, "seed", 0);
    fmnet::run_train(o);
  });
}

fmnet_status fmnet_eval_run(const char* options_json) {
  return guarded([&] {
    const json doc = parse_options(options_json);
    fmnet::EvalOptions o;
    o.data_dir = opt<std::string>(doc, "data", "");
    o.out_dir = opt<std::string>(doc, "out", "");
    o.checkpoint = opt<std::string>(doc, "checkpoint", "");
    fmnet::require(!o.data_dir.empty() && !o.out_dir.empty(),
                   fmnet::ErrorCode::kInvalidArgument,
                   "eval: \"data\" and \"out\" are required");
    o.n = opt<size_t>(doc, "n", 0);
    o.inference.retain = opt<long long>(doc, "retain", -1);
    o.inference.seed = opt<uint64_t>(doc, "seed", 0);
    o.inference.oracle_depth = opt<bool>(doc, "oracle_depth", false);
    const std::string mask = opt<std::string>(doc, "infer_mask", "uniform");
    if (mask == "random")
      o.inference.random_mask = true;
    else
      fmnet::require(mask == "uniform", fmnet::ErrorCode::kInvalidArgument,
                     "infer_mask must be \"uniform\" or \"random\": " + mask);
    fmnet::require(o.inference.oracle_depth || !o.checkpoint.empty(),
                   fmnet::ErrorCode::kInvalidArgument,
                   "eval: \"checkpoint\" is required unless oracle_depth");
    fmnet::run_eval(o);
  });
}

fmnet_status fmnet_ablate_run(const char* options_json) {
  return guarded([&] {
    const json doc = parse_options(options_json);
    fmnet::AblateOptions o;
    o.data_dir = opt<std::string>(doc, "data", "");
    o.out_dir = opt<std::string>(doc, "out", "");
    o.mode = opt<std::string>(doc, "mode", "");
    fmnet::require(!o.data_dir.empty() && !o.out_dir.empty(),
                   fmnet::ErrorCode::kInvalidArgument,
                   "ablate: \"data\" and \"out\" are required");
    o.config = config_of(doc);
    o.seeds = opt<std::vector<uint64_t>>(doc, "seeds", o.seeds);
    o.steps = opt<size_t>(doc, "steps", o.steps);
    o.batch_clips = opt<size_t>(doc, "batch_clips", o.batch_clips);
    fmnet::run_ablate(o);
  });
}

struct fmnet_dataset {
  fmnet::Dataset ds;
};

fmnet_status fmnet_dataset_open(const char* dir, fmnet_dataset** out) {
  return guarded([&] {
    fmnet::require(dir != nullptr && out != nullptr,
                   fmnet::ErrorCode::kInvalidArgument,
                   "dataset_open: null argument");
    *out = new fmnet_dataset{fmnet::Dataset::open(dir)};
  });
}

fmnet_status fmnet_dataset_clip_count(const fmnet_dataset* ds,
                                      size_t* train_clips,
                                      size_t* test_clips) {
  return guarded([&] {
    fmnet::require(ds != nullptr, fmnet::ErrorCode::kInvalidArgument,
                   "dataset_clip_count: null dataset");
    if (train_clips) *train_clips = ds->ds.train_ids().size();
    if (test_clips) *test_clips = ds->ds.test_ids().size();
  });
}

void fmnet_dataset_free(fmnet_dataset* ds) { delete ds; }

struct fmnet_model {
  fmnet::FMNetModel model;
};

fmnet_status fmnet_model_create(const char* config_json, fmnet_model** out) {
  return guarded([&] {
    fmnet::require(out != nullptr, fmnet::ErrorCode::kInvalidArgument,
                   "model_create: null output");
    fmnet::FMNetConfig cfg;
    if (config_json != nullptr && *config_json != '\0')
      cfg.apply_json(config_json);
    *out = new fmnet_model{fmnet::FMNetModel::init(cfg)};
  });
}

fmnet_status fmnet_model_load(const char* path, fmnet_model** out) {
  return guarded([&] {
    fmnet::require(path != nullptr && out != nullptr,
                   fmnet::ErrorCode::kInvalidArgument,
                   "model_load: null argument");
    *out = new fmnet_model{fmnet::FMNetModel::load(path)};
  });
}

fmnet_status fmnet_model_save(const fmnet_model* model, const char* path) {
  return guarded([&] {
    fmnet::require(model != nullptr && path != nullptr,
                   fmnet::ErrorCode::kInvalidArgument,
                   "model_save: null argument");
    model->model.save(path);
  });
}

fmnet_status fmnet_model_sequence_length(const fmnet_model* model, size_t* n) {
  return guarded([&] {
    fmnet::require(model != nullptr && n != nullptr,
                   fmnet::ErrorCode::kInvalidArgument,
                   "model_sequence_length: null argument");
    *n = model->model.config().n;
  });
}

void fmnet_model_free(fmnet_model* model) { delete model; }

}  // extern "C"
