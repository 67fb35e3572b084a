#include "core/masking.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "core/posenc.hpp"

namespace fmnet {

void MaskPlan::validate() const {
  require(n_frames >= 1, ErrorCode::kInvalidArgument, "MaskPlan: empty clip");
  require(!retained.empty() && retained.size() <= n_frames,
          ErrorCode::kInvalidArgument,
          "MaskPlan: retained count out of range");
  for (size_t i = 0; i < retained.size(); ++i) {
    require(retained[i] < n_frames, ErrorCode::kInvalidArgument,
            "MaskPlan: retained index out of range");
    require(i == 0 || retained[i - 1] < retained[i],
            ErrorCode::kInvalidArgument,
            "MaskPlan: retained indices must strictly increase");
  }
}

MaskPlan random_mask_plan(size_t n_frames, size_t n_retain, Rng& rng) {
  require(n_retain >= 1 && n_retain <= n_frames, ErrorCode::kInvalidArgument,
          "random_mask_plan: n_retain out of range");
  MaskPlan plan;
  plan.n_frames = n_frames;
  plan.retained = rng.sample_without_replacement(n_frames, n_retain);
  std::sort(plan.retained.begin(), plan.retained.end());
  plan.validate();
  return plan;
}

MaskPlan random_mask_plan(size_t n_frames, size_t n_retain, uint64_t seed) {
  Rng rng(seed);
  return random_mask_plan(n_frames, n_retain, rng);
}

MaskPlan uniform_mask_plan(size_t n_frames, size_t n_retain) {
  require(n_retain >= 1 && n_retain <= n_frames, ErrorCode::kInvalidArgument,
          "uniform_mask_plan: n_retain out of range");
  if (n_retain == n_frames) return identity_mask_plan(n_frames);
  MaskPlan plan;
  plan.n_frames = n_frames;
  plan.retained.reserve(n_retain);
  for (size_t k = 0; k < n_retain; ++k)
    plan.retained.push_back((k + 1) * n_frames / (n_retain + 1) - 1);
  plan.validate();
  return plan;
}

MaskPlan identity_mask_plan(size_t n_frames) {
  require(n_frames >= 1, ErrorCode::kInvalidArgument,
          "identity_mask_plan: empty clip");
  MaskPlan plan;
  plan.n_frames = n_frames;
  plan.retained.resize(n_frames);
  for (size_t i = 0; i < n_frames; ++i) plan.retained[i] = i;
  return plan;
}

std::string mask_plan_log_line(const MaskPlan& plan) {
  std::string keep;
  for (size_t i = 0; i < plan.retained.size(); ++i) {
    if (i) keep += ",";
    keep += std::to_string(plan.retained[i]);
  }
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f%%", plan.ratio() * 100.0);
  return "mask N=" + std::to_string(plan.n_frames) + " keep=" + keep +
         " ratio=" + buf;
}

MaskToken MaskToken::init(size_t c, size_t h, size_t w, Rng& rng) {
  MaskToken token;
  token.value = Tensor::zeros({c, h, w}, true);
  const double bound = 1.0 / std::sqrt(9.0 * static_cast<double>(c));
  for (size_t i = 0; i < token.value.numel(); ++i)
    token.value.at(i) = rng.uniform(-bound, bound);
  return token;
}

FeatureSequence apply_mask(const FeatureSequence& p_full,
                           const MaskPlan& plan) {
  p_full.validate();
  plan.validate();
  require(p_full.length() == plan.n_frames, ErrorCode::kShapeMismatch,
          "apply_mask: sequence length does not match plan");
  FeatureSequence out;
  out.maps.reserve(plan.retained.size());
  out.source_positions.reserve(plan.retained.size());
  for (size_t idx : plan.retained) {
    out.maps.push_back(p_full.maps[idx]);
    out.source_positions.push_back(p_full.source_positions[idx]);
  }
  return out;
}

FeatureSequence complete_sequence(const FeatureSequence& t_um,
                                  const MaskPlan& plan,
                                  const MaskToken& token) {
  t_um.validate();
  plan.validate();
  require(t_um.length() == plan.retained.size(), ErrorCode::kShapeMismatch,
          "complete_sequence: retained count does not match plan");
  require(token.value.defined() && token.value.rank() == 3 &&
              token.value.shape() == t_um.maps[0].shape(),
          ErrorCode::kShapeMismatch,
          "complete_sequence: token shape does not match features");
  FeatureSequence full;
  full.maps.resize(plan.n_frames);
  full.source_positions.resize(plan.n_frames);
  size_t next_retained = 0;
  for (size_t pos = 0; pos < plan.n_frames; ++pos) {
    full.source_positions[pos] = pos;
    if (next_retained < plan.retained.size() &&
        plan.retained[next_retained] == pos) {
      full.maps[pos] = t_um.maps[next_retained];
      ++next_retained;
    } else {
      full.maps[pos] = token.value;
    }
  }
  std::vector<size_t> positions(plan.n_frames);
  for (size_t i = 0; i < plan.n_frames; ++i) positions[i] = i;
  return add_positional(full, positions);
}

}  // namespace fmnet
