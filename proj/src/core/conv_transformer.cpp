#include "core/conv_transformer.hpp"

#include <cmath>

namespace fmnet {

PerfCounters& perf_counters() {
  thread_local PerfCounters counters;
  return counters;
}

ConvUnit init_conv(size_t c_out, size_t c_in, size_t k, Rng& rng) {
  ConvUnit unit;
  unit.w = Tensor::zeros({c_out, c_in, k, k}, true);
  unit.b = Tensor::zeros({c_out}, true);
  const double bound =
      1.0 / std::sqrt(static_cast<double>(c_in) * static_cast<double>(k * k));
  for (size_t i = 0; i < unit.w.numel(); ++i)
    unit.w.at(i) = rng.uniform(-bound, bound);
  return unit;
}

ConvAttentionLayer ConvAttentionLayer::init(size_t channels, Rng& rng) {
  ConvAttentionLayer layer;
  layer.channels_ = channels;
  layer.qnet = init_conv(1, channels, 3, rng);
  layer.knet = init_conv(1, channels, 3, rng);
  layer.vnet = init_conv(channels, channels, 3, rng);
  layer.anet = init_conv(1, 2, 3, rng);
  layer.ffn = init_conv(channels, channels, 3, rng);
  layer.ffn2 = init_conv(channels, channels, 3, rng);
  return layer;
}

Tensor ConvAttentionLayer::attention_map(const Tensor& q_i,
                                         const Tensor& k_j) const {
  require(q_i.rank() == 3 && k_j.rank() == 3 && q_i.shape() == k_j.shape(),
          ErrorCode::kShapeMismatch,
          "attention_map: query/key spatial dims differ");
  return conv2d(concat0({q_i, k_j}), anet.w, anet.b);
}

std::vector<Tensor> ConvAttentionLayer::self_attention(
    const std::vector<Tensor>& maps) const {
  require(!maps.empty(), ErrorCode::kInvalidArgument,
          "self_attention: empty sequence");
  const size_t m = maps.size();
  const size_t c = maps[0].dim(0), h = maps[0].dim(1), w = maps[0].dim(2);
  require(c == channels_, ErrorCode::kShapeMismatch,
          "self_attention: channel count does not match layer");
  const uint64_t hw = static_cast<uint64_t>(h) * w;

  std::vector<Tensor> q(m), k(m), v(m);
  for (size_t i = 0; i < m; ++i) {
    q[i] = conv2d(maps[i], qnet.w, qnet.b);
    k[i] = conv2d(maps[i], knet.w, knet.b);
    v[i] = conv2d(maps[i], vnet.w, vnet.b);
  }
  PerfCounters& pc = perf_counters();
  pc.qkv_macs += m * hw * 9 * (c + c + c * c);

  std::vector<Tensor> out(m);
  for (size_t i = 0; i < m; ++i) {
    std::vector<Tensor> scores;
    scores.reserve(m);
    for (size_t j = 0; j < m; ++j) scores.push_back(attention_map(q[i], k[j]));
    Tensor weights = softmax_seq(concat0(scores));
    out[i] = weighted_mix(weights, v);
  }
  pc.pair_macs += static_cast<uint64_t>(m) * m * hw * 9 * 2;
  pc.mix_macs += static_cast<uint64_t>(m) * m * hw * c;
  return out;
}

FeatureSequence ConvAttentionLayer::forward(const FeatureSequence& in) const {
  in.validate();
  const std::vector<Tensor> g = self_attention(in.maps);
  const uint64_t hw = static_cast<uint64_t>(in.maps[0].dim(1)) *
                      in.maps[0].dim(2);
  FeatureSequence out;
  out.source_positions = in.source_positions;
  out.maps.reserve(in.length());
  for (size_t i = 0; i < in.length(); ++i) {
    Tensor y = add(in.maps[i], g[i]);
    Tensor f = conv2d(relu(conv2d(y, ffn.w, ffn.b)), ffn2.w, ffn2.b);
    out.maps.push_back(add(y, f));
  }
  perf_counters().ffn_macs +=
      static_cast<uint64_t>(in.length()) * hw * 9 * 2 * channels_ * channels_;
  return out;
}

void ConvAttentionLayer::named_params(
    const std::string& prefix,
    std::vector<std::pair<std::string, Tensor>>& out) const {
  auto push = [&](const char* name, const ConvUnit& u) {
    out.emplace_back(prefix + "." + name + ".w", u.w);
    out.emplace_back(prefix + "." + name + ".b", u.b);
  };
  push("qnet", qnet);
  push("knet", knet);
  push("vnet", vnet);
  push("anet", anet);
  push("ffn", ffn);
  push("ffn2", ffn2);
}

ConvTransformerStack ConvTransformerStack::init(size_t depth, size_t channels,
                                                Rng& rng) {
  require(depth >= 1, ErrorCode::kInvalidArgument,
          "ConvTransformerStack: depth must be >= 1");
  ConvTransformerStack stack;
  stack.layers_.reserve(depth);
  for (size_t i = 0; i < depth; ++i)
    stack.layers_.push_back(ConvAttentionLayer::init(channels, rng));
  return stack;
}

FeatureSequence ConvTransformerStack::forward(const FeatureSequence& in) const {
  FeatureSequence cur = in;
  for (const ConvAttentionLayer& layer : layers_) cur = layer.forward(cur);
  return cur;
}

void ConvTransformerStack::named_params(
    const std::string& prefix,
    std::vector<std::pair<std::string, Tensor>>& out) const {
  for (size_t i = 0; i < layers_.size(); ++i)
    layers_[i].named_params(prefix + ".L" + std::to_string(i), out);
}

}  // namespace fmnet
