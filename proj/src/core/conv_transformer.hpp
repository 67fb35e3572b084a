#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "core/rng.hpp"
#include "core/sequence.hpp"
#include "core/tensor.hpp"

namespace fmnet {

// Analytic multiply-accumulate counts for forward passes, accumulated per
// thread. The pairwise attention-map stage scales with M^2 in the sequence
// length M, the projections with M; the counters make that split measurable.
struct PerfCounters {
  uint64_t qkv_macs = 0;
  uint64_t pair_macs = 0;
  uint64_t mix_macs = 0;
  uint64_t ffn_macs = 0;

  uint64_t attention_stage() const { return qkv_macs + pair_macs + mix_macs; }
  uint64_t total() const { return attention_stage() + ffn_macs; }
  void reset() { *this = PerfCounters{}; }
};

PerfCounters& perf_counters();

// One 2-D convolution's parameters.
struct ConvUnit {
  Tensor w;  // [c_out,c_in,kh,kw]
  Tensor b;  // [c_out]
};

// kernels uniform in +-1/sqrt(c_in*kh*kw), zero bias
ConvUnit init_conv(size_t c_out, size_t c_in, size_t k, Rng& rng);

// Self-attention layer over a sequence of feature maps. q/k project each map
// to one channel, v keeps all c channels, and the score for a frame pair is
// a conv over the concatenated (q_i, k_j). Per-pixel softmax over j weights
// the values. The layer output is residual: out = y + ffn(y), y = x + attn(x).
class ConvAttentionLayer {
 public:
  static ConvAttentionLayer init(size_t channels, Rng& rng);

  Tensor attention_map(const Tensor& q_i, const Tensor& k_j) const;
  std::vector<Tensor> self_attention(const std::vector<Tensor>& maps) const;
  FeatureSequence forward(const FeatureSequence& in) const;

  void named_params(const std::string& prefix,
                    std::vector<std::pair<std::string, Tensor>>& out) const;

  size_t channels() const { return channels_; }

  ConvUnit qnet, knet, vnet, anet, ffn, ffn2;

 private:
  size_t channels_ = 0;
};

class ConvTransformerStack {
 public:
  static ConvTransformerStack init(size_t depth, size_t channels, Rng& rng);

  FeatureSequence forward(const FeatureSequence& in) const;
  void named_params(const std::string& prefix,
                    std::vector<std::pair<std::string, Tensor>>& out) const;

  size_t depth() const { return layers_.size(); }
  std::vector<ConvAttentionLayer>& layers() { return layers_; }
  const std::vector<ConvAttentionLayer>& layers() const { return layers_; }

 private:
  std::vector<ConvAttentionLayer> layers_;
};

}  // namespace fmnet
