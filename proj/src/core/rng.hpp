#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

#include "core/error.hpp"

namespace fmnet {

// All randomness in the project flows through this wrapper. mt19937_64 has a
// fully specified output sequence and every value mapping below is explicit,
// so identical seeds give identical results independent of the standard
// library's distribution implementations.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  uint64_t next_u64() { return engine_(); }

  // [0, 1)
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // [0, n). Modulo bias is ~n/2^64, far below anything we measure.
  uint64_t below(uint64_t n) {
    require(n > 0, ErrorCode::kInvalidArgument, "Rng::below: n must be > 0");
    return engine_() % n;
  }

  // inclusive bounds
  int uniform_int(int lo, int hi) {
    require(lo <= hi, ErrorCode::kInvalidArgument, "Rng::uniform_int: lo > hi");
    return lo + static_cast<int>(below(static_cast<uint64_t>(hi - lo) + 1));
  }

  // k distinct values from [0, n), unsorted draw order (partial Fisher-Yates).
  std::vector<size_t> sample_without_replacement(size_t n, size_t k) {
    require(k <= n, ErrorCode::kInvalidArgument,
            "sample_without_replacement: k > n");
    std::vector<size_t> pool(n);
    for (size_t i = 0; i < n; ++i) pool[i] = i;
    for (size_t i = 0; i < k; ++i) {
      size_t j = i + static_cast<size_t>(below(n - i));
      std::swap(pool[i], pool[j]);
    }
    pool.resize(k);
    return pool;
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    if (v.empty()) return;
    for (size_t i = v.size() - 1; i > 0; --i) {
      size_t j = static_cast<size_t>(below(i + 1));
      std::swap(v[i], v[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline uint64_t fnv1a(std::string_view s) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ull;
  }
  return h;
}

// Named sub-stream of a run seed. Streams with different names are
// independent, so e.g. mask plans do not shift when the data order changes.
inline Rng substream(uint64_t run_seed, std::string_view name) {
  return Rng(splitmix64(run_seed ^ fnv1a(name)));
}

}  // namespace fmnet
