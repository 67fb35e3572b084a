#pragma once

#include <algorithm>
#include <cstddef>
#include <vector>

namespace fmnet {

// Pairwise (tree) summation. Order depends only on element count, so two
// buffers with the same contents always reduce to the same bits.
inline double pairwise_sum(const double* data, size_t n) {
  if (n == 0) return 0.0;
  if (n == 1) return data[0];
  if (n <= 8) {
    double acc = data[0];
    for (size_t i = 1; i < n; ++i) acc += data[i];
    return acc;
  }
  size_t half = n / 2;
  return pairwise_sum(data, half) + pairwise_sum(data + half, n - half);
}

inline double pairwise_sum(const std::vector<double>& v) {
  return pairwise_sum(v.data(), v.size());
}

// Sort-then-add reduction. The result depends only on the multiset of values,
// which makes reductions over reordered inputs bit-exact. Used where a
// permutation of the inputs must not change the output at all.
inline double sorted_sum(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  double acc = 0.0;
  for (double x : v) acc += x;
  return acc;
}

}  // namespace fmnet
