#include <doctest.h>

#include <array>
#include <cmath>
#include <cstring>
#include <vector>

#include "core/error.hpp"
#include "core/masking.hpp"
#include "core/posenc.hpp"
#include "core/tensor.hpp"
#include "helpers.hpp"

using namespace fmnet;
using fmnet::testing::check_gradients;
using fmnet::testing::random_tensor;

namespace {

FeatureSequence random_sequence(size_t n, size_t c, size_t h, size_t w,
                                Rng& rng) {
  FeatureSequence seq;
  for (size_t i = 0; i < n; ++i) {
    seq.maps.push_back(random_tensor({c, h, w}, rng));
    seq.source_positions.push_back(i);
  }
  return seq;
}

}  // namespace

TEST_CASE("uniform plan keeps the fourth and eighth of twelve frames") {
  MaskPlan plan = uniform_mask_plan(12, 2);
  CHECK(plan.retained == std::vector<size_t>{3, 7});
  CHECK(plan.ratio() == doctest::Approx(10.0 / 12.0).epsilon(1e-12));
}

TEST_CASE("uniform plan keeps indices 1 and 4 of eight frames") {
  MaskPlan plan = uniform_mask_plan(8, 2);
  CHECK(plan.retained == std::vector<size_t>{1, 4});
  CHECK(plan.ratio() == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("uniform plan with full retention is the identity") {
  MaskPlan plan = uniform_mask_plan(5, 5);
  CHECK(plan.retained == std::vector<size_t>{0, 1, 2, 3, 4});
  CHECK(plan.ratio() == 0.0);
  CHECK(plan.retained == identity_mask_plan(5).retained);
}

TEST_CASE("uniform plan is deterministic and always valid") {
  for (size_t n = 1; n <= 16; ++n)
    for (size_t r = 1; r <= n; ++r) {
      MaskPlan a = uniform_mask_plan(n, r);
      MaskPlan b = uniform_mask_plan(n, r);
      CHECK(a.retained == b.retained);
      CHECK(a.retained.size() == r);
      a.validate();
    }
}

TEST_CASE("random plan is deterministic per seed and well formed") {
  MaskPlan a = random_mask_plan(12, 2, uint64_t{77});
  MaskPlan b = random_mask_plan(12, 2, uint64_t{77});
  CHECK(a.retained == b.retained);
  a.validate();
  CHECK(a.retained.size() == 2);
  CHECK(a.ratio() == doctest::Approx(10.0 / 12.0));

  bool differs = false;
  for (uint64_t s = 0; s < 32 && !differs; ++s)
    differs = random_mask_plan(12, 2, s).retained != a.retained;
  CHECK(differs);
}

TEST_CASE("mask plans reject out-of-range retention counts") {
  CHECK_THROWS_AS((void)random_mask_plan(12, 0, uint64_t{1}), Error);
  CHECK_THROWS_AS((void)random_mask_plan(12, 13, uint64_t{1}), Error);
  CHECK_THROWS_AS((void)uniform_mask_plan(8, 0), Error);
  CHECK_THROWS_AS((void)uniform_mask_plan(8, 9), Error);
}

TEST_CASE("plan validation catches malformed index lists") {
  MaskPlan p;
  p.n_frames = 4;
  p.retained = {2, 1};
  CHECK_THROWS_AS(p.validate(), Error);
  p.retained = {1, 1};
  CHECK_THROWS_AS(p.validate(), Error);
  p.retained = {1, 4};
  CHECK_THROWS_AS(p.validate(), Error);
  p.retained = {};
  CHECK_THROWS_AS(p.validate(), Error);
}

TEST_CASE("random plans retain each index about equally often") {
  // 12 choose 2 sampling: each index should appear with frequency 1/6
  std::array<size_t, 12> counts{};
  const uint64_t kSeedBase = 1000;
  const size_t kSeeds = 10000;
  for (uint64_t s = 0; s < kSeeds; ++s) {
    MaskPlan p = random_mask_plan(12, 2, kSeedBase + s);
    for (size_t idx : p.retained) counts[idx]++;
  }
  for (size_t i = 0; i < 12; ++i) {
    const double freq = double(counts[i]) / double(kSeeds);
    CAPTURE(i);
    CHECK(std::abs(freq - 1.0 / 6.0) <= 0.01);
  }
}

TEST_CASE("plan log line prints count, kept indices, and ratio") {
  CHECK(mask_plan_log_line(uniform_mask_plan(12, 2)) ==
        "mask N=12 keep=3,7 ratio=83.33%");
  CHECK(mask_plan_log_line(identity_mask_plan(3)) ==
        "mask N=3 keep=0,1,2 ratio=0.00%");
  CHECK(mask_plan_log_line(uniform_mask_plan(8, 2)) ==
        "mask N=8 keep=1,4 ratio=75.00%");
}

TEST_CASE("apply_mask selects retained frames in order") {
  Rng rng(601);
  FeatureSequence seq = random_sequence(12, 3, 4, 4, rng);
  MaskPlan plan = uniform_mask_plan(12, 2);
  FeatureSequence sub = apply_mask(seq, plan);
  REQUIRE(sub.length() == 2);
  CHECK(sub.source_positions == std::vector<size_t>{3, 7});
  CHECK(std::memcmp(sub.maps[0].data(), seq.maps[3].data(),
                    sub.maps[0].numel() * sizeof(double)) == 0);
  CHECK(std::memcmp(sub.maps[1].data(), seq.maps[7].data(),
                    sub.maps[1].numel() * sizeof(double)) == 0);
}

TEST_CASE("apply_mask with the identity plan is a no-op") {
  Rng rng(602);
  FeatureSequence seq = random_sequence(5, 2, 3, 3, rng);
  FeatureSequence sub = apply_mask(seq, identity_mask_plan(5));
  REQUIRE(sub.length() == 5);
  for (size_t i = 0; i < 5; ++i)
    CHECK(std::memcmp(sub.maps[i].data(), seq.maps[i].data(),
                      sub.maps[i].numel() * sizeof(double)) == 0);
}

TEST_CASE("apply_mask validates the plan length") {
  Rng rng(603);
  FeatureSequence seq = random_sequence(4, 2, 2, 2, rng);
  CHECK_THROWS_AS((void)apply_mask(seq, uniform_mask_plan(5, 2)), Error);
}

TEST_CASE("completion fills every slot and re-adds position codes") {
  Rng rng(604);
  const size_t n = 6, c = 4, h = 3, w = 3;
  FeatureSequence coded = random_sequence(n, c, h, w, rng);
  MaskPlan plan = uniform_mask_plan(n, 2);
  FeatureSequence sub = apply_mask(coded, plan);
  MaskToken token = MaskToken::init(c, h, w, rng);
  FeatureSequence full = complete_sequence(sub, plan, token);

  REQUIRE(full.length() == n);
  CHECK(full.source_positions == std::vector<size_t>{0, 1, 2, 3, 4, 5});
  std::vector<bool> kept(n, false);
  for (size_t r : plan.retained) kept[r] = true;
  for (size_t i = 0; i < n; ++i) {
    Tensor pe = positional_embedding(i, h, w, c);
    const Tensor& base = kept[i] ? coded.maps[i] : token.value;
    for (size_t e = 0; e < c * h * w; ++e)
      CHECK(full.maps[i].at(e) == base.at(e) + pe.at(e));
  }
}

TEST_CASE("masked slots differ only by their position codes") {
  Rng rng(605);
  const size_t n = 8, c = 2, h = 2, w = 2;
  FeatureSequence coded = random_sequence(n, c, h, w, rng);
  MaskPlan plan = uniform_mask_plan(n, 2);
  MaskToken token = MaskToken::init(c, h, w, rng);
  FeatureSequence full = complete_sequence(apply_mask(coded, plan), plan, token);

  for (size_t i : {0, 2, 3, 5, 6, 7}) {
    Tensor pe = positional_embedding(i, h, w, c);
    for (size_t e = 0; e < c * h * w; ++e)
      CHECK(full.maps[i].at(e) - pe.at(e) ==
            doctest::Approx(token.value.at(e)).epsilon(1e-15));
  }
}

TEST_CASE("completion validates the retained-length precondition") {
  Rng rng(606);
  FeatureSequence sub = random_sequence(3, 2, 2, 2, rng);
  MaskToken token = MaskToken::init(2, 2, 2, rng);
  CHECK_THROWS_AS((void)complete_sequence(sub, uniform_mask_plan(8, 2), token),
                  Error);
}

TEST_CASE("token init stays inside the conv init bound and is not zero") {
  Rng rng(607);
  const size_t c = 6;
  MaskToken token = MaskToken::init(c, 4, 4, rng);
  const double bound = 1.0 / std::sqrt(9.0 * double(c));
  double mag = 0.0;
  for (size_t i = 0; i < token.value.numel(); ++i) {
    CHECK(std::abs(token.value.at(i)) <= bound);
    mag = std::max(mag, std::abs(token.value.at(i)));
  }
  CHECK(mag > 0.0);
}

TEST_CASE("token gradient sums the contributions of all masked slots") {
  Rng rng(608);
  const size_t n = 6, c = 2, h = 2, w = 2;
  FeatureSequence coded = random_sequence(n, c, h, w, rng);
  MaskPlan plan = uniform_mask_plan(n, 2);
  MaskToken token = MaskToken::init(c, h, w, rng);
  token.value.set_requires_grad(true);

  // distinct per-slot weights make the expected token gradient
  // sum_masked weight_i at every element
  std::vector<double> weight(n);
  for (size_t i = 0; i < n; ++i) weight[i] = 0.25 * double(i + 1);

  auto forward = [&]() {
    FeatureSequence full =
        complete_sequence(apply_mask(coded, plan), plan, token);
    Tensor loss = Tensor::scalar(0.0);
    for (size_t i = 0; i < n; ++i)
      loss = add(loss, scale(sum(full.maps[i]), weight[i]));
    return loss;
  };

  clear_graph();
  token.value.zero_grad();
  backward(forward());
  REQUIRE(plan.retained == std::vector<size_t>{1, 3});
  double expect = 0.0;
  for (size_t i = 0; i < n; ++i)
    if (i != 1 && i != 3) expect += weight[i];
  for (size_t e = 0; e < token.value.numel(); ++e)
    CHECK(token.value.grad()[e] == doctest::Approx(expect).epsilon(1e-12));
  clear_graph();

  check_gradients(forward, {token.value}, 1e-7);
}
