#include <doctest.h>

#include <cmath>
#include <cstring>
#include <vector>

#include "core/rng.hpp"
#include "core/tensor.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace fmnet;
using fmnet::testing::check_gradients;
using fmnet::testing::random_tensor;

TEST_CASE("conv2d 1x1 identity kernel passes input through") {
  Rng rng(11);
  Tensor x = random_tensor({1, 4, 5}, rng);
  Tensor k = Tensor::from({1, 1, 1, 1}, {1.0});
  Tensor b = Tensor::zeros({1});
  Tensor y = conv2d(x, k, b);
  REQUIRE(y.shape() == x.shape());
  for (size_t i = 0; i < x.numel(); ++i) CHECK(y.at(i) == x.at(i));
}

TEST_CASE("conv2d box kernel on constant map shows zero padding at border") {
  Tensor x = Tensor::full({1, 5, 5}, 5.0);
  Tensor k = Tensor::full({1, 1, 3, 3}, 1.0 / 9.0);
  Tensor b = Tensor::zeros({1});
  Tensor y = conv2d(x, k, b);
  CHECK(y.at(2 * 5 + 2) == doctest::Approx(5.0).epsilon(1e-12));
  // corner sees only 4 of 9 taps
  CHECK(y.at(0) == doctest::Approx(5.0 * 4.0 / 9.0).epsilon(1e-12));
}

TEST_CASE("conv2d matches reference loops, stride 1 and 2") {
  Rng rng(23);
  for (size_t stride : {size_t(1), size_t(2)}) {
    Tensor x = random_tensor({2, 6, 6}, rng);
    Tensor k = random_tensor({3, 2, 3, 3}, rng);
    Tensor b = random_tensor({3}, rng);
    Tensor y = conv2d(x, k, b, stride);
    auto ref = oracles::ref_conv2d(x.vec(), 2, 6, 6, k.vec(), 3, 3, 3, b.vec(),
                                   stride);
    REQUIRE(y.numel() == ref.size());
    const size_t side = stride == 1 ? 6 : 3;
    CHECK(y.dim(1) == side);
    for (size_t i = 0; i < ref.size(); ++i)
      CHECK(y.at(i) == doctest::Approx(ref[i]).epsilon(1e-12));
  }
}

TEST_CASE("conv2d gradients match finite differences") {
  Rng rng(37);
  Tensor x = random_tensor({2, 4, 4}, rng, -1, 1, true);
  Tensor k = random_tensor({2, 2, 3, 3}, rng, -1, 1, true);
  Tensor b = random_tensor({2}, rng, -1, 1, true);
  check_gradients([&]() { return sum(square(conv2d(x, k, b))); }, {x, k, b},
                  1e-6);
}

TEST_CASE("conv2d rejects channel mismatch") {
  Tensor x = Tensor::zeros({2, 4, 4});
  Tensor k = Tensor::zeros({1, 3, 3, 3});
  Tensor b = Tensor::zeros({1});
  CHECK_THROWS_AS(conv2d(x, k, b), Error);
}

TEST_CASE("softmax_seq normalizes, handles N=1, hits known values") {
  Tensor equal = Tensor::full({4, 2, 2}, 0.7);
  Tensor y = softmax_seq(equal);
  for (size_t i = 0; i < y.numel(); ++i)
    CHECK(y.at(i) == doctest::Approx(0.25).epsilon(1e-12));

  Tensor one = Tensor::full({1, 3, 3}, -2.0);
  Tensor y1 = softmax_seq(one);
  for (size_t i = 0; i < y1.numel(); ++i) CHECK(y1.at(i) == 1.0);

  Tensor pair = Tensor::from({2, 1, 1}, {0.0, std::log(3.0)});
  Tensor y2 = softmax_seq(pair);
  CHECK(y2.at(0) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(y2.at(1) == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("softmax_seq per-pixel sums are 1 and match the reference") {
  Rng rng(5);
  Tensor x = random_tensor({5, 3, 4}, rng, -3, 3);
  Tensor y = softmax_seq(x);
  const size_t hw = 12;
  for (size_t p = 0; p < hw; ++p) {
    double s = 0.0;
    for (size_t j = 0; j < 5; ++j) s += y.at(j * hw + p);
    CHECK(std::fabs(s - 1.0) <= 1e-12);
  }
  auto ref = oracles::ref_softmax_seq(x.vec(), 5, 3, 4);
  for (size_t i = 0; i < ref.size(); ++i)
    CHECK(std::fabs(y.at(i) - ref[i]) <= 1e-12);
}

TEST_CASE("softmax_seq rejects non-finite input") {
  Tensor x = Tensor::from({2, 1, 1}, {0.0, INFINITY});
  CHECK_THROWS_AS(softmax_seq(x), Error);
}

TEST_CASE("softmax_seq gradient matches finite differences") {
  Rng rng(7);
  Tensor x = random_tensor({3, 2, 2}, rng, -2, 2, true);
  Tensor c = random_tensor({3, 2, 2}, rng);
  check_gradients([&]() { return sum(mul(softmax_seq(x), c)); }, {x}, 1e-6);
}

TEST_CASE("bilinear_sample with zero flow is a bit-exact identity") {
  Rng rng(13);
  Tensor map = random_tensor({2, 5, 6}, rng);
  Tensor flow = Tensor::zeros({2, 5, 6});
  Tensor y = bilinear_sample(map, flow);
  CHECK(std::memcmp(y.data(), map.data(), map.numel() * sizeof(double)) == 0);
}

TEST_CASE("bilinear_sample shifts a linear ramp exactly") {
  const size_t w = 6, h = 3;
  std::vector<double> ramp(h * w);
  for (size_t y = 0; y < h; ++y)
    for (size_t x = 0; x < w; ++x) ramp[y * w + x] = static_cast<double>(x);
  Tensor map = Tensor::from({1, h, w}, ramp);
  std::vector<double> fl(2 * h * w, 0.0);
  for (size_t p = 0; p < h * w; ++p) fl[p] = 0.5;
  Tensor y = bilinear_sample(map, Tensor::from({2, h, w}, fl));
  for (size_t row = 0; row < h; ++row)
    for (size_t x = 0; x + 1 < w; ++x)
      CHECK(y.at(row * w + x) == doctest::Approx(x + 0.5).epsilon(1e-12));
}

TEST_CASE("bilinear_sample reproduces constants bit-exactly at half steps") {
  Tensor map = Tensor::full({1, 4, 4}, 7.3);
  for (double dx : {0.0, 0.5, 1.0, -0.5}) {
    for (double dy : {0.0, 0.5, -0.5}) {
      std::vector<double> fl(2 * 16);
      for (size_t p = 0; p < 16; ++p) {
        fl[p] = dx;
        fl[16 + p] = dy;
      }
      Tensor y = bilinear_sample(map, Tensor::from({2, 4, 4}, fl));
      for (size_t i = 0; i < 16; ++i) CHECK(y.at(i) == 7.3);
    }
  }
}

TEST_CASE("bilinear_sample matches the interpolation loop reference") {
  Rng rng(17);
  Tensor map = random_tensor({1, 4, 4}, rng);
  std::vector<double> fl(2 * 16);
  for (double& v : fl) v = rng.uniform(-1.5, 1.5);
  Tensor flow = Tensor::from({2, 4, 4}, fl);
  Tensor y = bilinear_sample(map, flow);
  auto ref = oracles::ref_bilinear(map.vec(), 1, 4, 4, fl);
  for (size_t i = 0; i < ref.size(); ++i)
    CHECK(std::fabs(y.at(i) - ref[i]) <= 1e-12);
}

TEST_CASE("bilinear_sample gradient w.r.t. map matches finite differences") {
  Rng rng(19);
  Tensor map = random_tensor({2, 4, 4}, rng, 0.5, 2.0, true);
  std::vector<double> fl(2 * 16);
  for (double& v : fl) v = rng.uniform(-1.0, 1.0);
  Tensor flow = Tensor::from({2, 4, 4}, fl);
  check_gradients([&]() { return sum(square(bilinear_sample(map, flow))); },
                  {map}, 1e-6);
}

TEST_CASE("elementwise identities and domain errors") {
  Rng rng(29);
  Tensor x = random_tensor({3, 2}, rng);
  Tensor zero = Tensor::zeros({3, 2});
  Tensor y = add(x, zero);
  for (size_t i = 0; i < x.numel(); ++i) CHECK(y.at(i) == x.at(i));

  Tensor s = Tensor::scalar(2.0);
  Tensor doubled = mul(x, s);
  for (size_t i = 0; i < x.numel(); ++i) CHECK(doubled.at(i) == 2.0 * x.at(i));

  CHECK_THROWS_AS(add(Tensor::zeros({2}), Tensor::zeros({3})), Error);
  CHECK_THROWS_AS(log_t(Tensor::from({2}, {1.0, 0.0})), Error);
  CHECK_THROWS_AS(sqrt_t(Tensor::from({1}, {-4.0})), Error);
}

TEST_CASE("d/dx sum(square(x)) equals 2x") {
  Rng rng(31);
  Tensor x = random_tensor({7}, rng, -2, 2, true);
  clear_graph();
  backward(sum(square(x)));
  for (size_t i = 0; i < x.numel(); ++i)
    CHECK(x.grad()[i] == doctest::Approx(2.0 * x.at(i)).epsilon(1e-12));
  clear_graph();
}

TEST_CASE("composed exp(-beta * sum of squares) gradient path") {
  Rng rng(41);
  Tensor x = random_tensor({3, 3}, rng, -0.5, 0.5, true);
  check_gradients(
      [&]() { return sum(exp_t(scale(sum(square(x)), -50.0))); }, {x}, 1e-6);
}

TEST_CASE("unary op chain gradients (log, sqrt, softplus, relu, sub, neg)") {
  Rng rng(43);
  Tensor x = random_tensor({6}, rng, 0.5, 3.0, true);
  Tensor tgt = random_tensor({6}, rng, 0.5, 3.0);
  check_gradients(
      [&]() {
        Tensor u = sub(log_t(sqrt_t(x)), log_t(tgt));
        return sum(square(softplus(neg(u))));
      },
      {x}, 1e-6);
  Tensor z = random_tensor({8}, rng, -2.0, 2.0, true);
  check_gradients([&]() { return sum(mul(relu(z), z)); }, {z}, 1e-6);
}

TEST_CASE("backward on a constant is a no-op and non-scalar loss throws") {
  clear_graph();
  Tensor c = Tensor::scalar(3.0);
  backward(c);  // records nothing, touches nothing
  CHECK(graph_size() == 0);
  Tensor vec = Tensor::zeros({3}, true);
  CHECK_THROWS_AS(backward(vec), Error);
  clear_graph();
}

TEST_CASE("backward of sum gives ones and accumulates across passes") {
  clear_graph();
  Tensor x = Tensor::zeros({4}, true);
  Tensor loss = sum(x);
  backward(loss);
  for (double g : x.grad()) CHECK(g == 1.0);
  backward(loss);
  for (double g : x.grad()) CHECK(g == 2.0);
  clear_graph();
}

TEST_CASE("NoGrad suppresses recording; clear_graph drops nodes") {
  clear_graph();
  Tensor x = Tensor::zeros({4}, true);
  {
    NoGrad guard;
    Tensor y = sum(square(x));
    CHECK(graph_size() == 0);
  }
  Tensor y = sum(square(x));
  CHECK(graph_size() == 2);
  clear_graph();
  CHECK(graph_size() == 0);
}

TEST_CASE("shared subexpression receives summed gradient") {
  clear_graph();
  Tensor x = Tensor::from({2}, {1.5, -0.5}, true);
  Tensor y = add(x, x);
  backward(sum(y));
  for (double g : x.grad()) CHECK(g == 2.0);
  clear_graph();
}

TEST_CASE("upsample2 replicates values and routes gradients back") {
  Rng rng(47);
  Tensor x = random_tensor({1, 2, 2}, rng, -1, 1, true);
  Tensor y = upsample2(x);
  REQUIRE(y.shape() == Shape{1, 4, 4});
  CHECK(y.at(0) == x.at(0));
  CHECK(y.at(1) == x.at(0));
  CHECK(y.at(4) == x.at(0));
  CHECK(y.at(3) == x.at(1));
  check_gradients([&]() { return sum(square(upsample2(x))); }, {x}, 1e-6);
}

TEST_CASE("concat0 stacks parts and splits gradients") {
  Rng rng(53);
  Tensor a = random_tensor({1, 2, 2}, rng, -1, 1, true);
  Tensor b = random_tensor({2, 2, 2}, rng, -1, 1, true);
  Tensor y = concat0({a, b});
  REQUIRE(y.shape() == Shape{3, 2, 2});
  CHECK(y.at(0) == a.at(0));
  CHECK(y.at(4) == b.at(0));
  check_gradients([&]() { return sum(square(concat0({a, b}))); }, {a, b},
                  1e-6);
  CHECK_THROWS_AS(concat0({a, Tensor::zeros({1, 3, 2})}), Error);
}

TEST_CASE("masked_select picks flagged elements and scatters gradient") {
  Tensor x = Tensor::from({5}, {10, 20, 30, 40, 50}, true);
  std::vector<uint8_t> keep{1, 0, 1, 0, 1};
  Tensor y = masked_select(x, keep);
  REQUIRE(y.shape() == Shape{3});
  CHECK(y.at(0) == 10);
  CHECK(y.at(1) == 30);
  CHECK(y.at(2) == 50);
  clear_graph();
  x.zero_grad();
  backward(sum(masked_select(x, keep)));
  CHECK(x.grad() == std::vector<double>{1, 0, 1, 0, 1});
  clear_graph();
  CHECK_THROWS_AS(masked_select(x, std::vector<uint8_t>{0, 0, 0, 0, 0}),
                  Error);
}

TEST_CASE("weighted_mix matches a direct loop and differentiates") {
  Rng rng(59);
  const size_t m = 3, c = 2, h = 2, w = 3, hw = h * w;
  Tensor weights = random_tensor({m, h, w}, rng, 0.0, 1.0, true);
  std::vector<Tensor> values;
  for (size_t j = 0; j < m; ++j)
    values.push_back(random_tensor({c, h, w}, rng, -1, 1, true));
  Tensor y = weighted_mix(weights, values);
  for (size_t ch = 0; ch < c; ++ch)
    for (size_t p = 0; p < hw; ++p) {
      double acc = 0.0;
      for (size_t j = 0; j < m; ++j)
        acc += weights.at(j * hw + p) * values[j].at(ch * hw + p);
      CHECK(std::fabs(y.at(ch * hw + p) - acc) <= 1e-12);
    }
  std::vector<Tensor> inputs = values;
  inputs.push_back(weights);
  check_gradients([&]() { return sum(square(weighted_mix(weights, values))); },
                  inputs, 1e-6);
}

TEST_CASE("identical seeds give bit-identical outputs and gradients") {
  auto run = [](std::vector<double>& grads_out) {
    clear_graph();
    Rng rng(777);
    Tensor x = random_tensor({2, 4, 4}, rng, -1, 1, true);
    Tensor k = random_tensor({2, 2, 3, 3}, rng, -1, 1, true);
    Tensor b = random_tensor({2}, rng, -1, 1, true);
    Tensor y = softmax_seq(conv2d(x, k, b));
    Tensor loss = sum(square(y));
    backward(loss);
    grads_out = k.grad();
    const double lv = loss.value();
    clear_graph();
    return lv;
  };
  std::vector<double> g1, g2;
  const double l1 = run(g1);
  const double l2 = run(g2);
  CHECK(std::memcmp(&l1, &l2, sizeof(double)) == 0);
  REQUIRE(g1.size() == g2.size());
  CHECK(std::memcmp(g1.data(), g2.data(), g1.size() * sizeof(double)) == 0);
}

TEST_CASE("rng basics: range, determinism, sampling without replacement") {
  Rng a(123), b(123);
  for (int i = 0; i < 1000; ++i) {
    const double u = a.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    CHECK(u == b.uniform());
  }
  Rng c(9);
  auto picked = c.sample_without_replacement(12, 5);
  REQUIRE(picked.size() == 5);
  std::sort(picked.begin(), picked.end());
  for (size_t i = 0; i + 1 < picked.size(); ++i)
    CHECK(picked[i] < picked[i + 1]);
  for (size_t v : picked) CHECK(v < 12);

  Rng s1 = substream(42, "mask");
  Rng s2 = substream(42, "mask");
  Rng s3 = substream(42, "data");
  const double v1 = s1.uniform();
  CHECK(v1 == s2.uniform());
  CHECK(v1 != s3.uniform());
}
