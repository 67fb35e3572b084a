#pragma once

#include <doctest.h>
#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "core/rng.hpp"
#include "core/tensor.hpp"
#include "oracles.hpp"

namespace fmnet::testing {

// unique scratch directory, removed on scope exit
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<uint64_t> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("fmnet_test_" + tag + "_" + std::to_string(::getpid()) + "_" +
             std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string str(const std::string& sub = "") const {
    return sub.empty() ? path_.string() : (path_ / sub).string();
  }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  REQUIRE(is.good());
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

inline Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0,
                            double hi = 1.0, bool requires_grad = false) {
  std::vector<double> v(shape_numel(shape));
  for (double& x : v) x = rng.uniform(lo, hi);
  return Tensor::from(std::move(shape), std::move(v), requires_grad);
}

// analytic grad of scalar-valued forward() vs central differences over every
// element of each input tensor
inline void check_gradients(const std::function<Tensor()>& forward,
                            std::vector<Tensor> inputs, double tol) {
  clear_graph();
  for (Tensor& t : inputs) t.zero_grad();
  Tensor loss = forward();
  backward(loss);
  auto eval = [&]() {
    NoGrad guard;
    return forward().value();
  };
  for (Tensor& t : inputs) {
    for (size_t i = 0; i < t.numel(); ++i) {
      const double fd = oracles::central_diff(eval, &t.data()[i]);
      CAPTURE(i);
      CHECK(oracles::rel_err(t.grad()[i], fd) <= tol);
    }
  }
  clear_graph();
}

}  // namespace fmnet::testing
