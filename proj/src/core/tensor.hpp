#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <unordered_map>
#include <vector>

#include "core/error.hpp"

namespace fmnet {

using Shape = std::vector<size_t>;

inline size_t shape_numel(const Shape& s) {
  size_t n = 1;
  for (size_t d : s) n *= d;
  return n;
}

// Dense row-major array of 64-bit floats. `grad` is a persistent accumulator:
// backward() adds into it, so two backward passes through the same node
// double the stored gradient. Copying a Tensor copies the handle, not data.
struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // allocated on first use, same length as data
  bool requires_grad = false;
};

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values,
                     bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  size_t rank() const { return impl_->shape.size(); }
  size_t dim(size_t i) const { return impl_->shape[i]; }
  size_t numel() const { return impl_->data.size(); }

  double* data() { return impl_->data.data(); }
  const double* data() const { return impl_->data.data(); }
  std::vector<double>& vec() { return impl_->data; }
  const std::vector<double>& vec() const { return impl_->data; }

  // flat row-major index
  double at(size_t i) const { return impl_->data[i]; }
  double& at(size_t i) { return impl_->data[i]; }

  // scalar tensors only
  double value() const;

  bool requires_grad() const { return impl_ && impl_->requires_grad; }
  Tensor& set_requires_grad(bool on);
  std::vector<double>& grad();  // allocates zeros on first access
  void zero_grad();

  Tensor clone() const;  // deep copy of data, no grad, no tape link

  const std::shared_ptr<TensorImpl>& impl() const { return impl_; }
  static Tensor wrap(std::shared_ptr<TensorImpl> impl) {
    return Tensor(std::move(impl));
  }

 private:
  explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}
  std::shared_ptr<TensorImpl> impl_;
};

// Per-backward-pass cotangent buffers, keyed by tensor identity. Entries are
// created only for tensors that take gradient.
class GradMap {
 public:
  // nullptr when t does not participate in differentiation
  std::vector<double>* want(const std::shared_ptr<TensorImpl>& t);
  std::vector<double>* find(const TensorImpl* t);
  void seed(const std::shared_ptr<TensorImpl>& t, double v);
  // adds every buffer into its tensor's persistent grad
  void flush_to_grads();

 private:
  std::unordered_map<TensorImpl*, std::vector<double>> slots_;
};

// Recording tape. One node per differentiable op; backward walks the list in
// exact reverse recording order.
bool grad_enabled();
size_t graph_size();
void clear_graph();
void record_node(std::shared_ptr<TensorImpl> out,
                 std::function<void(const std::vector<double>&, GradMap&)> fn);
void backward(const Tensor& loss);

class NoGrad {
 public:
  NoGrad();
  ~NoGrad();
  NoGrad(const NoGrad&) = delete;
  NoGrad& operator=(const NoGrad&) = delete;

 private:
  bool prev_;
};

// Binary elementwise ops accept equal shapes or a scalar on either side;
// anything else is a shape error.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);

Tensor scale(const Tensor& x, double k);
Tensor add_scalar(const Tensor& x, double k);
Tensor neg(const Tensor& x);
Tensor exp_t(const Tensor& x);
Tensor log_t(const Tensor& x);   // rejects non-positive input
Tensor sqrt_t(const Tensor& x);  // rejects non-positive input
Tensor square(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor softplus(const Tensor& x);

// full reduction to a scalar, pairwise order
Tensor sum(const Tensor& x);

// x: [c_in,h,w], kernel: [c_out,c_in,kh,kw] with odd kh/kw, bias: [c_out].
// Zero padding of (k-1)/2 per axis; stride 1 preserves the spatial size.
Tensor conv2d(const Tensor& x, const Tensor& kernel, const Tensor& bias,
              size_t stride = 1);

// logits: [N,h,w]; per-pixel softmax over the leading axis, max-subtracted.
// The denominator is a sorted reduction, so permuting the N slices permutes
// the outputs bit-exactly.
Tensor softmax_seq(const Tensor& logits);

// map: [c,h,w], flow: [2,h,w] of (dx,dy) displacements. Samples map at
// pixel+displacement with edge clamping. Differentiable w.r.t. map only.
Tensor bilinear_sample(const Tensor& map, const Tensor& flow);

// weights: [M,h,w], values: M tensors [c,h,w].
// out[ch,y,x] = sum_j weights[j,y,x] * values[j][ch,y,x], sorted reduction.
Tensor weighted_mix(const Tensor& weights, const std::vector<Tensor>& values);

// [c,h,w] -> [c,2h,2w], nearest neighbor
Tensor upsample2(const Tensor& x);

// concatenation along dim 0; trailing dims must match
Tensor concat0(const std::vector<Tensor>& parts);

// keeps elements with keep[i] != 0, in row-major order -> rank-1 tensor
Tensor masked_select(const Tensor& x, const std::vector<uint8_t>& keep);

// Tape-free warp shared by the tensor op and the metrics code. The four
// corner products are grouped row-wise so that warping a locally constant
// map at integer or half-integer offsets reproduces the constant bit-exactly.
void warp_bilinear_raw(const double* map, size_t c, size_t h, size_t w,
                       const double* flow, double* out);

}  // namespace fmnet
