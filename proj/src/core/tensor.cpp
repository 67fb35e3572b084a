#include "core/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "core/numeric.hpp"

namespace fmnet {

namespace {

struct TapeNode {
  std::shared_ptr<TensorImpl> out;
  std::function<void(const std::vector<double>&, GradMap&)> backward;
};

struct Tape {
  std::vector<TapeNode> nodes;
  bool enabled = true;
};

thread_local Tape g_tape;

std::shared_ptr<TensorImpl> make_impl(Shape shape, bool requires_grad) {
  auto impl = std::make_shared<TensorImpl>();
  impl->data.assign(shape_numel(shape), 0.0);
  impl->shape = std::move(shape);
  impl->requires_grad = requires_grad;
  return impl;
}

bool tracks(const Tensor& t) { return g_tape.enabled && t.requires_grad(); }

}  // namespace

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return Tensor(make_impl(std::move(shape), requires_grad));
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  auto t = zeros(std::move(shape), requires_grad);
  std::fill(t.impl_->data.begin(), t.impl_->data.end(), value);
  return t;
}

Tensor Tensor::from(Shape shape, std::vector<double> values,
                    bool requires_grad) {
  require(shape_numel(shape) == values.size(), ErrorCode::kShapeMismatch,
          "Tensor::from: value count does not match shape");
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::move(values);
  impl->requires_grad = requires_grad;
  return Tensor(std::move(impl));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from(Shape{1}, {value}, requires_grad);
}

double Tensor::value() const {
  require(numel() == 1, ErrorCode::kShapeMismatch,
          "Tensor::value: tensor is not scalar");
  return impl_->data[0];
}

Tensor& Tensor::set_requires_grad(bool on) {
  impl_->requires_grad = on;
  return *this;
}

std::vector<double>& Tensor::grad() {
  auto& g = impl_->grad;
  if (g.size() != impl_->data.size()) g.assign(impl_->data.size(), 0.0);
  return g;
}

void Tensor::zero_grad() {
  auto& g = grad();
  std::fill(g.begin(), g.end(), 0.0);
}

Tensor Tensor::clone() const {
  return Tensor::from(impl_->shape, impl_->data, false);
}

std::vector<double>* GradMap::want(const std::shared_ptr<TensorImpl>& t) {
  if (!t->requires_grad) return nullptr;
  auto& slot = slots_[t.get()];
  if (slot.size() != t->data.size()) slot.assign(t->data.size(), 0.0);
  return &slot;
}

std::vector<double>* GradMap::find(const TensorImpl* t) {
  auto it = slots_.find(const_cast<TensorImpl*>(t));
  return it == slots_.end() ? nullptr : &it->second;
}

void GradMap::seed(const std::shared_ptr<TensorImpl>& t, double v) {
  auto& slot = slots_[t.get()];
  slot.assign(t->data.size(), v);
}

void GradMap::flush_to_grads() {
  for (auto& [impl, cot] : slots_) {
    if (!impl->requires_grad) continue;
    auto& g = impl->grad;
    if (g.size() != impl->data.size()) g.assign(impl->data.size(), 0.0);
    for (size_t i = 0; i < cot.size(); ++i) g[i] += cot[i];
  }
}

bool grad_enabled() { return g_tape.enabled; }

size_t graph_size() { return g_tape.nodes.size(); }

void clear_graph() { g_tape.nodes.clear(); }

void record_node(
    std::shared_ptr<TensorImpl> out,
    std::function<void(const std::vector<double>&, GradMap&)> fn) {
  g_tape.nodes.push_back(TapeNode{std::move(out), std::move(fn)});
}

void backward(const Tensor& loss) {
  require(loss.defined() && loss.numel() == 1, ErrorCode::kShapeMismatch,
          "backward: loss must be a scalar tensor");
  GradMap gm;
  gm.seed(loss.impl(), 1.0);
  for (size_t i = g_tape.nodes.size(); i-- > 0;) {
    const TapeNode& node = g_tape.nodes[i];
    const std::vector<double>* go = gm.find(node.out.get());
    if (go == nullptr) continue;
    // copy: downstream accumulation must not alias the buffer being read
    std::vector<double> gout = *go;
    node.backward(gout, gm);
  }
  gm.flush_to_grads();
}

NoGrad::NoGrad() : prev_(g_tape.enabled) { g_tape.enabled = false; }
NoGrad::~NoGrad() { g_tape.enabled = prev_; }

namespace {

enum class BinOp { kAdd, kSub, kMul };

Tensor binary_elementwise(const Tensor& a, const Tensor& b, BinOp op,
                          const char* name) {
  require(a.defined() && b.defined(), ErrorCode::kInvalidArgument, name);
  const bool a_scalar = a.numel() == 1;
  const bool b_scalar = b.numel() == 1;
  require(a.shape() == b.shape() || a_scalar || b_scalar,
          ErrorCode::kShapeMismatch,
          std::string(name) + ": shapes differ and neither side is scalar");

  const Shape& out_shape = a_scalar ? b.shape() : a.shape();
  const size_t n = shape_numel(out_shape);
  const bool track = g_tape.enabled && (a.requires_grad() || b.requires_grad());
  Tensor out = Tensor::zeros(out_shape, track);

  const double* pa = a.data();
  const double* pb = b.data();
  double* po = out.data();
  for (size_t i = 0; i < n; ++i) {
    const double va = a_scalar ? pa[0] : pa[i];
    const double vb = b_scalar ? pb[0] : pb[i];
    switch (op) {
      case BinOp::kAdd: po[i] = va + vb; break;
      case BinOp::kSub: po[i] = va - vb; break;
      case BinOp::kMul: po[i] = va * vb; break;
    }
  }

  if (track) {
    auto ia = a.impl();
    auto ib = b.impl();
    record_node(out.impl(), [ia, ib, a_scalar, b_scalar, op, n](
                                const std::vector<double>& go, GradMap& gm) {
      std::vector<double>* ga = gm.want(ia);
      std::vector<double>* gb = gm.want(ib);
      const double* pa = ia->data.data();
      const double* pb = ib->data.data();
      for (size_t i = 0; i < n; ++i) {
        const double g = go[i];
        const double va = a_scalar ? pa[0] : pa[i];
        const double vb = b_scalar ? pb[0] : pb[i];
        double da = 0.0, db = 0.0;
        switch (op) {
          case BinOp::kAdd: da = g; db = g; break;
          case BinOp::kSub: da = g; db = -g; break;
          case BinOp::kMul: da = g * vb; db = g * va; break;
        }
        if (ga) (*ga)[a_scalar ? 0 : i] += da;
        if (gb) (*gb)[b_scalar ? 0 : i] += db;
      }
    });
  }
  return out;
}

Tensor unary_elementwise(const Tensor& x, const char* name,
                         const std::function<double(double)>& f,
                         const std::function<double(double, double)>& df) {
  require(x.defined(), ErrorCode::kInvalidArgument, name);
  const size_t n = x.numel();
  const bool track = tracks(x);
  Tensor out = Tensor::zeros(x.shape(), track);
  const double* px = x.data();
  double* po = out.data();
  for (size_t i = 0; i < n; ++i) po[i] = f(px[i]);

  if (track) {
    auto ix = x.impl();
    auto io = out.impl();
    record_node(out.impl(), [ix, io, df, n](const std::vector<double>& go,
                                            GradMap& gm) {
      std::vector<double>* gx = gm.want(ix);
      if (!gx) return;
      const double* px = ix->data.data();
      const double* py = io->data.data();
      for (size_t i = 0; i < n; ++i) (*gx)[i] += go[i] * df(px[i], py[i]);
    });
  }
  return out;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_elementwise(a, b, BinOp::kAdd, "add");
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_elementwise(a, b, BinOp::kSub, "sub");
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_elementwise(a, b, BinOp::kMul, "mul");
}

Tensor scale(const Tensor& x, double k) {
  return unary_elementwise(
      x, "scale", [k](double v) { return k * v; },
      [k](double, double) { return k; });
}

Tensor add_scalar(const Tensor& x, double k) {
  return unary_elementwise(
      x, "add_scalar", [k](double v) { return v + k; },
      [](double, double) { return 1.0; });
}

Tensor neg(const Tensor& x) {
  return unary_elementwise(
      x, "neg", [](double v) { return -v; },
      [](double, double) { return -1.0; });
}

Tensor exp_t(const Tensor& x) {
  return unary_elementwise(
      x, "exp", [](double v) { return std::exp(v); },
      [](double, double y) { return y; });
}

Tensor log_t(const Tensor& x) {
  const double* px = x.data();
  for (size_t i = 0; i < x.numel(); ++i)
    require(px[i] > 0.0, ErrorCode::kDomain, "log: non-positive input");
  return unary_elementwise(
      x, "log", [](double v) { return std::log(v); },
      [](double v, double) { return 1.0 / v; });
}

Tensor sqrt_t(const Tensor& x) {
  const double* px = x.data();
  for (size_t i = 0; i < x.numel(); ++i)
    require(px[i] > 0.0, ErrorCode::kDomain, "sqrt: non-positive input");
  return unary_elementwise(
      x, "sqrt", [](double v) { return std::sqrt(v); },
      [](double, double y) { return 0.5 / y; });
}

Tensor square(const Tensor& x) {
  return unary_elementwise(
      x, "square", [](double v) { return v * v; },
      [](double v, double) { return 2.0 * v; });
}

Tensor relu(const Tensor& x) {
  return unary_elementwise(
      x, "relu", [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor softplus(const Tensor& x) {
  auto fwd = [](double v) {
    return v > 0.0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v));
  };
  auto bwd = [](double v, double) {
    if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
    const double e = std::exp(v);
    return e / (1.0 + e);
  };
  return unary_elementwise(x, "softplus", fwd, bwd);
}

Tensor sum(const Tensor& x) {
  require(x.defined(), ErrorCode::kInvalidArgument, "sum");
  const bool track = tracks(x);
  Tensor out = Tensor::scalar(pairwise_sum(x.data(), x.numel()), track);
  if (track) {
    auto ix = x.impl();
    record_node(out.impl(),
                [ix](const std::vector<double>& go, GradMap& gm) {
                  std::vector<double>* gx = gm.want(ix);
                  if (!gx) return;
                  for (double& g : *gx) g += go[0];
                });
  }
  return out;
}

Tensor conv2d(const Tensor& x, const Tensor& kernel, const Tensor& bias,
              size_t stride) {
  require(x.defined() && kernel.defined() && bias.defined(),
          ErrorCode::kInvalidArgument, "conv2d: undefined operand");
  require(x.rank() == 3, ErrorCode::kShapeMismatch,
          "conv2d: input must be [c,h,w]");
  require(kernel.rank() == 4, ErrorCode::kShapeMismatch,
          "conv2d: kernel must be [c_out,c_in,kh,kw]");
  const size_t c_in = x.dim(0), h = x.dim(1), w = x.dim(2);
  const size_t c_out = kernel.dim(0), kh = kernel.dim(2), kw = kernel.dim(3);
  require(kernel.dim(1) == c_in, ErrorCode::kShapeMismatch,
          "conv2d: kernel c_in does not match input channels");
  require(kh % 2 == 1 && kw % 2 == 1, ErrorCode::kInvalidArgument,
          "conv2d: kernel sides must be odd");
  require(bias.rank() == 1 && bias.dim(0) == c_out, ErrorCode::kShapeMismatch,
          "conv2d: bias must be [c_out]");
  require(stride >= 1, ErrorCode::kInvalidArgument, "conv2d: stride < 1");

  const size_t ph = (kh - 1) / 2, pw = (kw - 1) / 2;
  const size_t oh = (h + 2 * ph - kh) / stride + 1;
  const size_t ow = (w + 2 * pw - kw) / stride + 1;

  const bool track = g_tape.enabled && (x.requires_grad() ||
                                        kernel.requires_grad() ||
                                        bias.requires_grad());
  Tensor out = Tensor::zeros({c_out, oh, ow}, track);

  const double* px = x.data();
  const double* pk = kernel.data();
  const double* pb = bias.data();
  double* po = out.data();
  for (size_t oc = 0; oc < c_out; ++oc) {
    for (size_t oy = 0; oy < oh; ++oy) {
      for (size_t ox = 0; ox < ow; ++ox) {
        double acc = pb[oc];
        for (size_t ic = 0; ic < c_in; ++ic) {
          for (size_t ky = 0; ky < kh; ++ky) {
            const long iy = static_cast<long>(oy * stride + ky) -
                            static_cast<long>(ph);
            if (iy < 0 || iy >= static_cast<long>(h)) continue;
            for (size_t kx = 0; kx < kw; ++kx) {
              const long ix = static_cast<long>(ox * stride + kx) -
                              static_cast<long>(pw);
              if (ix < 0 || ix >= static_cast<long>(w)) continue;
              acc += px[(ic * h + iy) * w + ix] *
                     pk[((oc * c_in + ic) * kh + ky) * kw + kx];
            }
          }
        }
        po[(oc * oh + oy) * ow + ox] = acc;
      }
    }
  }

  if (track) {
    auto ix_ = x.impl();
    auto ik = kernel.impl();
    auto ib = bias.impl();
    record_node(out.impl(), [ix_, ik, ib, c_in, h, w, c_out, kh, kw, ph, pw,
                             oh, ow, stride](const std::vector<double>& go,
                                             GradMap& gm) {
      std::vector<double>* gx = gm.want(ix_);
      std::vector<double>* gk = gm.want(ik);
      std::vector<double>* gb = gm.want(ib);
      const double* px = ix_->data.data();
      const double* pk = ik->data.data();
      for (size_t oc = 0; oc < c_out; ++oc) {
        for (size_t oy = 0; oy < oh; ++oy) {
          for (size_t ox = 0; ox < ow; ++ox) {
            const double g = go[(oc * oh + oy) * ow + ox];
            if (gb) (*gb)[oc] += g;
            if (!gx && !gk) continue;
            for (size_t ic = 0; ic < c_in; ++ic) {
              for (size_t ky = 0; ky < kh; ++ky) {
                const long iy = static_cast<long>(oy * stride + ky) -
                                static_cast<long>(ph);
                if (iy < 0 || iy >= static_cast<long>(h)) continue;
                for (size_t kx = 0; kx < kw; ++kx) {
                  const long ix = static_cast<long>(ox * stride + kx) -
                                  static_cast<long>(pw);
                  if (ix < 0 || ix >= static_cast<long>(w)) continue;
                  const size_t xi = (ic * h + iy) * w + ix;
                  const size_t ki = ((oc * c_in + ic) * kh + ky) * kw + kx;
                  if (gx) (*gx)[xi] += g * pk[ki];
                  if (gk) (*gk)[ki] += g * px[xi];
                }
              }
            }
          }
        }
      }
    });
  }
  return out;
}

Tensor softmax_seq(const Tensor& logits) {
  require(logits.defined() && logits.rank() == 3, ErrorCode::kShapeMismatch,
          "softmax_seq: input must be [N,h,w]");
  const size_t n = logits.dim(0), h = logits.dim(1), w = logits.dim(2);
  require(n >= 1, ErrorCode::kInvalidArgument, "softmax_seq: empty sequence");
  const size_t hw = h * w;
  const double* px = logits.data();
  for (size_t i = 0; i < logits.numel(); ++i)
    require(std::isfinite(px[i]), ErrorCode::kDomain,
            "softmax_seq: non-finite input");

  const bool track = tracks(logits);
  Tensor out = Tensor::zeros(logits.shape(), track);
  double* po = out.data();
  std::vector<double> exps(n);
  for (size_t p = 0; p < hw; ++p) {
    double m = px[p];
    for (size_t j = 1; j < n; ++j) m = std::max(m, px[j * hw + p]);
    for (size_t j = 0; j < n; ++j) exps[j] = std::exp(px[j * hw + p] - m);
    const double den = sorted_sum(exps);
    for (size_t j = 0; j < n; ++j) po[j * hw + p] = exps[j] / den;
  }

  if (track) {
    auto ix = logits.impl();
    auto io = out.impl();
    record_node(out.impl(), [ix, io, n, hw](const std::vector<double>& go,
                                            GradMap& gm) {
      std::vector<double>* gx = gm.want(ix);
      if (!gx) return;
      const double* py = io->data.data();
      for (size_t p = 0; p < hw; ++p) {
        double dot = 0.0;
        for (size_t j = 0; j < n; ++j) dot += go[j * hw + p] * py[j * hw + p];
        for (size_t j = 0; j < n; ++j) {
          const size_t idx = j * hw + p;
          (*gx)[idx] += py[idx] * (go[idx] - dot);
        }
      }
    });
  }
  return out;
}

namespace {

struct BilinearStencil {
  size_t x0, x1, y0, y1;
  double fx, fy;
};

BilinearStencil stencil_at(double sx, double sy, size_t h, size_t w) {
  sx = std::min(std::max(sx, 0.0), static_cast<double>(w - 1));
  sy = std::min(std::max(sy, 0.0), static_cast<double>(h - 1));
  BilinearStencil s;
  const double fx0 = std::floor(sx);
  const double fy0 = std::floor(sy);
  s.x0 = static_cast<size_t>(fx0);
  s.y0 = static_cast<size_t>(fy0);
  s.x1 = std::min(s.x0 + 1, w - 1);
  s.y1 = std::min(s.y0 + 1, h - 1);
  s.fx = sx - fx0;
  s.fy = sy - fy0;
  return s;
}

}  // namespace

void warp_bilinear_raw(const double* map, size_t c, size_t h, size_t w,
                       const double* flow, double* out) {
  const size_t hw = h * w;
  for (size_t y = 0; y < h; ++y) {
    for (size_t x = 0; x < w; ++x) {
      const size_t p = y * w + x;
      const BilinearStencil s = stencil_at(static_cast<double>(x) + flow[p],
                                           static_cast<double>(y) + flow[hw + p],
                                           h, w);
      const double w00 = (1.0 - s.fy) * (1.0 - s.fx);
      const double w01 = (1.0 - s.fy) * s.fx;
      const double w10 = s.fy * (1.0 - s.fx);
      const double w11 = s.fy * s.fx;
      for (size_t ch = 0; ch < c; ++ch) {
        const double* m = map + ch * hw;
        const double top = w00 * m[s.y0 * w + s.x0] + w01 * m[s.y0 * w + s.x1];
        const double bot = w10 * m[s.y1 * w + s.x0] + w11 * m[s.y1 * w + s.x1];
        out[ch * hw + p] = top + bot;
      }
    }
  }
}

Tensor bilinear_sample(const Tensor& map, const Tensor& flow) {
  require(map.defined() && flow.defined(), ErrorCode::kInvalidArgument,
          "bilinear_sample: undefined operand");
  require(map.rank() == 3, ErrorCode::kShapeMismatch,
          "bilinear_sample: map must be [c,h,w]");
  require(flow.rank() == 3 && flow.dim(0) == 2 && flow.dim(1) == map.dim(1) &&
              flow.dim(2) == map.dim(2),
          ErrorCode::kShapeMismatch,
          "bilinear_sample: flow must be [2,h,w] matching the map");
  const size_t c = map.dim(0), h = map.dim(1), w = map.dim(2);
  const bool track = tracks(map);
  Tensor out = Tensor::zeros(map.shape(), track);
  warp_bilinear_raw(map.data(), c, h, w, flow.data(), out.data());

  if (track) {
    auto im = map.impl();
    auto fl = flow.impl();
    record_node(out.impl(), [im, fl, c, h, w](const std::vector<double>& go,
                                              GradMap& gm) {
      std::vector<double>* gmap = gm.want(im);
      if (!gmap) return;
      const double* flow_p = fl->data.data();
      const size_t hw = h * w;
      for (size_t y = 0; y < h; ++y) {
        for (size_t x = 0; x < w; ++x) {
          const size_t p = y * w + x;
          const BilinearStencil s =
              stencil_at(static_cast<double>(x) + flow_p[p],
                         static_cast<double>(y) + flow_p[hw + p], h, w);
          const double w00 = (1.0 - s.fy) * (1.0 - s.fx);
          const double w01 = (1.0 - s.fy) * s.fx;
          const double w10 = s.fy * (1.0 - s.fx);
          const double w11 = s.fy * s.fx;
          for (size_t ch = 0; ch < c; ++ch) {
            const double g = go[ch * hw + p];
            double* gch = gmap->data() + ch * hw;
            gch[s.y0 * w + s.x0] += g * w00;
            gch[s.y0 * w + s.x1] += g * w01;
            gch[s.y1 * w + s.x0] += g * w10;
            gch[s.y1 * w + s.x1] += g * w11;
          }
        }
      }
    });
  }
  return out;
}

Tensor weighted_mix(const Tensor& weights, const std::vector<Tensor>& values) {
  require(weights.defined() && weights.rank() == 3, ErrorCode::kShapeMismatch,
          "weighted_mix: weights must be [M,h,w]");
  const size_t m = weights.dim(0), h = weights.dim(1), w = weights.dim(2);
  require(values.size() == m, ErrorCode::kShapeMismatch,
          "weighted_mix: value count does not match weight rows");
  require(m >= 1, ErrorCode::kInvalidArgument, "weighted_mix: empty mix");
  const size_t c = values[0].dim(0);
  for (const Tensor& v : values)
    require(v.rank() == 3 && v.dim(0) == c && v.dim(1) == h && v.dim(2) == w,
            ErrorCode::kShapeMismatch, "weighted_mix: value shape mismatch");

  bool track = g_tape.enabled && weights.requires_grad();
  for (const Tensor& v : values) track = track || tracks(v);

  const size_t hw = h * w;
  Tensor out = Tensor::zeros({c, h, w}, track);
  const double* pw = weights.data();
  double* po = out.data();
  std::vector<double> terms(m);
  for (size_t ch = 0; ch < c; ++ch) {
    for (size_t p = 0; p < hw; ++p) {
      for (size_t j = 0; j < m; ++j)
        terms[j] = pw[j * hw + p] * values[j].data()[ch * hw + p];
      po[ch * hw + p] = sorted_sum(terms);
    }
  }

  if (track) {
    auto iw = weights.impl();
    std::vector<std::shared_ptr<TensorImpl>> ivs;
    ivs.reserve(m);
    for (const Tensor& v : values) ivs.push_back(v.impl());
    record_node(out.impl(), [iw, ivs, c, m, hw](const std::vector<double>& go,
                                                GradMap& gm) {
      std::vector<double>* gw = gm.want(iw);
      const double* pw = iw->data.data();
      for (size_t j = 0; j < m; ++j) {
        std::vector<double>* gv = gm.want(ivs[j]);
        const double* pv = ivs[j]->data.data();
        for (size_t p = 0; p < hw; ++p) {
          const double wj = pw[j * hw + p];
          double dw = 0.0;
          for (size_t ch = 0; ch < c; ++ch) {
            const double g = go[ch * hw + p];
            if (gv) (*gv)[ch * hw + p] += g * wj;
            dw += g * pv[ch * hw + p];
          }
          if (gw) (*gw)[j * hw + p] += dw;
        }
      }
    });
  }
  return out;
}

Tensor upsample2(const Tensor& x) {
  require(x.defined() && x.rank() == 3, ErrorCode::kShapeMismatch,
          "upsample2: input must be [c,h,w]");
  const size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  const bool track = tracks(x);
  Tensor out = Tensor::zeros({c, 2 * h, 2 * w}, track);
  const double* px = x.data();
  double* po = out.data();
  for (size_t ch = 0; ch < c; ++ch) {
    for (size_t y = 0; y < 2 * h; ++y) {
      for (size_t xw = 0; xw < 2 * w; ++xw) {
        po[(ch * 2 * h + y) * 2 * w + xw] =
            px[(ch * h + y / 2) * w + xw / 2];
      }
    }
  }
  if (track) {
    auto ix = x.impl();
    record_node(out.impl(), [ix, c, h, w](const std::vector<double>& go,
                                          GradMap& gm) {
      std::vector<double>* gx = gm.want(ix);
      if (!gx) return;
      for (size_t ch = 0; ch < c; ++ch) {
        for (size_t y = 0; y < 2 * h; ++y) {
          for (size_t xw = 0; xw < 2 * w; ++xw) {
            (*gx)[(ch * h + y / 2) * w + xw / 2] +=
                go[(ch * 2 * h + y) * 2 * w + xw];
          }
        }
      }
    });
  }
  return out;
}

Tensor concat0(const std::vector<Tensor>& parts) {
  require(!parts.empty(), ErrorCode::kInvalidArgument, "concat0: no parts");
  const Shape& first = parts[0].shape();
  require(!first.empty(), ErrorCode::kShapeMismatch,
          "concat0: rank-0 part");
  size_t dim0 = 0;
  bool track = false;
  for (const Tensor& p : parts) {
    require(p.rank() == first.size(), ErrorCode::kShapeMismatch,
            "concat0: rank mismatch");
    for (size_t d = 1; d < first.size(); ++d)
      require(p.dim(d) == first[d], ErrorCode::kShapeMismatch,
              "concat0: trailing dims mismatch");
    dim0 += p.dim(0);
    track = track || tracks(p);
  }
  Shape out_shape = first;
  out_shape[0] = dim0;
  Tensor out = Tensor::zeros(out_shape, track);
  double* po = out.data();
  size_t offset = 0;
  for (const Tensor& p : parts) {
    std::copy(p.data(), p.data() + p.numel(), po + offset);
    offset += p.numel();
  }
  if (track) {
    std::vector<std::shared_ptr<TensorImpl>> impls;
    impls.reserve(parts.size());
    for (const Tensor& p : parts) impls.push_back(p.impl());
    record_node(out.impl(),
                [impls](const std::vector<double>& go, GradMap& gm) {
                  size_t offset = 0;
                  for (const auto& ip : impls) {
                    const size_t n = ip->data.size();
                    if (std::vector<double>* gp = gm.want(ip)) {
                      for (size_t i = 0; i < n; ++i)
                        (*gp)[i] += go[offset + i];
                    }
                    offset += n;
                  }
                });
  }
  return out;
}

Tensor masked_select(const Tensor& x, const std::vector<uint8_t>& keep) {
  require(x.defined(), ErrorCode::kInvalidArgument, "masked_select");
  require(keep.size() == x.numel(), ErrorCode::kShapeMismatch,
          "masked_select: mask length does not match tensor");
  std::vector<size_t> picked;
  for (size_t i = 0; i < keep.size(); ++i)
    if (keep[i]) picked.push_back(i);
  require(!picked.empty(), ErrorCode::kInvalidArgument,
          "masked_select: mask keeps no elements");
  const bool track = tracks(x);
  Tensor out = Tensor::zeros({picked.size()}, track);
  const double* px = x.data();
  double* po = out.data();
  for (size_t i = 0; i < picked.size(); ++i) po[i] = px[picked[i]];
  if (track) {
    auto ix = x.impl();
    record_node(out.impl(), [ix, picked](const std::vector<double>& go,
                                         GradMap& gm) {
      std::vector<double>* gx = gm.want(ix);
      if (!gx) return;
      for (size_t i = 0; i < picked.size(); ++i) (*gx)[picked[i]] += go[i];
    });
  }
  return out;
}

}  // namespace fmnet
