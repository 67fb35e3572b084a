#include "oracles.hpp"

#include <algorithm>
#include <cmath>

namespace oracles {

std::vector<double> ref_conv2d(const std::vector<double>& x, size_t c_in,
                               size_t h, size_t w,
                               const std::vector<double>& k, size_t c_out,
                               size_t kh, size_t kw,
                               const std::vector<double>& b, size_t stride) {
  const long ph = static_cast<long>((kh - 1) / 2);
  const long pw = static_cast<long>((kw - 1) / 2);
  const size_t oh = (h + 2 * ph - kh) / stride + 1;
  const size_t ow = (w + 2 * pw - kw) / stride + 1;
  std::vector<double> out(c_out * oh * ow, 0.0);
  for (size_t oc = 0; oc < c_out; ++oc)
    for (size_t oy = 0; oy < oh; ++oy)
      for (size_t ox = 0; ox < ow; ++ox) {
        double acc = b[oc];
        for (size_t ic = 0; ic < c_in; ++ic)
          for (size_t ky = 0; ky < kh; ++ky)
            for (size_t kx = 0; kx < kw; ++kx) {
              const long iy = static_cast<long>(oy * stride + ky) - ph;
              const long ix = static_cast<long>(ox * stride + kx) - pw;
              const double xv =
                  (iy >= 0 && iy < static_cast<long>(h) && ix >= 0 &&
                   ix < static_cast<long>(w))
                      ? x[(ic * h + iy) * w + ix]
                      : 0.0;
              acc += xv * k[((oc * c_in + ic) * kh + ky) * kw + kx];
            }
        out[(oc * oh + oy) * ow + ox] = acc;
      }
  return out;
}

std::vector<double> ref_softmax_seq(const std::vector<double>& logits,
                                    size_t n, size_t h, size_t w) {
  std::vector<double> out(logits.size());
  const size_t hw = h * w;
  for (size_t p = 0; p < hw; ++p) {
    double den = 0.0;
    for (size_t j = 0; j < n; ++j) den += std::exp(logits[j * hw + p]);
    for (size_t j = 0; j < n; ++j)
      out[j * hw + p] = std::exp(logits[j * hw + p]) / den;
  }
  return out;
}

std::vector<double> ref_bilinear(const std::vector<double>& map, size_t c,
                                 size_t h, size_t w,
                                 const std::vector<double>& flow) {
  std::vector<double> out(map.size());
  const size_t hw = h * w;
  auto clampd = [](double v, double lo, double hi) {
    return std::max(lo, std::min(v, hi));
  };
  for (size_t y = 0; y < h; ++y)
    for (size_t x = 0; x < w; ++x) {
      const size_t p = y * w + x;
      const double sx = clampd(x + flow[p], 0.0, w - 1.0);
      const double sy = clampd(y + flow[hw + p], 0.0, h - 1.0);
      const size_t x0 = static_cast<size_t>(std::floor(sx));
      const size_t y0 = static_cast<size_t>(std::floor(sy));
      const size_t x1 = std::min(x0 + 1, w - 1);
      const size_t y1 = std::min(y0 + 1, h - 1);
      const double fx = sx - x0;
      const double fy = sy - y0;
      for (size_t ch = 0; ch < c; ++ch) {
        const double v00 = map[(ch * h + y0) * w + x0];
        const double v01 = map[(ch * h + y0) * w + x1];
        const double v10 = map[(ch * h + y1) * w + x0];
        const double v11 = map[(ch * h + y1) * w + x1];
        out[ch * hw + p] = v00 * (1 - fy) * (1 - fx) + v01 * (1 - fy) * fx +
                           v10 * fy * (1 - fx) + v11 * fy * fx;
      }
    }
  return out;
}

std::vector<std::vector<double>> ref_conv_self_attention(
    const std::vector<std::vector<double>>& seq, size_t c, size_t h, size_t w,
    const RefAttentionParams& p) {
  const size_t m = seq.size();
  const size_t hw = h * w;
  std::vector<std::vector<double>> q(m), k(m), v(m);
  for (size_t i = 0; i < m; ++i) {
    q[i] = ref_conv2d(seq[i], c, h, w, p.qw, 1, 3, 3, p.qb);
    k[i] = ref_conv2d(seq[i], c, h, w, p.kw_, 1, 3, 3, p.kb);
    v[i] = ref_conv2d(seq[i], c, h, w, p.vw, c, 3, 3, p.vb);
  }
  // atten[i][j]: [1,h,w] scores before softmax
  std::vector<std::vector<std::vector<double>>> atten(m);
  for (size_t i = 0; i < m; ++i) {
    atten[i].resize(m);
    for (size_t j = 0; j < m; ++j) {
      std::vector<double> pair(2 * hw);
      std::copy(q[i].begin(), q[i].end(), pair.begin());
      std::copy(k[j].begin(), k[j].end(), pair.begin() + hw);
      atten[i][j] = ref_conv2d(pair, 2, h, w, p.aw, 1, 3, 3, p.ab);
    }
  }
  std::vector<std::vector<double>> out(m, std::vector<double>(c * hw, 0.0));
  for (size_t i = 0; i < m; ++i)
    for (size_t px = 0; px < hw; ++px) {
      double den = 0.0;
      for (size_t j = 0; j < m; ++j) den += std::exp(atten[i][j][px]);
      for (size_t j = 0; j < m; ++j) {
        const double wt = std::exp(atten[i][j][px]) / den;
        for (size_t ch = 0; ch < c; ++ch)
          out[i][ch * hw + px] += wt * v[j][ch * hw + px];
      }
    }
  return out;
}

double ref_scale_invariant_loss(const std::vector<double>& d,
                                const std::vector<double>& dstar,
                                double lambda, double alpha) {
  double s1 = 0.0, s2 = 0.0;
  size_t n = 0;
  for (size_t i = 0; i < d.size(); ++i) {
    if (dstar[i] <= 0.0) continue;
    const double u = std::log(d[i]) - std::log(dstar[i]);
    s1 += u;
    s2 += u * u;
    ++n;
  }
  const double radicand =
      s2 / n - lambda / (static_cast<double>(n) * n) * s1 * s1;
  if (radicand < 1e-18) return 0.0;
  return alpha * std::sqrt(radicand);
}

RefDepthMetrics ref_depth_metrics(const std::vector<double>& d,
                                  const std::vector<double>& dstar) {
  RefDepthMetrics m{0, 0, 0, 0, 0, 0};
  size_t n = 0;
  for (size_t i = 0; i < d.size(); ++i) {
    if (dstar[i] <= 0.0) continue;
    ++n;
    m.rel += std::fabs(d[i] - dstar[i]) / dstar[i];
    m.rmse += (d[i] - dstar[i]) * (d[i] - dstar[i]);
    m.log10 += std::fabs(std::log10(d[i]) - std::log10(dstar[i]));
    const double ratio = std::max(d[i] / dstar[i], dstar[i] / d[i]);
    if (ratio < 1.25) m.d1 += 1;
    if (ratio < 1.25 * 1.25) m.d2 += 1;
    if (ratio < 1.25 * 1.25 * 1.25) m.d3 += 1;
  }
  m.rel /= n;
  m.rmse = std::sqrt(m.rmse / n);
  m.log10 /= n;
  m.d1 /= n;
  m.d2 /= n;
  m.d3 /= n;
  return m;
}

double ref_opw_pair(const std::vector<double>& depth_t,
                    const std::vector<double>& depth_t1,
                    const std::vector<double>& frame_t,
                    const std::vector<double>& frame_t1,
                    const std::vector<double>& flow, size_t h, size_t w,
                    double beta) {
  const std::vector<double> warped_d = ref_bilinear(depth_t, 1, h, w, flow);
  const std::vector<double> warped_f = ref_bilinear(frame_t, 3, h, w, flow);
  const size_t hw = h * w;
  double acc = 0.0;
  for (size_t p = 0; p < hw; ++p) {
    double err2 = 0.0;
    for (size_t ch = 0; ch < 3; ++ch) {
      const double e = frame_t1[ch * hw + p] - warped_f[ch * hw + p];
      err2 += e * e;
    }
    const double mask = std::exp(-beta * err2);
    acc += mask * std::fabs(depth_t1[p] - warped_d[p]);
  }
  return acc / static_cast<double>(hw);
}

double central_diff(const std::function<double()>& eval, double* slot,
                    double eps) {
  const double saved = *slot;
  *slot = saved + eps;
  const double hi = eval();
  *slot = saved - eps;
  const double lo = eval();
  *slot = saved;
  return (hi - lo) / (2.0 * eps);
}

double rel_err(double a, double b) {
  const double scale = std::max({1.0, std::fabs(a), std::fabs(b)});
  return std::fabs(a - b) / scale;
}

}  // namespace oracles
