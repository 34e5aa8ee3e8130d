#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <thread>
#include <vector>

#include "srzoo/tensor.hpp"

namespace srzoo {

// Geometry plus (optionally materialized) values of one convolution blob.
// Weight layout is (c_out, c_in/groups, k_h, k_w), row-major.
struct Conv2dParams {
  int64_t c_out = 0, c_in = 0, k_h = 1, k_w = 1;
  int64_t stride_h = 1, stride_w = 1;
  int64_t pad_top = 0, pad_bottom = 0, pad_left = 0, pad_right = 0;
  int64_t dil_h = 1, dil_w = 1;
  int64_t groups = 1;
  bool has_bias = true;
  std::vector<double> weights;
  std::vector<double> bias;

  int64_t weight_count() const { return c_out * (c_in / groups) * k_h * k_w; }
  int64_t param_count() const { return weight_count() + (has_bias ? c_out : 0); }
  bool materialized() const { return static_cast<int64_t>(weights.size()) == weight_count(); }

  double& w_at(int64_t o, int64_t i, int64_t ky, int64_t kx) {
    return weights[static_cast<size_t>(((o * (c_in / groups) + i) * k_h + ky) * k_w + kx)];
  }
  double w_at(int64_t o, int64_t i, int64_t ky, int64_t kx) const {
    return weights[static_cast<size_t>(((o * (c_in / groups) + i) * k_h + ky) * k_w + kx)];
  }

  void validate_geometry() const {
    if (c_out < 1 || c_in < 1) throw ShapeError("conv: channel counts must be >= 1");
    if (k_h < 1 || k_w < 1) throw ShapeError("conv: kernel dims must be >= 1");
    if (stride_h < 1 || stride_w < 1) throw ShapeError("conv: stride must be >= 1");
    if (dil_h < 1 || dil_w < 1) throw ShapeError("conv: dilation must be >= 1");
    if (pad_top < 0 || pad_bottom < 0 || pad_left < 0 || pad_right < 0)
      throw ShapeError("conv: negative padding");
    if (groups < 1 || c_in % groups != 0 || c_out % groups != 0)
      throw ShapeError("conv: groups=" + std::to_string(groups) + " must divide c_in=" +
                       std::to_string(c_in) + " and c_out=" + std::to_string(c_out));
  }
};

inline int64_t conv_out_dim(int64_t in, int64_t pad_a, int64_t pad_b, int64_t k, int64_t stride,
                            int64_t dil) {
  return (in + pad_a + pad_b - dil * (k - 1) - 1) / stride + 1;
}

namespace detail {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ColMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor>;
using ConstRowMap = Eigen::Map<const RowMat>;

// C = W * X with the rows of C optionally split across threads. Each block is
// an independent product, so results are reproducible for a fixed thread count.
template <typename XMat, typename OutMap>
inline void gemm_rows(ConstRowMap w, const XMat& x, OutMap c, int threads) {
  const int64_t m = w.rows();
  if (threads <= 1 || m < 2 * threads) {
    c.noalias() = w * x;
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(static_cast<size_t>(threads));
  const int64_t chunk = (m + threads - 1) / threads;
  for (int t = 0; t < threads; ++t) {
    const int64_t lo = t * chunk;
    const int64_t rows = std::min(chunk, m - lo);
    if (rows <= 0) break;
    pool.emplace_back(
        [&, lo, rows]() { c.middleRows(lo, rows).noalias() = w.middleRows(lo, rows) * x; });
  }
  for (auto& th : pool) th.join();
}

}  // namespace detail

// Cross-correlation (no kernel flip), zero padding, arbitrary stride /
// per-side padding / dilation / groups / asymmetric kernels.
// Implemented as strip-tiled im2col plus a dense matrix product.
inline Tensor conv2d(const Tensor& x, const Conv2dParams& p, int threads = 1) {
  p.validate_geometry();
  if (!p.materialized()) throw ShapeError("conv: weights not materialized");
  if (p.has_bias && static_cast<int64_t>(p.bias.size()) != p.c_out)
    throw ShapeError("conv: bias length " + std::to_string(p.bias.size()) + " != c_out " +
                     std::to_string(p.c_out));
  if (x.c != p.c_in)
    throw ShapeError("conv: input has " + std::to_string(x.c) + " channels, blob expects " +
                     std::to_string(p.c_in));
  const int64_t oh = conv_out_dim(x.h, p.pad_top, p.pad_bottom, p.k_h, p.stride_h, p.dil_h);
  const int64_t ow = conv_out_dim(x.w, p.pad_left, p.pad_right, p.k_w, p.stride_w, p.dil_w);
  if (oh < 1 || ow < 1)
    throw ShapeError("conv: no output positions for input " + x.shape_str() + " kernel " +
                     std::to_string(p.k_h) + "x" + std::to_string(p.k_w));

  const int64_t cinpg = p.c_in / p.groups;
  const int64_t coutpg = p.c_out / p.groups;
  const int64_t kk = cinpg * p.k_h * p.k_w;
  Tensor y(x.n, p.c_out, oh, ow);

  const bool pointwise = p.k_h == 1 && p.k_w == 1 && p.stride_h == 1 && p.stride_w == 1 &&
                         p.pad_top == 0 && p.pad_bottom == 0 && p.pad_left == 0 &&
                         p.pad_right == 0;

  // Strip height keeps the im2col buffer bounded (~32 MB of doubles).
  constexpr int64_t kBufferCap = 4'000'000;
  int64_t strip_h = std::max<int64_t>(1, kBufferCap / std::max<int64_t>(1, kk * ow));
  strip_h = std::min(strip_h, oh);
  detail::ColMat cols;

  using StridedOut = Eigen::Map<detail::RowMat, 0, Eigen::OuterStride<>>;

  for (int64_t in = 0; in < x.n; ++in) {
    for (int64_t g = 0; g < p.groups; ++g) {
      detail::ConstRowMap wmat(p.weights.data() + g * coutpg * kk, coutpg, kk);
      double* out_base = y.data.data() + (in * p.c_out + g * coutpg) * oh * ow;
      if (pointwise) {
        // 1x1 stride-1: the channel planes already form the column matrix.
        detail::ConstRowMap xmat(x.data.data() + (in * x.c + g * cinpg) * x.h * x.w, cinpg,
                                 x.h * x.w);
        StridedOut out(out_base, coutpg, oh * ow, Eigen::OuterStride<>(oh * ow));
        detail::gemm_rows(wmat, xmat, out, threads);
        continue;
      }
      for (int64_t oy0 = 0; oy0 < oh; oy0 += strip_h) {
        const int64_t rows = std::min(strip_h, oh - oy0);
        const int64_t positions = rows * ow;
        cols.resize(kk, positions);
        for (int64_t r = 0; r < rows; ++r) {
          const int64_t oy = oy0 + r;
          for (int64_t ox = 0; ox < ow; ++ox) {
            double* col = cols.data() + (r * ow + ox) * kk;
            int64_t idx = 0;
            for (int64_t ic = 0; ic < cinpg; ++ic) {
              const double* plane = x.data.data() + (in * x.c + g * cinpg + ic) * x.h * x.w;
              for (int64_t ky = 0; ky < p.k_h; ++ky) {
                const int64_t iy = oy * p.stride_h - p.pad_top + ky * p.dil_h;
                for (int64_t kx = 0; kx < p.k_w; ++kx, ++idx) {
                  const int64_t ix = ox * p.stride_w - p.pad_left + kx * p.dil_w;
                  col[idx] =
                      (iy >= 0 && iy < x.h && ix >= 0 && ix < x.w) ? plane[iy * x.w + ix] : 0.0;
                }
              }
            }
          }
        }
        StridedOut out(out_base + oy0 * ow, coutpg, positions, Eigen::OuterStride<>(oh * ow));
        detail::gemm_rows(wmat, cols, out, threads);
      }
    }
  }

  if (p.has_bias) {
    const int64_t plane = oh * ow;
    for (int64_t in = 0; in < x.n; ++in)
      for (int64_t oc = 0; oc < p.c_out; ++oc) {
        double* pl = y.data.data() + (in * p.c_out + oc) * plane;
        const double b = p.bias[static_cast<size_t>(oc)];
        for (int64_t i = 0; i < plane; ++i) pl[i] += b;
      }
  }
  return y;
}

}  // namespace srzoo
