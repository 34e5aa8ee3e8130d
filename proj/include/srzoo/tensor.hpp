#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace srzoo {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
// An operation argument violates a shape or numeric precondition.
struct ShapeError : Error {
  using Error::Error;
};
// Graph structure is invalid; the message names the offending nodes.
struct GraphError : Error {
  using Error::Error;
};
// File or stream content is malformed or inconsistent.
struct DataError : Error {
  using Error::Error;
};
struct IoError : Error {
  using Error::Error;
};

// Dense NCHW tensor, double precision throughout.
struct Tensor {
  int64_t n = 0, c = 0, h = 0, w = 0;
  std::vector<double> data;

  Tensor() = default;
  Tensor(int64_t n_, int64_t c_, int64_t h_, int64_t w_) : n(n_), c(c_), h(h_), w(w_) {
    if (n_ < 0 || c_ < 0 || h_ < 0 || w_ < 0)
      throw ShapeError("tensor dims must be non-negative, got " + shape_str());
    data.assign(static_cast<size_t>(numel()), 0.0);
  }

  int64_t numel() const { return n * c * h * w; }

  double& at(int64_t in, int64_t ic, int64_t iy, int64_t ix) {
    return data[static_cast<size_t>(((in * c + ic) * h + iy) * w + ix)];
  }
  double at(int64_t in, int64_t ic, int64_t iy, int64_t ix) const {
    return data[static_cast<size_t>(((in * c + ic) * h + iy) * w + ix)];
  }

  bool same_shape(const Tensor& o) const { return n == o.n && c == o.c && h == o.h && w == o.w; }

  std::string shape_str() const {
    return "(" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(h) + "," +
           std::to_string(w) + ")";
  }
};

inline void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b))
    throw ShapeError(std::string(op) + ": shape mismatch " + a.shape_str() + " vs " +
                     b.shape_str());
}

inline Tensor leaky_relu(const Tensor& x, double negative_slope) {
  Tensor y = x;
  for (auto& v : y.data) v = v >= 0.0 ? v : v * negative_slope;
  return y;
}

inline Tensor relu(const Tensor& x) {
  Tensor y = x;
  for (auto& v : y.data) v = v >= 0.0 ? v : 0.0;
  return y;
}

// Per-channel slopes for the negative part.
inline Tensor prelu(const Tensor& x, const std::vector<double>& slopes) {
  if (static_cast<int64_t>(slopes.size()) != x.c)
    throw ShapeError("prelu: " + std::to_string(slopes.size()) + " slopes for " +
                     std::to_string(x.c) + " channels");
  Tensor y = x;
  const int64_t plane = x.h * x.w;
  for (int64_t in = 0; in < x.n; ++in)
    for (int64_t ic = 0; ic < x.c; ++ic) {
      double* p = y.data.data() + (in * x.c + ic) * plane;
      const double s = slopes[static_cast<size_t>(ic)];
      for (int64_t i = 0; i < plane; ++i) p[i] = p[i] >= 0.0 ? p[i] : p[i] * s;
    }
  return y;
}

inline Tensor sigmoid(const Tensor& x) {
  Tensor y = x;
  for (auto& v : y.data) v = 1.0 / (1.0 + std::exp(-v));
  return y;
}

inline Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "add");
  Tensor y = a;
  for (size_t i = 0; i < y.data.size(); ++i) y.data[i] += b.data[i];
  return y;
}

// Elementwise product; one operand may be (n,c,1,1) and is broadcast over
// the other's spatial extent (attention maps).
inline Tensor mul(const Tensor& a, const Tensor& b) {
  if (a.same_shape(b)) {
    Tensor y = a;
    for (size_t i = 0; i < y.data.size(); ++i) y.data[i] *= b.data[i];
    return y;
  }
  const Tensor* full = &a;
  const Tensor* vec = &b;
  if (a.h == 1 && a.w == 1 && !(b.h == 1 && b.w == 1)) std::swap(full, vec);
  if (!(vec->h == 1 && vec->w == 1 && vec->n == full->n && vec->c == full->c))
    throw ShapeError("mul: shapes " + a.shape_str() + " and " + b.shape_str() +
                     ") are neither equal nor (n,c,1,1)-broadcastable");
  Tensor y = *full;
  const int64_t plane = full->h * full->w;
  for (int64_t in = 0; in < full->n; ++in)
    for (int64_t ic = 0; ic < full->c; ++ic) {
      const double s = vec->at(in, ic, 0, 0);
      double* p = y.data.data() + (in * full->c + ic) * plane;
      for (int64_t i = 0; i < plane; ++i) p[i] *= s;
    }
  return y;
}

// Channel concatenation. All inputs share n, h, w.
inline Tensor concat(const std::vector<const Tensor*>& parts) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  int64_t total_c = 0;
  for (const Tensor* t : parts) {
    if (t->n != parts[0]->n || t->h != parts[0]->h || t->w != parts[0]->w)
      throw ShapeError("concat: mismatched dims " + t->shape_str() + " vs " +
                       parts[0]->shape_str());
    total_c += t->c;
  }
  Tensor y(parts[0]->n, total_c, parts[0]->h, parts[0]->w);
  const int64_t plane = y.h * y.w;
  for (int64_t in = 0; in < y.n; ++in) {
    int64_t oc = 0;
    for (const Tensor* t : parts) {
      std::copy_n(t->data.data() + in * t->c * plane, t->c * plane,
                  y.data.data() + (in * total_c + oc) * plane);
      oc += t->c;
    }
  }
  return y;
}

inline Tensor concat(const std::vector<Tensor>& parts) {
  std::vector<const Tensor*> ptrs;
  ptrs.reserve(parts.size());
  for (const auto& t : parts) ptrs.push_back(&t);
  return concat(ptrs);
}

// Channel split; sizes must sum to x.c exactly.
inline std::vector<Tensor> split(const Tensor& x, const std::vector<int64_t>& sizes) {
  int64_t total = 0;
  for (int64_t s : sizes) {
    if (s <= 0) throw ShapeError("split: sizes must be positive");
    total += s;
  }
  if (total != x.c)
    throw ShapeError("split: sizes sum to " + std::to_string(total) + " but input has " +
                     std::to_string(x.c) + " channels");
  std::vector<Tensor> out;
  out.reserve(sizes.size());
  const int64_t plane = x.h * x.w;
  int64_t ic = 0;
  for (int64_t s : sizes) {
    Tensor t(x.n, s, x.h, x.w);
    for (int64_t in = 0; in < x.n; ++in)
      std::copy_n(x.data.data() + (in * x.c + ic) * plane, s * plane,
                  t.data.data() + in * s * plane);
    ic += s;
    out.push_back(std::move(t));
  }
  return out;
}

struct PoolAttrs {
  int64_t k_h = 1, k_w = 1;
  int64_t stride_h = 1, stride_w = 1;
  int64_t pad_top = 0, pad_bottom = 0, pad_left = 0, pad_right = 0;
};

inline int64_t window_out_dim(int64_t in, int64_t pad_a, int64_t pad_b, int64_t k, int64_t stride) {
  return (in + pad_a + pad_b - k) / stride + 1;
}

inline void check_pool(const Tensor& x, const PoolAttrs& p, const char* op) {
  if (p.k_h < 1 || p.k_w < 1 || p.stride_h < 1 || p.stride_w < 1)
    throw ShapeError(std::string(op) + ": kernel and stride must be >= 1");
  if (p.pad_top < 0 || p.pad_bottom < 0 || p.pad_left < 0 || p.pad_right < 0)
    throw ShapeError(std::string(op) + ": negative padding");
  if (x.h + p.pad_top + p.pad_bottom < p.k_h || x.w + p.pad_left + p.pad_right < p.k_w)
    throw ShapeError(std::string(op) + ": window " + std::to_string(p.k_h) + "x" +
                     std::to_string(p.k_w) + " exceeds padded input " + x.shape_str());
}

// Average over the full window; padded cells count as zeros.
inline Tensor avg_pool(const Tensor& x, const PoolAttrs& p) {
  check_pool(x, p, "avg_pool");
  const int64_t oh = window_out_dim(x.h, p.pad_top, p.pad_bottom, p.k_h, p.stride_h);
  const int64_t ow = window_out_dim(x.w, p.pad_left, p.pad_right, p.k_w, p.stride_w);
  Tensor y(x.n, x.c, oh, ow);
  const double inv = 1.0 / static_cast<double>(p.k_h * p.k_w);
  for (int64_t in = 0; in < x.n; ++in)
    for (int64_t ic = 0; ic < x.c; ++ic)
      for (int64_t oy = 0; oy < oh; ++oy)
        for (int64_t ox = 0; ox < ow; ++ox) {
          double acc = 0.0;
          for (int64_t ky = 0; ky < p.k_h; ++ky)
            for (int64_t kx = 0; kx < p.k_w; ++kx) {
              const int64_t iy = oy * p.stride_h - p.pad_top + ky;
              const int64_t ix = ox * p.stride_w - p.pad_left + kx;
              if (iy >= 0 && iy < x.h && ix >= 0 && ix < x.w) acc += x.at(in, ic, iy, ix);
            }
          y.at(in, ic, oy, ox) = acc * inv;
        }
  return y;
}

// Max over the valid (unpadded) part of each window.
inline Tensor max_pool(const Tensor& x, const PoolAttrs& p) {
  check_pool(x, p, "max_pool");
  const int64_t oh = window_out_dim(x.h, p.pad_top, p.pad_bottom, p.k_h, p.stride_h);
  const int64_t ow = window_out_dim(x.w, p.pad_left, p.pad_right, p.k_w, p.stride_w);
  Tensor y(x.n, x.c, oh, ow);
  for (int64_t in = 0; in < x.n; ++in)
    for (int64_t ic = 0; ic < x.c; ++ic)
      for (int64_t oy = 0; oy < oh; ++oy)
        for (int64_t ox = 0; ox < ow; ++ox) {
          double best = -std::numeric_limits<double>::infinity();
          for (int64_t ky = 0; ky < p.k_h; ++ky)
            for (int64_t kx = 0; kx < p.k_w; ++kx) {
              const int64_t iy = oy * p.stride_h - p.pad_top + ky;
              const int64_t ix = ox * p.stride_w - p.pad_left + kx;
              if (iy >= 0 && iy < x.h && ix >= 0 && ix < x.w)
                best = std::max(best, x.at(in, ic, iy, ix));
            }
          y.at(in, ic, oy, ox) = best;
        }
  return y;
}

enum class GlobalStat {
  avg,           // per-channel mean
  avg_plus_std,  // per-channel mean + population standard deviation
};

inline Tensor global_pool(const Tensor& x, GlobalStat stat) {
  if (x.h < 1 || x.w < 1) throw ShapeError("global_pool: empty spatial extent");
  Tensor y(x.n, x.c, 1, 1);
  const int64_t plane = x.h * x.w;
  for (int64_t in = 0; in < x.n; ++in)
    for (int64_t ic = 0; ic < x.c; ++ic) {
      const double* p = x.data.data() + (in * x.c + ic) * plane;
      double mean = 0.0;
      for (int64_t i = 0; i < plane; ++i) mean += p[i];
      mean /= static_cast<double>(plane);
      double out = mean;
      if (stat == GlobalStat::avg_plus_std) {
        double var = 0.0;
        for (int64_t i = 0; i < plane; ++i) var += (p[i] - mean) * (p[i] - mean);
        out += std::sqrt(var / static_cast<double>(plane));
      }
      y.at(in, ic, 0, 0) = out;
    }
  return y;
}

}  // namespace srzoo
