#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "srzoo/tensor.hpp"

namespace srzoo {

// Sub-pixel rearrangement: out[b][c][y*r+dy][x*r+dx] = in[b][c*r*r + dy*r + dx][y][x].
inline Tensor pixel_shuffle(const Tensor& x, int64_t r) {
  if (r < 1) throw ShapeError("pixel_shuffle: factor must be >= 1");
  if (x.c % (r * r) != 0)
    throw ShapeError("pixel_shuffle: channels " + std::to_string(x.c) + " not divisible by " +
                     std::to_string(r * r));
  Tensor y(x.n, x.c / (r * r), x.h * r, x.w * r);
  for (int64_t in = 0; in < x.n; ++in)
    for (int64_t oc = 0; oc < y.c; ++oc)
      for (int64_t dy = 0; dy < r; ++dy)
        for (int64_t dx = 0; dx < r; ++dx) {
          const int64_t ic = oc * r * r + dy * r + dx;
          for (int64_t iy = 0; iy < x.h; ++iy)
            for (int64_t ix = 0; ix < x.w; ++ix)
              y.at(in, oc, iy * r + dy, ix * r + dx) = x.at(in, ic, iy, ix);
        }
  return y;
}

// Exact inverse of pixel_shuffle.
inline Tensor pixel_unshuffle(const Tensor& x, int64_t r) {
  if (r < 1) throw ShapeError("pixel_unshuffle: factor must be >= 1");
  if (x.h % r != 0 || x.w % r != 0)
    throw ShapeError("pixel_unshuffle: spatial dims " + x.shape_str() + " not divisible by " +
                     std::to_string(r));
  Tensor y(x.n, x.c * r * r, x.h / r, x.w / r);
  for (int64_t in = 0; in < x.n; ++in)
    for (int64_t ic = 0; ic < x.c; ++ic)
      for (int64_t dy = 0; dy < r; ++dy)
        for (int64_t dx = 0; dx < r; ++dx) {
          const int64_t oc = ic * r * r + dy * r + dx;
          for (int64_t oy = 0; oy < y.h; ++oy)
            for (int64_t ox = 0; ox < y.w; ++ox)
              y.at(in, oc, oy, ox) = x.at(in, ic, oy * r + dy, ox * r + dx);
        }
  return y;
}

enum class InterpMode { nearest, bilinear, bicubic };

inline const char* interp_mode_name(InterpMode m) {
  switch (m) {
    case InterpMode::nearest: return "nearest";
    case InterpMode::bilinear: return "bilinear";
    case InterpMode::bicubic: return "bicubic";
  }
  return "?";
}

// Keys cubic kernel with a = -0.5.
inline double cubic_kernel(double s) {
  constexpr double a = -0.5;
  s = std::fabs(s);
  if (s <= 1.0) return ((a + 2.0) * s - (a + 3.0)) * s * s + 1.0;
  if (s < 2.0) return (((s - 5.0) * s + 8.0) * s - 4.0) * a;
  return 0.0;
}

namespace detail {

inline int64_t clamp_index(int64_t i, int64_t n) { return i < 0 ? 0 : (i >= n ? n - 1 : i); }

struct Taps {
  int64_t first = 0;            // index of the first tap (pre-clamp)
  std::vector<double> weights;  // sums to 1
};

// Sampling positions follow the half-pixel convention:
// src = (dst + 0.5) * in/out - 0.5. Out-of-range taps clamp to the edge.
inline std::vector<Taps> interp_taps(int64_t in, int64_t out, InterpMode mode) {
  std::vector<Taps> taps(static_cast<size_t>(out));
  const double ratio = static_cast<double>(in) / static_cast<double>(out);
  for (int64_t d = 0; d < out; ++d) {
    Taps& t = taps[static_cast<size_t>(d)];
    if (mode == InterpMode::nearest) {
      t.first = std::min<int64_t>(in - 1, static_cast<int64_t>(std::floor(d * ratio)));
      t.weights = {1.0};
    } else if (mode == InterpMode::bilinear) {
      const double src = (d + 0.5) * ratio - 0.5;
      const double f = std::floor(src);
      t.first = static_cast<int64_t>(f);
      const double a = src - f;
      t.weights = {1.0 - a, a};
    } else {
      const double src = (d + 0.5) * ratio - 0.5;
      const double f = std::floor(src);
      t.first = static_cast<int64_t>(f) - 1;
      t.weights.resize(4);
      for (int64_t k = 0; k < 4; ++k)
        t.weights[static_cast<size_t>(k)] = cubic_kernel(src - (f - 1 + k));
    }
  }
  return taps;
}

}  // namespace detail

// Separable resize to an explicit target size. Edge handling is clamp
// (replicate); the cubic kernel is a partition of unity, so constants are
// preserved for every mode.
inline Tensor interpolate_to(const Tensor& x, int64_t out_h, int64_t out_w, InterpMode mode) {
  if (out_h < 1 || out_w < 1) throw ShapeError("interpolate: target size must be >= 1");
  if (x.h < 1 || x.w < 1) throw ShapeError("interpolate: empty input " + x.shape_str());
  const auto ty = detail::interp_taps(x.h, out_h, mode);
  const auto tx = detail::interp_taps(x.w, out_w, mode);
  // Horizontal pass, then vertical.
  Tensor mid(x.n, x.c, x.h, out_w);
  for (int64_t in = 0; in < x.n; ++in)
    for (int64_t ic = 0; ic < x.c; ++ic)
      for (int64_t iy = 0; iy < x.h; ++iy)
        for (int64_t ox = 0; ox < out_w; ++ox) {
          const auto& t = tx[static_cast<size_t>(ox)];
          double acc = 0.0;
          for (size_t k = 0; k < t.weights.size(); ++k)
            acc += t.weights[k] *
                   x.at(in, ic, iy, detail::clamp_index(t.first + static_cast<int64_t>(k), x.w));
          mid.at(in, ic, iy, ox) = acc;
        }
  Tensor y(x.n, x.c, out_h, out_w);
  for (int64_t in = 0; in < x.n; ++in)
    for (int64_t ic = 0; ic < x.c; ++ic)
      for (int64_t oy = 0; oy < out_h; ++oy) {
        const auto& t = ty[static_cast<size_t>(oy)];
        for (int64_t ox = 0; ox < out_w; ++ox) {
          double acc = 0.0;
          for (size_t k = 0; k < t.weights.size(); ++k)
            acc += t.weights[k] *
                   mid.at(in, ic, detail::clamp_index(t.first + static_cast<int64_t>(k), x.h), ox);
          y.at(in, ic, oy, ox) = acc;
        }
      }
  return y;
}

inline Tensor interpolate(const Tensor& x, int64_t scale, InterpMode mode) {
  if (scale < 1) throw ShapeError("interpolate: scale must be >= 1");
  return interpolate_to(x, x.h * scale, x.w * scale, mode);
}

namespace detail {

// i reflected into [0, n) with edge duplication: ..., 1, 0 | 0, 1, ..., n-1 | n-1, ...
inline int64_t reflect_index(int64_t i, int64_t n) {
  if (n == 1) return 0;
  const int64_t period = 2 * n;
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - 1 - i;
}

// Antialiased taps for integer-factor downscaling: the cubic kernel is
// stretched by the factor (support 4*factor) and weights are normalized
// per output position.
inline std::vector<Taps> downsample_taps(int64_t in, int64_t factor) {
  const int64_t out = in / factor;
  const double f = static_cast<double>(factor);
  std::vector<Taps> taps(static_cast<size_t>(out));
  for (int64_t d = 0; d < out; ++d) {
    const double center = (d + 0.5) * f - 0.5;
    const int64_t lo = static_cast<int64_t>(std::ceil(center - 2.0 * f));
    const int64_t hi = static_cast<int64_t>(std::floor(center + 2.0 * f));
    Taps& t = taps[static_cast<size_t>(d)];
    t.first = lo;
    t.weights.resize(static_cast<size_t>(hi - lo + 1));
    double sum = 0.0;
    for (int64_t i = lo; i <= hi; ++i) {
      const double w = cubic_kernel((i - center) / f);
      t.weights[static_cast<size_t>(i - lo)] = w;
      sum += w;
    }
    for (auto& w : t.weights) w /= sum;
  }
  return taps;
}

}  // namespace detail

// Antialiased bicubic downscale by an integer factor; spatial dims must be
// divisible by the factor. Boundaries use symmetric reflection.
inline Tensor bicubic_downsample(const Tensor& x, int64_t factor) {
  if (factor < 1) throw ShapeError("bicubic_downsample: factor must be >= 1");
  if (factor == 1) return x;
  if (x.h % factor != 0 || x.w % factor != 0)
    throw ShapeError("bicubic_downsample: dims " + x.shape_str() + " not divisible by " +
                     std::to_string(factor));
  const auto ty = detail::downsample_taps(x.h, factor);
  const auto tx = detail::downsample_taps(x.w, factor);
  Tensor mid(x.n, x.c, x.h, x.w / factor);
  for (int64_t in = 0; in < x.n; ++in)
    for (int64_t ic = 0; ic < x.c; ++ic)
      for (int64_t iy = 0; iy < x.h; ++iy)
        for (int64_t ox = 0; ox < mid.w; ++ox) {
          const auto& t = tx[static_cast<size_t>(ox)];
          double acc = 0.0;
          for (size_t k = 0; k < t.weights.size(); ++k)
            acc += t.weights[k] *
                   x.at(in, ic, iy, detail::reflect_index(t.first + static_cast<int64_t>(k), x.w));
          mid.at(in, ic, iy, ox) = acc;
        }
  Tensor y(x.n, x.c, x.h / factor, x.w / factor);
  for (int64_t in = 0; in < x.n; ++in)
    for (int64_t ic = 0; ic < x.c; ++ic)
      for (int64_t oy = 0; oy < y.h; ++oy) {
        const auto& t = ty[static_cast<size_t>(oy)];
        for (int64_t ox = 0; ox < y.w; ++ox) {
          double acc = 0.0;
          for (size_t k = 0; k < t.weights.size(); ++k)
            acc +=
                t.weights[k] *
                mid.at(in, ic, detail::reflect_index(t.first + static_cast<int64_t>(k), x.h), ox);
          y.at(in, ic, oy, ox) = acc;
        }
      }
  return y;
}

}  // namespace srzoo
