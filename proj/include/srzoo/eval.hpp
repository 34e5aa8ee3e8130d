#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "srzoo/graph.hpp"
#include "srzoo/image_io.hpp"
#include "srzoo/resample.hpp"

namespace srzoo {

// PSNR on the 0..255 scale with a border of `shave` pixels excluded on every
// side. One MSE is taken over all channels jointly; identical crops give
// +infinity.
inline double psnr(const Tensor& sr, const Tensor& gt, int64_t shave = 4) {
  check_same_shape(sr, gt, "psnr");
  if (shave < 0) throw ShapeError("psnr: negative shave");
  const int64_t h = sr.h - 2 * shave;
  const int64_t w = sr.w - 2 * shave;
  if (h < 1 || w < 1)
    throw ShapeError("psnr: shave " + std::to_string(shave) + " leaves no pixels of " +
                     sr.shape_str());
  double se = 0.0;
  for (int64_t n = 0; n < sr.n; ++n)
    for (int64_t c = 0; c < sr.c; ++c)
      for (int64_t y = shave; y < sr.h - shave; ++y)
        for (int64_t x = shave; x < sr.w - shave; ++x) {
          const double d = sr.at(n, c, y, x) - gt.at(n, c, y, x);
          se += d * d;
        }
  const double mse = se / static_cast<double>(sr.n * sr.c * h * w);
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(255.0 * 255.0 / mse);
}

inline std::vector<std::string> list_pngs(const std::string& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw IoError("'" + dir + "' is not a directory");
  std::vector<std::string> names;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".png")
      names.push_back(e.path().filename().string());
  std::sort(names.begin(), names.end());
  return names;
}

struct EvalResult {
  double mean_psnr = 0.0;
  std::vector<std::pair<std::string, double>> per_image;  // filename, dB
};

// PSNR of the model's outputs against ground truth, averaged over a directory
// pair matched by filename. Outputs are quantized to the 8-bit grid before
// comparison; the border shave defaults to the upscaling factor.
inline EvalResult evaluate_model(const GraphIR& g, const std::string& lr_dir,
                                 const std::string& hr_dir, int64_t shave = 4,
                                 const ExecOptions& opt = {}) {
  const auto lr_names = list_pngs(lr_dir);
  const auto hr_names = list_pngs(hr_dir);
  if (lr_names.empty()) throw DataError("no .png files in '" + lr_dir + "'");
  if (lr_names != hr_names) {
    std::string msg = "image sets differ:";
    for (const auto& n : lr_names)
      if (!std::binary_search(hr_names.begin(), hr_names.end(), n)) msg += " only-lr:" + n;
    for (const auto& n : hr_names)
      if (!std::binary_search(lr_names.begin(), lr_names.end(), n)) msg += " only-hr:" + n;
    throw DataError(msg);
  }
  EvalResult res;
  for (const auto& name : lr_names) {
    const Tensor lr = read_png(lr_dir + "/" + name);
    const Tensor gt = read_png(hr_dir + "/" + name);
    Tensor sr = g.execute(lr, opt);
    quantize_image(sr);
    const double db = psnr(sr, gt, shave);
    res.per_image.emplace_back(name, db);
    res.mean_psnr += db;
  }
  res.mean_psnr /= static_cast<double>(res.per_image.size());
  return res;
}

struct BenchmarkConfig {
  int trials = 3;
  int warmup = 1;
  int threads = 1;
  // Returns seconds; injectable so the timing protocol itself is testable.
  std::function<double()> clock;
};

struct BenchmarkResult {
  double seconds_per_image = 0.0;        // best trial
  std::vector<double> trial_seconds;     // per-trial mean over the image set
};

// Runtime protocol: warm up on the first image (untimed), then time each
// trial around the whole image set (two clock reads per trial) and report the
// per-image mean of the fastest trial.
inline BenchmarkResult run_benchmark(const GraphIR& g, const std::vector<Tensor>& images,
                                     const BenchmarkConfig& cfg = {}) {
  if (images.empty()) throw DataError("run_benchmark: no images");
  if (cfg.trials < 1) throw DataError("run_benchmark: trials must be >= 1");
  std::function<double()> clock = cfg.clock;
  if (!clock) {
    clock = [] {
      return std::chrono::duration<double>(
                 std::chrono::steady_clock::now().time_since_epoch())
          .count();
    };
  }
  ExecOptions opt;
  opt.threads = cfg.threads;
  for (int i = 0; i < cfg.warmup; ++i) g.execute(images[0], opt);
  BenchmarkResult res;
  res.trial_seconds.reserve(static_cast<size_t>(cfg.trials));
  for (int t = 0; t < cfg.trials; ++t) {
    const double t0 = clock();
    for (const auto& img : images) g.execute(img, opt);
    const double t1 = clock();
    res.trial_seconds.push_back((t1 - t0) / static_cast<double>(images.size()));
  }
  res.seconds_per_image = *std::min_element(res.trial_seconds.begin(), res.trial_seconds.end());
  return res;
}

// Center-crops to a multiple of the scale, then antialias-downsamples.
// Returns {cropped ground truth, low-resolution input}.
inline std::pair<Tensor, Tensor> make_lr(const Tensor& hr, int64_t scale) {
  if (scale < 1) throw ShapeError("make_lr: scale must be >= 1");
  const int64_t ch = hr.h - hr.h % scale;
  const int64_t cw = hr.w - hr.w % scale;
  if (ch < scale || cw < scale)
    throw ShapeError("make_lr: image " + hr.shape_str() + " too small for scale " +
                     std::to_string(scale));
  const int64_t oy = (hr.h - ch) / 2;
  const int64_t ox = (hr.w - cw) / 2;
  Tensor crop(hr.n, hr.c, ch, cw);
  for (int64_t n = 0; n < hr.n; ++n)
    for (int64_t c = 0; c < hr.c; ++c)
      for (int64_t y = 0; y < ch; ++y)
        for (int64_t x = 0; x < cw; ++x) crop.at(n, c, y, x) = hr.at(n, c, y + oy, x + ox);
  Tensor lr = bicubic_downsample(crop, scale);
  return {std::move(crop), std::move(lr)};
}

}  // namespace srzoo
