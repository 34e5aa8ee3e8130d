#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "srzoo/resample.hpp"

namespace {

using srzoo::InterpMode;
using srzoo::Tensor;

Tensor counting(int64_t n, int64_t c, int64_t h, int64_t w) {
  Tensor t(n, c, h, w);
  for (size_t i = 0; i < t.data.size(); ++i) t.data[i] = static_cast<double>(i);
  return t;
}

Tensor random_tensor(int64_t n, int64_t c, int64_t h, int64_t w, uint32_t seed) {
  Tensor t(n, c, h, w);
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  for (auto& v : t.data) v = d(rng);
  return t;
}

TEST(PixelShuffle, MatchesIndexFormula) {
  const int64_t r = 2;
  Tensor x = counting(2, 8, 3, 4);
  Tensor y = srzoo::pixel_shuffle(x, r);
  ASSERT_EQ(y.c, 2);
  ASSERT_EQ(y.h, 6);
  ASSERT_EQ(y.w, 8);
  for (int64_t n = 0; n < 2; ++n)
    for (int64_t c = 0; c < 2; ++c)
      for (int64_t oy = 0; oy < 3; ++oy)
        for (int64_t ox = 0; ox < 4; ++ox)
          for (int64_t dy = 0; dy < r; ++dy)
            for (int64_t dx = 0; dx < r; ++dx)
              EXPECT_EQ(y.at(n, c, oy * r + dy, ox * r + dx),
                        x.at(n, c * r * r + dy * r + dx, oy, ox));
}

TEST(PixelShuffle, UnshuffleIsExactInverse) {
  Tensor x = random_tensor(1, 18, 5, 7, 3);
  for (int64_t r : {1, 3}) {
    Tensor y = srzoo::pixel_unshuffle(srzoo::pixel_shuffle(x, r), r);
    EXPECT_EQ(y.data, x.data);
  }
  Tensor z = random_tensor(1, 2, 6, 9, 4);
  Tensor w = srzoo::pixel_shuffle(srzoo::pixel_unshuffle(z, 3), 3);
  EXPECT_EQ(w.data, z.data);
}

TEST(PixelShuffle, RejectsIndivisibleShapes) {
  Tensor x(1, 6, 4, 4);
  EXPECT_THROW(srzoo::pixel_shuffle(x, 2), srzoo::ShapeError);
  Tensor y(1, 3, 5, 4);
  EXPECT_THROW(srzoo::pixel_unshuffle(y, 2), srzoo::ShapeError);
}

TEST(Interpolate, NearestPicksFlooredSourceIndex) {
  Tensor x = counting(1, 1, 1, 3);
  Tensor y = srzoo::interpolate_to(x, 1, 6, InterpMode::nearest);
  const double want[6] = {0, 0, 1, 1, 2, 2};
  for (int64_t d = 0; d < 6; ++d) EXPECT_EQ(y.at(0, 0, 0, d), want[d]);

  Tensor z = srzoo::interpolate(counting(1, 1, 2, 2), 2, InterpMode::nearest);
  EXPECT_EQ(z.at(0, 0, 0, 0), 0.0);
  EXPECT_EQ(z.at(0, 0, 0, 1), 0.0);
  EXPECT_EQ(z.at(0, 0, 1, 0), 0.0);
  EXPECT_EQ(z.at(0, 0, 3, 3), 3.0);
}

// 1-D bilinear 2 -> 4 with half-pixel centers: sources land at
// -0.25, 0.25, 0.75, 1.25, so the ends clamp and the middle blends 3:1.
TEST(Interpolate, BilinearHandWorkedExample) {
  Tensor x(1, 1, 1, 2);
  x.at(0, 0, 0, 0) = 10.0;
  x.at(0, 0, 0, 1) = 20.0;
  Tensor y = srzoo::interpolate_to(x, 1, 4, InterpMode::bilinear);
  EXPECT_NEAR(y.at(0, 0, 0, 0), 10.0, 1e-14);
  EXPECT_NEAR(y.at(0, 0, 0, 1), 12.5, 1e-14);
  EXPECT_NEAR(y.at(0, 0, 0, 2), 17.5, 1e-14);
  EXPECT_NEAR(y.at(0, 0, 0, 3), 20.0, 1e-14);
}

TEST(Interpolate, ConstantImagesStayConstant) {
  Tensor x(2, 3, 5, 4);
  for (auto& v : x.data) v = 7.5;
  for (auto mode : {InterpMode::nearest, InterpMode::bilinear, InterpMode::bicubic}) {
    Tensor y = srzoo::interpolate_to(x, 13, 9, mode);
    for (double v : y.data) EXPECT_NEAR(v, 7.5, 1e-12) << srzoo::interp_mode_name(mode);
  }
}

TEST(Interpolate, CubicKernelProperties) {
  EXPECT_EQ(srzoo::cubic_kernel(0.0), 1.0);
  EXPECT_NEAR(srzoo::cubic_kernel(1.0), 0.0, 1e-15);
  EXPECT_NEAR(srzoo::cubic_kernel(2.0), 0.0, 1e-15);
  EXPECT_EQ(srzoo::cubic_kernel(2.5), 0.0);
  EXPECT_NEAR(srzoo::cubic_kernel(0.5), srzoo::cubic_kernel(-0.5), 1e-15);
  for (double s = 0.0; s < 1.0; s += 0.0625) {
    const double sum = srzoo::cubic_kernel(1.0 + s) + srzoo::cubic_kernel(s) +
                       srzoo::cubic_kernel(1.0 - s) + srzoo::cubic_kernel(2.0 - s);
    EXPECT_NEAR(sum, 1.0, 1e-14) << "s=" << s;
  }
}

// Away from the clamped borders both interpolants reproduce linear ramps
// exactly, evaluated at the half-pixel source positions.
TEST(Interpolate, InteriorReproducesLinearRamp) {
  Tensor x(1, 1, 1, 8);
  for (int64_t i = 0; i < 8; ++i) x.at(0, 0, 0, i) = 3.0 * static_cast<double>(i) + 2.0;
  for (auto mode : {InterpMode::bilinear, InterpMode::bicubic}) {
    Tensor y = srzoo::interpolate_to(x, 1, 16, mode);
    for (int64_t d = 3; d <= 12; ++d) {
      const double src = (static_cast<double>(d) + 0.5) * 8.0 / 16.0 - 0.5;
      EXPECT_NEAR(y.at(0, 0, 0, d), 3.0 * src + 2.0, 1e-12) << srzoo::interp_mode_name(mode);
    }
  }
}

TEST(Interpolate, SeparablePassesCommute) {
  Tensor x = random_tensor(1, 2, 6, 5, 8);
  for (auto mode : {InterpMode::bilinear, InterpMode::bicubic}) {
    Tensor wide = srzoo::interpolate_to(x, 6, 11, mode);
    Tensor both = srzoo::interpolate_to(wide, 14, 11, mode);
    Tensor direct = srzoo::interpolate_to(x, 14, 11, mode);
    ASSERT_TRUE(both.same_shape(direct));
    for (size_t i = 0; i < both.data.size(); ++i)
      EXPECT_NEAR(both.data[i], direct.data[i], 1e-12);
  }
}

TEST(Interpolate, RejectsBadArguments) {
  Tensor x(1, 1, 4, 4);
  EXPECT_THROW(srzoo::interpolate_to(x, 0, 4, InterpMode::nearest), srzoo::ShapeError);
  EXPECT_THROW(srzoo::interpolate(x, 0, InterpMode::nearest), srzoo::ShapeError);
}

TEST(ReflectIndex, FoldsWithSymmetricPeriod) {
  EXPECT_EQ(srzoo::detail::reflect_index(0, 4), 0);
  EXPECT_EQ(srzoo::detail::reflect_index(-1, 4), 0);
  EXPECT_EQ(srzoo::detail::reflect_index(-2, 4), 1);
  EXPECT_EQ(srzoo::detail::reflect_index(4, 4), 3);
  EXPECT_EQ(srzoo::detail::reflect_index(5, 4), 2);
  EXPECT_EQ(srzoo::detail::reflect_index(-5, 4), 3);
  EXPECT_EQ(srzoo::detail::reflect_index(9, 4), 1);
  EXPECT_EQ(srzoo::detail::reflect_index(3, 1), 0);
}

// Independent 2-D oracle: outer product of the 1-D antialias weights, applied
// without the separable middle pass.
Tensor downsample_ref(const Tensor& x, int64_t f) {
  auto axis_taps = [&](int64_t in) {
    const int64_t out = in / f;
    std::vector<std::vector<std::pair<int64_t, double>>> taps(static_cast<size_t>(out));
    for (int64_t d = 0; d < out; ++d) {
      const double center = (static_cast<double>(d) + 0.5) * static_cast<double>(f) - 0.5;
      const int64_t first = static_cast<int64_t>(std::ceil(center - 2.0 * f));
      const int64_t last = static_cast<int64_t>(std::floor(center + 2.0 * f));
      double total = 0.0;
      for (int64_t t = first; t <= last; ++t)
        total += srzoo::cubic_kernel((static_cast<double>(t) - center) / static_cast<double>(f));
      for (int64_t t = first; t <= last; ++t) {
        const double w =
            srzoo::cubic_kernel((static_cast<double>(t) - center) / static_cast<double>(f));
        taps[static_cast<size_t>(d)].push_back({srzoo::detail::reflect_index(t, in), w / total});
      }
    }
    return taps;
  };
  auto ty = axis_taps(x.h);
  auto tx = axis_taps(x.w);
  Tensor y(x.n, x.c, x.h / f, x.w / f);
  for (int64_t n = 0; n < x.n; ++n)
    for (int64_t c = 0; c < x.c; ++c)
      for (int64_t oy = 0; oy < y.h; ++oy)
        for (int64_t ox = 0; ox < y.w; ++ox) {
          double acc = 0.0;
          for (const auto& [iy, wy] : ty[static_cast<size_t>(oy)])
            for (const auto& [ix, wx] : tx[static_cast<size_t>(ox)])
              acc += wy * wx * x.at(n, c, iy, ix);
          y.at(n, c, oy, ox) = acc;
        }
  return y;
}

TEST(BicubicDownsample, MatchesOuterProductOracle) {
  for (int64_t f : {2, 3, 4}) {
    Tensor x = random_tensor(1, 3, 12 * f, 5 * f, static_cast<uint32_t>(20 + f));
    Tensor got = srzoo::bicubic_downsample(x, f);
    Tensor want = downsample_ref(x, f);
    ASSERT_TRUE(got.same_shape(want));
    for (size_t i = 0; i < got.data.size(); ++i)
      EXPECT_NEAR(got.data[i], want.data[i], 1e-12) << "f=" << f;
  }
}

TEST(BicubicDownsample, PreservesConstants) {
  Tensor x(1, 2, 16, 12);
  for (auto& v : x.data) v = 123.25;
  Tensor y = srzoo::bicubic_downsample(x, 4);
  ASSERT_EQ(y.h, 4);
  ASSERT_EQ(y.w, 3);
  for (double v : y.data) EXPECT_NEAR(v, 123.25, 1e-12);
}

TEST(BicubicDownsample, SymmetricInputGivesSymmetricOutput) {
  Tensor x(1, 1, 2, 16);
  for (int64_t y = 0; y < 2; ++y)
    for (int64_t i = 0; i < 16; ++i)
      x.at(0, 0, y, i) = std::min<double>(static_cast<double>(i), static_cast<double>(15 - i));
  Tensor d = srzoo::bicubic_downsample(x, 2);
  for (int64_t i = 0; i < 8; ++i)
    EXPECT_NEAR(d.at(0, 0, 0, i), d.at(0, 0, 0, 7 - i), 1e-12);
}

TEST(BicubicDownsample, FactorOneIsIdentity) {
  Tensor x = random_tensor(1, 3, 5, 5, 31);
  Tensor y = srzoo::bicubic_downsample(x, 1);
  EXPECT_EQ(y.data, x.data);
}

TEST(BicubicDownsample, RequiresDivisibleExtent) {
  Tensor x(1, 1, 10, 9);
  EXPECT_THROW(srzoo::bicubic_downsample(x, 4), srzoo::ShapeError);
  EXPECT_THROW(srzoo::bicubic_downsample(x, 0), srzoo::ShapeError);
}

}  // namespace
