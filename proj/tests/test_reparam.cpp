#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <random>
#include <vector>

#include "srzoo/analyze.hpp"
#include "srzoo/models.hpp"
#include "srzoo/reparam.hpp"
#include "srzoo/serialize.hpp"

namespace {

using srzoo::ChannelGates;
using srzoo::Conv2dParams;
using srzoo::GraphIR;
using srzoo::Tensor;

Tensor random_tensor(int64_t n, int64_t c, int64_t h, int64_t w, std::mt19937& rng) {
  Tensor t(n, c, h, w);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  for (auto& v : t.data) v = d(rng);
  return t;
}

void randomize(Conv2dParams& p, std::mt19937& rng) {
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  p.weights.resize(static_cast<size_t>(p.weight_count()));
  for (auto& v : p.weights) v = d(rng);
  if (p.has_bias) {
    p.bias.resize(static_cast<size_t>(p.c_out));
    for (auto& v : p.bias) v = d(rng);
  }
}

Conv2dParams cac_branch(int64_t cin, int64_t cout, int64_t kh, int64_t kw, int64_t stride,
                        int64_t groups, bool bias) {
  Conv2dParams p;
  p.c_in = cin;
  p.c_out = cout;
  p.k_h = kh;
  p.k_w = kw;
  p.stride_h = p.stride_w = stride;
  p.groups = groups;
  p.has_bias = bias;
  p.pad_top = p.pad_bottom = kh == 3 ? 1 : 0;
  p.pad_left = p.pad_right = kw == 3 ? 1 : 0;
  return p;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  EXPECT_TRUE(a.same_shape(b)) << a.shape_str() << " vs " << b.shape_str();
  double m = 0.0;
  for (size_t i = 0; i < a.data.size(); ++i) m = std::max(m, std::abs(a.data[i] - b.data[i]));
  return m;
}

// 3x3 zeros + row [1,2,3] + column [4,5,6] collapse into one kernel whose
// center stacks both middles.
TEST(FuseCac, HandWorkedKernel) {
  std::mt19937 rng(1);
  Conv2dParams k33 = cac_branch(1, 1, 3, 3, 1, 1, true);
  Conv2dParams k13 = cac_branch(1, 1, 1, 3, 1, 1, true);
  Conv2dParams k31 = cac_branch(1, 1, 3, 1, 1, 1, true);
  k33.weights.assign(9, 0.0);
  k33.bias = {0.5};
  k13.weights = {1.0, 2.0, 3.0};
  k13.bias = {0.25};
  k31.weights = {4.0, 5.0, 6.0};
  k31.bias = {0.125};
  Conv2dParams f = srzoo::fuse_cac(k33, k13, k31);
  const std::vector<double> want = {0, 4, 0, 1, 7, 3, 0, 6, 0};
  EXPECT_EQ(f.weights, want);
  ASSERT_TRUE(f.has_bias);
  EXPECT_EQ(f.bias[0], 0.875);
  EXPECT_EQ(f.k_h, 3);
  EXPECT_EQ(f.k_w, 3);
  EXPECT_EQ(f.pad_top, 1);
}

TEST(FuseCac, MatchesBranchSumOnRandomConfigs) {
  std::mt19937 rng(77);
  auto pick = [&](int lo, int hi) {
    return std::uniform_int_distribution<int>(lo, hi)(rng);
  };
  for (int iter = 0; iter < 100; ++iter) {
    const int g = pick(1, 2);
    const int64_t cin = g * pick(1, 4);
    const int64_t cout = g * pick(1, 4);
    const int64_t stride = pick(1, 2);
    Conv2dParams k33 = cac_branch(cin, cout, 3, 3, stride, g, pick(0, 1) == 1);
    Conv2dParams k13 = cac_branch(cin, cout, 1, 3, stride, g, pick(0, 1) == 1);
    Conv2dParams k31 = cac_branch(cin, cout, 3, 1, stride, g, pick(0, 1) == 1);
    randomize(k33, rng);
    randomize(k13, rng);
    randomize(k31, rng);
    Conv2dParams fused = srzoo::fuse_cac(k33, k13, k31);
    EXPECT_EQ(fused.has_bias, k33.has_bias || k13.has_bias || k31.has_bias);

    Tensor x = random_tensor(1, cin, 3 + pick(0, 5), 3 + pick(0, 5), rng);
    Tensor want = srzoo::add(srzoo::add(srzoo::conv2d(x, k33), srzoo::conv2d(x, k13)),
                             srzoo::conv2d(x, k31));
    Tensor got = srzoo::conv2d(x, fused);
    EXPECT_LE(max_abs_diff(got, want), 1e-10) << "iter " << iter;
  }
}

TEST(FuseCac, RejectsWrongShapesPadsAndGeometry) {
  std::mt19937 rng(3);
  Conv2dParams k33 = cac_branch(2, 2, 3, 3, 1, 1, true);
  Conv2dParams k13 = cac_branch(2, 2, 1, 3, 1, 1, true);
  Conv2dParams k31 = cac_branch(2, 2, 3, 1, 1, 1, true);
  randomize(k33, rng);
  randomize(k13, rng);
  randomize(k31, rng);

  EXPECT_THROW(srzoo::fuse_cac(k13, k13, k31), srzoo::ShapeError);
  EXPECT_THROW(srzoo::fuse_cac(k33, k31, k13), srzoo::ShapeError);

  Conv2dParams bad_pad = k13;
  bad_pad.pad_top = 1;
  EXPECT_THROW(srzoo::fuse_cac(k33, bad_pad, k31), srzoo::ShapeError);

  Conv2dParams bad_cout = k31;
  bad_cout.c_out = 4;
  randomize(bad_cout, rng);
  EXPECT_THROW(srzoo::fuse_cac(k33, k13, bad_cout), srzoo::ShapeError);

  Conv2dParams dil = k33;
  dil.dil_h = 2;
  EXPECT_THROW(srzoo::fuse_cac(dil, k13, k31), srzoo::ShapeError);

  Conv2dParams empty = k33;
  empty.weights.clear();
  EXPECT_THROW(srzoo::fuse_cac(empty, k13, k31), srzoo::ShapeError);
}

TEST(MergeKernelBases, MatchesCoefficientWeightedSum) {
  std::mt19937 rng(55);
  auto pick = [&](int lo, int hi) {
    return std::uniform_int_distribution<int>(lo, hi)(rng);
  };
  std::uniform_real_distribution<double> coeff(-1.5, 1.5);
  for (int iter = 0; iter < 100; ++iter) {
    const int64_t cin = pick(1, 4);
    const int64_t cout = pick(1, 4);
    const int64_t k = 2 * pick(0, 1) + 1;
    const size_t count = static_cast<size_t>(pick(1, 8));
    srzoo::KernelBases kb;
    for (size_t i = 0; i < count; ++i) {
      Conv2dParams p = cac_branch(cin, cout, k, k, 1, 1, pick(0, 1) == 1);
      randomize(p, rng);
      kb.kernels.push_back(std::move(p));
      kb.coeffs.push_back(coeff(rng));
    }
    Conv2dParams merged = srzoo::merge_kernel_bases(kb);

    Tensor x = random_tensor(1, cin, 6, 7, rng);
    Tensor want(1, cout, x.h, x.w);
    bool first = true;
    for (size_t i = 0; i < count; ++i) {
      Tensor yi = srzoo::conv2d(x, kb.kernels[i]);
      if (first) {
        want = Tensor(yi.n, yi.c, yi.h, yi.w);
        first = false;
      }
      for (size_t j = 0; j < yi.data.size(); ++j) want.data[j] += kb.coeffs[i] * yi.data[j];
    }
    Tensor got = srzoo::conv2d(x, merged);
    EXPECT_LE(max_abs_diff(got, want), 1e-10) << "iter " << iter << " n=" << count;
  }
}

TEST(MergeKernelBases, RejectsBadBases) {
  std::mt19937 rng(4);
  srzoo::KernelBases kb;
  EXPECT_THROW(srzoo::merge_kernel_bases(kb), srzoo::ShapeError);
  Conv2dParams a = cac_branch(2, 2, 3, 3, 1, 1, true);
  randomize(a, rng);
  kb.kernels.push_back(a);
  EXPECT_THROW(srzoo::merge_kernel_bases(kb), srzoo::ShapeError);  // no coeff
  kb.coeffs.push_back(1.0);
  Conv2dParams b = cac_branch(2, 3, 3, 3, 1, 1, true);
  randomize(b, rng);
  kb.kernels.push_back(b);
  kb.coeffs.push_back(0.5);
  EXPECT_THROW(srzoo::merge_kernel_bases(kb), srzoo::ShapeError);  // geometry mismatch
}

GraphIR conv_only(const Conv2dParams& p) {
  srzoo::GraphBuilder b("one", 1);
  b.output(b.conv("c", b.input(), p));
  return b.build();
}

TEST(FoldGates, MatchesDiagonalConjugation) {
  std::mt19937 rng(66);
  std::uniform_real_distribution<double> d(0.25, 2.0);
  for (int iter = 0; iter < 20; ++iter) {
    const int64_t groups = iter % 2 == 0 ? 1 : 2;
    Conv2dParams p = cac_branch(4, 6, 3, 3, 1, groups, iter % 3 != 0);
    randomize(p, rng);
    GraphIR g = conv_only(p);

    ChannelGates gates;
    if (iter % 4 != 1)
      for (int i = 0; i < 4; ++i) gates.pre.push_back(d(rng));
    if (iter % 4 != 2)
      for (int i = 0; i < 6; ++i) gates.post.push_back(d(rng));
    srzoo::fold_gates(g, "c", gates);

    Tensor x = random_tensor(1, 4, 7, 8, rng);
    Tensor scaled = x;
    if (!gates.pre.empty())
      for (int64_t c = 0; c < 4; ++c)
        for (int64_t y = 0; y < 7; ++y)
          for (int64_t w = 0; w < 8; ++w) scaled.at(0, c, y, w) *= gates.pre[c];
    Tensor want = srzoo::conv2d(scaled, p);
    if (!gates.post.empty())
      for (int64_t c = 0; c < 6; ++c)
        for (int64_t y = 0; y < want.h; ++y)
          for (int64_t w = 0; w < want.w; ++w) want.at(0, c, y, w) *= gates.post[c];

    Tensor got = srzoo::conv2d(x, g.convs.at("c"));
    EXPECT_LE(max_abs_diff(got, want), 1e-12) << "iter " << iter;
  }
}

TEST(FoldGates, ValidatesTargetAndSizes) {
  std::mt19937 rng(5);
  Conv2dParams p = cac_branch(3, 4, 3, 3, 1, 1, true);
  randomize(p, rng);
  GraphIR g = conv_only(p);
  ChannelGates wrong;
  wrong.pre = {1.0, 1.0};
  EXPECT_THROW(srzoo::fold_gates(g, "c", wrong), srzoo::ShapeError);
  ChannelGates ok;
  ok.post = {1.0, 1.0, 1.0, 1.0};
  EXPECT_THROW(srzoo::fold_gates(g, "in", ok), srzoo::GraphError);
  EXPECT_THROW(srzoo::fold_gates(g, "ghost", ok), srzoo::GraphError);
}

GraphIR chain_net(uint32_t seed) {
  srzoo::GraphBuilder b("chain", 1);
  auto in = b.input();
  auto c1 = b.conv("c1", in, srzoo::conv3x3(3, 8));
  auto l1 = b.lrelu("l1", c1, 0.1);
  auto c2 = b.conv("c2", l1, srzoo::conv3x3(8, 6));
  auto r2 = b.relu("r2", c2);
  auto c3 = b.conv("c3", r2, srzoo::conv3x3(6, 3));
  b.output(c3);
  GraphIR g = b.build();
  srzoo::init_weights(g, seed);
  return g;
}

TEST(Prune, DropsZeroPostChannelsValueExactly) {
  GraphIR folded = chain_net(9);
  GraphIR pruned = chain_net(9);
  ChannelGates gates;
  gates.post = {1.0, 0.0, 0.5, 1.0, 0.0, 1.0, 0.0, 2.0};
  srzoo::fold_gates(folded, "c1", gates);
  const auto res = srzoo::prune_zero_gates(pruned, {{"c1", gates}});

  EXPECT_EQ(res.removed_channels, 3);
  EXPECT_EQ(pruned.convs.at("c1").c_out, 5);
  EXPECT_EQ(pruned.convs.at("c2").c_in, 5);
  EXPECT_EQ(res.params_before, srzoo::count_params(folded));
  EXPECT_EQ(res.params_after, srzoo::count_params(pruned));
  EXPECT_EQ(res.params_before - res.params_after, 3 * (3 * 9 + 1) + 3 * 6 * 9);

  std::mt19937 rng(10);
  Tensor x = random_tensor(1, 3, 12, 11, rng);
  EXPECT_LE(max_abs_diff(pruned.execute(x), folded.execute(x)), 1e-12);
}

TEST(Prune, ZeroPreGateDeletesSoleProducerChannel) {
  GraphIR folded = chain_net(12);
  GraphIR pruned = chain_net(12);
  ChannelGates gates;
  gates.pre = {1.0, 1.0, 0.0, 1.0, 1.0, 0.0, 1.0, 1.0};
  srzoo::fold_gates(folded, "c2", gates);
  const auto res = srzoo::prune_zero_gates(pruned, {{"c2", gates}});

  EXPECT_EQ(res.removed_channels, 2);
  EXPECT_EQ(pruned.convs.at("c1").c_out, 6);
  EXPECT_EQ(pruned.convs.at("c2").c_in, 6);
  EXPECT_EQ(pruned.convs.at("c2").c_out, 6);

  std::mt19937 rng(13);
  Tensor x = random_tensor(1, 3, 9, 9, rng);
  EXPECT_LE(max_abs_diff(pruned.execute(x), folded.execute(x)), 1e-12);
}

GraphIR split_net(uint32_t seed) {
  srzoo::GraphBuilder b("splitty", 1);
  auto in = b.input();
  auto c1 = b.conv("c1", in, srzoo::conv3x3(3, 8));
  auto s = b.split("s", c1, {3, 5});
  auto a = b.lrelu("a", srzoo::EdgeRef(s, 0), 0.2);
  auto r = b.prelu("r", srzoo::EdgeRef(s, 1), 5);
  auto cat = b.concat("cat", {a, r});
  auto c2 = b.conv("c2", cat, srzoo::conv3x3(8, 4));
  b.output(c2);
  GraphIR g = b.build();
  srzoo::init_weights(g, seed);
  return g;
}

TEST(Prune, TracksChannelsThroughSplitAndConcat) {
  GraphIR folded = split_net(21);
  GraphIR pruned = split_net(21);
  ChannelGates gates;
  gates.post = {1.0, 0.0, 1.0, 1.0, 0.0, 1.0, 1.0, 1.0};
  srzoo::fold_gates(folded, "c1", gates);
  const auto res = srzoo::prune_zero_gates(pruned, {{"c1", gates}});

  EXPECT_EQ(res.removed_channels, 2);
  EXPECT_EQ(pruned.convs.at("c1").c_out, 6);
  EXPECT_EQ(pruned.node("s").sizes, (std::vector<int64_t>{2, 4}));
  EXPECT_EQ(pruned.slopes.at("r").size(), 4u);
  EXPECT_EQ(pruned.convs.at("c2").c_in, 6);

  std::mt19937 rng(22);
  Tensor x = random_tensor(1, 3, 10, 10, rng);
  EXPECT_LE(max_abs_diff(pruned.execute(x), folded.execute(x)), 1e-12);
}

TEST(Prune, RejectsDeadChannelReachingResidualAdd) {
  srzoo::GraphBuilder b("res", 1);
  auto in = b.input();
  auto c1 = b.conv("c1", in, srzoo::conv3x3(3, 3));
  auto a = b.add("a", c1, in);
  b.output(a);
  GraphIR g = b.build();
  srzoo::init_weights(g, 30);
  ChannelGates gates;
  gates.post = {1.0, 0.0, 1.0};
  EXPECT_THROW(srzoo::prune_zero_gates(g, {{"c1", gates}}), srzoo::GraphError);
}

TEST(Prune, RejectsNonConvTargetsAndGroupedConvs) {
  GraphIR g = split_net(31);
  EXPECT_THROW(srzoo::prune_zero_gates(g, {{"cat", {}}}), srzoo::GraphError);

  srzoo::GraphBuilder b("grp", 1);
  auto c = b.conv("c", b.input(), srzoo::make_conv(4, 4, 3, 3, 1, 1, 1, 1, 1, true, 2));
  b.output(c);
  GraphIR h = b.build();
  srzoo::init_weights(h, 32);
  ChannelGates gates;
  gates.post = {1.0, 0.0, 1.0, 1.0};
  EXPECT_THROW(srzoo::prune_zero_gates(h, {{"c", gates}}), srzoo::GraphError);
}

TEST(Prune, NoZeroGatesIsaFoldOnlyNoOp) {
  GraphIR folded = chain_net(40);
  GraphIR pruned = chain_net(40);
  ChannelGates gates;
  gates.post = {0.5, 1.5, 1.0, 2.0, 0.25, 1.0, 3.0, 0.125};
  srzoo::fold_gates(folded, "c1", gates);
  const auto res = srzoo::prune_zero_gates(pruned, {{"c1", gates}});
  EXPECT_EQ(res.removed_channels, 0);
  EXPECT_EQ(res.params_before, res.params_after);
  std::mt19937 rng(41);
  Tensor x = random_tensor(1, 3, 8, 8, rng);
  EXPECT_LE(max_abs_diff(pruned.execute(x), folded.execute(x)), 1e-15);
}

TEST(CacSites, RewritesTrainingGraphIntoDeployForm) {
  GraphIR g = srzoo::build_model("fimdn-train", 17);
  std::mt19937 rng(18);
  Tensor x = random_tensor(1, 3, 32, 32, rng);
  for (auto& v : x.data) v = (v + 1.0) * 127.5;
  Tensor before = g.execute(x);

  const int sites = srzoo::fuse_cac_sites(g);
  EXPECT_EQ(sites, 24);
  EXPECT_EQ(srzoo::count_params(g), 687056);
  EXPECT_EQ(srzoo::count_conv_layers(g), 33);

  Tensor after = g.execute(x);
  double scale = 1.0;
  for (double v : before.data) scale = std::max(scale, std::abs(v));
  EXPECT_LE(max_abs_diff(after, before), 1e-10 * scale);

  EXPECT_EQ(srzoo::fuse_cac_sites(g), 0);

  GraphIR deploy = srzoo::build_model("fimdn", 17);
  g.name = deploy.name;
  EXPECT_EQ(srzoo::model_spec_json(g).dump(2), srzoo::model_spec_json(deploy).dump(2));
  EXPECT_EQ(srzoo::analyze(g, 64, 64).flops, srzoo::analyze(deploy, 64, 64).flops);
  EXPECT_EQ(srzoo::analyze(g, 64, 64).activations, srzoo::analyze(deploy, 64, 64).activations);
}

TEST(CacSites, LeavesDeployGraphsAlone) {
  for (const char* name : {"fimdn", "imdn", "rfdn", "msrresnet", "pan"}) {
    GraphIR g = srzoo::build_model(name);
    EXPECT_EQ(srzoo::fuse_cac_sites(g), 0) << name;
  }
}

}  // namespace
