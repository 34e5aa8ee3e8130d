#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "srzoo/graph.hpp"

namespace srzoo {

inline Conv2dParams make_conv(int64_t c_in, int64_t c_out, int64_t k_h, int64_t k_w,
                              int64_t stride = 1, int64_t pad_t = 0, int64_t pad_b = 0,
                              int64_t pad_l = 0, int64_t pad_r = 0, bool bias = true,
                              int64_t groups = 1) {
  Conv2dParams p;
  p.c_in = c_in;
  p.c_out = c_out;
  p.k_h = k_h;
  p.k_w = k_w;
  p.stride_h = stride;
  p.stride_w = stride;
  p.pad_top = pad_t;
  p.pad_bottom = pad_b;
  p.pad_left = pad_l;
  p.pad_right = pad_r;
  p.groups = groups;
  p.has_bias = bias;
  return p;
}

inline Conv2dParams conv3x3(int64_t c_in, int64_t c_out, bool bias = true, int64_t stride = 1) {
  return make_conv(c_in, c_out, 3, 3, stride, 1, 1, 1, 1, bias);
}

inline Conv2dParams conv1x1(int64_t c_in, int64_t c_out, bool bias = true) {
  return make_conv(c_in, c_out, 1, 1, 1, 0, 0, 0, 0, bias);
}

// Thin wrapper that names every node and registers parameter blobs under the
// node id, so each conv node owns exactly one blob.
class GraphBuilder {
 public:
  GraphBuilder(std::string name, int64_t scale) {
    g_.name = std::move(name);
    g_.scale = scale;
  }

  EdgeRef input(const std::string& id = "in") {
    Node n;
    n.id = id;
    n.kind = NodeKind::Input;
    g_.add(std::move(n));
    return {id};
  }

  EdgeRef conv(const std::string& id, EdgeRef src, Conv2dParams p) {
    g_.convs[id] = std::move(p);
    Node n;
    n.id = id;
    n.kind = NodeKind::Conv2d;
    n.inputs = {std::move(src)};
    n.blob = id;
    g_.add(std::move(n));
    return {id};
  }

  EdgeRef lrelu(const std::string& id, EdgeRef src, double slope) {
    Node n;
    n.id = id;
    n.kind = NodeKind::LeakyReLU;
    n.inputs = {std::move(src)};
    n.slope = slope;
    g_.add(std::move(n));
    return {id};
  }

  EdgeRef relu(const std::string& id, EdgeRef src) {
    Node n;
    n.id = id;
    n.kind = NodeKind::ReLU;
    n.inputs = {std::move(src)};
    g_.add(std::move(n));
    return {id};
  }

  EdgeRef prelu(const std::string& id, EdgeRef src, int64_t channels) {
    g_.slopes[id] = std::vector<double>(static_cast<size_t>(channels), 0.25);
    Node n;
    n.id = id;
    n.kind = NodeKind::PReLU;
    n.inputs = {std::move(src)};
    n.blob = id;
    g_.add(std::move(n));
    return {id};
  }

  EdgeRef sigmoid(const std::string& id, EdgeRef src) {
    Node n;
    n.id = id;
    n.kind = NodeKind::Sigmoid;
    n.inputs = {std::move(src)};
    g_.add(std::move(n));
    return {id};
  }

  EdgeRef pixel_shuffle(const std::string& id, EdgeRef src, int64_t r) {
    Node n;
    n.id = id;
    n.kind = NodeKind::PixelShuffle;
    n.inputs = {std::move(src)};
    n.factor = r;
    g_.add(std::move(n));
    return {id};
  }

  EdgeRef interpolate(const std::string& id, EdgeRef src, int64_t factor, InterpMode mode) {
    Node n;
    n.id = id;
    n.kind = NodeKind::Interpolate;
    n.inputs = {std::move(src)};
    n.factor = factor;
    n.mode = mode;
    g_.add(std::move(n));
    return {id};
  }

  // Resize src to the spatial size of ref.
  EdgeRef interpolate_like(const std::string& id, EdgeRef src, EdgeRef ref, InterpMode mode) {
    Node n;
    n.id = id;
    n.kind = NodeKind::Interpolate;
    n.inputs = {std::move(src), std::move(ref)};
    n.mode = mode;
    g_.add(std::move(n));
    return {id};
  }

  EdgeRef concat(const std::string& id, std::vector<EdgeRef> parts) {
    Node n;
    n.id = id;
    n.kind = NodeKind::Concat;
    n.inputs = std::move(parts);
    g_.add(std::move(n));
    return {id};
  }

  // Returns the node id; address slices as EdgeRef{id, port}.
  std::string split(const std::string& id, EdgeRef src, std::vector<int64_t> sizes) {
    Node n;
    n.id = id;
    n.kind = NodeKind::Split;
    n.inputs = {std::move(src)};
    n.sizes = std::move(sizes);
    g_.add(std::move(n));
    return id;
  }

  EdgeRef add(const std::string& id, EdgeRef a, EdgeRef b) {
    Node n;
    n.id = id;
    n.kind = NodeKind::Add;
    n.inputs = {std::move(a), std::move(b)};
    g_.add(std::move(n));
    return {id};
  }

  EdgeRef mul(const std::string& id, EdgeRef a, EdgeRef b) {
    Node n;
    n.id = id;
    n.kind = NodeKind::Mul;
    n.inputs = {std::move(a), std::move(b)};
    g_.add(std::move(n));
    return {id};
  }

  EdgeRef max_pool(const std::string& id, EdgeRef src, PoolAttrs attrs) {
    Node n;
    n.id = id;
    n.kind = NodeKind::MaxPool;
    n.inputs = {std::move(src)};
    n.pool = attrs;
    g_.add(std::move(n));
    return {id};
  }

  EdgeRef avg_pool(const std::string& id, EdgeRef src, PoolAttrs attrs) {
    Node n;
    n.id = id;
    n.kind = NodeKind::AvgPool;
    n.inputs = {std::move(src)};
    n.pool = attrs;
    g_.add(std::move(n));
    return {id};
  }

  EdgeRef global_pool(const std::string& id, EdgeRef src, GlobalStat stat) {
    Node n;
    n.id = id;
    n.kind = NodeKind::GlobalPool;
    n.inputs = {std::move(src)};
    n.stat = stat;
    g_.add(std::move(n));
    return {id};
  }

  EdgeRef output(EdgeRef src, const std::string& id = "out") {
    Node n;
    n.id = id;
    n.kind = NodeKind::Output;
    n.inputs = {std::move(src)};
    g_.add(std::move(n));
    return {id};
  }

  GraphIR build() { return std::move(g_); }

 private:
  GraphIR g_;
};

// Deterministic parameter fill. Weights are xavier-uniform samples produced on
// the float32 grid (then widened), so a float32 serialization round trip is
// bit-exact. Biases start at zero, slope vectors at 0.25. Blobs are visited in
// name order, making the result independent of graph construction order.
inline void init_weights(GraphIR& g, uint32_t seed) {
  std::mt19937 rng(seed);
  auto urand = [&rng]() -> float {
    return static_cast<float>(rng() >> 8) * (1.0f / 16777216.0f);
  };
  for (auto& [name, p] : g.convs) {
    const int64_t fan_in = (p.c_in / p.groups) * p.k_h * p.k_w;
    const int64_t fan_out = (p.c_out / p.groups) * p.k_h * p.k_w;
    const float bound = std::sqrt(6.0f / static_cast<float>(fan_in + fan_out));
    p.weights.resize(static_cast<size_t>(p.weight_count()));
    for (auto& w : p.weights) w = static_cast<double>((2.0f * urand() - 1.0f) * bound);
    if (p.has_bias) p.bias.assign(static_cast<size_t>(p.c_out), 0.0);
  }
  for (auto& [name, s] : g.slopes) std::fill(s.begin(), s.end(), 0.25);
}

namespace detail {

inline std::string block_id(const char* prefix, int i, int width) {
  std::string num = std::to_string(i);
  while (static_cast<int>(num.size()) < width) num.insert(num.begin(), '0');
  return std::string(prefix) + num;
}

}  // namespace detail

// Residual SR baseline: 16 two-conv residual blocks at LR resolution, two
// pixel-shuffle upsampling stages, and a bilinear global skip.
inline GraphIR build_msrresnet(int64_t nf = 64, int64_t nb = 16, uint32_t seed = 1) {
  GraphBuilder b("msrresnet", 4);
  EdgeRef in = b.input();
  EdgeRef fea = b.lrelu("act_first", b.conv("conv_first", in, conv3x3(3, nf)), 0.1);
  EdgeRef x = fea;
  for (int i = 0; i < nb; ++i) {
    const std::string p = detail::block_id("b", i, 2) + "_";
    EdgeRef t = b.lrelu(p + "act", b.conv(p + "conv1", x, conv3x3(nf, nf)), 0.1);
    t = b.conv(p + "conv2", t, conv3x3(nf, nf));
    x = b.add(p + "add", t, x);
  }
  x = b.lrelu("up1_act", b.pixel_shuffle("up1_ps", b.conv("up1_conv", x, conv3x3(nf, nf * 4)), 2),
              0.1);
  x = b.lrelu("up2_act", b.pixel_shuffle("up2_ps", b.conv("up2_conv", x, conv3x3(nf, nf * 4)), 2),
              0.1);
  x = b.lrelu("hr_act", b.conv("hr_conv", x, conv3x3(nf, nf)), 0.1);
  x = b.conv("conv_last", x, conv3x3(nf, 3));
  EdgeRef base = b.interpolate("skip_up", in, 4, InterpMode::bilinear);
  b.output(b.add("final_add", x, base));
  GraphIR g = b.build();
  init_weights(g, seed);
  return g;
}

// Information multi-distillation network: each block distills a quarter of the
// channels three times, fuses with a contrast-aware attention (mean + std
// pooling), and all block outputs are aggregated with a 1x1 conv.
inline GraphIR build_imdn(int64_t nf = 64, int64_t nb = 8, uint32_t seed = 1) {
  const int64_t dc = nf / 4;       // distilled channels
  const int64_t rc = nf - dc;      // remaining channels
  const int64_t red = nf / 4;      // attention bottleneck
  const double sl = 0.05;
  GraphBuilder b("imdn", 4);
  EdgeRef in = b.input();
  EdgeRef fea = b.conv("conv_first", in, conv3x3(3, nf));
  std::vector<EdgeRef> blocks;
  EdgeRef x = fea;
  for (int i = 0; i < nb; ++i) {
    const std::string p = detail::block_id("b", i, 1) + "_";
    EdgeRef a1 = b.lrelu(p + "a1", b.conv(p + "c1", x, conv3x3(nf, nf)), sl);
    std::string s1 = b.split(p + "s1", a1, {dc, rc});
    EdgeRef a2 = b.lrelu(p + "a2", b.conv(p + "c2", {s1, 1}, conv3x3(rc, nf)), sl);
    std::string s2 = b.split(p + "s2", a2, {dc, rc});
    EdgeRef a3 = b.lrelu(p + "a3", b.conv(p + "c3", {s2, 1}, conv3x3(rc, nf)), sl);
    std::string s3 = b.split(p + "s3", a3, {dc, rc});
    EdgeRef d4 = b.conv(p + "c4", {s3, 1}, conv3x3(rc, dc));
    EdgeRef cat = b.concat(p + "cat", {{s1, 0}, {s2, 0}, {s3, 0}, d4});
    EdgeRef att = b.global_pool(p + "gp", cat, GlobalStat::avg_plus_std);
    att = b.relu(p + "crelu", b.conv(p + "cd", att, conv1x1(nf, red)));
    att = b.sigmoid(p + "csig", b.conv(p + "cu", att, conv1x1(red, nf)));
    EdgeRef gated = b.mul(p + "cmul", cat, att);
    EdgeRef fused = b.conv(p + "c5", gated, conv1x1(nf, nf));
    x = b.add(p + "add", fused, x);
    blocks.push_back(x);
  }
  EdgeRef cat = b.concat("cat_all", blocks);
  EdgeRef fusedall = b.lrelu("fuse_act", b.conv("fuse", cat, conv1x1(nf * nb, nf)), sl);
  EdgeRef lr = b.conv("lr_conv", fusedall, conv3x3(nf, nf));
  EdgeRef trunk = b.add("long_add", lr, fea);
  EdgeRef up = b.pixel_shuffle("up_ps", b.conv("up_conv", trunk, conv3x3(nf, 3 * 16)), 4);
  b.output(up);
  GraphIR g = b.build();
  init_weights(g, seed);
  return g;
}

namespace detail {

// Spatial attention: squeeze to f channels, shrink with a strided conv and a
// 7x7/3 max pool, process, resize back to the block's resolution, and gate.
inline EdgeRef esa(GraphBuilder& b, const std::string& p, EdgeRef x, int64_t nf, int64_t f) {
  EdgeRef e1 = b.conv(p + "e1", x, conv1x1(nf, f));
  EdgeRef ef = b.conv(p + "ef", e1, conv1x1(f, f));
  EdgeRef e2 = b.conv(p + "e2", e1, make_conv(f, f, 3, 3, 2, 0, 0, 0, 0, true));
  PoolAttrs mp;
  mp.k_h = 7;
  mp.k_w = 7;
  mp.stride_h = 3;
  mp.stride_w = 3;
  EdgeRef v = b.max_pool(p + "epool", e2, mp);
  v = b.relu(p + "emax_act", b.conv(p + "emax", v, conv3x3(f, f)));
  v = b.relu(p + "e3_act", b.conv(p + "e3", v, conv3x3(f, f)));
  v = b.conv(p + "e3b", v, conv3x3(f, f));
  v = b.interpolate_like(p + "eup", v, x, InterpMode::bilinear);
  v = b.add(p + "eadd", v, ef);
  v = b.sigmoid(p + "esig", b.conv(p + "e4", v, conv1x1(f, nf)));
  return b.mul(p + "emul", x, v);
}

}  // namespace detail

// Residual feature distillation network: shallow residual blocks with 1x1
// distillation taps and a spatial attention tail per block.
inline GraphIR build_rfdn(int64_t nf = 50, int64_t nb = 4, uint32_t seed = 1) {
  const int64_t dc = nf / 2;
  const int64_t f = nf / 4;
  const double sl = 0.05;
  GraphBuilder b("rfdn", 4);
  EdgeRef in = b.input();
  EdgeRef fea = b.conv("fea", in, conv3x3(3, nf));
  std::vector<EdgeRef> blocks;
  EdgeRef x = fea;
  for (int i = 0; i < nb; ++i) {
    const std::string p = detail::block_id("b", i, 1) + "_";
    EdgeRef r = x;
    std::vector<EdgeRef> distilled;
    for (int j = 1; j <= 3; ++j) {
      const std::string q = p + "sr" + std::to_string(j) + "_";
      distilled.push_back(
          b.lrelu(q + "d_act", b.conv(q + "d", r, conv1x1(nf, dc)), sl));
      EdgeRef t = b.conv(q + "r", r, conv3x3(nf, nf));
      r = b.lrelu(q + "act", b.add(q + "add", t, r), sl);
    }
    EdgeRef r4 = b.lrelu(p + "c4_act", b.conv(p + "c4", r, conv3x3(nf, dc)), sl);
    distilled.push_back(r4);
    EdgeRef cat = b.concat(p + "cat", distilled);
    EdgeRef fused = b.conv(p + "c5", cat, conv1x1(dc * 4, nf));
    x = detail::esa(b, p, fused, nf, f);
    blocks.push_back(x);
  }
  EdgeRef cat = b.concat("cat_all", blocks);
  EdgeRef fusedall = b.lrelu("fuse_act", b.conv("fuse", cat, conv1x1(nf * nb, nf)), sl);
  EdgeRef lr = b.conv("lr_conv", fusedall, conv3x3(nf, nf));
  EdgeRef trunk = b.add("long_add", lr, fea);
  EdgeRef up = b.pixel_shuffle("up_ps", b.conv("up_conv", trunk, conv3x3(nf, 3 * 16)), 4);
  b.output(up);
  GraphIR g = b.build();
  init_weights(g, seed);
  return g;
}

// Fast distillation variant: plain split/concat blocks without attention, a
// long skip over the block stack, and one-shot x4 pixel shuffle. The training
// form expands every 3x3 block conv into parallel 3x3 + 1x3 + 3x1 branches
// that sum; collapsing them reproduces the deploy form exactly.
inline GraphIR build_fimdn(bool deploy = true, int64_t nf = 64, int64_t nb = 6,
                           uint32_t seed = 1) {
  const int64_t dc = nf / 4;
  const int64_t rc = nf - dc;
  const double sl = 0.05;
  GraphBuilder b(deploy ? "fimdn" : "fimdn-train", 4);
  EdgeRef in = b.input();
  EdgeRef fea = b.conv("fea", in, conv3x3(3, nf));

  auto block_conv3 = [&](const std::string& id, EdgeRef src, int64_t ci, int64_t co) -> EdgeRef {
    if (deploy) return b.conv(id, src, conv3x3(ci, co));
    EdgeRef k33 = b.conv(id, src, conv3x3(ci, co));
    EdgeRef k13 = b.conv(id + "_h", src, make_conv(ci, co, 1, 3, 1, 0, 0, 1, 1, true));
    EdgeRef k31 = b.conv(id + "_v", src, make_conv(ci, co, 3, 1, 1, 1, 1, 0, 0, true));
    EdgeRef s = b.add(id + "_hs", k33, k13);
    return b.add(id + "_vs", s, k31);
  };

  EdgeRef x = fea;
  for (int i = 0; i < nb; ++i) {
    const std::string p = detail::block_id("b", i, 1) + "_";
    EdgeRef a1 = b.lrelu(p + "a1", block_conv3(p + "c1", x, nf, nf), sl);
    std::string s1 = b.split(p + "s1", a1, {dc, rc});
    EdgeRef a2 = b.lrelu(p + "a2", block_conv3(p + "c2", {s1, 1}, rc, nf), sl);
    std::string s2 = b.split(p + "s2", a2, {dc, rc});
    EdgeRef a3 = b.lrelu(p + "a3", block_conv3(p + "c3", {s2, 1}, rc, nf), sl);
    std::string s3 = b.split(p + "s3", a3, {dc, rc});
    EdgeRef d4 = block_conv3(p + "c4", {s3, 1}, rc, dc);
    EdgeRef cat = b.concat(p + "cat", {{s1, 0}, {s2, 0}, {s3, 0}, d4});
    EdgeRef fused = b.conv(p + "c5", cat, conv1x1(nf, nf));
    x = b.add(p + "add", fused, x);
  }
  EdgeRef lr = b.conv("lr_conv", x, conv3x3(nf, nf));
  EdgeRef trunk = b.add("long_add", lr, fea);
  EdgeRef up = b.pixel_shuffle("up_ps", b.conv("up_conv", trunk, conv3x3(nf, 3 * 16)), 4);
  b.output(up);
  GraphIR g = b.build();
  init_weights(g, seed);
  return g;
}

// Pixel attention network: self-calibrated blocks with a pixel-attention
// branch, nearest-neighbor upsampling with pixel attention at each stage, and
// a bilinear global skip. Most convs carry no bias.
inline GraphIR build_pan(int64_t nf = 40, int64_t unf = 24, int64_t nb = 16, uint32_t seed = 1) {
  const int64_t gw = nf / 2;
  const double sl = 0.2;
  GraphBuilder b("pan", 4);
  EdgeRef in = b.input();
  EdgeRef fea = b.conv("conv_first", in, conv3x3(3, nf));
  EdgeRef x = fea;
  for (int i = 0; i < nb; ++i) {
    const std::string p = detail::block_id("b", i, 2) + "_";
    EdgeRef a = b.lrelu(p + "a1a", b.conv(p + "c1a", x, conv1x1(nf, gw, false)), sl);
    EdgeRef bb = b.lrelu(p + "a1b", b.conv(p + "c1b", x, conv1x1(nf, gw, false)), sl);
    a = b.conv(p + "k1", a, conv3x3(gw, gw, false));
    EdgeRef att = b.sigmoid(p + "sig", b.conv(p + "k2", bb, conv1x1(gw, gw)));
    EdgeRef pb = b.mul(p + "pmul", b.conv(p + "k3", bb, conv3x3(gw, gw, false)), att);
    pb = b.conv(p + "k4", pb, conv3x3(gw, gw, false));
    a = b.lrelu(p + "aa", a, sl);
    pb = b.lrelu(p + "ab", pb, sl);
    EdgeRef cat = b.concat(p + "cat", {a, pb});
    EdgeRef fused = b.conv(p + "c3", cat, conv1x1(gw * 2, nf, false));
    x = b.add(p + "add", fused, x);
  }
  x = b.conv("trunk_conv", x, conv3x3(nf, nf));
  x = b.add("trunk_add", x, fea);

  auto up_stage = [&](const std::string& p, EdgeRef src, int64_t ci, int64_t co) -> EdgeRef {
    EdgeRef t = b.interpolate(p + "int", src, 2, InterpMode::nearest);
    t = b.conv(p + "conv", t, conv3x3(ci, co));
    EdgeRef att = b.sigmoid(p + "att_sig", b.conv(p + "att", t, conv1x1(co, co)));
    t = b.lrelu(p + "att_act", b.mul(p + "att_mul", t, att), sl);
    t = b.lrelu(p + "hr_act", b.conv(p + "hr", t, conv3x3(co, co)), sl);
    return t;
  };
  x = up_stage("up1_", x, nf, unf);
  x = up_stage("up2_", x, unf, unf);
  x = b.conv("conv_last", x, conv3x3(unf, 3));
  EdgeRef base = b.interpolate("skip_up", in, 4, InterpMode::bilinear);
  b.output(b.add("final_add", x, base));
  GraphIR g = b.build();
  init_weights(g, seed);
  return g;
}

inline std::vector<std::string> model_names() {
  return {"fimdn", "fimdn-train", "imdn", "msrresnet", "pan", "rfdn"};
}

inline GraphIR build_model(const std::string& name, uint32_t seed = 1) {
  if (name == "msrresnet") return build_msrresnet(64, 16, seed);
  if (name == "imdn") return build_imdn(64, 8, seed);
  if (name == "rfdn") return build_rfdn(50, 4, seed);
  if (name == "fimdn") return build_fimdn(true, 64, 6, seed);
  if (name == "fimdn-train") return build_fimdn(false, 64, 6, seed);
  if (name == "pan") return build_pan(40, 24, 16, seed);
  throw DataError("unknown model '" + name + "'");
}

}  // namespace srzoo
