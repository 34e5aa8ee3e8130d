#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "srzoo/graph.hpp"

namespace srzoo {

namespace detail {

inline void require(bool ok, const std::string& msg) {
  if (!ok) throw ShapeError(msg);
}

inline bool same_conv_geometry(const Conv2dParams& a, const Conv2dParams& b) {
  return a.c_in == b.c_in && a.c_out == b.c_out && a.stride_h == b.stride_h &&
         a.stride_w == b.stride_w && a.dil_h == b.dil_h && a.dil_w == b.dil_w &&
         a.groups == b.groups;
}

}  // namespace detail

// Collapse a parallel 3x3 + 1x3 + 3x1 branch sum into one 3x3 conv: the row
// kernel lands on the center row, the column kernel on the center column.
// Branch paddings must align the three output grids: (1,1,1,1), (0,0,1,1),
// (1,1,0,0). The result always carries a bias (sum of the branch biases).
inline Conv2dParams fuse_cac(const Conv2dParams& k33, const Conv2dParams& k13,
                             const Conv2dParams& k31) {
  detail::require(k33.k_h == 3 && k33.k_w == 3, "fuse_cac: first kernel must be 3x3");
  detail::require(k13.k_h == 1 && k13.k_w == 3, "fuse_cac: second kernel must be 1x3");
  detail::require(k31.k_h == 3 && k31.k_w == 1, "fuse_cac: third kernel must be 3x1");
  detail::require(k33.pad_top == 1 && k33.pad_bottom == 1 && k33.pad_left == 1 &&
                      k33.pad_right == 1,
                  "fuse_cac: 3x3 branch must pad (1,1,1,1)");
  detail::require(k13.pad_top == 0 && k13.pad_bottom == 0 && k13.pad_left == 1 &&
                      k13.pad_right == 1,
                  "fuse_cac: 1x3 branch must pad (0,0,1,1)");
  detail::require(k31.pad_top == 1 && k31.pad_bottom == 1 && k31.pad_left == 0 &&
                      k31.pad_right == 0,
                  "fuse_cac: 3x1 branch must pad (1,1,0,0)");
  detail::require(detail::same_conv_geometry(k33, k13) && detail::same_conv_geometry(k33, k31),
                  "fuse_cac: branch shapes disagree");
  detail::require(k33.dil_h == 1 && k33.dil_w == 1, "fuse_cac: dilation must be 1");
  detail::require(k33.materialized() && k13.materialized() && k31.materialized(),
                  "fuse_cac: branches must have weights");

  Conv2dParams f = k33;
  const int64_t cinpg = f.c_in / f.groups;
  for (int64_t o = 0; o < f.c_out; ++o)
    for (int64_t i = 0; i < cinpg; ++i) {
      for (int64_t kx = 0; kx < 3; ++kx)
        f.w_at(o, i, 1, kx) += k13.w_at(o, i, 0, kx);
      for (int64_t ky = 0; ky < 3; ++ky)
        f.w_at(o, i, ky, 1) += k31.w_at(o, i, ky, 0);
    }
  f.has_bias = k33.has_bias || k13.has_bias || k31.has_bias;
  f.bias.clear();
  if (f.has_bias) {
    f.bias.assign(static_cast<size_t>(f.c_out), 0.0);
    for (int64_t o = 0; o < f.c_out; ++o) {
      double s = 0.0;
      if (k33.has_bias) s += k33.bias[static_cast<size_t>(o)];
      if (k13.has_bias) s += k13.bias[static_cast<size_t>(o)];
      if (k31.has_bias) s += k31.bias[static_cast<size_t>(o)];
      f.bias[static_cast<size_t>(o)] = s;
    }
  }
  return f;
}

struct KernelBases {
  std::vector<Conv2dParams> kernels;
  std::vector<double> coeffs;
};

// Linear combination of same-geometry kernels: weights (and biases) are summed
// with the given coefficients, so conv(x, merged) == sum_i coeffs[i] *
// conv(x, kernels[i]).
inline Conv2dParams merge_kernel_bases(const KernelBases& kb) {
  detail::require(!kb.kernels.empty(), "merge_kernel_bases: no kernels");
  detail::require(kb.kernels.size() == kb.coeffs.size(),
                  "merge_kernel_bases: kernel/coefficient count mismatch");
  const Conv2dParams& k0 = kb.kernels[0];
  for (const auto& k : kb.kernels) {
    detail::require(detail::same_conv_geometry(k0, k) && k.k_h == k0.k_h && k.k_w == k0.k_w &&
                        k.pad_top == k0.pad_top && k.pad_bottom == k0.pad_bottom &&
                        k.pad_left == k0.pad_left && k.pad_right == k0.pad_right,
                    "merge_kernel_bases: kernel geometry disagrees");
    detail::require(k.materialized(), "merge_kernel_bases: kernel has no weights");
  }
  Conv2dParams m = k0;
  std::fill(m.weights.begin(), m.weights.end(), 0.0);
  m.has_bias = false;
  for (const auto& k : kb.kernels)
    if (k.has_bias) m.has_bias = true;
  if (m.has_bias) m.bias.assign(static_cast<size_t>(m.c_out), 0.0);
  for (size_t i = 0; i < kb.kernels.size(); ++i) {
    const Conv2dParams& k = kb.kernels[i];
    const double c = kb.coeffs[i];
    for (size_t j = 0; j < k.weights.size(); ++j) m.weights[j] += c * k.weights[j];
    if (k.has_bias)
      for (int64_t o = 0; o < k.c_out; ++o) m.bias[static_cast<size_t>(o)] += c * k.bias[static_cast<size_t>(o)];
  }
  return m;
}

// Per-channel scale factors around one conv: pre[i] multiplies input channel
// i, post[o] multiplies output channel o. Empty vectors mean all ones.
struct ChannelGates {
  std::vector<double> pre;
  std::vector<double> post;
};

// Folds gates into the conv's parameters so that
//   diag(post) . conv(diag(pre) . x) == conv'(x).
inline void fold_gates(GraphIR& g, const std::string& node_id, const ChannelGates& gates) {
  const Node& n = g.node(node_id);
  if (n.kind != NodeKind::Conv2d) throw GraphError("fold_gates: '" + node_id + "' is not a conv");
  Conv2dParams& p = g.convs.at(n.blob);
  detail::require(p.materialized(), "fold_gates: conv has no weights");
  if (!gates.pre.empty())
    detail::require(static_cast<int64_t>(gates.pre.size()) == p.c_in,
                    "fold_gates: pre gate size mismatch");
  if (!gates.post.empty())
    detail::require(static_cast<int64_t>(gates.post.size()) == p.c_out,
                    "fold_gates: post gate size mismatch");
  const int64_t cinpg = p.c_in / p.groups;
  const int64_t coutpg = p.c_out / p.groups;
  for (int64_t o = 0; o < p.c_out; ++o) {
    const int64_t grp = o / coutpg;
    const double po = gates.post.empty() ? 1.0 : gates.post[static_cast<size_t>(o)];
    for (int64_t i = 0; i < cinpg; ++i) {
      const double pi =
          gates.pre.empty() ? 1.0 : gates.pre[static_cast<size_t>(grp * cinpg + i)];
      for (int64_t ky = 0; ky < p.k_h; ++ky)
        for (int64_t kx = 0; kx < p.k_w; ++kx) p.w_at(o, i, ky, kx) *= po * pi;
    }
    if (p.has_bias) p.bias[static_cast<size_t>(o)] *= po;
  }
}

struct PruneResult {
  int64_t removed_channels = 0;
  int64_t params_before = 0;
  int64_t params_after = 0;
};

namespace detail {

struct PortKey {
  std::string node;
  int port;
  bool operator<(const PortKey& o) const {
    return node != o.node ? node < o.node : port < o.port;
  }
};

// consumers of each produced value: (node, port) -> list of reader node ids
inline std::map<PortKey, std::vector<std::string>> consumer_map(const GraphIR& g) {
  std::map<PortKey, std::vector<std::string>> m;
  for (const auto& n : g.nodes)
    for (const auto& e : n.inputs) m[{e.node, e.port}].push_back(n.id);
  return m;
}

inline std::vector<double> erase_masked(const std::vector<double>& v,
                                        const std::vector<bool>& dead) {
  std::vector<double> out;
  out.reserve(v.size());
  for (size_t i = 0; i < v.size(); ++i)
    if (!dead[i]) out.push_back(v[i]);
  return out;
}

}  // namespace detail

// Removes channels whose gate is exactly zero. Gates are first folded into the
// conv parameters (value-exact), then structurally dead channels are deleted:
// a zero output channel is dropped from its conv, tracked through
// zero-preserving pointwise ops (relu / leaky_relu / prelu) and channel
// reindexing (split / concat), and the matching input columns are dropped from
// every downstream conv. A zero pre-gate deletes the producing channel only
// when this conv is its sole reader along the chain; otherwise the column is
// just zeroed. A dead channel reaching add, mul, sigmoid, pooling, resampling,
// or the graph output raises GraphError, since deletion there would change
// values or alignment.
inline PruneResult prune_zero_gates(GraphIR& g,
                                    const std::map<std::string, ChannelGates>& gates) {
  g.validate();
  PruneResult res;
  for (const auto& [name, p] : g.convs) res.params_before += p.param_count();
  for (const auto& [name, s] : g.slopes) res.params_before += static_cast<int64_t>(s.size());

  for (const auto& [id, gv] : gates) {
    const Node& n = g.node(id);
    if (n.kind != NodeKind::Conv2d)
      throw GraphError("prune_zero_gates: '" + id + "' is not a conv");
    if (g.convs.at(n.blob).groups != 1)
      throw GraphError("prune_zero_gates: grouped conv '" + id + "' is not supported");
    fold_gates(g, id, gv);
  }

  const auto consumers = detail::consumer_map(g);
  const auto shapes = g.infer_shapes({1, 3, 64, 64});
  auto sole_reader = [&](const std::string& node, int port) -> const std::string* {
    auto it = consumers.find({node, port});
    if (it == consumers.end() || it->second.size() != 1) return nullptr;
    return &it->second[0];
  };

  // dead output channels per conv node id
  std::map<std::string, std::vector<bool>> dead_out;
  auto mark_dead = [&](const std::string& conv_id, int64_t ch) {
    const Node& n = g.node(conv_id);
    auto& mask = dead_out[conv_id];
    mask.resize(static_cast<size_t>(g.convs.at(n.blob).c_out), false);
    mask[static_cast<size_t>(ch)] = true;
  };

  for (const auto& [id, gv] : gates) {
    for (size_t o = 0; o < gv.post.size(); ++o)
      if (gv.post[o] == 0.0) mark_dead(id, static_cast<int64_t>(o));

    // Zero pre-gates: walk back to the producing conv channel; delete it only
    // if every value along the chain has this chain as its only reader.
    for (size_t i = 0; i < gv.pre.size(); ++i) {
      if (gv.pre[i] != 0.0) continue;
      EdgeRef cur = g.node(id).inputs[0];
      int64_t ch = static_cast<int64_t>(i);
      bool ok = true;
      while (ok) {
        if (!sole_reader(cur.node, cur.port)) { ok = false; break; }
        const Node& src = g.node(cur.node);
        switch (src.kind) {
          case NodeKind::Conv2d:
            if (g.convs.at(src.blob).groups != 1) { ok = false; break; }
            mark_dead(src.id, ch);
            ok = false;  // done walking
            ch = -1;     // sentinel: marked
            break;
          case NodeKind::ReLU:
          case NodeKind::LeakyReLU:
          case NodeKind::PReLU: cur = src.inputs[0]; break;
          case NodeKind::Split: {
            int64_t off = 0;
            for (int p = 0; p < cur.port; ++p) off += src.sizes[static_cast<size_t>(p)];
            ch += off;
            cur = src.inputs[0];
            break;
          }
          case NodeKind::Concat: {
            // find which part holds channel ch
            bool found = false;
            for (const auto& e : src.inputs) {
              const int64_t width = shapes.at(e.node).at(static_cast<size_t>(e.port)).c;
              if (ch < width) {
                cur = e;
                found = true;
                break;
              }
              ch -= width;
            }
            if (!found) ok = false;
            break;
          }
          default: ok = false; break;
        }
        if (ch == -1) break;
      }
    }
  }

  if (dead_out.empty()) {
    res.params_after = res.params_before;
    return res;
  }

  // Forward pass in canonical order: carry a dead mask per value, record
  // column deletions at consuming convs, reject anything else that sees a
  // dead channel.
  std::map<std::string, std::vector<std::vector<bool>>> mask;  // node -> per port
  std::map<std::string, std::vector<bool>> dead_in;            // conv node -> input cols
  auto any = [](const std::vector<bool>& m) {
    return std::any_of(m.begin(), m.end(), [](bool b) { return b; });
  };
  for (const auto& id : g.topo_order()) {
    const Node& n = g.node(id);
    std::vector<std::vector<bool>> in_masks;
    for (const auto& e : n.inputs) in_masks.push_back(mask.at(e.node)[static_cast<size_t>(e.port)]);
    std::vector<std::vector<bool>> out;
    switch (n.kind) {
      case NodeKind::Input:
        out.push_back(std::vector<bool>(static_cast<size_t>(shapes.at(id)[0].c), false));
        break;
      case NodeKind::Conv2d: {
        if (any(in_masks[0])) {
          auto& cols = dead_in[id];
          cols = in_masks[0];
          if (g.convs.at(n.blob).groups != 1)
            throw GraphError("prune_zero_gates: dead channel feeds grouped conv '" + id + "'");
        }
        auto it = dead_out.find(id);
        if (it != dead_out.end()) out.push_back(it->second);
        else out.push_back(std::vector<bool>(static_cast<size_t>(g.convs.at(n.blob).c_out), false));
        break;
      }
      case NodeKind::ReLU:
      case NodeKind::LeakyReLU:
      case NodeKind::PReLU: out.push_back(in_masks[0]); break;
      case NodeKind::Split: {
        size_t off = 0;
        for (int64_t s : n.sizes) {
          out.emplace_back(in_masks[0].begin() + static_cast<long>(off),
                           in_masks[0].begin() + static_cast<long>(off + static_cast<size_t>(s)));
          off += static_cast<size_t>(s);
        }
        break;
      }
      case NodeKind::Concat: {
        std::vector<bool> m;
        for (const auto& im : in_masks) m.insert(m.end(), im.begin(), im.end());
        out.push_back(std::move(m));
        break;
      }
      default: {
        for (const auto& im : in_masks)
          if (any(im))
            throw GraphError("prune_zero_gates: dead channel reaches " +
                             std::string(kind_name(n.kind)) + " '" + id + "'");
        if (n.kind != NodeKind::Output)
          for (const auto& s : shapes.at(id))
            out.push_back(std::vector<bool>(static_cast<size_t>(s.c), false));
        break;
      }
    }
    mask[id] = std::move(out);
  }

  // Apply deletions.
  for (auto& n : g.nodes) {
    if (n.kind == NodeKind::Conv2d) {
      Conv2dParams& p = g.convs.at(n.blob);
      const auto ito = dead_out.find(n.id);
      const std::vector<bool>* drop_rows = ito != dead_out.end() ? &ito->second : nullptr;
      const auto iti = dead_in.find(n.id);
      const std::vector<bool>* drop_cols = iti != dead_in.end() ? &iti->second : nullptr;
      if (!drop_rows && !drop_cols) continue;
      const int64_t new_cout =
          drop_rows ? p.c_out - std::count(drop_rows->begin(), drop_rows->end(), true) : p.c_out;
      const int64_t new_cin =
          drop_cols ? p.c_in - std::count(drop_cols->begin(), drop_cols->end(), true) : p.c_in;
      if (new_cout < 1)
        throw GraphError("prune_zero_gates: conv '" + n.id + "' would lose all outputs");
      if (new_cin < 1)
        throw GraphError("prune_zero_gates: conv '" + n.id + "' would lose all inputs");
      std::vector<double> w;
      w.reserve(static_cast<size_t>(new_cout * new_cin * p.k_h * p.k_w));
      for (int64_t o = 0; o < p.c_out; ++o) {
        if (drop_rows && (*drop_rows)[static_cast<size_t>(o)]) continue;
        for (int64_t i = 0; i < p.c_in; ++i) {
          if (drop_cols && (*drop_cols)[static_cast<size_t>(i)]) continue;
          for (int64_t ky = 0; ky < p.k_h; ++ky)
            for (int64_t kx = 0; kx < p.k_w; ++kx) w.push_back(p.w_at(o, i, ky, kx));
        }
      }
      if (drop_rows) {
        res.removed_channels += std::count(drop_rows->begin(), drop_rows->end(), true);
        if (p.has_bias) p.bias = detail::erase_masked(p.bias, *drop_rows);
      }
      p.weights = std::move(w);
      p.c_out = new_cout;
      p.c_in = new_cin;
    } else if (n.kind == NodeKind::PReLU) {
      const auto& m = mask.at(n.id)[0];
      if (std::count(m.begin(), m.end(), true) == 0) continue;
      std::vector<bool> dead(m.begin(), m.end());
      g.slopes.at(n.blob) = detail::erase_masked(g.slopes.at(n.blob), dead);
    } else if (n.kind == NodeKind::Split) {
      size_t off = 0;
      const Node& node = n;
      const auto& im = mask.at(node.inputs[0].node)[static_cast<size_t>(node.inputs[0].port)];
      for (auto& s : n.sizes) {
        int64_t kept = 0;
        for (int64_t k = 0; k < s; ++k)
          if (!im[off + static_cast<size_t>(k)]) ++kept;
        off += static_cast<size_t>(s);
        if (kept < 1)
          throw GraphError("prune_zero_gates: split '" + n.id + "' port would become empty");
        s = kept;
      }
    }
  }

  g.validate();
  for (const auto& [name, p] : g.convs) res.params_after += p.param_count();
  for (const auto& [name, s] : g.slopes) res.params_after += static_cast<int64_t>(s.size());
  return res;
}

// Finds every Add(Add(a, b), c) tree whose three leaves are a 3x3, a 1x3 and a
// 3x1 conv reading the same value, collapses each into the 3x3 conv via
// fuse_cac, rewires the sum's readers to the 3x3 node, and drops the leftover
// nodes and blobs. Returns the number of sites fused; calling again finds
// nothing (idempotent).
inline int fuse_cac_sites(GraphIR& g) {
  int fused_total = 0;
  for (;;) {
    g.validate();
    const auto consumers = detail::consumer_map(g);
    auto reader_count = [&](const std::string& node, int port) -> size_t {
      auto it = consumers.find({node, port});
      return it == consumers.end() ? 0 : it->second.size();
    };
    auto conv_of = [&](const EdgeRef& e) -> const Node* {
      if (e.port != 0 || !g.has_node(e.node)) return nullptr;
      const Node& n = g.node(e.node);
      return n.kind == NodeKind::Conv2d ? &n : nullptr;
    };

    bool changed = false;
    for (const auto& n : g.nodes) {
      if (n.kind != NodeKind::Add) continue;
      // one side is the inner add, the other a conv leaf
      const Node* inner = nullptr;
      const Node* leaf_c = nullptr;
      for (int side = 0; side < 2; ++side) {
        const EdgeRef& e = n.inputs[static_cast<size_t>(side)];
        if (!g.has_node(e.node)) continue;
        const Node& cand = g.node(e.node);
        if (cand.kind == NodeKind::Add && reader_count(cand.id, 0) == 1) {
          inner = &cand;
          leaf_c = conv_of(n.inputs[static_cast<size_t>(1 - side)]);
        }
      }
      if (!inner || !leaf_c) continue;
      const Node* leaf_a = conv_of(inner->inputs[0]);
      const Node* leaf_b = conv_of(inner->inputs[1]);
      if (!leaf_a || !leaf_b) continue;
      const Node* leaves[3] = {leaf_a, leaf_b, leaf_c};
      const Node* by_shape[3] = {nullptr, nullptr, nullptr};  // 3x3, 1x3, 3x1
      for (const Node* l : leaves) {
        const Conv2dParams& p = g.convs.at(l->blob);
        int slot = -1;
        if (p.k_h == 3 && p.k_w == 3) slot = 0;
        else if (p.k_h == 1 && p.k_w == 3) slot = 1;
        else if (p.k_h == 3 && p.k_w == 1) slot = 2;
        if (slot < 0 || by_shape[slot]) { by_shape[0] = nullptr; break; }
        by_shape[slot] = l;
      }
      if (!by_shape[0] || !by_shape[1] || !by_shape[2]) continue;
      if (!(by_shape[0]->inputs[0] == by_shape[1]->inputs[0] &&
            by_shape[0]->inputs[0] == by_shape[2]->inputs[0]))
        continue;
      bool exclusive = true;
      for (const Node* l : leaves)
        if (reader_count(l->id, 0) != 1) exclusive = false;
      if (!exclusive) continue;

      Conv2dParams fused;
      try {
        fused = fuse_cac(g.convs.at(by_shape[0]->blob), g.convs.at(by_shape[1]->blob),
                         g.convs.at(by_shape[2]->blob));
      } catch (const ShapeError&) {
        continue;
      }

      const std::string keep = by_shape[0]->id;
      const std::string keep_blob = by_shape[0]->blob;
      const std::string drop_blob_h = by_shape[1]->blob;
      const std::string drop_blob_v = by_shape[2]->blob;
      std::set<std::string> remove = {n.id, inner->id, by_shape[1]->id, by_shape[2]->id};

      g.convs[keep_blob] = std::move(fused);
      const std::string sum_id = n.id;
      std::vector<Node> rebuilt;
      rebuilt.reserve(g.nodes.size());
      for (auto& node : g.nodes) {
        if (remove.count(node.id)) continue;
        for (auto& e : node.inputs)
          if (e.node == sum_id) e = {keep, 0};
        rebuilt.push_back(std::move(node));
      }
      g.nodes = std::move(rebuilt);
      // drop branch blobs unless some other node still references them
      std::set<std::string> live_blobs;
      for (const auto& node : g.nodes)
        if (node.kind == NodeKind::Conv2d) live_blobs.insert(node.blob);
      if (!live_blobs.count(drop_blob_h)) g.convs.erase(drop_blob_h);
      if (!live_blobs.count(drop_blob_v)) g.convs.erase(drop_blob_v);
      ++fused_total;
      changed = true;
      break;  // node list changed; restart scan
    }
    if (!changed) break;
  }
  return fused_total;
}

}  // namespace srzoo
