#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "srzoo/graph.hpp"

namespace srzoo {

// Per-model efficiency measurements at a fixed input size.
struct EfficiencyReport {
  std::string model;
  int64_t input_h = 0;
  int64_t input_w = 0;
  int64_t params = 0;
  int64_t flops = 0;        // multiply-accumulates over all convolutions
  int64_t activations = 0;  // elements written by conv outputs
  int64_t conv_layers = 0;
  int64_t peak_memory_bytes = 0;  // float32 proxy
};

// Total learnable scalars: conv weights + biases + prelu slopes. Blobs are
// counted once no matter how many nodes reference them.
inline int64_t count_params(const GraphIR& g) {
  int64_t total = 0;
  for (const auto& [name, p] : g.convs) total += p.param_count();
  for (const auto& [name, s] : g.slopes) total += static_cast<int64_t>(s.size());
  return total;
}

inline int64_t count_conv_layers(const GraphIR& g) {
  int64_t n = 0;
  for (const auto& node : g.nodes)
    if (node.kind == NodeKind::Conv2d) ++n;
  return n;
}

// Multiply-accumulates: (c_in/groups) * k_h * k_w * c_out * H_out * W_out per
// conv node, summed over the graph at the given input size.
inline int64_t count_flops(const GraphIR& g, const Shape& input) {
  const auto shapes = g.infer_shapes(input);
  int64_t total = 0;
  for (const auto& node : g.nodes) {
    if (node.kind != NodeKind::Conv2d) continue;
    const Conv2dParams& p = g.convs.at(node.blob);
    const Shape& out = shapes.at(node.id).at(0);
    total += (p.c_in / p.groups) * p.k_h * p.k_w * p.c_out * out.h * out.w;
  }
  return total;
}

// Elements produced by conv layers: c_out * H_out * W_out summed over conv
// nodes (batch dimension excluded by convention; reports use n = 1).
inline int64_t count_activations(const GraphIR& g, const Shape& input) {
  const auto shapes = g.infer_shapes(input);
  int64_t total = 0;
  for (const auto& node : g.nodes) {
    if (node.kind != NodeKind::Conv2d) continue;
    const Shape& out = shapes.at(node.id).at(0);
    total += out.c * out.h * out.w;
  }
  return total;
}

// Peak resident bytes while executing in canonical order, under a float32
// storage proxy (4 bytes per element). Parameters stay resident for the whole
// run; each node's outputs are allocated before its inputs can be released, and
// a value is released after its last consumer has run. The graph output is
// retained to the end.
inline int64_t estimate_peak_memory(const GraphIR& g, const Shape& input) {
  constexpr int64_t kBytes = 4;
  const auto shapes = g.infer_shapes(input);
  const auto order = g.topo_order();

  int64_t param_bytes = 0;
  for (const auto& [name, p] : g.convs) param_bytes += p.param_count() * kBytes;
  for (const auto& [name, s] : g.slopes) param_bytes += static_cast<int64_t>(s.size()) * kBytes;

  std::map<std::string, std::vector<int>> uses;
  for (const auto& n : g.nodes) {
    int ports = n.kind == NodeKind::Split ? static_cast<int>(n.sizes.size()) : 1;
    uses[n.id].assign(static_cast<size_t>(ports), 0);
  }
  for (const auto& n : g.nodes)
    for (const auto& e : n.inputs) ++uses[e.node][static_cast<size_t>(e.port)];

  int64_t live = param_bytes;
  int64_t peak = live;
  std::map<std::string, std::vector<int64_t>> held;  // bytes per port still resident
  for (const auto& id : order) {
    const Node& n = g.node(id);
    // Output forwards its input; it allocates nothing.
    if (n.kind != NodeKind::Output) {
      const auto& outs = shapes.at(id);
      auto& h = held[id];
      h.resize(outs.size(), 0);
      for (size_t p = 0; p < outs.size(); ++p) {
        h[p] = outs[p].numel() * kBytes;
        live += h[p];
      }
    }
    if (live > peak) peak = live;
    for (const auto& e : n.inputs) {
      int& remaining = uses[e.node][static_cast<size_t>(e.port)];
      if (--remaining == 0 && n.kind != NodeKind::Output) {
        live -= held[e.node][static_cast<size_t>(e.port)];
        held[e.node][static_cast<size_t>(e.port)] = 0;
      }
    }
  }
  return peak;
}

inline EfficiencyReport analyze(const GraphIR& g, int64_t input_h, int64_t input_w) {
  const Shape in{1, 3, input_h, input_w};
  EfficiencyReport r;
  r.model = g.name;
  r.input_h = input_h;
  r.input_w = input_w;
  r.params = count_params(g);
  r.flops = count_flops(g, in);
  r.activations = count_activations(g, in);
  r.conv_layers = count_conv_layers(g);
  r.peak_memory_bytes = estimate_peak_memory(g, in);
  return r;
}

}  // namespace srzoo
