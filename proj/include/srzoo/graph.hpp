#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <queue>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "srzoo/conv.hpp"
#include "srzoo/resample.hpp"
#include "srzoo/tensor.hpp"

namespace srzoo {

enum class NodeKind {
  Input,
  Output,
  Conv2d,
  LeakyReLU,
  ReLU,
  PReLU,
  Sigmoid,
  PixelShuffle,
  Interpolate,
  Concat,
  Split,
  Add,
  Mul,
  AvgPool,
  MaxPool,
  GlobalPool,
};

inline const char* kind_name(NodeKind k) {
  switch (k) {
    case NodeKind::Input: return "input";
    case NodeKind::Output: return "output";
    case NodeKind::Conv2d: return "conv2d";
    case NodeKind::LeakyReLU: return "leaky_relu";
    case NodeKind::ReLU: return "relu";
    case NodeKind::PReLU: return "prelu";
    case NodeKind::Sigmoid: return "sigmoid";
    case NodeKind::PixelShuffle: return "pixel_shuffle";
    case NodeKind::Interpolate: return "interpolate";
    case NodeKind::Concat: return "concat";
    case NodeKind::Split: return "split";
    case NodeKind::Add: return "add";
    case NodeKind::Mul: return "mul";
    case NodeKind::AvgPool: return "avg_pool";
    case NodeKind::MaxPool: return "max_pool";
    case NodeKind::GlobalPool: return "global_pool";
  }
  return "?";
}

inline NodeKind kind_from_name(const std::string& s) {
  static const std::map<std::string, NodeKind> table = {
      {"input", NodeKind::Input},
      {"output", NodeKind::Output},
      {"conv2d", NodeKind::Conv2d},
      {"leaky_relu", NodeKind::LeakyReLU},
      {"relu", NodeKind::ReLU},
      {"prelu", NodeKind::PReLU},
      {"sigmoid", NodeKind::Sigmoid},
      {"pixel_shuffle", NodeKind::PixelShuffle},
      {"interpolate", NodeKind::Interpolate},
      {"concat", NodeKind::Concat},
      {"split", NodeKind::Split},
      {"add", NodeKind::Add},
      {"mul", NodeKind::Mul},
      {"avg_pool", NodeKind::AvgPool},
      {"max_pool", NodeKind::MaxPool},
      {"global_pool", NodeKind::GlobalPool},
  };
  auto it = table.find(s);
  if (it == table.end()) throw DataError("unknown node kind '" + s + "'");
  return it->second;
}

inline InterpMode interp_mode_from_name(const std::string& s) {
  if (s == "nearest") return InterpMode::nearest;
  if (s == "bilinear") return InterpMode::bilinear;
  if (s == "bicubic") return InterpMode::bicubic;
  throw DataError("unknown interpolation mode '" + s + "'");
}

inline GlobalStat global_stat_from_name(const std::string& s) {
  if (s == "avg") return GlobalStat::avg;
  if (s == "avg_plus_std") return GlobalStat::avg_plus_std;
  throw DataError("unknown global pool stat '" + s + "'");
}

inline const char* global_stat_name(GlobalStat s) {
  return s == GlobalStat::avg ? "avg" : "avg_plus_std";
}

// A value produced by a node. Every node has one output port except Split,
// which has one port per requested slice.
struct EdgeRef {
  std::string node;
  int port = 0;

  EdgeRef() = default;
  EdgeRef(std::string n, int p = 0) : node(std::move(n)), port(p) {}
  friend bool operator==(const EdgeRef& a, const EdgeRef& b) {
    return a.node == b.node && a.port == b.port;
  }
};

struct Node {
  std::string id;
  NodeKind kind = NodeKind::Input;
  std::vector<EdgeRef> inputs;

  std::string blob;      // Conv2d / PReLU: parameter key
  double slope = 0.01;   // LeakyReLU
  int64_t factor = 1;    // PixelShuffle / Interpolate scale
  InterpMode mode = InterpMode::nearest;  // Interpolate
  std::vector<int64_t> sizes;             // Split
  PoolAttrs pool;                         // AvgPool / MaxPool
  GlobalStat stat = GlobalStat::avg;      // GlobalPool
};

struct Shape {
  int64_t n = 0, c = 0, h = 0, w = 0;
  friend bool operator==(const Shape& a, const Shape& b) {
    return a.n == b.n && a.c == b.c && a.h == b.h && a.w == b.w;
  }
  int64_t numel() const { return n * c * h * w; }
  std::string str() const {
    return "(" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(h) + "," +
           std::to_string(w) + ")";
  }
};

struct ExecOptions {
  int threads = 1;
};

// Dataflow graph over the dense kernels. Node ids are unique; execution and
// shape inference follow the canonical topological order (Kahn's algorithm,
// lexicographically smallest id first), so results are reproducible across
// runs and platforms.
class GraphIR {
 public:
  std::string name;
  int64_t scale = 1;
  std::vector<Node> nodes;
  std::map<std::string, Conv2dParams> convs;
  std::map<std::string, std::vector<double>> slopes;

  Node& add(Node n) {
    nodes.push_back(std::move(n));
    index_.clear();
    return nodes.back();
  }

  const Node& node(const std::string& id) const {
    build_index();
    auto it = index_.find(id);
    if (it == index_.end()) throw GraphError("no node '" + id + "'");
    return nodes[it->second];
  }

  Node& node(const std::string& id) {
    build_index();
    auto it = index_.find(id);
    if (it == index_.end()) throw GraphError("no node '" + id + "'");
    return nodes[it->second];
  }

  bool has_node(const std::string& id) const {
    build_index();
    return index_.count(id) != 0;
  }

  int out_ports(const Node& n) const {
    return n.kind == NodeKind::Split ? static_cast<int>(n.sizes.size()) : 1;
  }

  // Structural checks; throws GraphError on the first violation.
  void validate() const {
    build_index();
    if (index_.size() != nodes.size()) throw GraphError("duplicate node id");
    int n_in = 0, n_out = 0;
    for (const auto& n : nodes) {
      if (n.id.empty()) throw GraphError("empty node id");
      if (n.kind == NodeKind::Input) ++n_in;
      if (n.kind == NodeKind::Output) ++n_out;
      check_arity(n);
      for (const auto& e : n.inputs) {
        auto it = index_.find(e.node);
        if (it == index_.end())
          throw GraphError("node '" + n.id + "' reads undefined node '" + e.node + "'");
        const Node& src = nodes[it->second];
        if (src.kind == NodeKind::Output)
          throw GraphError("node '" + n.id + "' reads from output node");
        if (e.port < 0 || e.port >= out_ports(src))
          throw GraphError("node '" + n.id + "' reads invalid port " + std::to_string(e.port) +
                           " of '" + e.node + "'");
        if (e.node == n.id) throw GraphError("self loop at '" + n.id + "'");
      }
      switch (n.kind) {
        case NodeKind::Conv2d:
          if (!convs.count(n.blob))
            throw GraphError("conv node '" + n.id + "' references missing blob '" + n.blob + "'");
          break;
        case NodeKind::PReLU:
          if (!slopes.count(n.blob))
            throw GraphError("prelu node '" + n.id + "' references missing blob '" + n.blob + "'");
          break;
        case NodeKind::Split:
          if (n.sizes.empty()) throw GraphError("split node '" + n.id + "' has no sizes");
          for (int64_t s : n.sizes)
            if (s < 1) throw GraphError("split node '" + n.id + "' has non-positive size");
          break;
        case NodeKind::PixelShuffle:
        case NodeKind::Interpolate:
          if (n.factor < 1) throw GraphError("node '" + n.id + "' has factor < 1");
          break;
        default: break;
      }
    }
    if (n_in != 1) throw GraphError("graph must have exactly one input node");
    if (n_out != 1) throw GraphError("graph must have exactly one output node");
    if (topo_order().size() != nodes.size()) throw GraphError("graph contains a cycle");
  }

  // Canonical order: Kahn's algorithm, always popping the lexicographically
  // smallest ready id. Returns fewer than nodes.size() ids iff there is a cycle.
  std::vector<std::string> topo_order() const {
    build_index();
    std::map<std::string, int> indeg;
    std::map<std::string, std::vector<std::string>> out;
    for (const auto& n : nodes) {
      indeg.emplace(n.id, 0);
      std::set<std::string> seen;
      for (const auto& e : n.inputs)
        if (seen.insert(e.node).second) out[e.node].push_back(n.id);
    }
    for (const auto& n : nodes) {
      std::set<std::string> seen;
      for (const auto& e : n.inputs)
        if (seen.insert(e.node).second) ++indeg[n.id];
    }
    std::priority_queue<std::string, std::vector<std::string>, std::greater<>> ready;
    for (const auto& [id, d] : indeg)
      if (d == 0) ready.push(id);
    std::vector<std::string> order;
    order.reserve(nodes.size());
    while (!ready.empty()) {
      std::string id = ready.top();
      ready.pop();
      order.push_back(id);
      auto it = out.find(id);
      if (it == out.end()) continue;
      for (const auto& next : it->second)
        if (--indeg[next] == 0) ready.push(next);
    }
    return order;
  }

  // Shape of every port under the given input shape, keyed by node id.
  std::map<std::string, std::vector<Shape>> infer_shapes(const Shape& input) const {
    validate();
    std::map<std::string, std::vector<Shape>> shapes;
    for (const auto& id : topo_order()) {
      const Node& n = node(id);
      std::vector<Shape> in;
      in.reserve(n.inputs.size());
      for (const auto& e : n.inputs) in.push_back(shapes.at(e.node).at(static_cast<size_t>(e.port)));
      shapes[id] = node_shapes(n, in, input);
    }
    return shapes;
  }

  Tensor execute(const Tensor& input, const ExecOptions& opt = {}) const {
    validate();
    return run(input, topo_order(), opt);
  }

  // Run with a caller-supplied complete topological order.
  Tensor execute_in_order(const Tensor& input, const std::vector<std::string>& order,
                          const ExecOptions& opt = {}) const {
    validate();
    if (order.size() != nodes.size())
      throw GraphError("execution order must cover all nodes");
    std::map<std::string, size_t> pos;
    for (size_t i = 0; i < order.size(); ++i)
      if (!pos.emplace(order[i], i).second)
        throw GraphError("execution order repeats '" + order[i] + "'");
    for (const auto& n : nodes) {
      auto it = pos.find(n.id);
      if (it == pos.end()) throw GraphError("execution order misses '" + n.id + "'");
      for (const auto& e : n.inputs)
        if (pos.at(e.node) >= it->second)
          throw GraphError("execution order is not topological at '" + n.id + "'");
    }
    return run(input, order, opt);
  }

 private:
  mutable std::unordered_map<std::string, size_t> index_;

  void build_index() const {
    if (index_.size() == nodes.size() && !nodes.empty()) return;
    index_.clear();
    for (size_t i = 0; i < nodes.size(); ++i) index_.emplace(nodes[i].id, i);
  }

  static void check_arity(const Node& n) {
    const size_t k = n.inputs.size();
    auto want = [&](bool ok, const char* what) {
      if (!ok)
        throw GraphError("node '" + n.id + "' (" + kind_name(n.kind) + ") expects " + what +
                         ", got " + std::to_string(k));
    };
    switch (n.kind) {
      case NodeKind::Input: want(k == 0, "no inputs"); break;
      case NodeKind::Output:
      case NodeKind::Conv2d:
      case NodeKind::LeakyReLU:
      case NodeKind::ReLU:
      case NodeKind::PReLU:
      case NodeKind::Sigmoid:
      case NodeKind::PixelShuffle:
      case NodeKind::Split:
      case NodeKind::AvgPool:
      case NodeKind::MaxPool:
      case NodeKind::GlobalPool: want(k == 1, "1 input"); break;
      case NodeKind::Interpolate: want(k == 1 || k == 2, "1 input (+ optional size reference)"); break;
      case NodeKind::Concat: want(k >= 2, ">= 2 inputs"); break;
      case NodeKind::Add:
      case NodeKind::Mul: want(k == 2, "2 inputs"); break;
    }
  }

  std::vector<Shape> node_shapes(const Node& n, const std::vector<Shape>& in,
                                 const Shape& graph_input) const {
    auto one = [](Shape s) { return std::vector<Shape>{s}; };
    switch (n.kind) {
      case NodeKind::Input: return one(graph_input);
      case NodeKind::Output:
      case NodeKind::ReLU:
      case NodeKind::Sigmoid:
      case NodeKind::LeakyReLU: return one(in[0]);
      case NodeKind::PReLU: {
        const auto& sl = slopes.at(n.blob);
        if (static_cast<int64_t>(sl.size()) != in[0].c)
          throw ShapeError("prelu '" + n.id + "': " + std::to_string(sl.size()) +
                           " slopes vs " + std::to_string(in[0].c) + " channels");
        return one(in[0]);
      }
      case NodeKind::Conv2d: {
        const Conv2dParams& p = convs.at(n.blob);
        p.validate_geometry();
        if (in[0].c != p.c_in)
          throw ShapeError("conv '" + n.id + "': input has " + std::to_string(in[0].c) +
                           " channels, kernel expects " + std::to_string(p.c_in));
        const int64_t oh = conv_out_dim(in[0].h, p.pad_top, p.pad_bottom, p.k_h, p.stride_h, p.dil_h);
        const int64_t ow = conv_out_dim(in[0].w, p.pad_left, p.pad_right, p.k_w, p.stride_w, p.dil_w);
        if (oh < 1 || ow < 1)
          throw ShapeError("conv '" + n.id + "': empty output for input " + in[0].str());
        return one({in[0].n, p.c_out, oh, ow});
      }
      case NodeKind::PixelShuffle: {
        const int64_t r2 = n.factor * n.factor;
        if (in[0].c % r2 != 0)
          throw ShapeError("pixel_shuffle '" + n.id + "': channels not divisible by r^2");
        return one({in[0].n, in[0].c / r2, in[0].h * n.factor, in[0].w * n.factor});
      }
      case NodeKind::Interpolate: {
        if (in.size() == 2) return one({in[0].n, in[0].c, in[1].h, in[1].w});
        return one({in[0].n, in[0].c, in[0].h * n.factor, in[0].w * n.factor});
      }
      case NodeKind::Concat: {
        Shape s = in[0];
        for (size_t i = 1; i < in.size(); ++i) {
          if (in[i].n != s.n || in[i].h != s.h || in[i].w != s.w)
            throw ShapeError("concat '" + n.id + "': mismatched shapes " + s.str() + " vs " +
                             in[i].str());
          s.c += in[i].c;
        }
        return one(s);
      }
      case NodeKind::Split: {
        int64_t total = 0;
        for (int64_t s : n.sizes) total += s;
        if (total != in[0].c)
          throw ShapeError("split '" + n.id + "': sizes sum to " + std::to_string(total) +
                           ", input has " + std::to_string(in[0].c) + " channels");
        std::vector<Shape> out;
        out.reserve(n.sizes.size());
        for (int64_t s : n.sizes) out.push_back({in[0].n, s, in[0].h, in[0].w});
        return out;
      }
      case NodeKind::Add: {
        if (!(in[0] == in[1]))
          throw ShapeError("add '" + n.id + "': " + in[0].str() + " vs " + in[1].str());
        return one(in[0]);
      }
      case NodeKind::Mul: {
        if (in[0] == in[1]) return one(in[0]);
        auto scalarish = [](const Shape& s) { return s.h == 1 && s.w == 1; };
        if (scalarish(in[1]) && in[1].n == in[0].n && in[1].c == in[0].c) return one(in[0]);
        if (scalarish(in[0]) && in[0].n == in[1].n && in[0].c == in[1].c) return one(in[1]);
        throw ShapeError("mul '" + n.id + "': " + in[0].str() + " vs " + in[1].str());
      }
      case NodeKind::AvgPool:
      case NodeKind::MaxPool: {
        if (n.pool.k_h < 1 || n.pool.k_w < 1 || n.pool.stride_h < 1 || n.pool.stride_w < 1)
          throw ShapeError("pool '" + n.id + "': kernel and stride must be >= 1");
        const int64_t oh =
            window_out_dim(in[0].h, n.pool.pad_top, n.pool.pad_bottom, n.pool.k_h, n.pool.stride_h);
        const int64_t ow =
            window_out_dim(in[0].w, n.pool.pad_left, n.pool.pad_right, n.pool.k_w, n.pool.stride_w);
        if (oh < 1 || ow < 1)
          throw ShapeError("pool '" + n.id + "': empty output for input " + in[0].str());
        return one({in[0].n, in[0].c, oh, ow});
      }
      case NodeKind::GlobalPool: return one({in[0].n, in[0].c, 1, 1});
    }
    throw GraphError("unreachable");
  }

  Tensor run(const Tensor& input, const std::vector<std::string>& order,
             const ExecOptions& opt) const {
    // Remaining-consumer counts let intermediates be freed as soon as the
    // last reader has run.
    std::map<std::string, std::vector<int>> uses;
    for (const auto& n : nodes) uses[n.id].assign(static_cast<size_t>(out_ports(n)), 0);
    std::string output_id;
    for (const auto& n : nodes) {
      for (const auto& e : n.inputs) ++uses[e.node][static_cast<size_t>(e.port)];
      if (n.kind == NodeKind::Output) output_id = n.id;
    }

    std::map<std::string, std::vector<Tensor>> values;
    Tensor result;
    for (const auto& id : order) {
      const Node& n = node(id);
      std::vector<const Tensor*> in;
      in.reserve(n.inputs.size());
      for (const auto& e : n.inputs)
        in.push_back(&values.at(e.node).at(static_cast<size_t>(e.port)));
      std::vector<Tensor> out = eval_node(n, in, input, opt);
      if (n.kind == NodeKind::Output) result = std::move(out[0]);
      else values[id] = std::move(out);
      for (const auto& e : n.inputs) {
        int& remaining = uses[e.node][static_cast<size_t>(e.port)];
        if (--remaining == 0) {
          auto& vec = values[e.node];
          vec[static_cast<size_t>(e.port)] = Tensor();
          bool all_done = true;
          for (size_t p = 0; p < vec.size(); ++p)
            if (uses[e.node][p] > 0) all_done = false;
          if (all_done) values.erase(e.node);
        }
      }
    }
    return result;
  }

  std::vector<Tensor> eval_node(const Node& n, const std::vector<const Tensor*>& in,
                                const Tensor& graph_input, const ExecOptions& opt) const {
    switch (n.kind) {
      case NodeKind::Input: return {graph_input};
      case NodeKind::Output: return {*in[0]};
      case NodeKind::Conv2d: return {conv2d(*in[0], convs.at(n.blob), opt.threads)};
      case NodeKind::LeakyReLU: return {leaky_relu(*in[0], n.slope)};
      case NodeKind::ReLU: return {relu(*in[0])};
      case NodeKind::PReLU: return {prelu(*in[0], slopes.at(n.blob))};
      case NodeKind::Sigmoid: return {sigmoid(*in[0])};
      case NodeKind::PixelShuffle: return {pixel_shuffle(*in[0], n.factor)};
      case NodeKind::Interpolate:
        if (in.size() == 2) return {interpolate_to(*in[0], in[1]->h, in[1]->w, n.mode)};
        return {interpolate(*in[0], n.factor, n.mode)};
      case NodeKind::Concat: {
        std::vector<const Tensor*> parts(in.begin(), in.end());
        return {srzoo::concat(parts)};
      }
      case NodeKind::Split: return srzoo::split(*in[0], n.sizes);
      case NodeKind::Add: return {srzoo::add(*in[0], *in[1])};
      case NodeKind::Mul: return {srzoo::mul(*in[0], *in[1])};
      case NodeKind::AvgPool: return {avg_pool(*in[0], n.pool)};
      case NodeKind::MaxPool: return {max_pool(*in[0], n.pool)};
      case NodeKind::GlobalPool: return {global_pool(*in[0], n.stat)};
    }
    throw GraphError("unreachable");
  }
};

}  // namespace srzoo
