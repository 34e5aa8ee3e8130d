#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "srzoo/graph.hpp"

namespace srzoo {

static_assert(std::endian::native == std::endian::little,
              "weight payload is little-endian; big-endian hosts are unsupported");

enum class Dtype { f32, f64 };

inline const char* dtype_name(Dtype d) { return d == Dtype::f32 ? "f32" : "f64"; }

inline Dtype dtype_from_name(const std::string& s) {
  if (s == "f32") return Dtype::f32;
  if (s == "f64") return Dtype::f64;
  throw DataError("unknown dtype '" + s + "'");
}

namespace detail {

struct WeightEntry {
  std::string name;
  std::vector<int64_t> dims;
  std::vector<double>* values = nullptr;
};

// One entry per parameter vector, sorted by name: <blob>.weight, <blob>.bias,
// <blob>.slope.
inline std::vector<WeightEntry> weight_entries(GraphIR& g) {
  std::vector<WeightEntry> out;
  for (auto& [name, p] : g.convs) {
    out.push_back({name + ".weight", {p.c_out, p.c_in / p.groups, p.k_h, p.k_w}, &p.weights});
    if (p.has_bias) out.push_back({name + ".bias", {p.c_out}, &p.bias});
  }
  for (auto& [name, s] : g.slopes)
    out.push_back({name + ".slope", {static_cast<int64_t>(s.size())}, &s});
  std::sort(out.begin(), out.end(),
            [](const WeightEntry& a, const WeightEntry& b) { return a.name < b.name; });
  return out;
}

inline int64_t dims_numel(const std::vector<int64_t>& dims) {
  int64_t n = 1;
  for (int64_t d : dims) n *= d;
  return n;
}

}  // namespace detail

// Text header followed by a raw little-endian payload:
//   srzoo-weights v1
//   blob <name> <f32|f64> <ndims> <dim>... @<byte offset>
//   ...
//   end <payload bytes>
inline void save_weights(GraphIR& g, std::ostream& os, Dtype dtype = Dtype::f32) {
  auto entries = detail::weight_entries(g);
  const int64_t elem = dtype == Dtype::f32 ? 4 : 8;
  std::ostringstream header;
  header << "srzoo-weights v1\n";
  int64_t offset = 0;
  for (const auto& e : entries) {
    if (static_cast<int64_t>(e.values->size()) != detail::dims_numel(e.dims))
      throw DataError("blob '" + e.name + "' has no materialized values");
    header << "blob " << e.name << " " << dtype_name(dtype) << " " << e.dims.size();
    for (int64_t d : e.dims) header << " " << d;
    header << " @" << offset << "\n";
    offset += detail::dims_numel(e.dims) * elem;
  }
  header << "end " << offset << "\n";
  os << header.str();
  for (const auto& e : entries) {
    if (dtype == Dtype::f32) {
      std::vector<float> tmp(e.values->begin(), e.values->end());
      os.write(reinterpret_cast<const char*>(tmp.data()),
               static_cast<std::streamsize>(tmp.size() * 4));
    } else {
      os.write(reinterpret_cast<const char*>(e.values->data()),
               static_cast<std::streamsize>(e.values->size() * 8));
    }
  }
  if (!os) throw IoError("write failed while saving weights");
}

inline void save_weights(GraphIR& g, const std::string& path, Dtype dtype = Dtype::f32) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path + "' for writing");
  save_weights(g, f, dtype);
}

// Fills the graph's parameter vectors from the stream. The file must carry
// exactly the blobs the graph declares, with matching dims; missing and
// unknown names are reported together.
inline void load_weights(GraphIR& g, std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != "srzoo-weights v1")
    throw DataError("bad weight file: expected 'srzoo-weights v1' header");

  struct FileEntry {
    Dtype dtype = Dtype::f32;
    std::vector<int64_t> dims;
    int64_t offset = 0;
  };
  std::map<std::string, FileEntry> file_entries;
  int64_t payload_bytes = -1;
  int64_t expect_offset = 0;
  while (std::getline(is, line)) {
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "end") {
      if (!(ls >> payload_bytes)) throw DataError("bad weight file: malformed end line");
      break;
    }
    if (tag != "blob") throw DataError("bad weight file: unexpected line '" + line + "'");
    std::string name, dt, off;
    size_t ndims = 0;
    if (!(ls >> name >> dt >> ndims)) throw DataError("bad weight file: malformed blob line");
    FileEntry e;
    e.dtype = dtype_from_name(dt);
    e.dims.resize(ndims);
    for (auto& d : e.dims)
      if (!(ls >> d) || d < 1) throw DataError("bad weight file: bad dims for '" + name + "'");
    if (!(ls >> off) || off.empty() || off[0] != '@')
      throw DataError("bad weight file: missing offset for '" + name + "'");
    e.offset = std::stoll(off.substr(1));
    if (e.offset != expect_offset)
      throw DataError("bad weight file: offset mismatch for '" + name + "'");
    expect_offset += detail::dims_numel(e.dims) * (e.dtype == Dtype::f32 ? 4 : 8);
    if (!file_entries.emplace(name, std::move(e)).second)
      throw DataError("bad weight file: duplicate blob '" + name + "'");
  }
  if (payload_bytes < 0) throw DataError("bad weight file: no end line");
  if (payload_bytes != expect_offset)
    throw DataError("bad weight file: payload size mismatch");

  std::string payload(static_cast<size_t>(payload_bytes), '\0');
  is.read(payload.data(), payload_bytes);
  if (is.gcount() != payload_bytes) throw DataError("bad weight file: truncated payload");

  auto entries = detail::weight_entries(g);
  std::vector<std::string> missing, unknown;
  std::set<std::string> expected;
  for (const auto& e : entries) expected.insert(e.name);
  for (const auto& e : entries)
    if (!file_entries.count(e.name)) missing.push_back(e.name);
  for (const auto& [name, fe] : file_entries)
    if (!expected.count(name)) unknown.push_back(name);
  if (!missing.empty() || !unknown.empty()) {
    std::string msg = "weight file does not match model:";
    for (const auto& m : missing) msg += " missing " + m;
    for (const auto& u : unknown) msg += " unknown " + u;
    throw DataError(msg);
  }

  for (auto& e : entries) {
    const FileEntry& fe = file_entries.at(e.name);
    if (fe.dims != e.dims) {
      std::string msg = "blob '" + e.name + "' dims mismatch: file has [";
      for (size_t i = 0; i < fe.dims.size(); ++i)
        msg += (i ? "," : "") + std::to_string(fe.dims[i]);
      msg += "], model expects [";
      for (size_t i = 0; i < e.dims.size(); ++i)
        msg += (i ? "," : "") + std::to_string(e.dims[i]);
      msg += "]";
      throw DataError(msg);
    }
    const int64_t count = detail::dims_numel(e.dims);
    e.values->resize(static_cast<size_t>(count));
    const char* src = payload.data() + fe.offset;
    if (fe.dtype == Dtype::f32) {
      for (int64_t i = 0; i < count; ++i) {
        float v;
        std::memcpy(&v, src + i * 4, 4);
        (*e.values)[static_cast<size_t>(i)] = static_cast<double>(v);
      }
    } else {
      std::memcpy(e.values->data(), src, static_cast<size_t>(count) * 8);
    }
  }
}

inline void load_weights(GraphIR& g, const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path + "'");
  load_weights(g, f);
}

namespace detail {

inline std::string edge_to_string(const EdgeRef& e) {
  return e.port == 0 ? e.node : e.node + ":" + std::to_string(e.port);
}

inline EdgeRef edge_from_string(const std::string& s) {
  const size_t pos = s.rfind(':');
  if (pos != std::string::npos && pos + 1 < s.size()) {
    bool digits = true;
    for (size_t i = pos + 1; i < s.size(); ++i)
      if (!std::isdigit(static_cast<unsigned char>(s[i]))) digits = false;
    if (digits) return {s.substr(0, pos), std::stoi(s.substr(pos + 1))};
  }
  return {s, 0};
}

}  // namespace detail

// Structure-only description of a graph (no weight values), as deterministic
// JSON: blob geometry keyed by name, nodes in declaration order.
inline nlohmann::json model_spec_json(const GraphIR& g) {
  nlohmann::json j;
  j["format"] = "srzoo-model";
  j["version"] = 1;
  j["name"] = g.name;
  j["scale"] = g.scale;
  nlohmann::json blobs = nlohmann::json::object();
  for (const auto& [name, p] : g.convs) {
    nlohmann::json b;
    b["type"] = "conv";
    b["c_out"] = p.c_out;
    b["c_in"] = p.c_in;
    b["k_h"] = p.k_h;
    b["k_w"] = p.k_w;
    b["stride"] = {p.stride_h, p.stride_w};
    b["pad"] = {p.pad_top, p.pad_bottom, p.pad_left, p.pad_right};
    b["dilation"] = {p.dil_h, p.dil_w};
    b["groups"] = p.groups;
    b["bias"] = p.has_bias;
    blobs[name] = std::move(b);
  }
  for (const auto& [name, s] : g.slopes) {
    nlohmann::json b;
    b["type"] = "prelu";
    b["channels"] = static_cast<int64_t>(s.size());
    blobs[name] = std::move(b);
  }
  j["blobs"] = std::move(blobs);
  nlohmann::json nodes = nlohmann::json::array();
  for (const auto& n : g.nodes) {
    if (n.id.find(':') != std::string::npos)
      throw DataError("node id '" + n.id + "' contains ':'");
    nlohmann::json jn;
    jn["id"] = n.id;
    jn["kind"] = kind_name(n.kind);
    if (!n.inputs.empty()) {
      nlohmann::json in = nlohmann::json::array();
      for (const auto& e : n.inputs) in.push_back(detail::edge_to_string(e));
      jn["inputs"] = std::move(in);
    }
    switch (n.kind) {
      case NodeKind::Conv2d:
      case NodeKind::PReLU: jn["blob"] = n.blob; break;
      case NodeKind::LeakyReLU: jn["slope"] = n.slope; break;
      case NodeKind::PixelShuffle: jn["factor"] = n.factor; break;
      case NodeKind::Interpolate:
        if (n.inputs.size() == 1) jn["factor"] = n.factor;
        jn["mode"] = interp_mode_name(n.mode);
        break;
      case NodeKind::Split: jn["sizes"] = n.sizes; break;
      case NodeKind::AvgPool:
      case NodeKind::MaxPool:
        jn["k"] = {n.pool.k_h, n.pool.k_w};
        jn["stride"] = {n.pool.stride_h, n.pool.stride_w};
        jn["pad"] = {n.pool.pad_top, n.pool.pad_bottom, n.pool.pad_left, n.pool.pad_right};
        break;
      case NodeKind::GlobalPool: jn["stat"] = global_stat_name(n.stat); break;
      default: break;
    }
    nodes.push_back(std::move(jn));
  }
  j["nodes"] = std::move(nodes);
  return j;
}

inline void save_model_spec(const GraphIR& g, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot open '" + path + "' for writing");
  f << model_spec_json(g).dump(2) << "\n";
  if (!f) throw IoError("write failed while saving model spec");
}

inline GraphIR model_from_spec_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != "srzoo-model")
      throw DataError("not a model spec: bad format tag");
    if (j.at("version").get<int>() != 1) throw DataError("unsupported model spec version");
    GraphIR g;
    g.name = j.at("name").get<std::string>();
    g.scale = j.at("scale").get<int64_t>();
    for (const auto& [name, b] : j.at("blobs").items()) {
      const std::string type = b.at("type").get<std::string>();
      if (type == "conv") {
        Conv2dParams p;
        p.c_out = b.at("c_out").get<int64_t>();
        p.c_in = b.at("c_in").get<int64_t>();
        p.k_h = b.at("k_h").get<int64_t>();
        p.k_w = b.at("k_w").get<int64_t>();
        p.stride_h = b.at("stride").at(0).get<int64_t>();
        p.stride_w = b.at("stride").at(1).get<int64_t>();
        p.pad_top = b.at("pad").at(0).get<int64_t>();
        p.pad_bottom = b.at("pad").at(1).get<int64_t>();
        p.pad_left = b.at("pad").at(2).get<int64_t>();
        p.pad_right = b.at("pad").at(3).get<int64_t>();
        p.dil_h = b.at("dilation").at(0).get<int64_t>();
        p.dil_w = b.at("dilation").at(1).get<int64_t>();
        p.groups = b.at("groups").get<int64_t>();
        p.has_bias = b.at("bias").get<bool>();
        p.validate_geometry();
        g.convs[name] = std::move(p);
      } else if (type == "prelu") {
        const int64_t ch = b.at("channels").get<int64_t>();
        if (ch < 1) throw DataError("prelu blob '" + name + "' has no channels");
        g.slopes[name] = std::vector<double>(static_cast<size_t>(ch), 0.25);
      } else {
        throw DataError("unknown blob type '" + type + "'");
      }
    }
    for (const auto& jn : j.at("nodes")) {
      Node n;
      n.id = jn.at("id").get<std::string>();
      n.kind = kind_from_name(jn.at("kind").get<std::string>());
      if (jn.contains("inputs"))
        for (const auto& e : jn.at("inputs"))
          n.inputs.push_back(detail::edge_from_string(e.get<std::string>()));
      switch (n.kind) {
        case NodeKind::Conv2d:
        case NodeKind::PReLU: n.blob = jn.at("blob").get<std::string>(); break;
        case NodeKind::LeakyReLU: n.slope = jn.at("slope").get<double>(); break;
        case NodeKind::PixelShuffle: n.factor = jn.at("factor").get<int64_t>(); break;
        case NodeKind::Interpolate:
          if (jn.contains("factor")) n.factor = jn.at("factor").get<int64_t>();
          n.mode = interp_mode_from_name(jn.at("mode").get<std::string>());
          break;
        case NodeKind::Split: n.sizes = jn.at("sizes").get<std::vector<int64_t>>(); break;
        case NodeKind::AvgPool:
        case NodeKind::MaxPool:
          n.pool.k_h = jn.at("k").at(0).get<int64_t>();
          n.pool.k_w = jn.at("k").at(1).get<int64_t>();
          n.pool.stride_h = jn.at("stride").at(0).get<int64_t>();
          n.pool.stride_w = jn.at("stride").at(1).get<int64_t>();
          n.pool.pad_top = jn.at("pad").at(0).get<int64_t>();
          n.pool.pad_bottom = jn.at("pad").at(1).get<int64_t>();
          n.pool.pad_left = jn.at("pad").at(2).get<int64_t>();
          n.pool.pad_right = jn.at("pad").at(3).get<int64_t>();
          break;
        case NodeKind::GlobalPool:
          n.stat = global_stat_from_name(jn.at("stat").get<std::string>());
          break;
        default: break;
      }
      g.add(std::move(n));
    }
    g.validate();
    return g;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("bad model spec: ") + e.what());
  }
}

inline GraphIR load_model_spec(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open '" + path + "'");
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("bad model spec: ") + e.what());
  }
  return model_from_spec_json(j);
}

}  // namespace srzoo
