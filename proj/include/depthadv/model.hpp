#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "depthadv/errors.hpp"
#include "depthadv/graph.hpp"
#include "depthadv/rng.hpp"
#include "depthadv/tensor.hpp"

namespace depthadv {

// Two small encoder-decoder depth networks with the same I/O contract:
// RGB [3,H,W] in [0,1] -> depth [1,H,W] in (d_min, d_max). The head
// predicts scaled inverse depth through a sigmoid, so the output range
// is enforced by construction.

enum class Arch { ModelA, ModelB };

inline const char* arch_name(Arch a) { return a == Arch::ModelA ? "modela" : "modelb"; }

inline Arch arch_from_string(const std::string& s) {
  if (s == "modela" || s == "ModelA") return Arch::ModelA;
  if (s == "modelb" || s == "ModelB") return Arch::ModelB;
  throw ConfigError("unknown architecture id: " + s);
}

// One entry of the layer list returned by architecture_spec.
struct LayerInfo {
  enum class Kind { Conv, Upsample2x, ConcatSkip };
  enum class Act { None, Relu, Elu };
  Kind kind = Kind::Conv;
  std::string name;  // weight prefix for Conv layers
  int in_ch = 0, out_ch = 0, ksize = 3, stride = 1, pad = 1;
  Act act = Act::None;
  int skip_stage = -1;  // ConcatSkip: encoder stage index to concatenate
};

inline std::vector<LayerInfo> architecture_spec(Arch arch) {
  using K = LayerInfo::Kind;
  using A = LayerInfo::Act;
  std::vector<LayerInfo> L;
  auto conv = [&](std::string name, int ci, int co, int k, int s, A act) {
    LayerInfo li;
    li.kind = K::Conv;
    li.name = std::move(name);
    li.in_ch = ci;
    li.out_ch = co;
    li.ksize = k;
    li.stride = s;
    li.pad = k / 2;
    li.act = act;
    L.push_back(li);
  };
  auto up = [&]() {
    LayerInfo li;
    li.kind = K::Upsample2x;
    L.push_back(li);
  };
  auto skip = [&](int stage) {
    LayerInfo li;
    li.kind = K::ConcatSkip;
    li.skip_stage = stage;
    L.push_back(li);
  };

  if (arch == Arch::ModelA) {
    conv("enc1", 3, 8, 3, 2, A::Elu);
    conv("enc2", 8, 16, 3, 2, A::Elu);
    conv("enc3", 16, 32, 3, 2, A::Elu);
    up();
    skip(1);  // enc2 output
    conv("dec1", 32 + 16, 16, 3, 1, A::Elu);
    up();
    skip(0);  // enc1 output
    conv("dec2", 16 + 8, 8, 3, 1, A::Elu);
    up();
    conv("dec3", 8, 8, 3, 1, A::Elu);
    conv("head", 8, 1, 1, 1, A::None);
  } else {
    conv("enc1", 3, 12, 3, 2, A::Relu);
    conv("enc2", 12, 24, 3, 2, A::Relu);
    conv("enc3", 24, 48, 3, 2, A::Relu);
    up();
    conv("dec1", 48, 24, 3, 1, A::Relu);
    up();
    conv("dec2", 24, 12, 3, 1, A::Relu);
    up();
    conv("dec3", 12, 12, 3, 1, A::Relu);
    conv("head", 12, 1, 1, 1, A::None);
  }
  return L;
}

template <typename T = float>
struct DepthModel {
  Arch arch = Arch::ModelA;
  std::map<std::string, Tensor<T>> weights;
  T d_min = T(1);
  T d_max = T(80);
  std::uint64_t seed = 0;
};

template <typename T>
inline DepthModel<T> make_model(Arch arch, std::uint64_t seed, T d_min = T(1), T d_max = T(80)) {
  if (!(d_min > T(0)) || !(d_max > d_min)) throw ConfigError("make_model: bad depth range");
  DepthModel<T> m;
  m.arch = arch;
  m.d_min = d_min;
  m.d_max = d_max;
  m.seed = seed;
  int layer_idx = 0;
  for (const LayerInfo& li : architecture_spec(arch)) {
    ++layer_idx;
    if (li.kind != LayerInfo::Kind::Conv) continue;
    Rng rng(mix_seed(seed, 0x11ab5ULL, std::uint64_t(layer_idx)));
    Tensor<T> w({li.out_ch, li.in_ch, li.ksize, li.ksize});
    // damped head init keeps the sigmoid near its bias-controlled
    // operating point on untrained nets
    const double gain = li.name == "head" ? 0.25 : 1.0;
    const double stddev = gain * std::sqrt(2.0 / double(li.in_ch * li.ksize * li.ksize));
    for (T& v : w.data) v = T(stddev * rng.normal());
    m.weights[li.name + ".w"] = std::move(w);
    m.weights[li.name + ".b"] = Tensor<T>({li.out_ch});
  }
  // start the head mid-range (~5 m) so early training steps cannot slam
  // the sigmoid into saturation
  m.weights["head.b"].data[0] = T(-1.5);
  return m;
}

template <typename T>
inline std::int64_t parameter_count(const DepthModel<T>& m) {
  std::int64_t n = 0;
  for (const auto& [name, t] : m.weights) n += t.numel();
  return n;
}

template <typename To, typename From>
inline DepthModel<To> model_cast(const DepthModel<From>& m) {
  DepthModel<To> out;
  out.arch = m.arch;
  out.d_min = To(m.d_min);
  out.d_max = To(m.d_max);
  out.seed = m.seed;
  for (const auto& [name, t] : m.weights) out.weights[name] = tensor_cast<To>(t);
  return out;
}

// Builds the model forward pass on an existing graph. When `trainable`
// is set, weight leaves require grad and their node ids are reported so
// an optimizer can read gradients after backward.
template <typename T>
inline NodeId forward_depth(const DepthModel<T>& m, Graph<T>& g, NodeId image,
                            bool trainable = false,
                            std::map<std::string, NodeId>* weight_ids = nullptr,
                            std::vector<std::vector<int>>* stage_shapes = nullptr) {
  const Tensor<T>& img = g.value(image);
  if (img.rank() != 3 || img.shape[0] != 3) throw ShapeError("forward_depth: expected [3,H,W]");
  if (img.shape[1] % 8 != 0 || img.shape[2] % 8 != 0)
    throw ShapeError("forward_depth: H and W must be multiples of 8");

  auto weight = [&](const std::string& name) -> NodeId {
    auto it = m.weights.find(name);
    if (it == m.weights.end()) throw ConfigError("forward_depth: missing weight " + name);
    Tensor<T> t = it->second;
    t.requires_grad = trainable;
    NodeId id = g.leaf(t);
    if (weight_ids) (*weight_ids)[name] = id;
    return id;
  };

  std::vector<NodeId> stages;
  NodeId cur = image;
  for (const LayerInfo& li : architecture_spec(m.arch)) {
    switch (li.kind) {
      case LayerInfo::Kind::Conv: {
        cur = g.conv2d(cur, weight(li.name + ".w"), weight(li.name + ".b"), li.stride, li.pad);
        if (li.act == LayerInfo::Act::Relu) cur = g.relu(cur);
        if (li.act == LayerInfo::Act::Elu) cur = g.elu(cur);
        if (li.stride == 2) {
          stages.push_back(cur);
          if (stage_shapes) stage_shapes->push_back(g.value(cur).shape);
        }
        break;
      }
      case LayerInfo::Kind::Upsample2x:
        cur = g.nearest_upsample2x(cur);
        break;
      case LayerInfo::Kind::ConcatSkip:
        cur = g.concat_channels(cur, stages.at(std::size_t(li.skip_stage)));
        break;
    }
  }

  // scaled inverse depth: depth = 1 / (s*(1/d_min - 1/d_max) + 1/d_max)
  NodeId s = g.sigmoid(cur);
  const T inv_span = T(1) / m.d_min - T(1) / m.d_max;
  NodeId scaled = g.mul_scalar(s, inv_span);
  Tensor<T> offs(g.value(scaled).shape);
  std::fill(offs.data.begin(), offs.data.end(), T(1) / m.d_max);
  NodeId denom = g.add(scaled, g.leaf(offs));
  NodeId ones = g.leaf(full_like(offs, T(1)));
  return g.div_elementwise(ones, denom);
}

template <typename T>
inline Tensor<T> forward_depth(const DepthModel<T>& m, const Tensor<T>& image) {
  Graph<T> g;
  NodeId out = forward_depth(m, g, g.leaf(image));
  return g.value(out);
}

// --- weight files ---------------------------------------------------------
//
// A model directory holds one DTNS file per named tensor plus a plain
// text manifest describing architecture, depth range, seed and shapes.

template <typename T>
inline void save_model(const std::string& dir, const DepthModel<T>& m) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  std::ofstream man(dir + "/manifest.txt");
  if (!man) throw IOError("save_model: cannot write manifest in " + dir);
  man << "architecture " << arch_name(m.arch) << "\n";
  man << "depth_min " << double(m.d_min) << "\n";
  man << "depth_max " << double(m.d_max) << "\n";
  man << "seed " << m.seed << "\n";
  for (const auto& [name, t] : m.weights) {
    man << "tensor " << name;
    for (int e : t.shape) man << " " << e;
    man << "\n";
    save_dtns(dir + "/" + name + ".dtns", t);
  }
  if (!man) throw IOError("save_model: manifest write failed");
}

inline DepthModel<float> load_model(const std::string& dir) {
  std::ifstream man(dir + "/manifest.txt");
  if (!man) throw IOError("load_model: cannot open manifest in " + dir);
  DepthModel<float> m;
  std::string line;
  bool have_arch = false;
  while (std::getline(man, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string key;
    ss >> key;
    if (key == "architecture") {
      std::string v;
      ss >> v;
      m.arch = arch_from_string(v);
      have_arch = true;
    } else if (key == "depth_min") {
      ss >> m.d_min;
    } else if (key == "depth_max") {
      ss >> m.d_max;
    } else if (key == "seed") {
      ss >> m.seed;
    } else if (key == "tensor") {
      std::string name;
      ss >> name;
      std::vector<int> shape;
      int e;
      while (ss >> e) shape.push_back(e);
      Tensor<float> t = load_dtns(dir + "/" + name + ".dtns");
      if (t.shape != shape) throw IOError("load_model: shape mismatch for " + name);
      m.weights[name] = std::move(t);
    } else {
      throw IOError("load_model: unknown manifest key: " + key);
    }
  }
  if (!have_arch) throw IOError("load_model: manifest missing architecture");
  // weights must exactly match the architecture
  for (const LayerInfo& li : architecture_spec(m.arch)) {
    if (li.kind != LayerInfo::Kind::Conv) continue;
    auto w = m.weights.find(li.name + ".w");
    auto b = m.weights.find(li.name + ".b");
    if (w == m.weights.end() || b == m.weights.end())
      throw IOError("load_model: missing weights for layer " + li.name);
    if (w->second.shape != std::vector<int>{li.out_ch, li.in_ch, li.ksize, li.ksize})
      throw IOError("load_model: bad weight shape for layer " + li.name);
  }
  return m;
}

// Canonical byte serialization of all weights, for freeze checks.
template <typename T>
inline std::string serialize_weights(const DepthModel<T>& m) {
  std::ostringstream os(std::ios::binary);
  for (const auto& [name, t] : m.weights) {
    os << name << ":";
    save_dtns(os, t);
  }
  return os.str();
}

}  // namespace depthadv
