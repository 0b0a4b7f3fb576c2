#pragma once

#include <cmath>
#include <vector>

#include "depthadv/attack.hpp"
#include "depthadv/errors.hpp"
#include "depthadv/metrics.hpp"
#include "depthadv/model.hpp"
#include "depthadv/scene.hpp"
#include "depthadv/targets.hpp"
#include "depthadv/tensor.hpp"
#include "depthadv/train.hpp"

namespace depthadv {

// Two defenses: Gaussian blur applied at evaluation time (the attacker
// is unaware of it), and adversarial fine-tuning on a pool of crafted
// perturbations.

struct BlurConfig {
  double sigma = 1.0;
  int radius = -1;  // -1: ceil(3*sigma)
};

namespace detail {

inline std::vector<double> gaussian_kernel(const BlurConfig& cfg) {
  if (cfg.sigma <= 0.0) throw ConfigError("gaussian_blur: sigma must be positive");
  const int r = cfg.radius >= 0 ? cfg.radius : int(std::ceil(3.0 * cfg.sigma));
  std::vector<double> k(std::size_t(2 * r + 1));
  double sum = 0.0;
  for (int i = -r; i <= r; ++i) {
    const double v = std::exp(-0.5 * double(i) * i / (cfg.sigma * cfg.sigma));
    k[std::size_t(i + r)] = v;
    sum += v;
  }
  for (double& v : k) v /= sum;
  return k;
}

// index reflection without repeating the edge sample: -1 -> 1, n -> n-2
inline int reflect(int i, int n) {
  if (n == 1) return 0;
  while (i < 0 || i >= n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * (n - 1) - i;
  }
  return i;
}

}  // namespace detail

// Separable Gaussian blur, reflect padding, per channel, 64-bit
// accumulation.
template <typename T>
inline Tensor<T> gaussian_blur(const Tensor<T>& img, const BlurConfig& cfg) {
  if (img.rank() != 3) throw ShapeError("gaussian_blur: expected [C,H,W]");
  const std::vector<double> k = detail::gaussian_kernel(cfg);
  const int r = int(k.size() / 2);
  const int c_n = img.shape[0], h = img.shape[1], w = img.shape[2];
  if (r == 0) return img;

  Tensor<T> tmp(img.shape), out(img.shape);
  for (int c = 0; c < c_n; ++c) {
    const T* src = img.data.data() + std::size_t(c) * h * w;
    T* mid = tmp.data.data() + std::size_t(c) * h * w;
    // horizontal
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w; ++j) {
        double acc = 0.0;
        for (int t = -r; t <= r; ++t)
          acc += k[std::size_t(t + r)] * double(src[std::size_t(i) * w + detail::reflect(j + t, w)]);
        mid[std::size_t(i) * w + j] = T(acc);
      }
    // vertical
    T* dst = out.data.data() + std::size_t(c) * h * w;
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w; ++j) {
        double acc = 0.0;
        for (int t = -r; t <= r; ++t)
          acc += k[std::size_t(t + r)] * double(mid[std::size_t(detail::reflect(i + t, h)) * w + j]);
        dst[std::size_t(i) * w + j] = T(acc);
      }
  }
  return out;
}

// ARE of the model on blur(clamp(x+v)) against d_t.
template <typename T>
inline double eval_under_blur(const DepthModel<T>& m, const Tensor<T>& x, const Tensor<T>& v,
                              const Tensor<T>& d_t, const BlurConfig& cfg) {
  Tensor<T> xv(x.shape);
  for (std::size_t i = 0; i < x.data.size(); ++i)
    xv.data[i] = std::clamp(x.data[i] + v.data[i], T(0), T(1));
  return are(forward_depth(m, gaussian_blur(xv, cfg)), d_t);
}

template <typename T>
inline Tensor<T> forward_depth(const DepthModel<T>& m, const Tensor<T>& image,
                               const BlurConfig& blur) {
  return forward_depth(m, gaussian_blur(image, blur));
}

// --- adversarial fine-tuning ----------------------------------------------

struct AdvTrainConfig {
  std::vector<double> alphas = {-0.10, -0.05, 0.05, 0.10};
  double pool_xi = 2e-2;      // norm used when crafting the training pool
  double pool_eta = 5.0;
  int pool_steps = 100;
  int pool_scenes = 24;       // training scenes drawn into the pool
  int epochs = 5;
  std::vector<double> epoch_lrs;  // must be strictly decreasing
  int batch_size = 4;
  std::uint64_t seed = 0;
};

struct AdvSample {
  const Scene* scene = nullptr;
  Tensor<float> v;
  Tensor<float> clean_pred;  // prediction of the model being tuned, at start
};

struct AdvTrainResult {
  DepthModel<float> model;
  double clean_are_before = 0.0;
  double clean_are_after = 0.0;
  std::vector<double> epoch_loss;
};

// Crafts scale-target perturbations for a slice of the training set,
// then fine-tunes the model to keep perturbed predictions close to its
// original clean predictions: mean(|f(x) - f(x+v)| / f(x)), with f(x)
// frozen at the state before tuning.
inline AdvTrainResult adversarial_train(const DepthModel<float>& model,
                                        const std::vector<Scene>& train_scenes,
                                        const std::vector<Scene>& heldout_scenes,
                                        const AdvTrainConfig& cfg) {
  if (train_scenes.empty()) throw DataError("adversarial_train: empty dataset");
  if (cfg.epochs < 0) throw ConfigError("adversarial_train: negative epochs");
  for (std::size_t i = 1; i < cfg.epoch_lrs.size(); ++i)
    if (!(cfg.epoch_lrs[i] < cfg.epoch_lrs[i - 1]))
      throw ConfigError("adversarial_train: schedule must be strictly decreasing");
  if (cfg.epochs > 0 && cfg.epoch_lrs.empty())
    throw ConfigError("adversarial_train: schedule required when epochs > 0");

  AdvTrainResult res;
  res.model = model;
  res.clean_are_before = heldout_scenes.empty() ? 0.0 : model_clean_are(model, heldout_scenes);

  // pool of perturbed samples, crafted against the incoming model. The
  // stored clean prediction goes through the same clamped forward the
  // tuning loop uses, so a zero perturbation yields exactly zero loss.
  const Tensor<float> zero_v(std::vector<int>{3, train_scenes[0].h, train_scenes[0].w});
  auto clamped_forward = [](const DepthModel<float>& dm, const Tensor<float>& x,
                            const Tensor<float>& v) {
    Graph<float> g;
    NodeId ones = g.leaf(full_like(x, 1.0f));
    NodeId x01 = clamp01(g, g.add(g.leaf(x), g.leaf(v)), ones);
    return g.value(forward_depth(dm, g, x01));
  };
  const int n_pool = std::min<int>(cfg.pool_scenes, int(train_scenes.size()));
  std::vector<AdvSample> pool;
  for (int i = 0; i < n_pool; ++i) {
    const Scene& sc = train_scenes[std::size_t(i)];
    Tensor<float> pred = forward_depth(model, sc.image);
    for (std::size_t a = 0; a < cfg.alphas.size(); ++a) {
      AttackConfig acfg;
      acfg.xi = cfg.pool_xi;
      acfg.eta = cfg.pool_eta;
      acfg.steps = cfg.pool_steps;
      Tensor<float> d_t = scale_target(pred, cfg.alphas[a], model.d_min, model.d_max);
      AdvSample s;
      s.scene = &sc;
      s.v = craft(model, sc.image, d_t, acfg).v;
      s.clean_pred = clamped_forward(model, sc.image, zero_v);
      pool.push_back(std::move(s));
    }
  }

  if (cfg.epochs == 0 || pool.empty()) {
    res.clean_are_after = res.clean_are_before;
    return res;
  }

  Rng rng(mix_seed(cfg.seed, 0xadf7ULL));
  std::vector<std::size_t> order(pool.size());
  std::iota(order.begin(), order.end(), std::size_t(0));

  for (int e = 0; e < cfg.epochs; ++e) {
    const double lr = cfg.epoch_lrs[std::min(std::size_t(e), cfg.epoch_lrs.size() - 1)];
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[std::size_t(rng.below(i))]);

    double epoch_sum = 0.0;
    std::size_t pos = 0;
    while (pos < order.size()) {
      const std::size_t take = std::min(std::size_t(cfg.batch_size), order.size() - pos);
      std::map<std::string, Tensor<float>> acc;
      double batch_sum = 0.0;
      for (std::size_t b = 0; b < take; ++b) {
        const AdvSample& s = pool[order[pos + b]];
        Graph<float> g;
        std::map<std::string, NodeId> wids;
        NodeId ones = g.leaf(full_like(s.scene->image, 1.0f));
        NodeId x01 = clamp01(g, g.add(g.leaf(s.scene->image), g.leaf(s.v)), ones);
        NodeId pred = forward_depth(res.model, g, x01, /*trainable=*/true, &wids);
        NodeId ref = g.leaf(s.clean_pred);
        NodeId loss = g.mean_all(g.div_elementwise(g.abs(g.sub(pred, ref)), ref));
        batch_sum += double(g.value(loss).data[0]);
        g.backward(loss);
        for (auto& [name, id] : wids) {
          const std::vector<float>& gw = g.grad(id);
          Tensor<float>& a = acc[name];
          if (a.data.empty()) a = Tensor<float>(g.value(id).shape);
          for (std::size_t i = 0; i < gw.size(); ++i) a.data[i] += gw[i];
        }
      }
      pos += take;
      if (!std::isfinite(batch_sum)) throw NumericsError("adversarial_train: loss diverged");
      epoch_sum += batch_sum;
      const float step = float(lr / double(take));
      for (auto& [name, gacc] : acc) {
        Tensor<float>& w = res.model.weights.at(name);
        for (std::size_t i = 0; i < w.data.size(); ++i) w.data[i] -= step * gacc.data[i];
      }
    }
    res.epoch_loss.push_back(epoch_sum / double(order.size()));
  }

  res.clean_are_after = heldout_scenes.empty() ? 0.0 : model_clean_are(res.model, heldout_scenes);
  return res;
}

}  // namespace depthadv
