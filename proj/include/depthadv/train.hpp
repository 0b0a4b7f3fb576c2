#pragma once

#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "depthadv/errors.hpp"
#include "depthadv/graph.hpp"
#include "depthadv/model.hpp"
#include "depthadv/scene.hpp"
#include "depthadv/tensor.hpp"

namespace depthadv {

// Supervised trainer: plain mini-batch SGD on the per-pixel normalized
// L1 loss mean(|pred - gt| / gt), the same normalization the evaluation
// metric uses.

struct TrainConfig {
  int epochs = 40;
  int batch_size = 4;
  // learning rate per epoch; when shorter than epochs the last entry
  // persists. Zero is accepted to express a no-op schedule.
  std::vector<double> epoch_lrs = {0.05};
  std::uint64_t seed = 0;
};

inline std::vector<double> halving_schedule(double lr0, int epochs, int halve_every) {
  std::vector<double> lrs;
  double lr = lr0;
  for (int e = 0; e < epochs; ++e) {
    if (e > 0 && halve_every > 0 && e % halve_every == 0) lr *= 0.5;
    lrs.push_back(lr);
  }
  return lrs;
}

struct TrainStats {
  std::vector<double> epoch_loss;
};

namespace detail {

// One forward/backward on a single sample; returns the loss value and
// accumulates weight gradients into `acc` (keyed like model.weights).
template <typename T>
double sample_grads(const DepthModel<T>& m, const Tensor<T>& image, const Tensor<T>& gt,
                    std::map<std::string, Tensor<T>>& acc) {
  Graph<T> g;
  std::map<std::string, NodeId> wids;
  NodeId pred = forward_depth(m, g, g.leaf(image), /*trainable=*/true, &wids);
  NodeId gtn = g.leaf(gt);
  NodeId loss = g.mean_all(g.div_elementwise(g.abs(g.sub(pred, gtn)), gtn));
  const double lv = double(g.value(loss).data[0]);
  g.backward(loss);
  for (auto& [name, id] : wids) {
    const std::vector<T>& gw = g.grad(id);
    Tensor<T>& a = acc[name];
    if (a.data.empty()) a = Tensor<T>(g.value(id).shape);
    for (std::size_t i = 0; i < gw.size(); ++i) a.data[i] += gw[i];
  }
  return lv;
}

}  // namespace detail

inline TrainStats train(DepthModel<float>& model, const std::vector<Scene>& scenes,
                        const TrainConfig& cfg) {
  if (scenes.empty()) throw DataError("train: empty dataset");
  if (cfg.epochs < 1) throw ConfigError("train: epochs must be >= 1");
  if (cfg.batch_size < 1) throw ConfigError("train: batch size must be >= 1");
  if (cfg.epoch_lrs.empty()) throw ConfigError("train: empty learning rate schedule");
  for (double lr : cfg.epoch_lrs)
    if (lr < 0) throw ConfigError("train: negative learning rate");

  TrainStats stats;
  Rng rng(mix_seed(cfg.seed, 0x7261ULL));
  std::vector<std::size_t> order(scenes.size());
  std::iota(order.begin(), order.end(), std::size_t(0));

  for (int e = 0; e < cfg.epochs; ++e) {
    const double lr =
        cfg.epoch_lrs[std::min(std::size_t(e), cfg.epoch_lrs.size() - 1)];
    // Fisher-Yates with the deterministic rng
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[std::size_t(rng.below(i))]);

    double epoch_sum = 0.0;
    std::size_t pos = 0;
    while (pos < order.size()) {
      const std::size_t take = std::min(std::size_t(cfg.batch_size), order.size() - pos);
      std::map<std::string, Tensor<float>> acc;
      double batch_sum = 0.0;
      for (std::size_t k = 0; k < take; ++k) {
        const Scene& s = scenes[order[pos + k]];
        batch_sum += detail::sample_grads(model, s.image, s.depth_gt, acc);
      }
      pos += take;
      const double batch_loss = batch_sum / double(take);
      if (!std::isfinite(batch_loss)) throw NumericsError("train: loss diverged");
      epoch_sum += batch_sum;
      const float step = float(lr / double(take));
      for (auto& [name, gacc] : acc) {
        Tensor<float>& w = model.weights.at(name);
        for (std::size_t i = 0; i < w.data.size(); ++i) w.data[i] -= step * gacc.data[i];
      }
    }
    stats.epoch_loss.push_back(epoch_sum / double(order.size()));
  }
  return stats;
}

}  // namespace depthadv
