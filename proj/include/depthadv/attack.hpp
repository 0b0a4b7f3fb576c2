#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "depthadv/errors.hpp"
#include "depthadv/graph.hpp"
#include "depthadv/model.hpp"
#include "depthadv/targets.hpp"
#include "depthadv/tensor.hpp"

namespace depthadv {

// Clipped iterative gradient descent on the normalized-L1 target loss:
//   v_0 = 0
//   repeat N times: v <- CLIP(v, -xi, xi); v <- v - eta * dloss/dv
//   v <- CLIP(v, -xi, xi)
// Plain gradients (no sign trick, no momentum). The perturbed image is
// clamped to [0,1] before every forward pass. Under a spatial constraint
// the zero region is re-zeroed after every update, so those elements are
// exact zeros in the result.

enum class ConstraintMode { None, InsideMask, OutsideMask };

struct AttackConfig {
  double xi = 2e-2;
  double eta = 5.0;
  int steps = 500;
  ConstraintMode constraint = ConstraintMode::None;
  Mask mask;  // required for constrained modes
  std::uint64_t seed = 0;
};

// Default per-xi learning rates, scaled to this loss magnitude.
inline double default_eta_for_xi(double xi) {
  if (xi <= 2.5e-3) return 0.1;
  if (xi <= 7.5e-3) return 1.0;
  if (xi <= 1.5e-2) return 3.0;
  return 5.0;
}

template <typename T = float>
struct Perturbation {
  Tensor<T> v;  // [3,H,W]
  double xi = 0.0;
  int steps = 0;
  double final_loss = 0.0;
  double l1 = 0.0;  // mean |v| per element
  std::vector<double> loss_curve;  // loss at each evaluated step, then final
};

namespace detail {

template <typename T>
void validate_attack_inputs(const Tensor<T>& x, const Tensor<T>& d_t, const AttackConfig& cfg) {
  if (x.rank() != 3 || x.shape[0] != 3) throw ShapeError("attack: image must be [3,H,W]");
  if (d_t.rank() != 3 || d_t.shape[0] != 1 || d_t.shape[1] != x.shape[1] ||
      d_t.shape[2] != x.shape[2])
    throw ShapeError("attack: target must be [1,H,W] matching the image");
  for (T v : d_t.data)
    if (!(v > T(0))) throw NumericsError("attack: target depth must be strictly positive");
  if (cfg.xi < 0) throw ConfigError("attack: xi must be >= 0");
  if (cfg.eta < 0) throw ConfigError("attack: eta must be >= 0");
  if (cfg.steps < 0) throw ConfigError("attack: steps must be >= 0");
  if (cfg.constraint != ConstraintMode::None &&
      (cfg.mask.h != x.shape[1] || cfg.mask.w != x.shape[2]))
    throw ShapeError("attack: constraint mask size mismatch");
}

// Zero the forbidden region of v (all three channels share the mask).
template <typename T>
void apply_constraint(Tensor<T>& v, const AttackConfig& cfg) {
  if (cfg.constraint == ConstraintMode::None) return;
  const std::size_t plane = std::size_t(cfg.mask.h) * cfg.mask.w;
  for (std::size_t p = 0; p < plane; ++p) {
    const bool in_mask = cfg.mask.data[p] != 0;
    const bool forbidden = cfg.constraint == ConstraintMode::InsideMask ? !in_mask : in_mask;
    if (!forbidden) continue;
    v.data[p] = T(0);
    v.data[plane + p] = T(0);
    v.data[2 * plane + p] = T(0);
  }
}

// loss = mean(|f(clamp(x+v)) - d_t| / d_t), averaged over models when
// several are given. Returns the loss node; v's node id via out param.
template <typename T>
NodeId build_target_loss(Graph<T>& g, const std::vector<const DepthModel<T>*>& models,
                         const Tensor<T>& x, const Tensor<T>& v,
                         const std::vector<const Tensor<T>*>& d_ts, bool v_grad, NodeId* v_id,
                         const Tensor<T>* ascent_from = nullptr) {
  NodeId xn = g.leaf(x);
  Tensor<T> vt = v;
  vt.requires_grad = v_grad;
  NodeId vn = g.leaf(vt);
  if (v_id) *v_id = vn;
  NodeId ones = g.leaf(full_like(x, T(1)));
  NodeId x01 = clamp01(g, g.add(xn, vn), ones);

  NodeId total{-1};
  for (std::size_t k = 0; k < models.size(); ++k) {
    NodeId pred = forward_depth(*models[k], g, x01);
    NodeId dt = g.leaf(*d_ts[k]);
    NodeId term = g.mean_all(g.div_elementwise(g.abs(g.sub(pred, dt)), dt));
    if (ascent_from) {
      // descent toward the target plus ascent away from the original
      NodeId d0 = g.leaf(*ascent_from);
      NodeId away = g.mean_all(g.div_elementwise(g.abs(g.sub(pred, d0)), d0));
      term = g.sub(term, away);
    }
    total = (total.v < 0) ? term : g.add(total, term);
  }
  if (models.size() > 1) total = g.mul_scalar(total, T(1) / T(models.size()));
  return total;
}

template <typename T>
Perturbation<T> iterate(const std::vector<const DepthModel<T>*>& models, const Tensor<T>& x,
                        const std::vector<const Tensor<T>*>& d_ts, const AttackConfig& cfg,
                        const Tensor<T>* ascent_from) {
  for (const auto* m : models)
    if (!m) throw ConfigError("attack: null model");
  for (const auto* dt : d_ts) validate_attack_inputs(x, *dt, cfg);

  Perturbation<T> out;
  out.xi = cfg.xi;
  out.steps = cfg.steps;
  out.v = Tensor<T>(x.shape);  // v_0 = 0
  out.loss_curve.reserve(std::size_t(cfg.steps) + 1);

  const T xi = T(cfg.xi);
  const T eta = T(cfg.eta);
  for (int n = 0; n < cfg.steps; ++n) {
    out.v = clip_inf(out.v, xi);
    apply_constraint(out.v, cfg);
    Graph<T> g;
    NodeId vn;
    NodeId loss = build_target_loss<T>(g, models, x, out.v, d_ts, true, &vn, ascent_from);
    const double lv = double(g.value(loss).data[0]);
    if (!std::isfinite(lv))
      throw NumericsError("attack: non-finite loss at step " + std::to_string(n));
    out.loss_curve.push_back(lv);
    g.backward(loss);
    const std::vector<T>& gv = g.grad(vn);
    for (std::size_t i = 0; i < out.v.data.size(); ++i) out.v.data[i] -= eta * gv[i];
  }
  out.v = clip_inf(out.v, xi);
  apply_constraint(out.v, cfg);

  {
    Graph<T> g;
    NodeId loss = build_target_loss<T>(g, models, x, out.v, d_ts, false, nullptr);
    out.final_loss = double(g.value(loss).data[0]);
    out.loss_curve.push_back(out.final_loss);
  }
  out.l1 = mean_abs(out.v);
  return out;
}

}  // namespace detail

// Normalized-L1 distance between the prediction for clamp(x+v) and d_t.
template <typename T>
inline double target_loss(const DepthModel<T>& m, const Tensor<T>& x, const Tensor<T>& v,
                          const Tensor<T>& d_t) {
  AttackConfig probe;  // only used for shape validation
  detail::validate_attack_inputs(x, d_t, probe);
  if (v.shape != x.shape) throw ShapeError("target_loss: v must match the image shape");
  Graph<T> g;
  NodeId loss = detail::build_target_loss<T>(g, {&m}, x, v, {&d_t}, false, nullptr);
  return double(g.value(loss).data[0]);
}

template <typename T>
inline Perturbation<T> craft(const DepthModel<T>& m, const Tensor<T>& x, const Tensor<T>& d_t,
                             const AttackConfig& cfg) {
  return detail::iterate<T>({&m}, x, {&d_t}, cfg, nullptr);
}

// Same machinery with a spatial constraint; provided for symmetry with
// the unconstrained entry point.
template <typename T>
inline Perturbation<T> craft_constrained(const DepthModel<T>& m, const Tensor<T>& x,
                                         const Tensor<T>& d_t, const AttackConfig& cfg) {
  if (cfg.constraint == ConstraintMode::None)
    throw ConfigError("craft_constrained: config has no constraint");
  return craft(m, x, d_t, cfg);
}

// One shared perturbation minimizing the unweighted mean of the models'
// target losses. Targets are per model, since each model is steered
// toward a construction over its own prediction.
template <typename T>
inline Perturbation<T> craft_joint(const std::vector<const DepthModel<T>*>& models,
                                   const Tensor<T>& x, const std::vector<Tensor<T>>& d_ts,
                                   const AttackConfig& cfg) {
  if (models.empty()) throw ConfigError("craft_joint: need at least one model");
  if (models.size() != d_ts.size())
    throw ConfigError("craft_joint: one target per model required");
  for (std::size_t k = 1; k < d_ts.size(); ++k)
    if (d_ts[k].shape != d_ts[0].shape) throw ShapeError("craft_joint: target shape mismatch");
  std::vector<const Tensor<T>*> dtp;
  for (const auto& t : d_ts) dtp.push_back(&t);
  return detail::iterate<T>(models, x, dtp, cfg, nullptr);
}

template <typename T>
inline Perturbation<T> craft_joint(const std::vector<const DepthModel<T>*>& models,
                                   const Tensor<T>& x, const Tensor<T>& d_t,
                                   const AttackConfig& cfg) {
  std::vector<Tensor<T>> d_ts(models.size(), d_t);
  return craft_joint(models, x, d_ts, cfg);
}

// Ascent-plus-descent baseline, the usual re-purposing of dense
// adversarial generation for regression. Each step minimizes
// loss(v; d_t) - loss(v; f(x)), which tends to overshoot the target.
template <typename T>
inline Perturbation<T> dag_baseline(const DepthModel<T>& m, const Tensor<T>& x,
                                    const Tensor<T>& d_t, const AttackConfig& cfg) {
  Tensor<T> d0 = forward_depth(m, x);
  return detail::iterate<T>({&m}, x, {&d_t}, cfg, &d0);
}

}  // namespace depthadv
