#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <string>
#include <vector>

#include "depthadv/errors.hpp"
#include "depthadv/model.hpp"
#include "depthadv/scene.hpp"
#include "depthadv/tensor.hpp"

namespace depthadv {

// Target depth constructions. Every function takes a predicted depth map
// [1,H,W] and returns a target map of the same shape, clamped to the
// model's representable range where scaling could leave it.

struct Mask {
  int h = 0, w = 0;
  std::vector<unsigned char> data;  // 0/1

  Mask() = default;
  Mask(int h_, int w_) : h(h_), w(w_), data(std::size_t(h_) * w_, 0) {}

  std::size_t count() const {
    std::size_t n = 0;
    for (unsigned char v : data) n += v;
    return n;
  }
  bool empty() const { return count() == 0; }
  bool full() const { return count() == data.size(); }

  Mask complement() const {
    Mask m(h, w);
    for (std::size_t i = 0; i < data.size(); ++i) m.data[i] = data[i] ? 0 : 1;
    return m;
  }
};

inline Mask mask_from_semantic(const Scene& s, Category cat) {
  Mask m(s.h, s.w);
  for (std::size_t i = 0; i < s.semantic.size(); ++i)
    m.data[i] = (s.semantic[i] == static_cast<unsigned char>(cat)) ? 1 : 0;
  return m;
}

inline Mask mask_from_instance(const Scene& s, const std::vector<int>& ids) {
  std::set<int> want(ids.begin(), ids.end());
  std::set<int> present(s.instance.begin(), s.instance.end());
  for (int id : want) {
    if (id <= 0) throw ConfigError("mask_from_instance: ids must be positive");
    if (!present.count(id))
      throw ConfigError("mask_from_instance: unknown instance id " + std::to_string(id));
  }
  Mask m(s.h, s.w);
  for (std::size_t i = 0; i < s.instance.size(); ++i)
    m.data[i] = want.count(s.instance[i]) ? 1 : 0;
  return m;
}

// Largest instance by pixel count; ties resolved toward the smaller id.
inline int largest_instance_id(const Scene& s) {
  std::vector<std::size_t> counts(std::size_t(s.max_instance_id()) + 1, 0);
  for (int v : s.instance)
    if (v > 0) counts[std::size_t(v)]++;
  int best = 0;
  std::size_t best_n = 0;
  for (std::size_t id = 1; id < counts.size(); ++id)
    if (counts[id] > best_n) {
      best_n = counts[id];
      best = int(id);
    }
  return best;  // 0 when the scene has no instances
}

template <typename T>
inline Tensor<T> scale_target(const Tensor<T>& d, double alpha, T d_min, T d_max) {
  if (alpha <= -1.0) throw ConfigError("scale_target: alpha must be > -1");
  Tensor<T> out(d.shape);
  for (std::size_t i = 0; i < d.data.size(); ++i)
    out.data[i] = std::clamp(T((1.0 + alpha) * double(d.data[i])), d_min, d_max);
  return out;
}

enum class FlipAxis { Horizontal, Vertical };

template <typename T>
inline Tensor<T> flip_target(const Tensor<T>& d, FlipAxis axis) {
  if (d.rank() != 3 || d.shape[0] != 1) throw ShapeError("flip_target: expected [1,H,W]");
  const int h = d.shape[1], w = d.shape[2];
  Tensor<T> out(d.shape);
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) {
      const int si = axis == FlipAxis::Vertical ? h - 1 - i : i;
      const int sj = axis == FlipAxis::Horizontal ? w - 1 - j : j;
      out.data[std::size_t(i) * w + j] = d.data[std::size_t(si) * w + sj];
    }
  return out;
}

template <typename T>
inline Tensor<T> preset_target(const DepthModel<T>& m, const Tensor<T>& other_image) {
  return forward_depth(m, other_image);
}

struct TargetWarnings {
  bool empty_mask = false;
};

template <typename T>
inline Tensor<T> category_scale_target(const Tensor<T>& d, const Mask& m, double alpha, T d_min,
                                       T d_max, TargetWarnings* warn = nullptr) {
  if (alpha <= -1.0) throw ConfigError("category_scale_target: alpha must be > -1");
  if (d.rank() != 3 || d.shape[1] != m.h || d.shape[2] != m.w)
    throw ShapeError("category_scale_target: mask size mismatch");
  if (m.empty()) {
    if (warn) warn->empty_mask = true;
    return d;
  }
  Tensor<T> out = d;
  for (std::size_t i = 0; i < m.data.size(); ++i)
    if (m.data[i]) out.data[i] = std::clamp(T((1.0 + alpha) * double(d.data[i])), d_min, d_max);
  return out;
}

// Object removal: masked depth is replaced by interpolation anchored on
// the unmasked contour. Row-first linear interpolation; rows without an
// unmasked side fall back to per-column interpolation, then to the
// nearest unmasked pixel.
template <typename T>
inline Tensor<T> remove_instance_target(const Tensor<T>& d, const Mask& m) {
  if (d.rank() != 3 || d.shape[0] != 1 || d.shape[1] != m.h || d.shape[2] != m.w)
    throw ShapeError("remove_instance_target: mask size mismatch");
  if (m.full()) throw DataError("remove_instance_target: mask covers the whole image");
  const int h = m.h, w = m.w;
  Tensor<T> out = d;
  std::vector<unsigned char> undefined(std::size_t(h) * w, 0);

  // pass 1: per-row linear interpolation between nearest unmasked columns
  for (int i = 0; i < h; ++i) {
    int j = 0;
    while (j < w) {
      if (!m.data[std::size_t(i) * w + j]) {
        ++j;
        continue;
      }
      int j0 = j;
      while (j < w && m.data[std::size_t(i) * w + j]) ++j;
      int j1 = j - 1;  // masked run [j0, j1]
      const bool has_left = j0 > 0;
      const bool has_right = j1 < w - 1;
      if (has_left && has_right) {
        const double left = double(d.data[std::size_t(i) * w + j0 - 1]);
        const double right = double(d.data[std::size_t(i) * w + j1 + 1]);
        const int span = j1 - j0 + 2;
        for (int k = j0; k <= j1; ++k)
          out.data[std::size_t(i) * w + k] = T(left + (right - left) * double(k - j0 + 1) / span);
      } else if (has_left || has_right) {
        const T hold = has_left ? d.data[std::size_t(i) * w + j0 - 1]
                                : d.data[std::size_t(i) * w + j1 + 1];
        for (int k = j0; k <= j1; ++k) out.data[std::size_t(i) * w + k] = hold;
      } else {
        for (int k = j0; k <= j1; ++k) undefined[std::size_t(i) * w + k] = 1;
      }
    }
  }

  // pass 2: per-column interpolation for rows that were fully masked
  std::vector<unsigned char> still(std::size_t(h) * w, 0);
  bool any_still = false;
  for (int j = 0; j < w; ++j)
    for (int i = 0; i < h; ++i) {
      if (!undefined[std::size_t(i) * w + j]) continue;
      int i0 = i - 1;
      while (i0 >= 0 && m.data[std::size_t(i0) * w + j]) --i0;
      int i1 = i + 1;
      while (i1 < h && m.data[std::size_t(i1) * w + j]) ++i1;
      const bool has_up = i0 >= 0;
      const bool has_down = i1 < h;
      if (has_up && has_down) {
        const double up = double(d.data[std::size_t(i0) * w + j]);
        const double down = double(d.data[std::size_t(i1) * w + j]);
        out.data[std::size_t(i) * w + j] =
            T(up + (down - up) * double(i - i0) / double(i1 - i0));
      } else if (has_up || has_down) {
        out.data[std::size_t(i) * w + j] =
            has_up ? d.data[std::size_t(i0) * w + j] : d.data[std::size_t(i1) * w + j];
      } else {
        still[std::size_t(i) * w + j] = 1;
        any_still = true;
      }
    }

  // pass 3: nearest unmasked pixel (deterministic tie break: scan order)
  if (any_still) {
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w; ++j) {
        if (!still[std::size_t(i) * w + j]) continue;
        double best = std::numeric_limits<double>::max();
        T val = d.data[0];
        for (int a = 0; a < h; ++a)
          for (int b = 0; b < w; ++b) {
            if (m.data[std::size_t(a) * w + b]) continue;
            const double dist = double(a - i) * (a - i) + double(b - j) * (b - j);
            if (dist < best) {
              best = dist;
              val = d.data[std::size_t(a) * w + b];
            }
          }
        out.data[std::size_t(i) * w + j] = val;
      }
  }
  return out;
}

template <typename T>
inline Tensor<T> translate_instance_target(const Tensor<T>& d, const Mask& m, int d_col,
                                           int d_row) {
  if (d.rank() != 3 || d.shape[0] != 1 || d.shape[1] != m.h || d.shape[2] != m.w)
    throw ShapeError("translate_instance_target: mask size mismatch");
  const int h = m.h, w = m.w;
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j)
      if (m.data[std::size_t(i) * w + j]) {
        const int ni = i + d_row, nj = j + d_col;
        if (ni < 0 || ni >= h || nj < 0 || nj >= w)
          throw ConfigError("translate_instance_target: shifted mask leaves the canvas");
      }
  Tensor<T> out = remove_instance_target(d, m);
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j)
      if (m.data[std::size_t(i) * w + j])
        out.data[std::size_t(i + d_row) * w + (j + d_col)] = d.data[std::size_t(i) * w + j];
  return out;
}

// --- declarative target specs -------------------------------------------

enum class TargetKind {
  Scale,
  FlipH,
  FlipV,
  Preset,
  CategoryScale,
  RemoveInstance,
  TranslateInstance,
};

struct TargetSpec {
  TargetKind kind = TargetKind::Scale;
  double alpha = 0.0;                      // Scale, CategoryScale
  Category category = Category::Vehicle;   // CategoryScale
  std::vector<int> instance_ids;           // Remove/Translate; empty = largest
  int d_col = 0, d_row = 0;                // Translate
};

inline void validate_spec(const TargetSpec& spec) {
  if (spec.kind == TargetKind::Scale || spec.kind == TargetKind::CategoryScale) {
    if (spec.alpha < -0.45 || spec.alpha > 0.45)
      throw ConfigError("target spec: alpha outside [-0.45, 0.45]");
  }
}

inline std::string target_label(const TargetSpec& spec) {
  char buf[64];
  switch (spec.kind) {
    case TargetKind::Scale:
      std::snprintf(buf, sizeof buf, "scale%+.2f", spec.alpha);
      return buf;
    case TargetKind::FlipH:
      return "fliph";
    case TargetKind::FlipV:
      return "flipv";
    case TargetKind::Preset:
      return "preset";
    case TargetKind::CategoryScale:
      std::snprintf(buf, sizeof buf, "category:%s%+.2f", category_name(spec.category), spec.alpha);
      return buf;
    case TargetKind::RemoveInstance:
      return "remove";
    case TargetKind::TranslateInstance:
      std::snprintf(buf, sizeof buf, "translate:%+d:%+d", spec.d_col, spec.d_row);
      return buf;
  }
  return "?";
}

struct BuiltTarget {
  Tensor<float> depth;
  Mask mask;  // instance/category mask when one participated
  TargetWarnings warnings;
};

// Builds d^t for a scene from the model's own prediction. `preset_image`
// supplies the partner image for Preset targets.
inline BuiltTarget build_target(const DepthModel<float>& m, const Scene& scene,
                                const TargetSpec& spec, const Tensor<float>* preset_image = nullptr) {
  validate_spec(spec);
  BuiltTarget out;
  Tensor<float> pred = forward_depth(m, scene.image);
  switch (spec.kind) {
    case TargetKind::Scale:
      out.depth = scale_target(pred, spec.alpha, m.d_min, m.d_max);
      break;
    case TargetKind::FlipH:
      out.depth = flip_target(pred, FlipAxis::Horizontal);
      break;
    case TargetKind::FlipV:
      out.depth = flip_target(pred, FlipAxis::Vertical);
      break;
    case TargetKind::Preset: {
      if (!preset_image) throw ConfigError("preset target needs a partner image");
      if (preset_image->shape != scene.image.shape)
        throw ShapeError("preset target: resolution mismatch");
      out.depth = preset_target(m, *preset_image);
      break;
    }
    case TargetKind::CategoryScale: {
      out.mask = mask_from_semantic(scene, spec.category);
      out.depth = category_scale_target(pred, out.mask, spec.alpha, m.d_min, m.d_max,
                                        &out.warnings);
      break;
    }
    case TargetKind::RemoveInstance:
    case TargetKind::TranslateInstance: {
      std::vector<int> ids = spec.instance_ids;
      if (ids.empty()) {
        const int id = largest_instance_id(scene);
        if (id == 0) throw ConfigError("scene has no instances for an instance target");
        ids.push_back(id);
      }
      out.mask = mask_from_instance(scene, ids);
      if (spec.kind == TargetKind::RemoveInstance)
        out.depth = remove_instance_target(pred, out.mask);
      else
        out.depth = translate_instance_target(pred, out.mask, spec.d_col, spec.d_row);
      break;
    }
  }
  return out;
}

}  // namespace depthadv
