#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "depthadv/errors.hpp"
#include "depthadv/image_io.hpp"
#include "depthadv/rng.hpp"
#include "depthadv/tensor.hpp"

namespace depthadv {

// Synthetic road scenes: a pinhole ground plane receding to a horizon,
// sky above it, and textured axis-aligned boxes standing on the ground.
// Scenes carry ground-truth depth plus semantic and instance maps, so
// category- and instance-conditioned targets can be built exactly.

enum class Category : unsigned char {
  Sky = 0,
  Flat = 1,
  Construction = 2,
  Vehicle = 3,
  Human = 4,
  Nature = 5,
  Traffic = 6,
};

constexpr int kCategoryCount = 7;

inline const char* category_name(Category c) {
  switch (c) {
    case Category::Sky: return "Sky";
    case Category::Flat: return "Flat";
    case Category::Construction: return "Construction";
    case Category::Vehicle: return "Vehicle";
    case Category::Human: return "Human";
    case Category::Nature: return "Nature";
    case Category::Traffic: return "Traffic";
  }
  return "?";
}

inline Category category_from_string(const std::string& s) {
  for (int i = 0; i < kCategoryCount; ++i)
    if (s == category_name(Category(i))) return Category(i);
  throw ConfigError("unknown category: " + s);
}

struct Scene {
  int h = 0, w = 0;
  Tensor<float> image;     // [3,H,W] in [0,1]
  Tensor<float> depth_gt;  // [1,H,W] meters
  std::vector<unsigned char> semantic;  // [H*W] Category values
  std::vector<int> instance;            // [H*W], 0 = no instance
  float d_min = 1.0f, d_max = 80.0f;
  std::uint64_t seed = 0;

  int max_instance_id() const {
    int m = 0;
    for (int v : instance) m = std::max(m, v);
    return m;
  }
};

// Explicitly placed box, used by tests and demos to pin down layouts.
struct FixedObject {
  Category category = Category::Vehicle;
  double depth_m = 10.0;
  double center_col_frac = 0.5;  // 0..1 across the canvas
  double width_m = 2.0;
  double height_m = 1.5;
};

struct SceneParams {
  int h = 64, w = 128;
  float d_min = 1.0f, d_max = 80.0f;
  double focal_px = 64.0;
  double cam_height_m = 1.5;
  int horizon_row = 18;
  // Camera height varies per scene while the horizon stays fixed, so the
  // row-to-depth mapping has a per-scene gain the net must estimate from
  // appearance; that estimate is the surface scale attacks work against.
  int horizon_jitter = 0;
  double cam_height_jitter = 0.25;
  double noise_std = 0.02;
  // haze depth cue: mix toward the haze color by fog_strength*(1-e^{-z/s})
  double fog_strength = 0.8;
  double fog_scale = 35.0;
  double texture_amp = 0.0;   // texture contrast at the camera...
  double texture_scale = 20.0;  // ...decaying with depth (texture gradient)
  int max_objects = 24;
  // inclusive count ranges per placeable category
  int construction_lo = 2, construction_hi = 4;
  int vehicle_lo = 0, vehicle_hi = 3;
  int human_lo = 0, human_hi = 2;
  int nature_lo = 2, nature_hi = 4;
  int traffic_lo = 0, traffic_hi = 2;
  // when non-empty, replaces random object sampling entirely
  std::vector<FixedObject> fixed_objects;
};

// per-scene sampled camera geometry
struct SceneLayout {
  int horizon = 18;
  double cam_height = 1.5;
};

namespace detail {

struct ObjectBox {
  Category cat;
  double z;
  int left, right, top, bottom;  // inclusive pixel bounds
  float tint[3];
};

struct CategoryLook {
  float base[3];
  double z_lo, z_hi;       // sampled depth range
  double w_lo, w_hi;       // physical width range (m)
  double h_lo, h_hi;       // physical height range (m)
};

inline const CategoryLook& look_of(Category c) {
  static const CategoryLook looks[kCategoryCount] = {
      /* Sky          */ {{0.55f, 0.68f, 0.88f}, 0, 0, 0, 0, 0, 0},
      /* Flat         */ {{0.32f, 0.31f, 0.30f}, 0, 0, 0, 0, 0, 0},
      /* Construction */ {{0.52f, 0.44f, 0.38f}, 8, 70, 8, 40, 5, 14},
      /* Vehicle      */ {{0.48f, 0.16f, 0.16f}, 5, 28, 1.7, 2.6, 1.3, 2.0},
      /* Human        */ {{0.62f, 0.34f, 0.22f}, 5, 24, 0.45, 0.7, 1.5, 1.9},
      /* Nature       */ {{0.13f, 0.42f, 0.16f}, 6, 60, 2.0, 8.0, 4.0, 12.0},
      /* Traffic      */ {{0.75f, 0.62f, 0.12f}, 5, 30, 0.25, 0.5, 1.8, 3.0},
  };
  return looks[int(c)];
}

inline double fog_amount(const SceneParams& p, double z) {
  return p.fog_strength * (1.0 - std::exp(-z / p.fog_scale));
}

constexpr float kHaze[3] = {0.72f, 0.76f, 0.82f};

inline double ground_depth(const SceneParams& p, const SceneLayout& lay, int row) {
  const double k = p.focal_px * lay.cam_height;
  const double d = k / double(row - lay.horizon);
  return std::clamp(d, double(p.d_min), double(p.d_max));
}

inline ObjectBox place_box(const SceneParams& p, const SceneLayout& lay, Category cat, double z,
                           double center_col, double width_m, double height_m, Rng& rng) {
  ObjectBox b;
  b.cat = cat;
  b.z = z;
  const double k = p.focal_px * lay.cam_height;
  int bottom = lay.horizon + int(std::lround(k / z));
  bottom = std::clamp(bottom, lay.horizon + 1, p.h - 1);
  int ph = std::max(1, int(std::lround(p.focal_px * height_m / z)));
  int pw = std::max(1, int(std::lround(p.focal_px * width_m / z)));
  pw = std::min(pw, p.w - 2);  // never a full row
  int left = int(std::lround(center_col - pw / 2.0));
  left = std::clamp(left, 0, p.w - 1 - pw);
  b.left = left;
  b.right = left + pw - 1;
  b.bottom = bottom;
  b.top = std::max(0, bottom - ph + 1);
  for (float& t : b.tint) t = float(rng.uniform(-0.12, 0.12));
  return b;
}

inline ObjectBox sample_box(const SceneParams& p, const SceneLayout& lay, Category cat,
                            Rng& rng) {
  const CategoryLook& lk = look_of(cat);
  // log-uniform depth keeps near and far objects equally represented
  const double z = std::exp(rng.uniform(std::log(lk.z_lo), std::log(lk.z_hi)));
  const double wm = rng.uniform(lk.w_lo, lk.w_hi);
  const double hm = rng.uniform(lk.h_lo, lk.h_hi);
  const double pw_est = p.focal_px * wm / z;
  const double c = rng.uniform(pw_est / 2.0 + 1.0, p.w - 2.0 - pw_est / 2.0);
  return place_box(p, lay, cat, z, c, wm, hm, rng);
}

}  // namespace detail

inline Scene generate(std::uint64_t seed, const SceneParams& p) {
  if (p.h < 16 || p.w < 16) throw ConfigError("scene: canvas too small");
  if (p.horizon_row < 1 || p.horizon_row >= p.h - 2) throw ConfigError("scene: bad horizon row");

  Rng rng(mix_seed(seed, 0x5ce7eULL));
  Scene s;
  s.h = p.h;
  s.w = p.w;
  s.d_min = p.d_min;
  s.d_max = p.d_max;
  s.seed = seed;
  s.image = Tensor<float>({3, p.h, p.w});
  s.depth_gt = Tensor<float>({1, p.h, p.w});
  s.semantic.assign(std::size_t(p.h) * p.w, static_cast<unsigned char>(Category::Sky));
  s.instance.assign(std::size_t(p.h) * p.w, 0);

  SceneLayout lay;
  lay.horizon = p.horizon_row;
  if (p.horizon_jitter > 0)
    lay.horizon += int(rng.below(std::uint64_t(2 * p.horizon_jitter + 1))) - p.horizon_jitter;
  lay.horizon = std::clamp(lay.horizon, 1, p.h - 3);
  lay.cam_height = p.cam_height_m;
  if (p.cam_height_jitter > 0)
    lay.cam_height += rng.uniform(-p.cam_height_jitter, p.cam_height_jitter);

  // backdrop: sky above the horizon, receding ground below it
  for (int i = 0; i < p.h; ++i) {
    const bool sky = i <= lay.horizon;
    const double z = sky ? double(p.d_max) : detail::ground_depth(p, lay, i);
    const Category cat = sky ? Category::Sky : Category::Flat;
    const auto& look = detail::look_of(cat);
    const double fog = detail::fog_amount(p, z);
    for (int j = 0; j < p.w; ++j) {
      const std::size_t px = std::size_t(i) * p.w + j;
      s.depth_gt.data[px] = float(z);
      s.semantic[px] = static_cast<unsigned char>(cat);
      for (int c = 0; c < 3; ++c)
        s.image.data[std::size_t(c) * p.h * p.w + px] =
            float((1.0 - fog) * look.base[c] + fog * detail::kHaze[c]);
    }
  }

  // objects
  std::vector<detail::ObjectBox> boxes;
  if (!p.fixed_objects.empty()) {
    for (const FixedObject& fo : p.fixed_objects)
      boxes.push_back(detail::place_box(p, lay, fo.category, fo.depth_m,
                                        fo.center_col_frac * p.w, fo.width_m, fo.height_m, rng));
  } else {
    auto sample_count = [&](int lo, int hi) { return lo + int(rng.below(std::uint64_t(hi - lo + 1))); };
    struct CatRange {
      Category cat;
      int lo, hi;
    };
    const CatRange ranges[] = {
        {Category::Construction, p.construction_lo, p.construction_hi},
        {Category::Nature, p.nature_lo, p.nature_hi},
        {Category::Vehicle, p.vehicle_lo, p.vehicle_hi},
        {Category::Human, p.human_lo, p.human_hi},
        {Category::Traffic, p.traffic_lo, p.traffic_hi},
    };
    for (const CatRange& r : ranges) {
      const int n = sample_count(r.lo, r.hi);
      for (int k = 0; k < n; ++k) boxes.push_back(detail::sample_box(p, lay, r.cat, rng));
    }
  }
  if (int(boxes.size()) > p.max_objects)
    throw DataError("scene: object count exceeds canvas capacity");

  // paint far to near so nearer boxes win occluded pixels
  std::stable_sort(boxes.begin(), boxes.end(),
                   [](const detail::ObjectBox& a, const detail::ObjectBox& b) { return a.z > b.z; });
  int next_instance = 1;
  for (const detail::ObjectBox& b : boxes) {
    const auto& look = detail::look_of(b.cat);
    const double fog = detail::fog_amount(p, b.z);
    const bool instanced = (b.cat == Category::Vehicle || b.cat == Category::Human);
    const int id = instanced ? next_instance++ : 0;
    for (int i = b.top; i <= b.bottom; ++i)
      for (int j = b.left; j <= b.right; ++j) {
        const std::size_t px = std::size_t(i) * p.w + j;
        s.depth_gt.data[px] = float(b.z);
        s.semantic[px] = static_cast<unsigned char>(b.cat);
        s.instance[px] = id;
        for (int c = 0; c < 3; ++c) {
          const double base = std::clamp(double(look.base[c] + b.tint[c]), 0.0, 1.0);
          s.image.data[std::size_t(c) * p.h * p.w + px] =
              float((1.0 - fog) * base + fog * detail::kHaze[c]);
        }
      }
  }

  // texture gradient: high-frequency contrast that fades with depth,
  // the appearance cue small perturbations can work against
  if (p.texture_amp > 0.0) {
    const std::size_t plane = std::size_t(p.h) * p.w;
    for (std::size_t px = 0; px < plane; ++px) {
      const double amp =
          p.texture_amp * std::exp(-double(s.depth_gt.data[px]) / p.texture_scale);
      const float t = float(amp * rng.uniform(-1.0, 1.0));
      for (int c = 0; c < 3; ++c) s.image.data[std::size_t(c) * plane + px] += t;
    }
  }

  // pixel noise, applied last so every region is textured
  for (float& v : s.image.data)
    v = std::clamp(v + float(p.noise_std * rng.normal()), 0.0f, 1.0f);

  return s;
}

struct Dataset {
  std::vector<Scene> train;
  std::vector<Scene> test;
};

inline Dataset make_dataset(std::uint64_t seed, int n_train, int n_test, const SceneParams& p) {
  if (n_train < 1 || n_test < 1) throw ConfigError("make_dataset: n_train and n_test must be >= 1");
  Dataset d;
  d.train.reserve(std::size_t(n_train));
  d.test.reserve(std::size_t(n_test));
  for (int i = 0; i < n_train; ++i) d.train.push_back(generate(mix_seed(seed, 1, std::uint64_t(i)), p));
  for (int i = 0; i < n_test; ++i) d.test.push_back(generate(mix_seed(seed, 2, std::uint64_t(i)), p));
  return d;
}

// --- serialization ------------------------------------------------------

inline void save_scene(const std::string& dir, const Scene& s) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  write_ppm(dir + "/image.ppm", s.image);
  save_dtns(dir + "/depth.dtns", s.depth_gt);
  write_pgm(dir + "/semantic.pgm", s.semantic, s.h, s.w);
  std::vector<unsigned char> inst(s.instance.size());
  for (std::size_t i = 0; i < inst.size(); ++i) {
    if (s.instance[i] > 255) throw DataError("save_scene: instance id exceeds 255");
    inst[i] = static_cast<unsigned char>(s.instance[i]);
  }
  write_pgm(dir + "/instance.pgm", inst, s.h, s.w);
}

inline Scene load_scene(const std::string& dir, float d_min = 1.0f, float d_max = 80.0f) {
  Scene s;
  s.image = read_ppm(dir + "/image.ppm");
  s.depth_gt = load_dtns(dir + "/depth.dtns");
  int h = 0, w = 0;
  s.semantic = read_pgm(dir + "/semantic.pgm", h, w);
  s.h = h;
  s.w = w;
  int h2 = 0, w2 = 0;
  std::vector<unsigned char> inst = read_pgm(dir + "/instance.pgm", h2, w2);
  if (h2 != h || w2 != w) throw IOError("load_scene: map size mismatch");
  s.instance.assign(inst.begin(), inst.end());
  s.d_min = d_min;
  s.d_max = d_max;
  if (s.image.shape != std::vector<int>{3, h, w} || s.depth_gt.shape != std::vector<int>{1, h, w})
    throw IOError("load_scene: tensor shape mismatch");
  return s;
}

inline std::uint64_t scene_checksum(const Scene& s) {
  std::uint64_t h = 1469598103934665603ULL;  // fnv-1a over quantized content
  auto mix = [&h](std::uint64_t v) {
    h ^= v;
    h *= 1099511628211ULL;
  };
  for (float v : s.image.data) mix(detail::to_byte(v));
  for (float v : s.depth_gt.data) mix(std::uint64_t(std::llround(double(v) * 1024.0)));
  for (unsigned char v : s.semantic) mix(v);
  for (int v : s.instance) mix(std::uint64_t(v));
  return h;
}

}  // namespace depthadv
