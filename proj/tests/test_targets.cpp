#include <doctest.h>

#include "depthadv/model.hpp"
#include "depthadv/scene.hpp"
#include "depthadv/targets.hpp"

using namespace depthadv;

namespace {

Tensor<float> depth_map(int h, int w, std::vector<float> vals) {
  return Tensor<float>({1, h, w}, std::move(vals));
}

Mask mask_of(int h, int w, std::vector<unsigned char> vals) {
  Mask m(h, w);
  m.data = std::move(vals);
  return m;
}

constexpr float kDMin = 1.0f, kDMax = 80.0f;

}  // namespace

TEST_CASE("scale_target") {
  SUBCASE("alpha 0 is the identity") {
    auto d = depth_map(1, 3, {2.0f, 10.0f, 40.0f});
    CHECK(scale_target(d, 0.0, kDMin, kDMax).data == d.data);
  }

  SUBCASE("scale([10], -0.10) = [9]") {
    auto d = depth_map(1, 1, {10.0f});
    CHECK(scale_target(d, -0.10, kDMin, kDMax).data[0] == doctest::Approx(9.0).epsilon(1e-6));
  }

  SUBCASE("the paper grid of factors is accepted") {
    auto d = depth_map(1, 1, {10.0f});
    for (double a : {-0.10, -0.05, 0.05, 0.10}) CHECK_NOTHROW(scale_target(d, a, kDMin, kDMax));
  }

  SUBCASE("alpha <= -1 rejected") {
    auto d = depth_map(1, 1, {10.0f});
    CHECK_THROWS_AS(scale_target(d, -1.0, kDMin, kDMax), ConfigError);
  }

  SUBCASE("results are clamped to the representable range") {
    auto d = depth_map(1, 2, {75.0f, 1.5f});
    auto t = scale_target(d, 0.10, kDMin, kDMax);
    CHECK(t.data[0] == kDMax);
    auto t2 = scale_target(d, -0.40, kDMin, kDMax);
    CHECK(t2.data[1] == kDMin);
  }
}

TEST_CASE("flip_target") {
  SUBCASE("1x2 horizontal flip") {
    auto d = depth_map(1, 2, {3.0f, 7.0f});
    auto f = flip_target(d, FlipAxis::Horizontal);
    CHECK(f.data == std::vector<float>{7.0f, 3.0f});
  }

  SUBCASE("2x1 vertical flip") {
    auto d = depth_map(2, 1, {3.0f, 7.0f});
    auto f = flip_target(d, FlipAxis::Vertical);
    CHECK(f.data == std::vector<float>{7.0f, 3.0f});
  }

  SUBCASE("involution and commutation") {
    Rng rng(8);
    Tensor<float> d({1, 6, 9});
    for (auto& v : d.data) v = float(rng.uniform(1.0, 80.0));
    auto fh = [&](const Tensor<float>& t) { return flip_target(t, FlipAxis::Horizontal); };
    auto fv = [&](const Tensor<float>& t) { return flip_target(t, FlipAxis::Vertical); };
    CHECK(fh(fh(d)).data == d.data);
    CHECK(fv(fv(d)).data == d.data);
    CHECK(fh(fv(d)).data == fv(fh(d)).data);
  }
}

TEST_CASE("preset_target") {
  SceneParams p;
  p.h = 32;
  p.w = 64;
  p.horizon_row = 12;
  p.focal_px = 32.0;
  auto m = make_model<float>(Arch::ModelA, 3);
  Scene s1 = generate(1, p);
  Scene s2 = generate(2, p);
  Scene s3 = generate(3, p);

  SUBCASE("preset of the own image equals the own prediction") {
    CHECK(preset_target(m, s1.image).data == forward_depth(m, s1.image).data);
  }

  SUBCASE("target is independent of the attacked image") {
    auto t = preset_target(m, s2.image);
    CHECK(t.data == forward_depth(m, s2.image).data);
  }

  SUBCASE("different presets differ where the predictions differ") {
    auto t2 = preset_target(m, s2.image);
    auto t3 = preset_target(m, s3.image);
    auto p2 = forward_depth(m, s2.image);
    auto p3 = forward_depth(m, s3.image);
    for (std::size_t i = 0; i < t2.data.size(); ++i)
      CHECK((t2.data[i] != t3.data[i]) == (p2.data[i] != p3.data[i]));
  }
}

TEST_CASE("category_scale_target") {
  SUBCASE("full mask reduces to the global scale target") {
    Rng rng(4);
    Tensor<float> d({1, 5, 6});
    for (auto& v : d.data) v = float(rng.uniform(2.0, 60.0));
    Mask full(5, 6);
    std::fill(full.data.begin(), full.data.end(), 1);
    auto a = category_scale_target(d, full, 0.10, kDMin, kDMax);
    auto b = scale_target(d, 0.10, kDMin, kDMax);
    CHECK(a.data == b.data);
  }

  SUBCASE("empty mask warns and returns the input") {
    auto d = depth_map(1, 2, {5.0f, 6.0f});
    Mask zero(1, 2);
    TargetWarnings warn;
    auto t = category_scale_target(d, zero, 0.10, kDMin, kDMax, &warn);
    CHECK(warn.empty_mask);
    CHECK(t.data == d.data);
  }

  SUBCASE("d=[10,10], M=[1,0], alpha=0.10 -> [11,10]") {
    auto d = depth_map(1, 2, {10.0f, 10.0f});
    auto m = mask_of(1, 2, {1, 0});
    auto t = category_scale_target(d, m, 0.10, kDMin, kDMax);
    CHECK(t.data[0] == doctest::Approx(11.0).epsilon(1e-6));
    CHECK(t.data[1] == 10.0f);
  }

  SUBCASE("masked decomposition identity holds exactly") {
    Rng rng(5);
    Tensor<float> d({1, 8, 8});
    for (auto& v : d.data) v = float(rng.uniform(2.0, 60.0));
    Mask m(8, 8);
    for (auto& v : m.data) v = rng.below(2) ? 1 : 0;
    const double alpha = -0.05;
    auto t = category_scale_target(d, m, alpha, kDMin, kDMax);
    for (std::size_t i = 0; i < d.data.size(); ++i) {
      const float expect = m.data[i]
                               ? std::clamp(float((1.0 + alpha) * double(d.data[i])), kDMin, kDMax)
                               : d.data[i];
      CHECK(t.data[i] == expect);
    }
  }
}

TEST_CASE("remove_instance_target") {
  SUBCASE("constant map stays constant") {
    Tensor<float> d({1, 4, 5});
    std::fill(d.data.begin(), d.data.end(), 7.0f);
    Mask m(4, 5);
    m.data[std::size_t(1) * 5 + 2] = 1;
    m.data[std::size_t(2) * 5 + 2] = 1;
    auto t = remove_instance_target(d, m);
    for (float v : t.data) CHECK(v == doctest::Approx(7.0).epsilon(1e-6));
  }

  SUBCASE("row interpolation example [1,2,_,_,5,6] -> [1,2,3,4,5,6]") {
    auto d = depth_map(1, 6, {1.0f, 2.0f, 99.0f, 99.0f, 5.0f, 6.0f});
    auto m = mask_of(1, 6, {0, 0, 1, 1, 0, 0});
    auto t = remove_instance_target(d, m);
    CHECK(t.data == std::vector<float>{1.0f, 2.0f, 3.0f, 4.0f, 5.0f, 6.0f});
  }

  SUBCASE("border-touching run holds the single available side") {
    auto d = depth_map(1, 4, {9.0f, 9.0f, 4.0f, 5.0f});
    auto m = mask_of(1, 4, {1, 1, 0, 0});
    auto t = remove_instance_target(d, m);
    CHECK(t.data == std::vector<float>{4.0f, 4.0f, 4.0f, 5.0f});
  }

  SUBCASE("changes nothing outside the mask") {
    Rng rng(6);
    Tensor<float> d({1, 10, 12});
    for (auto& v : d.data) v = float(rng.uniform(2.0, 70.0));
    Mask m(10, 12);
    for (int i = 3; i <= 6; ++i)
      for (int j = 4; j <= 8; ++j) m.data[std::size_t(i) * 12 + j] = 1;
    auto t = remove_instance_target(d, m);
    for (std::size_t i = 0; i < d.data.size(); ++i)
      if (!m.data[i]) CHECK(t.data[i] == d.data[i]);
  }

  SUBCASE("fully masked rows fall back to column interpolation") {
    Tensor<float> d({1, 5, 3});
    for (int i = 0; i < 5; ++i)
      for (int j = 0; j < 3; ++j) d.data[std::size_t(i) * 3 + j] = float(10 * (i + 1));
    Mask m(5, 3);
    for (int j = 0; j < 3; ++j) m.data[std::size_t(2) * 3 + j] = 1;  // whole row 2
    auto t = remove_instance_target(d, m);
    for (int j = 0; j < 3; ++j)
      CHECK(t.data[std::size_t(2) * 3 + j] == doctest::Approx(30.0).epsilon(1e-6));
  }

  SUBCASE("isolated pixels fall back to the nearest unmasked value") {
    // mask = full row 1 union full column 1 on a 3x3 map: pixel (1,1) has
    // no unmasked pixel in its row or column
    Tensor<float> d({1, 3, 3}, {1.0f, 2.0f, 3.0f, 4.0f, 5.0f, 6.0f, 7.0f, 8.0f, 9.0f});
    auto m = mask_of(3, 3, {0, 1, 0, 1, 1, 1, 0, 1, 0});
    auto t = remove_instance_target(d, m);
    // nearest unmasked to (1,1) at distance^2=2: corners; scan order picks (0,0)
    CHECK(t.data[4] == 1.0f);
  }

  SUBCASE("mask covering the whole image is rejected") {
    auto d = depth_map(2, 2, {1.0f, 2.0f, 3.0f, 4.0f});
    Mask m(2, 2);
    std::fill(m.data.begin(), m.data.end(), 1);
    CHECK_THROWS_AS(remove_instance_target(d, m), DataError);
  }
}

TEST_CASE("translate_instance_target") {
  Rng rng(7);
  Tensor<float> d({1, 10, 12});
  for (auto& v : d.data) v = float(rng.uniform(2.0, 70.0));
  Mask m(10, 12);
  for (int i = 4; i <= 6; ++i)
    for (int j = 5; j <= 7; ++j) m.data[std::size_t(i) * 12 + j] = 1;

  SUBCASE("zero shift is the identity") {
    auto t = translate_instance_target(d, m, 0, 0);
    CHECK(t.data == d.data);
  }

  SUBCASE("shifted pixels carry the original depth") {
    auto t = translate_instance_target(d, m, 2, -3);
    for (int i = 4; i <= 6; ++i)
      for (int j = 5; j <= 7; ++j)
        CHECK(t.data[std::size_t(i - 3) * 12 + (j + 2)] == d.data[std::size_t(i) * 12 + j]);
    // untouched outside mask and shifted mask
    for (int i = 0; i < 10; ++i)
      for (int j = 0; j < 12; ++j) {
        const bool in_m = i >= 4 && i <= 6 && j >= 5 && j <= 7;
        const bool in_shift = i >= 1 && i <= 3 && j >= 7 && j <= 9;
        if (!in_m && !in_shift)
          CHECK(t.data[std::size_t(i) * 12 + j] == d.data[std::size_t(i) * 12 + j]);
      }
  }

  SUBCASE("shifts in the paper's reported ranges are accepted") {
    // ~8% of width horizontally, ~42% of height upward
    const int dcol = int(std::lround(0.08 * 12));
    const int drow = -int(std::lround(0.42 * 10));
    CHECK_NOTHROW(translate_instance_target(d, m, dcol, 0));
    CHECK_NOTHROW(translate_instance_target(d, m, 0, drow));
  }

  SUBCASE("shift leaving the canvas is rejected") {
    CHECK_THROWS_AS(translate_instance_target(d, m, 7, 0), ConfigError);
    CHECK_THROWS_AS(translate_instance_target(d, m, 0, -5), ConfigError);
  }
}

TEST_CASE("masks from scene maps") {
  SceneParams p;
  Scene s = generate(777, p);

  SUBCASE("category masks partition the canvas") {
    Mask acc(s.h, s.w);
    for (int c = 0; c < kCategoryCount; ++c) {
      Mask m = mask_from_semantic(s, Category(c));
      for (std::size_t i = 0; i < acc.data.size(); ++i) acc.data[i] += m.data[i];
    }
    for (unsigned char v : acc.data) CHECK(v == 1);
  }

  SUBCASE("category absent from the scene gives a zero mask") {
    SceneParams q = p;
    q.vehicle_lo = q.vehicle_hi = 0;
    q.human_lo = q.human_hi = 0;
    q.construction_lo = q.construction_hi = 0;
    q.nature_lo = q.nature_hi = 0;
    q.traffic_lo = q.traffic_hi = 0;
    Scene empty = generate(3, q);
    CHECK(mask_from_semantic(empty, Category::Vehicle).empty());
  }

  SUBCASE("instance mask is contained in its category mask") {
    const int id = largest_instance_id(s);
    if (id > 0) {
      Mask im = mask_from_instance(s, {id});
      Mask vm = mask_from_semantic(s, Category::Vehicle);
      Mask hm = mask_from_semantic(s, Category::Human);
      for (std::size_t i = 0; i < im.data.size(); ++i)
        if (im.data[i]) CHECK((vm.data[i] || hm.data[i]));
    }
  }

  SUBCASE("unknown instance id rejected") {
    CHECK_THROWS_AS(mask_from_instance(s, {200}), ConfigError);
  }

  SUBCASE("complement is the elementwise negation") {
    Mask m = mask_from_semantic(s, Category::Flat);
    Mask c = m.complement();
    for (std::size_t i = 0; i < m.data.size(); ++i) CHECK(int(m.data[i]) + int(c.data[i]) == 1);
  }
}

TEST_CASE("built targets stay inside the depth range") {
  SceneParams p;
  p.h = 32;
  p.w = 64;
  p.horizon_row = 12;
  p.focal_px = 32.0;
  auto m = make_model<float>(Arch::ModelA, 21);
  for (std::uint64_t seed = 50; seed < 54; ++seed) {
    Scene s = generate(seed, p);
    std::vector<TargetSpec> specs;
    TargetSpec sc;
    sc.kind = TargetKind::Scale;
    sc.alpha = 0.45;
    specs.push_back(sc);
    TargetSpec fh;
    fh.kind = TargetKind::FlipH;
    specs.push_back(fh);
    TargetSpec fv;
    fv.kind = TargetKind::FlipV;
    specs.push_back(fv);
    TargetSpec cs;
    cs.kind = TargetKind::CategoryScale;
    cs.category = Category::Flat;
    cs.alpha = -0.45;
    specs.push_back(cs);
    for (const TargetSpec& spec : specs) {
      auto t = build_target(m, s, spec);
      for (float v : t.depth.data) {
        CHECK(v >= m.d_min);
        CHECK(v <= m.d_max);
      }
    }
  }
}

TEST_CASE("target spec validation") {
  TargetSpec sc;
  sc.kind = TargetKind::Scale;
  sc.alpha = 0.50;
  CHECK_THROWS_AS(validate_spec(sc), ConfigError);
  sc.alpha = -0.46;
  CHECK_THROWS_AS(validate_spec(sc), ConfigError);
  sc.alpha = 0.45;
  CHECK_NOTHROW(validate_spec(sc));
}
