#include <doctest.h>

#include <filesystem>
#include <set>

#include "depthadv/scene.hpp"
#include "depthadv/targets.hpp"

using namespace depthadv;

namespace {

SceneParams no_objects() {
  SceneParams p;
  p.construction_hi = p.construction_lo = 0;
  p.vehicle_hi = p.vehicle_lo = 0;
  p.human_hi = p.human_lo = 0;
  p.nature_hi = p.nature_lo = 0;
  p.traffic_hi = p.traffic_lo = 0;
  return p;
}

}  // namespace

TEST_CASE("empty composition: only sky and ground") {
  Scene s = generate(1, no_objects());
  for (unsigned char c : s.semantic)
    CHECK((c == static_cast<unsigned char>(Category::Sky) ||
           c == static_cast<unsigned char>(Category::Flat)));
  for (int id : s.instance) CHECK(id == 0);
}

TEST_CASE("same seed reproduces a bit-identical scene") {
  SceneParams p;
  Scene a = generate(12345, p);
  Scene b = generate(12345, p);
  CHECK(a.image.data == b.image.data);
  CHECK(a.depth_gt.data == b.depth_gt.data);
  CHECK(a.semantic == b.semantic);
  CHECK(a.instance == b.instance);
}

TEST_CASE("occlusion: nearer box wins overlapped pixels") {
  SceneParams p = no_objects();
  FixedObject far_box;
  far_box.category = Category::Vehicle;
  far_box.depth_m = 10.0;
  far_box.center_col_frac = 0.5;
  far_box.width_m = 4.0;
  far_box.height_m = 2.0;
  FixedObject near_box = far_box;
  near_box.depth_m = 5.0;
  p.fixed_objects = {far_box, near_box};

  Scene s = generate(3, p);
  // ids follow paint order (far first)
  int far_id = 0, near_id = 0;
  for (std::size_t i = 0; i < s.instance.size(); ++i) {
    if (s.instance[i] == 0) continue;
    if (s.depth_gt.data[i] == 10.0f) far_id = s.instance[i];
    if (s.depth_gt.data[i] == 5.0f) near_id = s.instance[i];
  }
  REQUIRE(near_id != 0);
  CHECK(far_id != near_id);  // both visible somewhere (different rows)

  // overlap region: columns shared by both boxes at rows of the near box
  bool saw_overlap = false;
  for (std::size_t i = 0; i < s.instance.size(); ++i)
    if (s.instance[i] == near_id) {
      CHECK(s.depth_gt.data[i] == 5.0f);
      saw_overlap = true;
    }
  CHECK(saw_overlap);
}

TEST_CASE("scene invariants over a batch of seeds") {
  SceneParams p;
  for (std::uint64_t seed = 100; seed < 140; ++seed) {
    Scene s = generate(seed, p);

    // depth within range, sky at d_max
    for (std::size_t i = 0; i < s.depth_gt.data.size(); ++i) {
      CHECK(s.depth_gt.data[i] >= s.d_min);
      CHECK(s.depth_gt.data[i] <= s.d_max);
      if (s.semantic[i] == static_cast<unsigned char>(Category::Sky))
        CHECK(s.depth_gt.data[i] == s.d_max);
    }

    // instances only on instanceable categories
    for (std::size_t i = 0; i < s.instance.size(); ++i)
      if (s.instance[i] != 0) {
        const auto c = Category(s.semantic[i]);
        CHECK((c == Category::Vehicle || c == Category::Human));
      }

    // semantic labels valid
    for (unsigned char c : s.semantic) CHECK(c < kCategoryCount);

    // ground rows weakly decrease in depth from horizon to bottom, i.e.
    // non-increasing from bottom toward the horizon going up
    for (int j = 0; j < s.w; j += 16) {
      float prev = -1.0f;
      for (int i = s.h - 1; i > 0; --i) {
        const std::size_t px = std::size_t(i) * s.w + j;
        if (s.semantic[px] != static_cast<unsigned char>(Category::Flat)) continue;
        if (prev >= 0.0f) CHECK(s.depth_gt.data[px] >= prev);
        prev = s.depth_gt.data[px];
      }
    }
  }
}

TEST_CASE("object capacity is enforced") {
  SceneParams p = no_objects();
  p.max_objects = 3;
  FixedObject o;
  p.fixed_objects = {o, o, o, o};
  CHECK_THROWS_AS(generate(1, p), DataError);
}

TEST_CASE("make_dataset") {
  SceneParams p;
  p.h = 32;
  p.w = 64;
  p.horizon_row = 12;
  p.focal_px = 32.0;

  SUBCASE("train and test seeds are disjoint") {
    Dataset ds = make_dataset(42, 30, 10, p);
    std::set<std::uint64_t> train_sums, test_sums;
    for (const Scene& s : ds.train) train_sums.insert(scene_checksum(s));
    for (const Scene& s : ds.test) test_sums.insert(scene_checksum(s));
    CHECK(train_sums.size() == 30);  // all distinct
    CHECK(test_sums.size() == 10);
    for (std::uint64_t c : test_sums) CHECK(train_sums.count(c) == 0);
  }

  SUBCASE("counts below one are rejected") {
    CHECK_THROWS_AS(make_dataset(1, 0, 5, p), ConfigError);
    CHECK_THROWS_AS(make_dataset(1, 5, 0, p), ConfigError);
  }
}

TEST_CASE("default params give every category in at least 30% of scenes") {
  SceneParams p;
  Dataset ds = make_dataset(20240101, 200, 20, p);
  std::set<std::uint64_t> distinct;
  for (const Scene& s : ds.train) distinct.insert(scene_checksum(s));
  CHECK(distinct.size() == 200);
  int present[kCategoryCount] = {0};
  for (const Scene& s : ds.train) {
    bool seen[kCategoryCount] = {false};
    for (unsigned char c : s.semantic) seen[c] = true;
    for (int c = 0; c < kCategoryCount; ++c)
      if (seen[c]) present[c]++;
  }
  for (int c = 0; c < kCategoryCount; ++c) {
    INFO(category_name(Category(c)) << " present in " << present[c] << "/200");
    CHECK(present[c] >= 60);
  }
}

TEST_CASE("scene serialization round trip") {
  namespace fs = std::filesystem;
  SceneParams p;
  Scene s = generate(55, p);
  const std::string dir = (fs::temp_directory_path() / "depthadv_scene_rt").string();
  save_scene(dir, s);
  Scene back = load_scene(dir);
  CHECK(back.h == s.h);
  CHECK(back.w == s.w);
  CHECK(back.semantic == s.semantic);
  CHECK(back.instance == s.instance);
  CHECK(back.depth_gt.data == s.depth_gt.data);
  // image goes through 8-bit quantization
  for (std::size_t i = 0; i < s.image.data.size(); ++i)
    CHECK(std::abs(back.image.data[i] - s.image.data[i]) <= 0.5f / 255.0f + 1e-6f);
  fs::remove_all(dir);
}
