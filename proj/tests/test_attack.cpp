#include <doctest.h>

#include "depthadv/attack.hpp"
#include "depthadv/metrics.hpp"
#include "depthadv/model.hpp"
#include "depthadv/scene.hpp"
#include "depthadv/targets.hpp"

using namespace depthadv;

namespace {

struct Fixture {
  SceneParams p;
  Scene scene;
  DepthModel<float> model;
  Tensor<float> pred;

  Fixture() {
    p.h = 32;
    p.w = 64;
    p.horizon_row = 12;
    p.focal_px = 32.0;
    scene = generate(2024, p);
    model = make_model<float>(Arch::ModelA, 77);
    pred = forward_depth(model, scene.image);
  }

  bool pred_in_safe_zone(double alpha) const {
    // no clamping active for scale targets of this magnitude
    for (float v : pred.data) {
      if (double(v) * (1.0 + alpha) < double(model.d_min)) return false;
      if (double(v) * (1.0 + alpha) > double(model.d_max)) return false;
    }
    return true;
  }
};

}  // namespace

TEST_CASE("target_loss examples") {
  Fixture fx;
  Tensor<float> v0(fx.scene.image.shape);

  SUBCASE("own prediction as target gives zero loss") {
    // the differentiable clamp may shift pixels by an ulp, so "zero" means
    // zero at the spec's 1e-6 tolerance
    CHECK(std::abs(target_loss(fx.model, fx.scene.image, v0, fx.pred)) <= 1e-6);
  }

  SUBCASE("1.1x target gives |0.1|/1.1") {
    Tensor<float> d_t(fx.pred.shape);
    for (std::size_t i = 0; i < d_t.data.size(); ++i) d_t.data[i] = 1.1f * fx.pred.data[i];
    CHECK(target_loss(fx.model, fx.scene.image, v0, d_t) ==
          doctest::Approx(0.1 / 1.1).epsilon(1e-5));
  }

  SUBCASE("0.9x target gives |0.1|/0.9") {
    Tensor<float> d_t(fx.pred.shape);
    for (std::size_t i = 0; i < d_t.data.size(); ++i) d_t.data[i] = 0.9f * fx.pred.data[i];
    CHECK(target_loss(fx.model, fx.scene.image, v0, d_t) ==
          doctest::Approx(0.1 / 0.9).epsilon(1e-5));
  }

  SUBCASE("target with a zero raises NumericsError") {
    Tensor<float> d_t = fx.pred;
    d_t.data[5] = 0.0f;
    CHECK_THROWS_AS(target_loss(fx.model, fx.scene.image, v0, d_t), NumericsError);
  }
}

TEST_CASE("craft basics") {
  Fixture fx;
  Tensor<float> d_t = scale_target(fx.pred, 0.10, fx.model.d_min, fx.model.d_max);

  SUBCASE("zero steps returns the zero perturbation and the baseline loss") {
    AttackConfig cfg;
    cfg.steps = 0;
    cfg.xi = 2e-2;
    auto pert = craft(fx.model, fx.scene.image, d_t, cfg);
    for (float v : pert.v.data) CHECK(v == 0.0f);
    Tensor<float> v0(fx.scene.image.shape);
    CHECK(pert.final_loss ==
          doctest::Approx(target_loss(fx.model, fx.scene.image, v0, d_t)).epsilon(1e-9));
  }

  SUBCASE("zero learning rate keeps v at zero") {
    AttackConfig cfg;
    cfg.steps = 10;
    cfg.eta = 0.0;
    cfg.xi = 2e-2;
    auto pert = craft(fx.model, fx.scene.image, d_t, cfg);
    for (float v : pert.v.data) CHECK(v == 0.0f);
  }

  SUBCASE("the norm bound holds exactly") {
    AttackConfig cfg;
    cfg.steps = 25;
    cfg.eta = 5.0;
    cfg.xi = 1e-2;
    auto pert = craft(fx.model, fx.scene.image, d_t, cfg);
    CHECK(double(max_abs(pert.v)) <= cfg.xi);
    CHECK(pert.loss_curve.size() == 26);
    CHECK(pert.final_loss < pert.loss_curve.front());  // made progress
  }

  SUBCASE("crafting is deterministic") {
    AttackConfig cfg;
    cfg.steps = 8;
    cfg.eta = 3.0;
    cfg.xi = 1e-2;
    auto a = craft(fx.model, fx.scene.image, d_t, cfg);
    auto b = craft(fx.model, fx.scene.image, d_t, cfg);
    CHECK(a.v.data == b.v.data);
    CHECK(a.final_loss == b.final_loss);
  }

  SUBCASE("non-finite loss reports the step index") {
    Tensor<float> tiny = fx.pred;
    for (auto& v : tiny.data) v = 1e-40f;  // positive but overflows the division
    AttackConfig cfg;
    cfg.steps = 3;
    try {
      craft(fx.model, fx.scene.image, tiny, cfg);
      FAIL("expected NumericsError");
    } catch (const NumericsError& e) {
      CHECK(std::string(e.what()).find("step 0") != std::string::npos);
    }
  }
}

TEST_CASE("baseline-loss identity for scale targets") {
  Fixture fx;
  for (double alpha : {-0.10, -0.05, 0.05, 0.10}) {
    REQUIRE(fx.pred_in_safe_zone(alpha));  // clamp-free regime
    Tensor<float> d_t = scale_target(fx.pred, alpha, fx.model.d_min, fx.model.d_max);
    AttackConfig cfg;
    cfg.steps = 0;
    auto pert = craft(fx.model, fx.scene.image, d_t, cfg);
    const double expect = std::abs(alpha) / (1.0 + alpha);
    CHECK(std::abs(pert.final_loss - expect) <= 1e-6);
  }
}

TEST_CASE("constrained crafting") {
  Fixture fx;
  Tensor<float> d_t = scale_target(fx.pred, -0.10, fx.model.d_min, fx.model.d_max);
  Mask empty(fx.p.h, fx.p.w);
  Mask box(fx.p.h, fx.p.w);
  for (int i = 10; i < 20; ++i)
    for (int j = 20; j < 44; ++j) box.data[std::size_t(i) * fx.p.w + j] = 1;

  SUBCASE("inside an empty mask forces v = 0") {
    AttackConfig cfg;
    cfg.steps = 5;
    cfg.constraint = ConstraintMode::InsideMask;
    cfg.mask = empty;
    auto pert = craft_constrained(fx.model, fx.scene.image, d_t, cfg);
    for (float v : pert.v.data) CHECK(v == 0.0f);
  }

  SUBCASE("outside an empty mask equals unconstrained crafting bitwise") {
    AttackConfig cfg;
    cfg.steps = 6;
    cfg.eta = 3.0;
    cfg.xi = 1e-2;
    cfg.constraint = ConstraintMode::OutsideMask;
    cfg.mask = empty;
    auto constrained = craft_constrained(fx.model, fx.scene.image, d_t, cfg);
    AttackConfig plain = cfg;
    plain.constraint = ConstraintMode::None;
    auto unconstrained = craft(fx.model, fx.scene.image, d_t, plain);
    CHECK(constrained.v.data == unconstrained.v.data);
  }

  SUBCASE("forbidden region is exactly zero") {
    AttackConfig cfg;
    cfg.steps = 12;
    cfg.eta = 3.0;
    cfg.xi = 1e-2;
    cfg.constraint = ConstraintMode::InsideMask;
    cfg.mask = box;
    auto pert = craft_constrained(fx.model, fx.scene.image, d_t, cfg);
    const std::size_t plane = std::size_t(fx.p.h) * fx.p.w;
    bool any_inside = false;
    for (std::size_t p = 0; p < plane; ++p)
      for (int c = 0; c < 3; ++c) {
        const float v = pert.v.data[std::size_t(c) * plane + p];
        if (!box.data[p]) {
          CHECK(v == 0.0f);
        } else if (v != 0.0f) {
          any_inside = true;
        }
      }
    CHECK(any_inside);
    CHECK(double(max_abs(pert.v)) <= cfg.xi);
  }

  SUBCASE("constrained entry point demands a constraint") {
    AttackConfig cfg;
    CHECK_THROWS_AS(craft_constrained(fx.model, fx.scene.image, d_t, cfg), ConfigError);
  }
}

TEST_CASE("joint crafting") {
  Fixture fx;
  Tensor<float> d_t = scale_target(fx.pred, 0.10, fx.model.d_min, fx.model.d_max);
  AttackConfig cfg;
  cfg.steps = 6;
  cfg.eta = 3.0;
  cfg.xi = 1e-2;

  SUBCASE("duplicated model follows the single-model trajectory") {
    // the averaged loss halves per-chain gradients, so values agree up to
    // accumulation-order rounding
    auto joint = craft_joint<float>({&fx.model, &fx.model}, fx.scene.image, d_t, cfg);
    auto single = craft(fx.model, fx.scene.image, d_t, cfg);
    double max_diff = 0.0;
    for (std::size_t i = 0; i < joint.v.data.size(); ++i)
      max_diff = std::max(max_diff, std::abs(double(joint.v.data[i]) - double(single.v.data[i])));
    CHECK(max_diff <= 1e-7);
    CHECK(joint.final_loss == doctest::Approx(single.final_loss).epsilon(1e-5));
  }

  SUBCASE("a single-model list reduces to craft") {
    auto joint = craft_joint<float>({&fx.model}, fx.scene.image, d_t, cfg);
    auto single = craft(fx.model, fx.scene.image, d_t, cfg);
    CHECK(joint.v.data == single.v.data);
  }

  SUBCASE("joint perturbations respect the norm bound") {
    auto other = make_model<float>(Arch::ModelB, 99);
    auto pred_b = forward_depth(other, fx.scene.image);
    std::vector<Tensor<float>> targets = {
        d_t, scale_target(pred_b, 0.10, other.d_min, other.d_max)};
    auto joint = craft_joint<float>({&fx.model, &other}, fx.scene.image, targets, cfg);
    CHECK(double(max_abs(joint.v)) <= cfg.xi);
  }

  SUBCASE("target count must match the model count") {
    std::vector<Tensor<float>> targets = {d_t};
    CHECK_THROWS_AS(craft_joint<float>({&fx.model, &fx.model}, fx.scene.image, targets, cfg),
                    ConfigError);
  }
}

TEST_CASE("ascent-descent baseline") {
  Fixture fx;
  Tensor<float> d_t = scale_target(fx.pred, 0.10, fx.model.d_min, fx.model.d_max);

  SUBCASE("zero steps gives zero perturbation") {
    AttackConfig cfg;
    cfg.steps = 0;
    auto pert = dag_baseline(fx.model, fx.scene.image, d_t, cfg);
    for (float v : pert.v.data) CHECK(v == 0.0f);
  }

  SUBCASE("clip bound holds") {
    AttackConfig cfg;
    cfg.steps = 15;
    cfg.eta = 3.0;
    cfg.xi = 5e-3;
    auto pert = dag_baseline(fx.model, fx.scene.image, d_t, cfg);
    CHECK(double(max_abs(pert.v)) <= cfg.xi);
  }
}

TEST_CASE("attack config validation") {
  Fixture fx;
  Tensor<float> d_t = scale_target(fx.pred, 0.10, fx.model.d_min, fx.model.d_max);
  AttackConfig cfg;

  cfg.xi = -1.0;
  CHECK_THROWS_AS(craft(fx.model, fx.scene.image, d_t, cfg), ConfigError);
  cfg.xi = 1e-2;
  cfg.eta = -0.5;
  CHECK_THROWS_AS(craft(fx.model, fx.scene.image, d_t, cfg), ConfigError);
  cfg.eta = 1.0;
  cfg.steps = -3;
  CHECK_THROWS_AS(craft(fx.model, fx.scene.image, d_t, cfg), ConfigError);
  cfg.steps = 1;
  cfg.constraint = ConstraintMode::InsideMask;
  cfg.mask = Mask(4, 4);
  CHECK_THROWS_AS(craft(fx.model, fx.scene.image, d_t, cfg), ShapeError);
}
