#pragma once

#include <string>
#include <vector>

#include "depthadv/attack.hpp"
#include "depthadv/metrics.hpp"
#include "depthadv/model.hpp"
#include "depthadv/parallel.hpp"
#include "depthadv/scene.hpp"
#include "depthadv/targets.hpp"

namespace depthadv {

// Attack campaigns: a grid of (scene, target, xi) jobs crafted in
// parallel over scenes. Results are index-addressed so output order is
// independent of scheduling.

struct CampaignEntry {
  std::size_t scene_index = 0;
  std::string scene_id;
  TargetSpec spec;
  std::string label;
  double xi = 2e-2;
  double eta = 5.0;
  int steps = 500;
  ConstraintMode constraint = ConstraintMode::None;
};

struct CampaignOutcome {
  bool skipped = false;      // scene lacked what the target needs
  std::string skip_reason;
  ReportRow row;
  Perturbation<float> pert;
  Tensor<float> target;
  Mask mask;
};

inline std::string scene_id_of(const std::string& split, std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%05zu", split.c_str(), index);
  return buf;
}

// Deterministic partner scene for preset targets: a seeded draw over the
// other scenes of the same set.
inline std::size_t preset_partner(std::uint64_t seed, std::size_t index, std::size_t count) {
  if (count < 2) throw ConfigError("preset target needs at least two scenes");
  const std::uint64_t r = mix_seed(seed, 0x9e7aULL, index) % (count - 1);
  return (index + 1 + r) % count;
}

inline std::vector<CampaignEntry> make_campaign(const std::vector<Scene>& scenes,
                                                const std::string& split,
                                                const std::vector<TargetSpec>& specs,
                                                const std::vector<double>& xis,
                                                const std::vector<double>& etas, int steps,
                                                ConstraintMode constraint) {
  if (!etas.empty() && etas.size() != xis.size())
    throw ConfigError("campaign: eta list must match the xi list");
  std::vector<CampaignEntry> out;
  for (const TargetSpec& spec : specs)
    for (std::size_t xi_i = 0; xi_i < xis.size(); ++xi_i)
      for (std::size_t s = 0; s < scenes.size(); ++s) {
        CampaignEntry e;
        e.scene_index = s;
        e.scene_id = scene_id_of(split, s);
        e.spec = spec;
        e.label = target_label(spec);
        e.xi = xis[xi_i];
        e.eta = etas.empty() ? default_eta_for_xi(e.xi) : etas[xi_i];
        e.steps = steps;
        e.constraint = constraint;
        out.push_back(std::move(e));
      }
  return out;
}

inline std::vector<CampaignOutcome> run_campaign(const DepthModel<float>& model,
                                                 const std::vector<Scene>& scenes,
                                                 const std::vector<CampaignEntry>& entries,
                                                 bool dag_method = false, unsigned threads = 0,
                                                 std::uint64_t preset_seed = 1) {
  std::vector<CampaignOutcome> results(entries.size());
  parallel_for(entries.size(), [&](std::size_t i) {
    const CampaignEntry& e = entries[i];
    CampaignOutcome& out = results[i];
    const Scene& sc = scenes[e.scene_index];

    BuiltTarget bt;
    try {
      const Tensor<float>* preset = nullptr;
      Tensor<float> preset_img;
      if (e.spec.kind == TargetKind::Preset) {
        preset_img = scenes[preset_partner(preset_seed, e.scene_index, scenes.size())].image;
        preset = &preset_img;
      }
      bt = build_target(model, sc, e.spec, preset);
    } catch (const ConfigError& err) {
      out.skipped = true;
      out.skip_reason = err.what();
      return;
    }
    if (e.constraint != ConstraintMode::None && bt.mask.empty()) {
      out.skipped = true;
      out.skip_reason = "constraint requires a target with a non-empty mask";
      return;
    }

    AttackConfig cfg;
    cfg.xi = e.xi;
    cfg.eta = e.eta;
    cfg.steps = e.steps;
    cfg.constraint = e.constraint;
    if (e.constraint != ConstraintMode::None) cfg.mask = bt.mask;

    const Tensor<float> pred = forward_depth(model, sc.image);
    out.pert = dag_method ? dag_baseline(model, sc.image, bt.depth, cfg)
                          : craft(model, sc.image, bt.depth, cfg);
    out.target = bt.depth;
    out.mask = bt.mask;
    out.row.scene_id = e.scene_id;
    out.row.xi = e.xi;
    out.row.target_kind = e.label;
    out.row.baseline_are = are(pred, bt.depth);
    out.row.final_are = are(predict_perturbed(model, sc.image, out.pert.v), bt.depth);
    out.row.linf = double(max_abs(out.pert.v));
    out.row.l1 = out.pert.l1;
    out.row.steps = e.steps;
  }, threads);
  return results;
}

}  // namespace depthadv
