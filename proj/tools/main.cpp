// depthadv experiment runner: dataset generation, depth-net training,
// attack campaigns, transfer matrices, defense sweeps and gamma sweeps.
// All commands take a plain-text config (key = value) and an output
// directory; outputs are reproducible bit-for-bit for fixed seeds.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "depthadv/depthadv.hpp"

namespace fs = std::filesystem;
using namespace depthadv;

namespace {

struct CommonArgs {
  std::string config_path;
  std::string out_dir;
};

RunConfig load_config(const CommonArgs& args) {
  if (args.config_path.empty()) return RunConfig();
  return RunConfig::from_file(args.config_path);
}

void write_echo(const RunConfig& cfg, const std::string& out_dir) {
  fs::create_directories(out_dir);
  std::ofstream f(out_dir + "/resolved_config.txt");
  if (!f) throw IOError("cannot write resolved config in " + out_dir);
  f << cfg.echo();
}

std::pair<int, int> parse_count_range(const std::string& v, const std::string& key) {
  const auto parts = RunConfig::split(v, ':');
  if (parts.size() != 2) throw ConfigError("config: key '" + key + "' must be lo:hi");
  try {
    const int lo = std::stoi(parts[0]);
    const int hi = std::stoi(parts[1]);
    if (lo < 0 || hi < lo) throw std::invalid_argument(v);
    return {lo, hi};
  } catch (const std::exception&) {
    throw ConfigError("config: key '" + key + "' must be lo:hi with 0 <= lo <= hi");
  }
}

SceneParams scene_params_from(const RunConfig& cfg) {
  SceneParams p;
  p.h = int(cfg.get_int("dataset.height"));
  p.w = int(cfg.get_int("dataset.width"));
  p.horizon_row = int(cfg.get_int("dataset.horizon_row"));
  p.focal_px = cfg.get_double("dataset.focal_px");
  p.cam_height_m = cfg.get_double("dataset.cam_height");
  p.noise_std = cfg.get_double("dataset.noise_std");
  p.d_min = float(cfg.get_double("dataset.d_min"));
  p.d_max = float(cfg.get_double("dataset.d_max"));
  std::tie(p.construction_lo, p.construction_hi) =
      parse_count_range(cfg.get("dataset.construction_count"), "dataset.construction_count");
  std::tie(p.vehicle_lo, p.vehicle_hi) =
      parse_count_range(cfg.get("dataset.vehicle_count"), "dataset.vehicle_count");
  std::tie(p.human_lo, p.human_hi) =
      parse_count_range(cfg.get("dataset.human_count"), "dataset.human_count");
  std::tie(p.nature_lo, p.nature_hi) =
      parse_count_range(cfg.get("dataset.nature_count"), "dataset.nature_count");
  std::tie(p.traffic_lo, p.traffic_hi) =
      parse_count_range(cfg.get("dataset.traffic_count"), "dataset.traffic_count");
  return p;
}

// Parses one target token: scale:<a> | fliph | flipv | preset |
// category:<Name>:<a> | remove[:ids] | translate:<dcol>:<drow>
TargetSpec parse_target(const std::string& token) {
  const auto parts = RunConfig::split(token, ':');
  TargetSpec spec;
  const std::string& kind = parts[0];
  auto need = [&](std::size_t n) {
    if (parts.size() != n) throw ConfigError("bad target token '" + token + "'");
  };
  try {
    if (kind == "scale") {
      need(2);
      spec.kind = TargetKind::Scale;
      spec.alpha = std::stod(parts[1]);
    } else if (kind == "fliph") {
      need(1);
      spec.kind = TargetKind::FlipH;
    } else if (kind == "flipv") {
      need(1);
      spec.kind = TargetKind::FlipV;
    } else if (kind == "preset") {
      need(1);
      spec.kind = TargetKind::Preset;
    } else if (kind == "category") {
      need(3);
      spec.kind = TargetKind::CategoryScale;
      spec.category = category_from_string(parts[1]);
      spec.alpha = std::stod(parts[2]);
    } else if (kind == "remove") {
      spec.kind = TargetKind::RemoveInstance;
      if (parts.size() == 2) {
        for (const std::string& id : RunConfig::split(parts[1], ','))
          spec.instance_ids.push_back(std::stoi(id));
      } else {
        need(1);
      }
    } else if (kind == "translate") {
      need(3);
      spec.kind = TargetKind::TranslateInstance;
      spec.d_col = std::stoi(parts[1]);
      spec.d_row = std::stoi(parts[2]);
    } else {
      throw ConfigError("unknown target kind '" + kind + "'");
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception&) {
    throw ConfigError("bad target token '" + token + "'");
  }
  validate_spec(spec);
  return spec;
}

std::vector<TargetSpec> parse_targets(const RunConfig& cfg) {
  std::vector<TargetSpec> specs;
  for (const std::string& tok : cfg.get_list("attack.targets")) specs.push_back(parse_target(tok));
  if (specs.empty()) throw ConfigError("attack.targets is empty");
  return specs;
}

ConstraintMode parse_constraint(const std::string& s) {
  if (s == "none") return ConstraintMode::None;
  if (s == "inside") return ConstraintMode::InsideMask;
  if (s == "outside") return ConstraintMode::OutsideMask;
  throw ConfigError("attack.constraint must be none|inside|outside");
}

std::string sanitize_label(std::string label) {
  for (char& c : label)
    if (c == ':') c = '-';
  return label;
}

std::string xi_string(double xi) { return fmt_double(xi); }

// dataset on disk: manifest + per-scene directories
void save_dataset(const std::string& dir, const Dataset& ds, std::uint64_t seed) {
  fs::create_directories(dir);
  std::ofstream man(dir + "/manifest.txt");
  if (!man) throw IOError("cannot write dataset manifest in " + dir);
  man << "dataset_seed " << seed << "\n";
  man << "n_train " << ds.train.size() << "\n";
  man << "n_test " << ds.test.size() << "\n";
  auto dump = [&](const char* split, const std::vector<Scene>& scenes) {
    for (std::size_t i = 0; i < scenes.size(); ++i) {
      const std::string id = scene_id_of(split, i);
      man << "scene " << split << " " << i << " seed " << scenes[i].seed << " dir " << id << "\n";
      save_scene(dir + "/" + id, scenes[i]);
    }
  };
  dump("train", ds.train);
  dump("test", ds.test);
}

Dataset load_dataset(const std::string& dir, const SceneParams& p) {
  std::ifstream man(dir + "/manifest.txt");
  if (!man) throw IOError("dataset manifest not found in '" + dir + "'");
  Dataset ds;
  std::string line;
  while (std::getline(man, line)) {
    std::istringstream ss(line);
    std::string key;
    ss >> key;
    if (key != "scene") continue;
    std::string split, seed_kw, dir_kw, scene_dir;
    std::size_t index = 0;
    std::uint64_t seed = 0;
    ss >> split >> index >> seed_kw >> seed >> dir_kw >> scene_dir;
    if (!ss || seed_kw != "seed" || dir_kw != "dir")
      throw IOError("malformed dataset manifest line: " + line);
    Scene s = load_scene(dir + "/" + scene_dir, p.d_min, p.d_max);
    s.seed = seed;
    (split == "train" ? ds.train : ds.test).push_back(std::move(s));
  }
  if (ds.train.empty() && ds.test.empty()) throw IOError("dataset manifest lists no scenes");
  return ds;
}

Dataset require_dataset(const RunConfig& cfg) {
  const std::string dir = cfg.get("dataset.dir");
  if (dir.empty()) throw ConfigError("dataset.dir must point at a generated dataset");
  return load_dataset(dir, scene_params_from(cfg));
}

DepthModel<float> require_model(const RunConfig& cfg, const std::string& key = "model.dir") {
  const std::string dir = cfg.get(key);
  if (dir.empty()) throw ConfigError(key + " must point at a trained model");
  return load_model(dir);
}

unsigned threads_of(const RunConfig& cfg) { return unsigned(cfg.get_u64("run.threads")); }

// --- commands ---------------------------------------------------------

int cmd_gen_data(const CommonArgs& args) {
  RunConfig cfg = load_config(args);
  const int n_train = int(cfg.get_int("dataset.n_train"));
  const int n_test = int(cfg.get_int("dataset.n_test"));
  Dataset ds = make_dataset(cfg.get_u64("dataset.seed"), n_train, n_test, scene_params_from(cfg));
  write_echo(cfg, args.out_dir);
  save_dataset(args.out_dir, ds, cfg.get_u64("dataset.seed"));
  std::printf("wrote %zu train / %zu test scenes to %s\n", ds.train.size(), ds.test.size(),
              args.out_dir.c_str());
  return 0;
}

int cmd_train(const CommonArgs& args) {
  RunConfig cfg = load_config(args);
  Dataset ds = require_dataset(cfg);
  auto model = make_model<float>(arch_from_string(cfg.get("model.arch")),
                                 cfg.get_u64("model.seed"),
                                 float(cfg.get_double("dataset.d_min")),
                                 float(cfg.get_double("dataset.d_max")));
  TrainConfig tc;
  tc.epochs = int(cfg.get_int("train.epochs"));
  tc.batch_size = int(cfg.get_int("train.batch"));
  tc.epoch_lrs = halving_schedule(cfg.get_double("train.lr0"), tc.epochs,
                                  int(cfg.get_int("train.halve_every")));
  tc.seed = cfg.get_u64("train.seed");
  TrainStats st = train(model, ds.train, tc);
  write_echo(cfg, args.out_dir);
  save_model(args.out_dir, model);
  std::ofstream log(args.out_dir + "/train_log.txt");
  for (std::size_t e = 0; e < st.epoch_loss.size(); ++e)
    log << "epoch " << e << " loss " << fmt_double(st.epoch_loss[e]) << "\n";
  const double held = ds.test.empty() ? -1.0 : model_clean_are(model, ds.test);
  log << "heldout_are " << fmt_double(held) << "\n";
  std::printf("trained %s, final loss %.5f, heldout ARE %.5f\n", cfg.get("model.arch").c_str(),
              st.epoch_loss.back(), held);
  return 0;
}

std::vector<CampaignEntry> campaign_from_config(const RunConfig& cfg,
                                                const std::vector<Scene>& scenes) {
  const std::vector<double> xis = cfg.get_doubles("attack.xi");
  if (xis.empty()) throw ConfigError("attack.xi is empty");
  for (double xi : xis)
    if (xi <= 0) throw ConfigError("attack.xi values must be positive");
  const std::vector<double> etas = cfg.get_doubles("attack.eta");
  return make_campaign(scenes, "test", parse_targets(cfg), xis, etas,
                       int(cfg.get_int("attack.steps")),
                       parse_constraint(cfg.get("attack.constraint")));
}

std::vector<Scene> attack_scene_slice(const RunConfig& cfg, Dataset& ds) {
  const int limit = int(cfg.get_int("attack.scenes"));
  std::vector<Scene> scenes = std::move(ds.test);
  if (limit > 0 && std::size_t(limit) < scenes.size()) scenes.resize(std::size_t(limit));
  return scenes;
}

void write_campaign_outputs(const RunConfig& cfg, const CommonArgs& args,
                            const std::vector<Scene>& scenes,
                            const std::vector<CampaignEntry>& entries,
                            const std::vector<CampaignOutcome>& results,
                            const DepthModel<float>& model) {
  const bool save_pert = cfg.get_bool("attack.save_perturbations");
  const bool save_targets = cfg.get_bool("attack.save_targets");
  const bool save_curves = cfg.get_bool("attack.save_curves");
  const float gain = float(cfg.get_double("run.amplify"));

  std::vector<ReportRow> rows;
  std::vector<BinRow> bin_rows;
  for (std::size_t i = 0; i < results.size(); ++i) {
    const CampaignOutcome& r = results[i];
    if (r.skipped) {
      std::fprintf(stderr, "note: %s %s skipped: %s\n", entries[i].scene_id.c_str(),
                   entries[i].label.c_str(), r.skip_reason.c_str());
      continue;
    }
    rows.push_back(r.row);
    const Scene& sc = scenes[entries[i].scene_index];
    const std::string stem = r.row.scene_id + "_" + sanitize_label(r.row.target_kind) + "_xi" +
                             xi_string(r.row.xi);
    const Tensor<float> pred = predict_perturbed(model, sc.image, r.pert.v);
    for (const AreBin& b :
         binned_are(pred, r.target, 5.0, double(model.d_min), double(model.d_max)))
      bin_rows.push_back({stem, b});

    if (save_pert) {
      fs::create_directories(args.out_dir + "/perturb");
      save_dtns(args.out_dir + "/perturb/v_" + stem + ".dtns", r.pert.v);
      write_perturbation_ppm(args.out_dir + "/perturb/v_" + stem + ".ppm", r.pert.v, gain);
    }
    if (save_targets) {
      fs::create_directories(args.out_dir + "/targets");
      save_dtns(args.out_dir + "/targets/t_" + stem + ".dtns", r.target);
      write_pgm(args.out_dir + "/targets/t_" + stem + ".pgm",
                depth_to_disparity_bytes(r.target, model.d_min, model.d_max), r.target.shape[1],
                r.target.shape[2]);
    }
    if (save_curves) {
      fs::create_directories(args.out_dir + "/curves");
      std::ofstream c(args.out_dir + "/curves/loss_" + stem + ".csv");
      c << "step,loss\n";
      for (std::size_t s = 0; s < r.pert.loss_curve.size(); ++s)
        c << s << ',' << fmt_double(r.pert.loss_curve[s]) << '\n';
    }
  }
  write_report_csv(args.out_dir + "/report.csv", rows);
  write_bins_csv(args.out_dir + "/bins.csv", bin_rows);
}

int cmd_attack(const CommonArgs& args) {
  RunConfig cfg = load_config(args);
  Dataset ds = require_dataset(cfg);
  DepthModel<float> model = require_model(cfg);
  const std::vector<Scene> scenes = attack_scene_slice(cfg, ds);
  const std::vector<CampaignEntry> entries = campaign_from_config(cfg, scenes);
  const bool dag = cfg.get("attack.method") == "dag";
  if (!dag && cfg.get("attack.method") != "craft")
    throw ConfigError("attack.method must be craft|dag");
  write_echo(cfg, args.out_dir);
  const auto results =
      run_campaign(model, scenes, entries, dag, threads_of(cfg), cfg.get_u64("dataset.seed"));
  write_campaign_outputs(cfg, args, scenes, entries, results, model);
  std::size_t done = 0;
  for (const auto& r : results) done += r.skipped ? 0 : 1;
  std::printf("attack wrote %zu report rows to %s\n", done, args.out_dir.c_str());
  return 0;
}

int cmd_eval(const CommonArgs& args) {
  RunConfig cfg = load_config(args);
  Dataset ds = require_dataset(cfg);
  DepthModel<float> model = require_model(cfg);
  const std::string pdir = cfg.get("eval.perturbations");
  if (pdir.empty()) throw ConfigError("eval.perturbations must point at an attack output");
  const std::vector<Scene> scenes = attack_scene_slice(cfg, ds);
  const std::vector<CampaignEntry> entries = campaign_from_config(cfg, scenes);

  std::vector<ReportRow> rows;
  std::vector<BinRow> bin_rows;
  for (const CampaignEntry& e : entries) {
    const Scene& sc = scenes[e.scene_index];
    const std::string stem = e.scene_id + "_" + sanitize_label(e.label) + "_xi" + xi_string(e.xi);
    const std::string vpath = pdir + "/perturb/v_" + stem + ".dtns";
    if (!fs::exists(vpath)) continue;
    Tensor<float> v = load_dtns(vpath);
    const Tensor<float>* preset = nullptr;
    Tensor<float> preset_img;
    if (e.spec.kind == TargetKind::Preset) {
      preset_img =
          scenes[preset_partner(cfg.get_u64("dataset.seed"), e.scene_index, scenes.size())].image;
      preset = &preset_img;
    }
    BuiltTarget bt;
    try {
      bt = build_target(model, sc, e.spec, preset);
    } catch (const ConfigError&) {
      continue;
    }
    ReportRow row;
    row.scene_id = e.scene_id;
    row.xi = e.xi;
    row.target_kind = e.label;
    row.baseline_are = are(forward_depth(model, sc.image), bt.depth);
    const Tensor<float> pred = predict_perturbed(model, sc.image, v);
    row.final_are = are(pred, bt.depth);
    row.linf = double(max_abs(v));
    row.l1 = mean_abs(v);
    row.steps = e.steps;
    rows.push_back(row);
    for (const AreBin& b :
         binned_are(pred, bt.depth, 5.0, double(model.d_min), double(model.d_max)))
      bin_rows.push_back({stem, b});
  }
  write_echo(cfg, args.out_dir);
  write_report_csv(args.out_dir + "/report.csv", rows);
  write_bins_csv(args.out_dir + "/bins.csv", bin_rows);
  std::printf("eval wrote %zu rows to %s\n", rows.size(), args.out_dir.c_str());
  return 0;
}

int cmd_transfer(const CommonArgs& args) {
  RunConfig cfg = load_config(args);
  Dataset ds = require_dataset(cfg);
  DepthModel<float> model_a = require_model(cfg, "model.dir");
  const bool have_b = !cfg.get("model2.dir").empty();
  DepthModel<float> model_b;
  if (have_b) model_b = load_model(cfg.get("model2.dir"));

  const std::vector<Scene> scenes = attack_scene_slice(cfg, ds);
  const double alpha = cfg.get_double("transfer.alpha");
  const std::vector<double> xis = cfg.get_doubles("attack.xi");
  const std::vector<double> etas = cfg.get_doubles("attack.eta");
  const int steps = int(cfg.get_int("attack.steps"));
  const unsigned threads = threads_of(cfg);

  struct PerScene {
    Tensor<float> d_t_a, d_t_b;
    Perturbation<float> va, vb, vboth;
    Tensor<float> vsum;
  };

  std::vector<TransferCell> cells;
  for (std::size_t xi_i = 0; xi_i < xis.size(); ++xi_i) {
    const double xi = xis[xi_i];
    const double eta = etas.empty() ? default_eta_for_xi(xi) : etas[xi_i];
    std::vector<PerScene> per(scenes.size());
    parallel_for(scenes.size(), [&](std::size_t s) {
      AttackConfig acfg;
      acfg.xi = xi;
      acfg.eta = eta;
      acfg.steps = steps;
      PerScene& p = per[s];
      p.d_t_a = scale_target(forward_depth(model_a, scenes[s].image), alpha, model_a.d_min,
                             model_a.d_max);
      p.va = craft(model_a, scenes[s].image, p.d_t_a, acfg);
      if (have_b) {
        p.d_t_b = scale_target(forward_depth(model_b, scenes[s].image), alpha, model_b.d_min,
                               model_b.d_max);
        p.vb = craft(model_b, scenes[s].image, p.d_t_b, acfg);
        p.vboth = craft_joint<float>({&model_a, &model_b}, scenes[s].image,
                                     std::vector<Tensor<float>>{p.d_t_a, p.d_t_b}, acfg);
        p.vsum = sum_perturbations(p.va, p.vb).v;
      }
    }, threads);

    auto collect = [&](const std::string& src, const std::string& dst, TransferMode mode,
                       const Tensor<float> PerScene::*vfield,
                       const Perturbation<float> PerScene::*pfield,
                       const DepthModel<float>& eval_model,
                       const Tensor<float> PerScene::*dtfield) {
      std::vector<double> ares;
      for (const PerScene& p : per) {
        const Tensor<float>& v = vfield ? p.*vfield : (p.*pfield).v;
        ares.push_back(transfer_eval(eval_model, scenes[&p - per.data()].image, v, p.*dtfield));
      }
      TransferCell c;
      c.source = src;
      c.eval = dst;
      c.mode = mode;
      c.xi = xi;
      c.are_stats = stats_of(ares);
      cells.push_back(c);
    };

    const std::string na = arch_name(model_a.arch);
    collect(na, na, TransferMode::Self, nullptr, &PerScene::va, model_a, &PerScene::d_t_a);
    if (have_b) {
      const std::string nb = arch_name(model_b.arch);
      const std::string nab = na + "+" + nb;
      collect(nb, nb, TransferMode::Self, nullptr, &PerScene::vb, model_b, &PerScene::d_t_b);
      collect(na, nb, TransferMode::Cross, nullptr, &PerScene::va, model_b, &PerScene::d_t_b);
      collect(nb, na, TransferMode::Cross, nullptr, &PerScene::vb, model_a, &PerScene::d_t_a);
      collect(nab, na, TransferMode::Sum, &PerScene::vsum, nullptr, model_a, &PerScene::d_t_a);
      collect(nab, nb, TransferMode::Sum, &PerScene::vsum, nullptr, model_b, &PerScene::d_t_b);
      collect(nab, na, TransferMode::Both, nullptr, &PerScene::vboth, model_a, &PerScene::d_t_a);
      collect(nab, nb, TransferMode::Both, nullptr, &PerScene::vboth, model_b, &PerScene::d_t_b);
    }
  }
  write_echo(cfg, args.out_dir);
  write_transfer_csv(args.out_dir + "/transfer.csv", cells);
  std::printf("transfer wrote %zu cells to %s\n", cells.size(), args.out_dir.c_str());
  return 0;
}

int cmd_defend(const CommonArgs& args) {
  RunConfig cfg = load_config(args);
  Dataset ds = require_dataset(cfg);
  DepthModel<float> model = require_model(cfg);
  const std::vector<Scene> test = ds.test;
  if (test.empty()) throw ConfigError("defend needs test scenes");
  const std::vector<CampaignEntry> entries = campaign_from_config(cfg, test);
  const unsigned threads = threads_of(cfg);
  const BlurConfig blur{cfg.get_double("defend.blur_sigma"), -1};

  write_echo(cfg, args.out_dir);

  // undefended and blurred evaluation of the same crafted set
  const auto base = run_campaign(model, test, entries, false, threads, cfg.get_u64("dataset.seed"));

  struct Key {
    double xi;
    std::string label;
    bool operator<(const Key& o) const { return xi < o.xi || (xi == o.xi && label < o.label); }
  };
  std::map<Key, std::vector<double>> none_ares, blur_ares;
  for (std::size_t i = 0; i < base.size(); ++i) {
    if (base[i].skipped) continue;
    const CampaignOutcome& r = base[i];
    const Scene& sc = test[entries[i].scene_index];
    none_ares[{r.row.xi, r.row.target_kind}].push_back(r.row.final_are);
    blur_ares[{r.row.xi, r.row.target_kind}].push_back(
        eval_under_blur(model, sc.image, r.pert.v, r.target, blur));
  }

  const double clean_none = model_clean_are(model, test);
  double clean_blur = 0.0;
  for (const Scene& sc : test)
    clean_blur += are(forward_depth(model, gaussian_blur(sc.image, blur)), sc.depth_gt);
  clean_blur /= double(test.size());

  // adversarial fine-tuning, then re-attack the tuned model
  AdvTrainConfig at;
  at.epochs = int(cfg.get_int("defend.adv_epochs"));
  at.pool_scenes = int(cfg.get_int("defend.adv_pool_scenes"));
  at.pool_steps = int(cfg.get_int("defend.adv_pool_steps"));
  at.pool_xi = cfg.get_double("defend.adv_pool_xi");
  at.pool_eta = default_eta_for_xi(at.pool_xi);
  at.epoch_lrs = halving_schedule(cfg.get_double("defend.adv_lr0"), at.epochs, 1);
  at.seed = cfg.get_u64("defend.adv_seed");
  AdvTrainResult tuned = adversarial_train(model, ds.train, test, at);
  save_model(args.out_dir + "/adv_model", tuned.model);

  const auto post =
      run_campaign(tuned.model, test, entries, false, threads, cfg.get_u64("dataset.seed"));
  std::map<Key, std::vector<double>> adv_ares;
  for (std::size_t i = 0; i < post.size(); ++i)
    if (!post[i].skipped)
      adv_ares[{post[i].row.xi, post[i].row.target_kind}].push_back(post[i].row.final_are);

  std::vector<DefenseRow> rows;
  auto emit = [&rows](const char* name, const std::map<Key, std::vector<double>>& m,
                      double clean) {
    for (const auto& [k, ares] : m) {
      DefenseRow r;
      r.defense = name;
      r.xi = k.xi;
      r.target_kind = k.label;
      r.are_stats = stats_of(ares);
      r.clean_are = clean;
      rows.push_back(r);
    }
  };
  emit("none", none_ares, clean_none);
  emit("blur", blur_ares, clean_blur);
  emit("adv-train", adv_ares, tuned.clean_are_after);
  write_defense_csv(args.out_dir + "/defense.csv", rows);
  std::printf("defend wrote %zu rows to %s (clean ARE %.4f -> %.4f)\n", rows.size(),
              args.out_dir.c_str(), tuned.clean_are_before, tuned.clean_are_after);
  return 0;
}

int cmd_sweep(const CommonArgs& args) {
  RunConfig cfg = load_config(args);
  Dataset ds = require_dataset(cfg);
  DepthModel<float> model = require_model(cfg);
  const std::string pdir = cfg.get("sweep.perturbations");
  if (pdir.empty()) throw ConfigError("sweep.perturbations must point at an attack output");
  std::string label = cfg.get("sweep.label");
  if (label.empty()) {
    const auto specs = parse_targets(cfg);
    const auto xis = cfg.get_doubles("attack.xi");
    if (xis.empty()) throw ConfigError("attack.xi is empty");
    label = sanitize_label(target_label(specs.front())) + "_xi" + xi_string(xis.front());
  }
  const std::vector<double> gammas = cfg.get_doubles("sweep.gammas");
  if (gammas.empty()) throw ConfigError("sweep.gammas is empty");

  const std::vector<Scene> scenes = attack_scene_slice(cfg, ds);
  const int limit = std::min<int>(int(cfg.get_int("sweep.scenes")), int(scenes.size()));
  write_echo(cfg, args.out_dir);
  std::size_t written = 0;
  for (int s = 0; s < limit; ++s) {
    const std::string id = scene_id_of("test", std::size_t(s));
    const std::string vpath = pdir + "/perturb/v_" + id + "_" + label + ".dtns";
    if (!fs::exists(vpath)) throw IOError("missing perturbation file " + vpath);
    Tensor<float> v = load_dtns(vpath);
    const auto maps = gamma_sweep(model, scenes[std::size_t(s)].image, v, gammas);
    for (std::size_t gi = 0; gi < gammas.size(); ++gi) {
      char suffix[32];
      std::snprintf(suffix, sizeof suffix, "_g%.2f", gammas[gi]);
      const std::string stem = args.out_dir + "/depth_" + id + "_" + label + suffix;
      save_dtns(stem + ".dtns", maps[gi]);
      write_pgm(stem + ".pgm", depth_to_disparity_bytes(maps[gi], model.d_min, model.d_max),
                maps[gi].shape[1], maps[gi].shape[2]);
      ++written;
    }
  }
  std::printf("sweep wrote %zu depth maps to %s\n", written, args.out_dir.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"adversarial perturbation toolkit for monocular depth networks"};
  app.require_subcommand(1);

  CommonArgs args;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", args.config_path, "plain-text key = value config file");
    sub->add_option("--out", args.out_dir, "output directory")->required();
  };

  auto* gen = app.add_subcommand("gen-data", "generate a synthetic dataset");
  auto* tr = app.add_subcommand("train", "train a depth model on a dataset");
  auto* at = app.add_subcommand("attack", "craft perturbations over a target/xi grid");
  auto* ev = app.add_subcommand("eval", "re-evaluate stored perturbations");
  auto* tf = app.add_subcommand("transfer", "cross-model transfer matrix");
  auto* df = app.add_subcommand("defend", "evaluate blur and adversarial-training defenses");
  auto* sw = app.add_subcommand("sweep", "predictions for scaled perturbations");
  for (CLI::App* sub : {gen, tr, at, ev, tf, df, sw}) add_common(sub);

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_gen_data(args);
    if (tr->parsed()) return cmd_train(args);
    if (at->parsed()) return cmd_attack(args);
    if (ev->parsed()) return cmd_eval(args);
    if (tf->parsed()) return cmd_transfer(args);
    if (df->parsed()) return cmd_defend(args);
    if (sw->parsed()) return cmd_sweep(args);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
