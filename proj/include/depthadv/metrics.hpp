#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "depthadv/attack.hpp"
#include "depthadv/errors.hpp"
#include "depthadv/model.hpp"
#include "depthadv/scene.hpp"
#include "depthadv/tensor.hpp"

namespace depthadv {

// Absolute relative error against a target map: mean(|pred - t| / t).
template <typename T>
inline double are(const Tensor<T>& pred, const Tensor<T>& target) {
  if (pred.shape != target.shape) throw ShapeError("are: shape mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < pred.data.size(); ++i) {
    const double t = double(target.data[i]);
    if (!(t > 0.0)) throw NumericsError("are: target contains non-positive depth");
    s += std::abs(double(pred.data[i]) - t) / t;
  }
  return s / double(pred.data.size());
}

struct AreBin {
  double start = 0.0, end = 0.0;
  double are = 0.0;       // 0 when empty
  std::size_t count = 0;  // pixels whose target depth falls in the bin
};

// Per-bin ARE over pixels binned by target depth; bins are aligned at
// multiples of the width and cover [d_min, d_max] (last bin closed).
template <typename T>
inline std::vector<AreBin> binned_are(const Tensor<T>& pred, const Tensor<T>& target,
                                      double bin_width, double d_min, double d_max) {
  if (bin_width <= 0.0) throw ConfigError("binned_are: bin width must be positive");
  if (pred.shape != target.shape) throw ShapeError("binned_are: shape mismatch");
  const int first = int(std::floor(d_min / bin_width));
  const int last = int(std::ceil(d_max / bin_width)) - 1;
  std::vector<AreBin> bins;
  std::vector<double> sums(std::size_t(last - first + 1), 0.0);
  std::vector<std::size_t> counts(std::size_t(last - first + 1), 0);
  for (int b = first; b <= last; ++b)
    bins.push_back({b * bin_width, (b + 1) * bin_width, 0.0, 0});
  for (std::size_t i = 0; i < pred.data.size(); ++i) {
    const double t = double(target.data[i]);
    if (!(t > 0.0)) throw NumericsError("binned_are: target contains non-positive depth");
    int b = int(std::floor(t / bin_width)) - first;
    if (b < 0) b = 0;
    if (b > last - first) b = last - first;  // d_max lands in the final bin
    sums[std::size_t(b)] += std::abs(double(pred.data[i]) - t) / t;
    counts[std::size_t(b)]++;
  }
  for (std::size_t b = 0; b < bins.size(); ++b) {
    bins[b].count = counts[b];
    bins[b].are = counts[b] ? sums[b] / double(counts[b]) : 0.0;
  }
  return bins;
}

struct Stats {
  double mean = 0.0, median = 0.0, stddev = 0.0;
};

inline Stats stats_of(std::vector<double> xs) {
  Stats s;
  if (xs.empty()) return s;
  double sum = 0.0;
  for (double x : xs) sum += x;
  s.mean = sum / double(xs.size());
  double var = 0.0;
  for (double x : xs) var += (x - s.mean) * (x - s.mean);
  s.stddev = std::sqrt(var / double(xs.size()));
  std::sort(xs.begin(), xs.end());
  const std::size_t n = xs.size();
  s.median = n % 2 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
  return s;
}

inline double median_of(std::vector<double> xs) { return stats_of(std::move(xs)).median; }

// Prediction for the perturbed image, mirroring the attack's clamp. No
// gradients are needed here, so the clamp is the exact elementwise one.
template <typename T>
inline Tensor<T> predict_perturbed(const DepthModel<T>& m, const Tensor<T>& x,
                                   const Tensor<T>& v) {
  if (v.shape != x.shape) throw ShapeError("predict_perturbed: v must match the image");
  Tensor<T> xv(x.shape);
  for (std::size_t i = 0; i < x.data.size(); ++i)
    xv.data[i] = std::clamp(x.data[i] + v.data[i], T(0), T(1));
  return forward_depth(m, xv);
}

enum class TransferMode { Self, Cross, Sum, Both };

inline const char* transfer_mode_name(TransferMode m) {
  switch (m) {
    case TransferMode::Self: return "self";
    case TransferMode::Cross: return "cross";
    case TransferMode::Sum: return "sum";
    case TransferMode::Both: return "both";
  }
  return "?";
}

struct TransferCell {
  std::string source;  // model the perturbation was crafted for
  std::string eval;    // model it is evaluated on
  TransferMode mode = TransferMode::Self;
  double xi = 0.0;
  Stats are_stats;
};

// ARE of the evaluation model on x+v against a target built from that
// model's own prediction.
template <typename T>
inline double transfer_eval(const DepthModel<T>& eval_model, const Tensor<T>& x,
                            const Tensor<T>& v, const Tensor<T>& d_t_eval) {
  return are(predict_perturbed(eval_model, x, v), d_t_eval);
}

// Elementwise sum; deliberately NOT re-clipped, the resulting norm is
// whatever it is and gets reported.
template <typename T>
inline Perturbation<T> sum_perturbations(const Perturbation<T>& a, const Perturbation<T>& b) {
  if (a.v.shape != b.v.shape) throw ShapeError("sum_perturbations: shape mismatch");
  Perturbation<T> out;
  out.v = Tensor<T>(a.v.shape);
  for (std::size_t i = 0; i < out.v.data.size(); ++i) out.v.data[i] = a.v.data[i] + b.v.data[i];
  out.xi = double(max_abs(out.v));
  out.steps = 0;
  out.l1 = mean_abs(out.v);
  return out;
}

// Predictions for x + gamma*v, one map per gamma, in order.
template <typename T>
inline std::vector<Tensor<T>> gamma_sweep(const DepthModel<T>& m, const Tensor<T>& x,
                                          const Tensor<T>& v, const std::vector<double>& gammas) {
  std::vector<Tensor<T>> out;
  out.reserve(gammas.size());
  for (double gmm : gammas) {
    if (!std::isfinite(gmm)) throw ConfigError("gamma_sweep: gamma must be finite");
    Tensor<T> xv(x.shape);
    for (std::size_t i = 0; i < x.data.size(); ++i)
      xv.data[i] = std::clamp(x.data[i] + T(gmm) * v.data[i], T(0), T(1));
    out.push_back(forward_depth(m, xv));
  }
  return out;
}

// Mean ARE of clean predictions against ground truth over a scene set.
inline double model_clean_are(const DepthModel<float>& m, const std::vector<Scene>& scenes) {
  if (scenes.empty()) throw DataError("model_clean_are: empty scene set");
  double s = 0.0;
  for (const Scene& sc : scenes) s += are(forward_depth(m, sc.image), sc.depth_gt);
  return s / double(scenes.size());
}

// --- report rows and CSV ---------------------------------------------------

struct ReportRow {
  std::string scene_id;
  double xi = 0.0;
  std::string target_kind;
  double baseline_are = 0.0;
  double final_are = 0.0;
  double linf = 0.0;
  double l1 = 0.0;
  int steps = 0;
};

// Locale-independent shortest-round-trip float formatting, so reruns
// produce byte-identical CSV files.
inline std::string fmt_double(double v) {
  char buf[40];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  (void)ec;
  return std::string(buf, p);
}

inline void write_report_csv(const std::string& path, const std::vector<ReportRow>& rows) {
  std::ofstream f(path);
  if (!f) throw IOError("write_report_csv: cannot open " + path);
  f << "scene_id,xi,target_kind,baseline_are,final_are,linf,l1,steps\n";
  for (const ReportRow& r : rows)
    f << r.scene_id << ',' << fmt_double(r.xi) << ',' << r.target_kind << ','
      << fmt_double(r.baseline_are) << ',' << fmt_double(r.final_are) << ','
      << fmt_double(r.linf) << ',' << fmt_double(r.l1) << ',' << r.steps << '\n';
  if (!f) throw IOError("write_report_csv: write failed");
}

struct BinRow {
  std::string scene_id;
  AreBin bin;
};

inline void write_bins_csv(const std::string& path, const std::vector<BinRow>& rows) {
  std::ofstream f(path);
  if (!f) throw IOError("write_bins_csv: cannot open " + path);
  f << "scene_id,bin_start,bin_end,are,pixel_count\n";
  for (const BinRow& r : rows)
    f << r.scene_id << ',' << fmt_double(r.bin.start) << ',' << fmt_double(r.bin.end) << ','
      << fmt_double(r.bin.are) << ',' << r.bin.count << '\n';
  if (!f) throw IOError("write_bins_csv: write failed");
}

inline void write_transfer_csv(const std::string& path, const std::vector<TransferCell>& cells) {
  std::ofstream f(path);
  if (!f) throw IOError("write_transfer_csv: cannot open " + path);
  f << "source,eval,mode,xi,mean,median,std\n";
  for (const TransferCell& c : cells)
    f << c.source << ',' << c.eval << ',' << transfer_mode_name(c.mode) << ','
      << fmt_double(c.xi) << ',' << fmt_double(c.are_stats.mean) << ','
      << fmt_double(c.are_stats.median) << ',' << fmt_double(c.are_stats.stddev) << '\n';
  if (!f) throw IOError("write_transfer_csv: write failed");
}

struct DefenseRow {
  std::string defense;  // none | blur | adv-train
  double xi = 0.0;
  std::string target_kind;
  Stats are_stats;
  double clean_are = 0.0;
};

inline void write_defense_csv(const std::string& path, const std::vector<DefenseRow>& rows) {
  std::ofstream f(path);
  if (!f) throw IOError("write_defense_csv: cannot open " + path);
  f << "defense,xi,target_kind,mean_are,median_are,std_are,clean_are\n";
  for (const DefenseRow& r : rows)
    f << r.defense << ',' << fmt_double(r.xi) << ',' << r.target_kind << ','
      << fmt_double(r.are_stats.mean) << ',' << fmt_double(r.are_stats.median) << ','
      << fmt_double(r.are_stats.stddev) << ',' << fmt_double(r.clean_are) << '\n';
  if (!f) throw IOError("write_defense_csv: write failed");
}

}  // namespace depthadv
