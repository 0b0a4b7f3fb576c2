#pragma once

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "depthadv/errors.hpp"

namespace depthadv {

// Plain-text run configuration: `key = value` lines, '#' comments.
// Every key must belong to the known schema; typos are hard errors.
// Unset keys take their schema defaults, and the fully resolved mapping
// can be echoed back for self-describing run directories.

class RunConfig {
 public:
  RunConfig() { install_schema(); }

  static RunConfig from_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IOError("config: cannot open " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return from_string(ss.str());
  }

  static RunConfig from_string(const std::string& text) {
    RunConfig cfg;
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
      ++lineno;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      const std::string trimmed = trim(line);
      if (trimmed.empty()) continue;
      const auto eq = trimmed.find('=');
      if (eq == std::string::npos)
        throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
      const std::string key = trim(trimmed.substr(0, eq));
      const std::string value = trim(trimmed.substr(eq + 1));
      if (!cfg.values_.count(key))
        throw ConfigError("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
      cfg.values_[key] = value;
    }
    return cfg;
  }

  const std::string& get(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("config: unknown key '" + key + "'");
    return it->second;
  }

  void set(const std::string& key, const std::string& value) {
    if (!values_.count(key)) throw ConfigError("config: unknown key '" + key + "'");
    values_[key] = value;
  }

  double get_double(const std::string& key) const {
    const std::string& v = get(key);
    try {
      std::size_t pos = 0;
      const double d = std::stod(v, &pos);
      if (pos != v.size()) throw std::invalid_argument(v);
      return d;
    } catch (const std::exception&) {
      throw ConfigError("config: key '" + key + "' is not a number: '" + v + "'");
    }
  }

  long long get_int(const std::string& key) const {
    const std::string& v = get(key);
    try {
      std::size_t pos = 0;
      const long long i = std::stoll(v, &pos);
      if (pos != v.size()) throw std::invalid_argument(v);
      return i;
    } catch (const std::exception&) {
      throw ConfigError("config: key '" + key + "' is not an integer: '" + v + "'");
    }
  }

  std::uint64_t get_u64(const std::string& key) const {
    const long long i = get_int(key);
    if (i < 0) throw ConfigError("config: key '" + key + "' must be non-negative");
    return std::uint64_t(i);
  }

  bool get_bool(const std::string& key) const {
    const std::string& v = get(key);
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError("config: key '" + key + "' must be true or false");
  }

  // comma-separated doubles; empty string gives an empty list
  std::vector<double> get_doubles(const std::string& key) const {
    std::vector<double> out;
    for (const std::string& tok : split(get(key), ',')) {
      if (tok.empty()) continue;
      try {
        out.push_back(std::stod(tok));
      } catch (const std::exception&) {
        throw ConfigError("config: key '" + key + "': bad number '" + tok + "'");
      }
    }
    return out;
  }

  std::vector<std::string> get_list(const std::string& key, char sep = ';') const {
    std::vector<std::string> out;
    for (std::string tok : split(get(key), sep)) {
      tok = trim(tok);
      if (!tok.empty()) out.push_back(tok);
    }
    return out;
  }

  // resolved key = value dump, sorted, suitable for run echoing
  std::string echo() const {
    std::ostringstream os;
    for (const auto& [k, v] : values_) os << k << " = " << v << "\n";
    return os.str();
  }

  static std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
      if (c == sep) {
        out.push_back(cur);
        cur.clear();
      } else {
        cur.push_back(c);
      }
    }
    out.push_back(cur);
    return out;
  }

  static std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
  }

 private:
  std::map<std::string, std::string> values_;

  void install_schema() {
    auto def = [&](const char* k, const char* v) { values_[k] = v; };
    // dataset generation
    def("dataset.seed", "20240101");
    def("dataset.n_train", "200");
    def("dataset.n_test", "20");
    def("dataset.height", "64");
    def("dataset.width", "128");
    def("dataset.horizon_row", "24");
    def("dataset.focal_px", "64");
    def("dataset.cam_height", "1.5");
    def("dataset.noise_std", "0.02");
    def("dataset.d_min", "1");
    def("dataset.d_max", "80");
    def("dataset.construction_count", "0:2");
    def("dataset.vehicle_count", "0:3");
    def("dataset.human_count", "0:2");
    def("dataset.nature_count", "0:3");
    def("dataset.traffic_count", "0:2");
    def("dataset.dir", "");
    // model
    def("model.arch", "modela");
    def("model.seed", "1001");
    def("model.dir", "");
    def("model2.dir", "");
    // supervised training
    def("train.epochs", "40");
    def("train.batch", "4");
    def("train.lr0", "0.1");
    def("train.halve_every", "15");
    def("train.seed", "42");
    // attacks
    def("attack.xi", "2e-3,5e-3,1e-2,2e-2");
    def("attack.eta", "");
    def("attack.steps", "500");
    def("attack.targets", "scale:+0.10;scale:-0.10");
    def("attack.constraint", "none");
    def("attack.method", "craft");
    def("attack.scenes", "0");
    def("attack.save_perturbations", "true");
    def("attack.save_targets", "false");
    def("attack.save_curves", "false");
    // evaluation of stored perturbations
    def("eval.perturbations", "");
    // transferability
    def("transfer.alpha", "0.10");
    // defenses
    def("defend.blur_sigma", "1.0");
    def("defend.adv_epochs", "5");
    def("defend.adv_lr0", "1e-4");
    def("defend.adv_pool_scenes", "24");
    def("defend.adv_pool_steps", "100");
    def("defend.adv_pool_xi", "2e-2");
    def("defend.adv_seed", "7");
    // gamma sweep
    def("sweep.gammas", "0,0.25,0.5,0.75,1.0");
    def("sweep.perturbations", "");
    def("sweep.label", "");
    def("sweep.scenes", "4");
    // runtime
    def("run.threads", "0");
    def("run.amplify", "10");
  }
};

}  // namespace depthadv
