#pragma once

#include <fstream>
#include <string>

#include "dataset.hpp"
#include "model.hpp"
#include "training.hpp"

namespace msmp {

// One experiment run description: experiment/model names, dataset sizes,
// training overrides, seed, output directory. Defaults are the published
// protocol values.
struct ExperimentSpec {
  std::string experiment;  // e1 | e2 | ms-wave
  std::string model;       // mp-pde | lstm | lem | gated | lstmgated | msmp-pde
  uint64_t seed = 0;
  std::string out = ".";
  int threads = 0;
  int64_t folds = 5;
  SplitSizes sizes{0, 0, 0};  // 0 = experiment default
  int64_t n_hid = 128;
  int64_t n_layers = 6;
  TrainConfig train;
};

namespace detail {

inline std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

inline int64_t to_i64(const std::string& v, const std::string& key) {
  try {
    size_t pos = 0;
    int64_t r = std::stoll(v, &pos);
    check(pos == v.size(), "");
    return r;
  } catch (...) {
    throw std::runtime_error("config: bad integer for '" + key + "': " + v);
  }
}

inline double to_f64(const std::string& v, const std::string& key) {
  try {
    size_t pos = 0;
    double r = std::stod(v, &pos);
    check(pos == v.size(), "");
    return r;
  } catch (...) {
    throw std::runtime_error("config: bad number for '" + key + "': " + v);
  }
}

}  // namespace detail

// Flat key=value file with [section] headers; '#' starts a comment. Unknown
// sections or keys are rejected.
inline void apply_config_file(const std::string& path, ExperimentSpec& spec) {
  std::ifstream f(path);
  check(f.good(), "cannot open config file " + path);
  std::string line, section;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const std::string where = path + ":" + std::to_string(lineno);
    if (line.front() == '[') {
      check(line.back() == ']', where + ": malformed section header");
      section = detail::trim(line.substr(1, line.size() - 2));
      check(section == "sizes" || section == "train" || section == "model",
            where + ": unknown section [" + section + "]");
      continue;
    }
    const size_t eq = line.find('=');
    check(eq != std::string::npos, where + ": expected key = value");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string val = detail::trim(line.substr(eq + 1));
    check(!key.empty() && !val.empty(), where + ": empty key or value");

    if (section.empty()) {
      if (key == "experiment") spec.experiment = val;
      else if (key == "model") spec.model = val;
      else if (key == "seed") spec.seed = static_cast<uint64_t>(detail::to_i64(val, key));
      else if (key == "out") spec.out = val;
      else if (key == "threads") spec.threads = static_cast<int>(detail::to_i64(val, key));
      else if (key == "folds") spec.folds = detail::to_i64(val, key);
      else throw std::runtime_error(where + ": unknown key '" + key + "'");
    } else if (section == "sizes") {
      if (key == "train") spec.sizes.train = detail::to_i64(val, key);
      else if (key == "valid") spec.sizes.valid = detail::to_i64(val, key);
      else if (key == "test") spec.sizes.test = detail::to_i64(val, key);
      else throw std::runtime_error(where + ": unknown key 'sizes." + key + "'");
    } else if (section == "train") {
      if (key == "epochs") spec.train.epochs = detail::to_i64(val, key);
      else if (key == "batch") spec.train.batch = detail::to_i64(val, key);
      else if (key == "lr0") spec.train.lr0 = detail::to_f64(val, key);
      else if (key == "lr_decay") spec.train.lr_decay = detail::to_f64(val, key);
      else if (key == "lr_decay_every") spec.train.lr_decay_every = detail::to_i64(val, key);
      else if (key == "max_unroll") spec.train.max_unroll = detail::to_i64(val, key);
      else if (key == "weight_decay") spec.train.weight_decay = detail::to_f64(val, key);
      else if (key == "max_steps") spec.train.max_steps = detail::to_i64(val, key);
      else throw std::runtime_error(where + ": unknown key 'train." + key + "'");
    } else {  // model
      if (key == "n_hid") spec.n_hid = detail::to_i64(val, key);
      else if (key == "n_layers") spec.n_layers = detail::to_i64(val, key);
      else throw std::runtime_error(where + ": unknown key 'model." + key + "'");
    }
  }
}

}  // namespace msmp
