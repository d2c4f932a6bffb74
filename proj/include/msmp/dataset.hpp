#pragma once

#include <bit>
#include <cstdio>
#include <cstring>
#include <memory>
#include <string>
#include <vector>

#include "rng.hpp"
#include "solvers.hpp"
#include "tensor.hpp"
#include "threading.hpp"

namespace msmp {

static_assert(std::endian::native == std::endian::little,
              "dataset format is little-endian; big-endian hosts unsupported");

enum class Experiment : uint8_t {
  e1 = 1,       // inviscid Burgers, no forcing
  e2 = 2,       // viscous forced Burgers, eta = (beta)
  ms_wave = 3,  // two-speed advection system, eta = (a, b)
};

inline const char* experiment_name(Experiment e) {
  switch (e) {
    case Experiment::e1: return "e1";
    case Experiment::e2: return "e2";
    case Experiment::ms_wave: return "ms-wave";
  }
  return "?";
}

inline Experiment experiment_from_name(const std::string& s) {
  if (s == "e1") return Experiment::e1;
  if (s == "e2") return Experiment::e2;
  if (s == "ms-wave") return Experiment::ms_wave;
  throw std::runtime_error("unknown experiment '" + s + "' (expected e1|e2|ms-wave)");
}

inline int64_t experiment_channels(Experiment e) { return e == Experiment::ms_wave ? 2 : 1; }
inline int64_t experiment_d_eta(Experiment e) {
  switch (e) {
    case Experiment::e1: return 0;
    case Experiment::e2: return 1;
    case Experiment::ms_wave: return 2;
  }
  return 0;
}

struct SplitSizes {
  int64_t train = 0, valid = 0, test = 0;
};

inline SplitSizes default_sizes(Experiment e) {
  return e == Experiment::ms_wave ? SplitSizes{1024, 128, 128} : SplitSizes{2048, 128, 128};
}

// Seed-stream tags. Train and valid share one index space (valid follows
// train), test lives in its own stream so it stays fixed across folds.
inline constexpr uint64_t kTagTrainValid = 1;
inline constexpr uint64_t kTagTest = 2;

inline constexpr int kFourierModes = 5;

// ---------------------------------------------------------------------------
// Sample generation: every sample is a pure function of
// (experiment, master seed, split tag, fold, sample index).
// ---------------------------------------------------------------------------

inline Trajectory generate_sample(Experiment exp, uint64_t master_seed, uint64_t split_tag,
                                  uint64_t fold, int64_t index, bool downsampled = true) {
  Rng rng(derive_seed(master_seed, {static_cast<uint64_t>(exp), split_tag, fold,
                                    static_cast<uint64_t>(index)}));
  const std::string label = std::string(experiment_name(exp)) + "/" +
                            std::to_string(split_tag) + "/" + std::to_string(fold) + "/" +
                            std::to_string(index) + " seed=" + std::to_string(master_seed);
  Trajectory fine;
  switch (exp) {
    case Experiment::e1: {
      FourierSeries f = sample_fourier(rng, kFourierModes, /*with_omega=*/true, 16.0);
      BurgersConfig cfg;  // alpha = beta = 0
      fine = solve_burgers(cfg, f, label);
      break;
    }
    case Experiment::e2: {
      FourierSeries f = sample_fourier(rng, kFourierModes, /*with_omega=*/true, 16.0);
      BurgersConfig cfg;
      cfg.alpha = 1.0;
      cfg.beta = rng.uniform(0.0, 0.2);
      fine = solve_burgers(cfg, f, label);
      break;
    }
    case Experiment::ms_wave: {
      FourierSeries f1 = sample_fourier(rng, kFourierModes, /*with_omega=*/false, 16.0);
      FourierSeries f2 = sample_fourier(rng, kFourierModes, /*with_omega=*/false, 16.0);
      AdvectionConfig cfg;
      cfg.a = rng.uniform(0.1, 1.0);
      cfg.b = rng.uniform(1.0, 10.0);
      fine = solve_advection(cfg, f1, f2);
      break;
    }
  }
  return downsampled ? downsample(fine) : fine;
}

inline std::vector<Trajectory> generate_set(Experiment exp, uint64_t master_seed,
                                            uint64_t split_tag, uint64_t fold, int64_t first,
                                            int64_t count, int threads) {
  std::vector<Trajectory> out(static_cast<size_t>(count));
  parallel_for(count, threads, [&](int64_t i) {
    out[static_cast<size_t>(i)] = generate_sample(exp, master_seed, split_tag, fold, first + i);
  });
  return out;
}

// ---------------------------------------------------------------------------
// K-lagged windows
// ---------------------------------------------------------------------------

// Input window covering steps [start, start+K) as a [n_x, n_ch*K] tensor
// with channel-major columns.
template <class Real>
Tensor<Real> extract_window(const Trajectory& traj, int64_t start, int64_t K) {
  check(start >= 0 && start + K <= traj.n_t, "extract_window: range out of bounds");
  Tensor<Real> w({traj.n_x, traj.n_ch * K});
  for (int64_t i = 0; i < traj.n_x; ++i)
    for (int64_t c = 0; c < traj.n_ch; ++c)
      for (int64_t l = 0; l < K; ++l)
        w.at(i, c * K + l) = static_cast<Real>(traj.at(start + l, i, c));
  return w;
}

// Non-overlapping K-lagged pair: input u^{k-K:k}, target u^{k:k+K}. k_index
// is the target start k; t_k the time of the last input step.
struct WindowPair {
  Tensor<double> input;   // [n_x, n_ch*K]
  Tensor<double> target;  // [n_x, n_ch*K]
  int64_t k_index = 0;
  double t_k = 0.0;
};

inline std::vector<WindowPair> make_windows(const Trajectory& traj, int64_t K = 25) {
  std::vector<WindowPair> out;
  for (int64_t k = K; k + K <= traj.n_t; k += K) {
    WindowPair wp;
    wp.input = extract_window<double>(traj, k - K, K);
    wp.target = extract_window<double>(traj, k, K);
    wp.k_index = k;
    wp.t_k = traj.t[static_cast<size_t>(k - 1)];
    out.push_back(std::move(wp));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Binary dataset file ("MSMP"): fixed little-endian layout, f32 payload.
// ---------------------------------------------------------------------------

inline constexpr uint32_t kDatasetVersion = 1;

namespace detail {

struct File {
  std::FILE* f = nullptr;
  explicit File(const std::string& path, const char* mode) : f(std::fopen(path.c_str(), mode)) {
    check(f != nullptr, "cannot open " + path);
  }
  ~File() {
    if (f) std::fclose(f);
  }
  File(const File&) = delete;
  File& operator=(const File&) = delete;
};

template <class T>
void write_pod(std::FILE* f, const T& v) {
  check(std::fwrite(&v, sizeof(T), 1, f) == 1, "write failure");
}

template <class T>
T read_pod(std::FILE* f, const std::string& what) {
  T v;
  check(std::fread(&v, sizeof(T), 1, f) == 1, "truncated dataset file (reading " + what + ")");
  return v;
}

}  // namespace detail

inline void write_dataset(const std::string& path, Experiment exp,
                          const std::vector<Trajectory>& trajs) {
  check(!trajs.empty(), "write_dataset: empty trajectory list");
  const Trajectory& t0 = trajs.front();
  for (const auto& t : trajs)
    check(t.n_t == t0.n_t && t.n_x == t0.n_x && t.n_ch == t0.n_ch &&
              t.eta.size() == t0.eta.size() && t.length == t0.length &&
              t.t_final == t0.t_final,
          "write_dataset: trajectories do not share grid/channel metadata");
  detail::File file(path, "wb");
  std::FILE* f = file.f;
  std::fwrite("MSMP", 1, 4, f);
  detail::write_pod<uint32_t>(f, kDatasetVersion);
  detail::write_pod<uint8_t>(f, static_cast<uint8_t>(exp));
  detail::write_pod<uint32_t>(f, static_cast<uint32_t>(trajs.size()));
  detail::write_pod<uint32_t>(f, static_cast<uint32_t>(t0.n_t));
  detail::write_pod<uint32_t>(f, static_cast<uint32_t>(t0.n_x));
  detail::write_pod<uint32_t>(f, static_cast<uint32_t>(t0.n_ch));
  detail::write_pod<uint32_t>(f, static_cast<uint32_t>(t0.eta.size()));
  detail::write_pod<double>(f, t0.length);
  detail::write_pod<double>(f, t0.t_final);
  std::vector<float> payload;
  for (const auto& t : trajs) {
    for (double e : t.eta) detail::write_pod<double>(f, e);
    payload.resize(t.u.size());
    for (size_t i = 0; i < t.u.size(); ++i) payload[i] = static_cast<float>(t.u[i]);
    check(std::fwrite(payload.data(), sizeof(float), payload.size(), f) == payload.size(),
          "write failure");
  }
}

struct Dataset {
  Experiment exp = Experiment::e1;
  std::vector<Trajectory> trajs;
};

inline Dataset read_dataset(const std::string& path) {
  detail::File file(path, "rb");
  std::FILE* f = file.f;
  char magic[4];
  check(std::fread(magic, 1, 4, f) == 4 && std::memcmp(magic, "MSMP", 4) == 0,
        path + ": not a MSMP dataset file");
  const auto version = detail::read_pod<uint32_t>(f, "version");
  check(version == kDatasetVersion, path + ": unsupported dataset version " +
                                        std::to_string(version) + " (expected " +
                                        std::to_string(kDatasetVersion) + ")");
  Dataset ds;
  const auto exp_id = detail::read_pod<uint8_t>(f, "experiment id");
  check(exp_id >= 1 && exp_id <= 3, path + ": bad experiment id");
  ds.exp = static_cast<Experiment>(exp_id);
  const auto n_traj = detail::read_pod<uint32_t>(f, "n_traj");
  const auto n_t = detail::read_pod<uint32_t>(f, "n_t");
  const auto n_x = detail::read_pod<uint32_t>(f, "n_x");
  const auto n_ch = detail::read_pod<uint32_t>(f, "n_ch");
  const auto d_eta = detail::read_pod<uint32_t>(f, "d_eta");
  const auto length = detail::read_pod<double>(f, "L");
  const auto t_final = detail::read_pod<double>(f, "T");
  ds.trajs.resize(n_traj);
  std::vector<float> payload(static_cast<size_t>(n_t) * n_x * n_ch);
  for (auto& t : ds.trajs) {
    t.n_t = n_t;
    t.n_x = n_x;
    t.n_ch = n_ch;
    t.length = length;
    t.t_final = t_final;
    t.alloc();
    t.eta.resize(d_eta);
    for (auto& e : t.eta) e = detail::read_pod<double>(f, "eta");
    check(std::fread(payload.data(), sizeof(float), payload.size(), f) == payload.size(),
          path + ": truncated dataset file (payload)");
    for (size_t i = 0; i < payload.size(); ++i) t.u[i] = static_cast<double>(payload[i]);
  }
  // declared sizes must match the payload length exactly
  char extra;
  check(std::fread(&extra, 1, 1, f) == 0, path + ": trailing bytes after declared payload");
  return ds;
}

// ---------------------------------------------------------------------------
// Split orchestration
// ---------------------------------------------------------------------------

struct SplitFiles {
  std::string train, valid, test;
};

inline std::string dataset_filename(Experiment exp, const std::string& split) {
  return std::string(experiment_name(exp)) + "_" + split + ".msmp";
}

// Writes train/valid/test files under out_dir. Train and valid consume
// disjoint index ranges of the fold's stream; the test stream ignores the
// fold so all folds share one test set.
inline SplitFiles generate_experiment(Experiment exp, uint64_t master_seed,
                                      const SplitSizes& sizes, const std::string& out_dir,
                                      uint64_t fold = 0, int threads = 0) {
  check(sizes.train >= 1 && sizes.valid >= 1 && sizes.test >= 1,
        "generate_experiment: split sizes must be positive");
  SplitFiles files;
  const std::string base = out_dir.empty() ? std::string(".") : out_dir;
  files.train = base + "/" + dataset_filename(exp, "train");
  files.valid = base + "/" + dataset_filename(exp, "valid");
  files.test = base + "/" + dataset_filename(exp, "test");
  write_dataset(files.train,
                exp, generate_set(exp, master_seed, kTagTrainValid, fold, 0, sizes.train, threads));
  write_dataset(files.valid, exp,
                generate_set(exp, master_seed, kTagTrainValid, fold, sizes.train, sizes.valid,
                             threads));
  write_dataset(files.test, exp,
                generate_set(exp, master_seed, kTagTest, /*fold=*/0, 0, sizes.test, threads));
  return files;
}

}  // namespace msmp
