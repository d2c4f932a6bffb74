#pragma once

#include <cstdio>
#include <cstring>
#include <string>

#include "dataset.hpp"
#include "model.hpp"
#include "params.hpp"

namespace msmp {

inline constexpr uint32_t kCheckpointVersion = 1;

// Checkpoint file ("MSMC"): header mirroring the dataset-file style (magic,
// version, config fields) followed by the flat f32 parameter vector in
// ParamStore order.
inline void write_checkpoint(const std::string& path, Experiment exp, const ModelConfig& cfg,
                             const ParamStore<float>& ps) {
  detail::File file(path, "wb");
  std::FILE* f = file.f;
  std::fwrite("MSMC", 1, 4, f);
  detail::write_pod<uint32_t>(f, kCheckpointVersion);
  detail::write_pod<uint8_t>(f, static_cast<uint8_t>(exp));
  detail::write_pod<uint8_t>(f, static_cast<uint8_t>(cfg.encoder));
  detail::write_pod<uint8_t>(f, cfg.gated ? 1 : 0);
  detail::write_pod<uint32_t>(f, static_cast<uint32_t>(cfg.n_hid));
  detail::write_pod<uint32_t>(f, static_cast<uint32_t>(cfg.n_layers));
  detail::write_pod<uint32_t>(f, static_cast<uint32_t>(cfg.K));
  detail::write_pod<uint32_t>(f, static_cast<uint32_t>(cfg.n_ch));
  detail::write_pod<uint32_t>(f, static_cast<uint32_t>(cfg.d_eta));
  detail::write_pod<uint32_t>(f, static_cast<uint32_t>(cfg.dec.mid));
  detail::write_pod<uint32_t>(f, static_cast<uint32_t>(cfg.dec.k1));
  detail::write_pod<uint32_t>(f, static_cast<uint32_t>(cfg.dec.s1));
  detail::write_pod<uint32_t>(f, static_cast<uint32_t>(cfg.dec.k2));
  detail::write_pod<uint32_t>(f, static_cast<uint32_t>(cfg.dec.k_sys));
  detail::write_pod<double>(f, cfg.lem_dt);
  const std::vector<float> flat = ps.flat();
  detail::write_pod<uint64_t>(f, static_cast<uint64_t>(flat.size()));
  check(std::fwrite(flat.data(), sizeof(float), flat.size(), f) == flat.size(),
        "write failure: " + path);
}

struct Checkpoint {
  Experiment exp = Experiment::e1;
  ModelConfig cfg;
  ParamStore<float> params;
};

inline Checkpoint read_checkpoint(const std::string& path) {
  detail::File file(path, "rb");
  std::FILE* f = file.f;
  char magic[4];
  check(std::fread(magic, 1, 4, f) == 4 && std::memcmp(magic, "MSMC", 4) == 0,
        path + ": not a MSMC checkpoint file");
  const auto version = detail::read_pod<uint32_t>(f, "version");
  check(version == kCheckpointVersion,
        path + ": unsupported checkpoint version " + std::to_string(version));
  Checkpoint ck;
  const auto exp_id = detail::read_pod<uint8_t>(f, "experiment");
  check(exp_id >= 1 && exp_id <= 3, path + ": bad experiment id");
  ck.exp = static_cast<Experiment>(exp_id);
  const auto enc = detail::read_pod<uint8_t>(f, "encoder");
  check(enc <= 2, path + ": bad encoder kind");
  ck.cfg.encoder = static_cast<EncoderKind>(enc);
  ck.cfg.gated = detail::read_pod<uint8_t>(f, "gated") != 0;
  ck.cfg.n_hid = detail::read_pod<uint32_t>(f, "n_hid");
  ck.cfg.n_layers = detail::read_pod<uint32_t>(f, "n_layers");
  ck.cfg.K = detail::read_pod<uint32_t>(f, "K");
  ck.cfg.n_ch = detail::read_pod<uint32_t>(f, "n_ch");
  ck.cfg.d_eta = detail::read_pod<uint32_t>(f, "d_eta");
  ck.cfg.dec.mid = detail::read_pod<uint32_t>(f, "dec.mid");
  ck.cfg.dec.k1 = detail::read_pod<uint32_t>(f, "dec.k1");
  ck.cfg.dec.s1 = detail::read_pod<uint32_t>(f, "dec.s1");
  ck.cfg.dec.k2 = detail::read_pod<uint32_t>(f, "dec.k2");
  ck.cfg.dec.k_sys = detail::read_pod<uint32_t>(f, "dec.k_sys");
  ck.cfg.lem_dt = detail::read_pod<double>(f, "lem_dt");
  ck.params = build_params<float>(ck.cfg);
  const auto count = detail::read_pod<uint64_t>(f, "param count");
  check(count == static_cast<uint64_t>(ck.params.total_count()),
        path + ": parameter count " + std::to_string(count) + " does not match config (" +
            std::to_string(ck.params.total_count()) + ")");
  std::vector<float> flat(count);
  check(std::fread(flat.data(), sizeof(float), flat.size(), f) == flat.size(),
        path + ": truncated checkpoint (payload)");
  char extra;
  check(std::fread(&extra, 1, 1, f) == 0, path + ": trailing bytes after parameters");
  ck.params.set_flat(flat);
  return ck;
}

}  // namespace msmp
