#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "msmp/checkpoint.hpp"
#include "msmp/config.hpp"

using namespace msmp;

namespace {

std::string write_file(const std::string& name, const std::string& body) {
  auto dir = std::filesystem::temp_directory_path() / "msmp_test_cfg";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / name).string();
  std::ofstream f(path);
  f << body;
  return path;
}

}  // namespace

TEST_CASE("config: sections and overrides parse; defaults preserved elsewhere") {
  const std::string path = write_file("good.cfg",
                                      "# run description\n"
                                      "experiment = ms-wave\n"
                                      "model = msmp-pde\n"
                                      "seed = 7\n"
                                      "out = runs/msw\n"
                                      "[sizes]\n"
                                      "train = 256\n"
                                      "valid = 64\n"
                                      "test = 64\n"
                                      "[train]\n"
                                      "epochs = 10\n"
                                      "lr0 = 2e-4   # inline comment\n"
                                      "max_unroll = 1\n"
                                      "[model]\n"
                                      "n_hid = 64\n");
  ExperimentSpec spec;
  apply_config_file(path, spec);
  CHECK(spec.experiment == "ms-wave");
  CHECK(spec.model == "msmp-pde");
  CHECK(spec.seed == 7);
  CHECK(spec.out == "runs/msw");
  CHECK(spec.sizes.train == 256);
  CHECK(spec.sizes.valid == 64);
  CHECK(spec.train.epochs == 10);
  CHECK(spec.train.lr0 == doctest::Approx(2e-4));
  CHECK(spec.train.max_unroll == 1);
  CHECK(spec.n_hid == 64);
  // untouched fields keep the published defaults
  CHECK(spec.train.batch == 16);
  CHECK(spec.train.lr_decay == doctest::Approx(0.4));
  CHECK(spec.train.lr_decay_every == 5);
  CHECK(spec.train.weight_decay == doctest::Approx(1e-8));
  CHECK(spec.folds == 5);
  CHECK(spec.n_layers == 6);
}

TEST_CASE("config: unknown keys, unknown sections, and bad values are rejected") {
  ExperimentSpec spec;
  CHECK_THROWS_WITH_AS(apply_config_file(write_file("bad1.cfg", "colour = blue\n"), spec),
                       doctest::Contains("unknown key"), std::runtime_error);
  CHECK_THROWS_WITH_AS(apply_config_file(write_file("bad2.cfg", "[optimizer]\nlr = 2\n"), spec),
                       doctest::Contains("unknown section"), std::runtime_error);
  CHECK_THROWS_WITH_AS(
      apply_config_file(write_file("bad3.cfg", "[train]\nepochs = soon\n"), spec),
      doctest::Contains("bad integer"), std::runtime_error);
  CHECK_THROWS_WITH_AS(apply_config_file(write_file("bad4.cfg", "[train]\nlr = 1e-4\n"), spec),
                       doctest::Contains("unknown key"), std::runtime_error);
  CHECK_THROWS(apply_config_file("/nonexistent/path.cfg", spec));
}

TEST_CASE("checkpoint: round-trip preserves config and parameters bitwise") {
  ModelConfig cfg = make_model_config(ModelKind::lstm_gated, 2, 2);
  cfg.n_hid = 16;
  cfg.n_layers = 2;
  cfg.K = 5;
  cfg.dec = DecoderSpec{4, 3, 1, 3, 5};
  ParamStore<float> ps = build_params<float>(cfg);
  ps.init_uniform(11);
  auto dir = std::filesystem::temp_directory_path() / "msmp_test_ckpt";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "model.ckpt").string();
  write_checkpoint(path, Experiment::ms_wave, cfg, ps);
  Checkpoint ck = read_checkpoint(path);
  CHECK(ck.exp == Experiment::ms_wave);
  CHECK(ck.cfg.encoder == EncoderKind::lstm);
  CHECK(ck.cfg.gated);
  CHECK(ck.cfg.n_hid == 16);
  CHECK(ck.cfg.n_layers == 2);
  CHECK(ck.cfg.K == 5);
  CHECK(ck.cfg.n_ch == 2);
  CHECK(ck.cfg.d_eta == 2);
  CHECK(ck.cfg.dec.k_sys == 5);
  CHECK(ck.params.flat() == ps.flat());

  // corrupting the magic is a parse error
  {
    std::FILE* f = std::fopen(path.c_str(), "r+b");
    std::fwrite("ZZZZ", 1, 4, f);
    std::fclose(f);
  }
  CHECK_THROWS_WITH_AS(read_checkpoint(path), doctest::Contains("not a MSMC"),
                       std::runtime_error);
}
