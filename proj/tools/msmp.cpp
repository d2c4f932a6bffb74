// Command-line driver: generate -> train -> evaluate -> plot, plus
// gradient checking and the full ablation matrix.
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "msmp/checkpoint.hpp"
#include "msmp/config.hpp"
#include "msmp/dataset.hpp"
#include "msmp/evaluation.hpp"
#include "msmp/heatmap.hpp"
#include "msmp/model.hpp"
#include "msmp/runmatrix.hpp"
#include "msmp/training.hpp"

namespace fs = std::filesystem;
using namespace msmp;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void require_file(const std::string& path) {
  if (!fs::exists(path)) throw UsageError("no such file: " + path);
}

// bad names are usage errors (exit 1), not runtime failures
Experiment experiment_arg(const std::string& s) {
  try {
    return experiment_from_name(s);
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }
}

ModelKind model_arg(const std::string& s) {
  try {
    return model_kind_from_name(s);
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }
}

Dataset load_split(const std::string& dir, Experiment exp, const std::string& split) {
  const std::string path = dir + "/" + dataset_filename(exp, split);
  require_file(path);
  Dataset ds = read_dataset(path);
  if (ds.exp != exp)
    throw UsageError(path + " holds experiment " + experiment_name(ds.exp) + ", expected " +
                     experiment_name(exp));
  return ds;
}

std::vector<ModelKind> parse_models(const std::vector<std::string>& names) {
  std::vector<ModelKind> out;
  for (const auto& n : names) {
    if (n == "all") {
      out.assign(std::begin(kAllModels), std::end(kAllModels));
      return out;
    }
    out.push_back(model_arg(n));
  }
  return out;
}

std::vector<Experiment> parse_experiments(const std::vector<std::string>& names) {
  std::vector<Experiment> out;
  for (const auto& n : names) {
    if (n == "all") return {Experiment::e1, Experiment::e2, Experiment::ms_wave};
    out.push_back(experiment_arg(n));
  }
  return out;
}

int cmd_generate(const ExperimentSpec& spec, int64_t fold) {
  const Experiment exp = experiment_arg(spec.experiment);
  SplitSizes sizes = spec.sizes.train > 0 ? spec.sizes : default_sizes(exp);
  if (sizes.valid == 0) sizes.valid = default_sizes(exp).valid;
  if (sizes.test == 0) sizes.test = default_sizes(exp).test;
  fs::create_directories(spec.out);
  std::cout << "generating " << experiment_name(exp) << " (" << sizes.train << "/" << sizes.valid
            << "/" << sizes.test << ") seed=" << spec.seed << " fold=" << fold << "\n";
  SplitFiles files = generate_experiment(exp, spec.seed, sizes, spec.out,
                                         static_cast<uint64_t>(fold), spec.threads);
  std::cout << "wrote " << files.train << "\nwrote " << files.valid << "\nwrote " << files.test
            << "\n";
  return kExitOk;
}

int cmd_train(const ExperimentSpec& spec, const std::string& data_dir) {
  const Experiment exp = experiment_arg(spec.experiment);
  const ModelKind kind = model_arg(spec.model);
  Dataset train_ds = load_split(data_dir, exp, "train");
  Dataset valid_ds = load_split(data_dir, exp, "valid");
  ModelConfig cfg = make_model_config(kind, experiment_channels(exp), experiment_d_eta(exp));
  cfg.n_hid = spec.n_hid;
  cfg.n_layers = spec.n_layers;
  cfg.validate();
  TrainConfig tc = spec.train;
  tc.seed = spec.seed;
  tc.threads = spec.threads;
  fs::create_directories(spec.out);
  const std::string stem =
      spec.out + "/" + experiment_name(exp) + "_" + model_kind_name(kind);
  std::ofstream log(stem + "_metrics.log");
  check(log.good(), "cannot open " + stem + "_metrics.log");
  std::cout << "training " << model_kind_name(kind) << " on " << experiment_name(exp) << " ("
            << train_ds.trajs.size() << " train / " << valid_ds.trajs.size() << " valid)\n";
  TrainResult res = train_model(cfg, train_ds.trajs, valid_ds.trajs, tc, &log);
  write_checkpoint(stem + ".ckpt", exp, cfg, res.params);
  std::cout << "best epoch " << res.best_epoch << " valid RE " << res.best_valid_re << "\n"
            << "wrote " << stem << ".ckpt and " << stem << "_metrics.log\n";
  return kExitOk;
}

int cmd_evaluate(const std::string& ckpt_path, const std::string& data_dir,
                 const std::string& split, const std::string& csv, int threads) {
  require_file(ckpt_path);
  Checkpoint ck = read_checkpoint(ckpt_path);
  Dataset ds = load_split(data_dir, ck.exp, split);
  GraphTopology g = build_graph(ds.trajs.front().n_x, ds.trajs.front().length, 3);
  int64_t nan_count = 0;
  const double re = evaluate_re(ck.cfg, ck.params, g, ds.trajs, threads, &nan_count);
  std::cout << "experiment " << experiment_name(ck.exp) << " split " << split << " samples "
            << ds.trajs.size() << "\nrelative L2 error: " << re;
  if (nan_count > 0) std::cout << "  (" << nan_count << " rollouts became non-finite)";
  std::cout << "\n";
  if (!csv.empty()) {
    std::ofstream f(csv);
    check(f.good(), "cannot open " + csv);
    f << "experiment,split,samples,re,nan_rollouts\n"
      << experiment_name(ck.exp) << "," << split << "," << ds.trajs.size() << "," << re << ","
      << nan_count << "\n";
    std::cout << "wrote " << csv << "\n";
  }
  return kExitOk;
}

int cmd_plot(const std::string& ckpt_path, const std::string& data_dir, const std::string& split,
             int64_t sample, const std::string& out_dir, int threads) {
  (void)threads;
  require_file(ckpt_path);
  Checkpoint ck = read_checkpoint(ckpt_path);
  Dataset ds = load_split(data_dir, ck.exp, split);
  check(sample >= 0 && sample < static_cast<int64_t>(ds.trajs.size()),
        "sample index out of range (have " + std::to_string(ds.trajs.size()) + ")");
  const Trajectory& truth = ds.trajs[static_cast<size_t>(sample)];
  GraphTopology g = build_graph(truth.n_x, truth.length, 3);
  Rollout r = unroll(ck.cfg, ck.params, g, truth);
  const double re = relative_error({r.pred}, {truth}, ck.cfg.K);
  fs::create_directories(out_dir);
  const std::string base = std::string(experiment_name(ck.exp)) + "_" + split + "_s" +
                           std::to_string(sample);
  HeatmapFiles files = emit_heatmaps(out_dir, base, truth, r.pred, re);
  std::cout << "sample " << sample << " relative L2 error " << re
            << (r.nan_flag ? " (rollout went non-finite)" : "") << "\n";
  for (const auto& p : files.images) std::cout << "wrote " << p << "\n";
  std::cout << "wrote " << files.csv << "\n";
  return kExitOk;
}

int cmd_grad_check(const std::vector<std::string>& model_names, uint64_t seed) {
  bool all_ok = true;
  for (ModelKind kind : parse_models(model_names)) {
    ModelConfig cfg = tiny_model_config(kind);
    GraphTopology g = build_graph(kTinyNodes, 16.0, 3);
    ParamStore<double> ps = build_params<double>(cfg);
    ps.init_uniform(derive_seed(seed, {static_cast<uint64_t>(kind), 1}));
    Rng rng(derive_seed(seed, {static_cast<uint64_t>(kind), 2}));
    SampleInput<double> in;
    in.window = Tensor<double>({kTinyNodes, cfg.n_ch * cfg.K});
    for (auto& v : in.window.data) v = rng.uniform(-1.0, 1.0);
    for (int64_t e = 0; e < cfg.d_eta; ++e) in.eta.push_back(rng.uniform(0.1, 1.0));
    in.t_anchor = 1.0;
    in.dt = 4.0 / 249.0;
    Tensor<double> target({kTinyNodes, cfg.n_ch * cfg.K});
    for (auto& v : target.data) v = rng.uniform(-1.0, 1.0);
    auto fwd = [&](Tape<double>& t, const BoundParams<double>& bp) {
      Var out = model_forward(t, cfg, bp, g, in);
      return rmse_loss(t, out, t.leaf(target));
    };
    GradCheckReport rep = grad_check(ps, fwd, derive_seed(seed, {static_cast<uint64_t>(kind), 3}));
    const bool ok = rep.max_rel_error < 1e-4;
    all_ok = all_ok && ok;
    std::cout << model_kind_name(kind) << ": max relative gradient error " << rep.max_rel_error
              << " (worst " << rep.worst_param << "[" << rep.worst_index << "]) "
              << (ok ? "OK" : "FAIL") << "\n";
  }
  return all_ok ? kExitOk : kExitRuntime;
}

int cmd_run_matrix(const ExperimentSpec& spec, const std::vector<std::string>& exp_names,
                   const std::vector<std::string>& model_names) {
  MatrixConfig mc;
  mc.experiments = parse_experiments(exp_names);
  mc.models = parse_models(model_names);
  mc.folds = spec.folds;
  mc.sizes = spec.sizes;
  mc.n_hid = spec.n_hid;
  mc.n_layers = spec.n_layers;
  mc.train = spec.train;
  mc.seed = spec.seed;
  mc.threads = spec.threads;
  fs::create_directories(spec.out);
  std::vector<RunResult> results = run_matrix(mc, spec.out, &std::cout);
  std::cout << "\nexperiment      model        mean RE    std RE\n";
  for (const auto& r : results) {
    char line[160];
    std::snprintf(line, sizeof line, "%-15s %-12s %-10.4g %-10.4g\n", experiment_name(r.exp),
                  model_kind_name(r.model), r.mean, r.stddev);
    std::cout << line;
  }
  std::cout << "wrote " << spec.out << "/results.csv and " << spec.out << "/summary.csv\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-scale message passing neural PDE solver"};
  app.require_subcommand(1);

  ExperimentSpec spec;
  std::string config_path, data_dir, ckpt_path, split = "test", csv_path;
  std::vector<std::string> model_names{"all"}, exp_names{"all"};
  int64_t fold = 0, sample = 0;
  bool tiny = true;

  // The config file supplies defaults and explicit flags override them, so
  // it is applied before CLI11 writes any bound variable. Pre-scan argv.
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--config" && i + 1 < argc) config_path = argv[i + 1];
    else if (a.rfind("--config=", 0) == 0) config_path = a.substr(9);
  }
  if (!config_path.empty()) {
    try {
      require_file(config_path);
      apply_config_file(config_path, spec);
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      return kExitUsage;
    }
  }

  auto add_common = [&](CLI::App* cmd, bool with_train_flags) {
    cmd->add_option("--seed", spec.seed, "master seed")->capture_default_str();
    cmd->add_option("--threads", spec.threads, "worker threads (0 = hardware)")
        ->capture_default_str();
    if (with_train_flags) {
      cmd->add_option("--config", config_path, "key=value config file");
      cmd->add_option("--epochs", spec.train.epochs, "training epochs")->capture_default_str();
      cmd->add_option("--batch", spec.train.batch, "batch size")->capture_default_str();
      cmd->add_option("--lr0", spec.train.lr0, "initial learning rate")->capture_default_str();
      cmd->add_option("--lr-decay", spec.train.lr_decay, "learning-rate decay factor")
          ->capture_default_str();
      cmd->add_option("--lr-decay-every", spec.train.lr_decay_every,
                      "epochs between decays")
          ->capture_default_str();
      cmd->add_option("--max-unroll", spec.train.max_unroll, "maximum unrolling depth")
          ->capture_default_str();
      cmd->add_option("--weight-decay", spec.train.weight_decay, "AdamW decoupled decay")
          ->capture_default_str();
      cmd->add_option("--max-steps", spec.train.max_steps,
                      "optimizer step cap (0 = none)")
          ->capture_default_str();
      cmd->add_option("--n-hid", spec.n_hid, "hidden width")->capture_default_str();
      cmd->add_option("--n-layers", spec.n_layers, "processor layers")->capture_default_str();
    }
  };

  CLI::App* gen = app.add_subcommand("generate", "generate ground-truth datasets");
  gen->add_option("--experiment", spec.experiment, "e1 | e2 | ms-wave")->required();
  gen->add_option("--out", spec.out, "output directory")->required();
  gen->add_option("--train", spec.sizes.train, "training samples (0 = default)")
      ->capture_default_str();
  gen->add_option("--valid", spec.sizes.valid, "validation samples (0 = default)")
      ->capture_default_str();
  gen->add_option("--test", spec.sizes.test, "test samples (0 = default)")
      ->capture_default_str();
  gen->add_option("--fold", fold, "fold index (train/valid streams only)")
      ->capture_default_str();
  add_common(gen, false);

  CLI::App* tr = app.add_subcommand("train", "train one model on generated data");
  tr->add_option("--experiment", spec.experiment, "e1 | e2 | ms-wave")->required();
  tr->add_option("--model", spec.model, "mp-pde | lstm | lem | gated | lstmgated | msmp-pde")
      ->required();
  tr->add_option("--data", data_dir, "directory holding <exp>_{train,valid}.msmp")->required();
  tr->add_option("--out", spec.out, "output directory")->required();
  add_common(tr, true);

  CLI::App* ev = app.add_subcommand("evaluate", "relative L2 error of a checkpoint");
  ev->add_option("--checkpoint", ckpt_path, "model checkpoint (.ckpt)")->required();
  ev->add_option("--data", data_dir, "directory holding dataset files")->required();
  ev->add_option("--split", split, "train | valid | test")->capture_default_str();
  ev->add_option("--csv", csv_path, "also write a one-row CSV");
  add_common(ev, false);

  CLI::App* pl = app.add_subcommand("plot", "space-time heatmaps for one test sample");
  pl->add_option("--checkpoint", ckpt_path, "model checkpoint (.ckpt)")->required();
  pl->add_option("--data", data_dir, "directory holding dataset files")->required();
  pl->add_option("--split", split, "train | valid | test")->capture_default_str();
  pl->add_option("--sample", sample, "sample index")->capture_default_str();
  pl->add_option("--out", spec.out, "output directory")->required();
  add_common(pl, false);

  CLI::App* gc = app.add_subcommand("grad-check",
                                    "finite-difference verification of reverse-mode gradients");
  gc->add_option("--model", model_names, "model names or 'all'")->capture_default_str();
  gc->add_flag("--tiny", tiny, "tiny f64 profile (n_x=12, K=4, n_hid=8, 2 layers)")
      ->capture_default_str();
  add_common(gc, false);

  CLI::App* rm = app.add_subcommand("run-matrix", "train & evaluate the ablation matrix");
  rm->add_option("--experiments", exp_names, "experiments or 'all'")->capture_default_str();
  rm->add_option("--models", model_names, "models or 'all'")->capture_default_str();
  rm->add_option("--folds", spec.folds, "cross-validation folds")->capture_default_str();
  rm->add_option("--out", spec.out, "output directory")->required();
  rm->add_option("--train-size", spec.sizes.train, "training samples (0 = default)")
      ->capture_default_str();
  rm->add_option("--valid-size", spec.sizes.valid, "validation samples (0 = default)")
      ->capture_default_str();
  rm->add_option("--test-size", spec.sizes.test, "test samples (0 = default)")
      ->capture_default_str();
  add_common(rm, true);

  CLI11_PARSE(app, argc, argv);

  try {
    try {
      if (gen->parsed()) return cmd_generate(spec, fold);
      if (tr->parsed()) return cmd_train(spec, data_dir);
      if (ev->parsed()) return cmd_evaluate(ckpt_path, data_dir, split, csv_path, spec.threads);
      if (pl->parsed()) return cmd_plot(ckpt_path, data_dir, split, sample, spec.out,
                                        spec.threads);
      if (gc->parsed()) {
        if (!tiny) std::cout << "note: grad-check always runs the tiny f64 profile\n";
        return cmd_grad_check(model_names, spec.seed);
      }
      if (rm->parsed()) return cmd_run_matrix(spec, exp_names, model_names);
    } catch (const UsageError& e) {
      std::cerr << "error: " << e.what() << "\n";
      return kExitUsage;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}
