#pragma once

#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include "dataset.hpp"
#include "evaluation.hpp"
#include "training.hpp"

namespace msmp {

struct MatrixConfig {
  std::vector<Experiment> experiments;
  std::vector<ModelKind> models;
  int64_t folds = 5;
  // zero sizes mean the experiment's published defaults
  SplitSizes sizes{0, 0, 0};
  int64_t n_hid = 128;
  int64_t n_layers = 6;
  TrainConfig train;
  uint64_t seed = 0;
  int threads = 0;
};

// Trains every (experiment, model, fold) cell and reports mean +- std test
// RE. Folds regenerate train/valid data and reinitialize weights; the test
// set is fixed per experiment. Emits results.csv (one row per fold) and
// summary.csv next to it.
inline std::vector<RunResult> run_matrix(const MatrixConfig& mc, const std::string& out_dir,
                                         std::ostream* log = nullptr) {
  check(!mc.experiments.empty() && !mc.models.empty(), "run_matrix: empty experiment/model list");
  check(mc.folds >= 1, "run_matrix: need at least one fold");
  std::vector<RunResult> results;
  const std::string results_path = out_dir + "/results.csv";
  std::FILE* rf = std::fopen(results_path.c_str(), "w");
  check(rf != nullptr, "cannot open " + results_path);
  std::fprintf(rf, "experiment,model,fold,re\n");

  for (Experiment exp : mc.experiments) {
    const SplitSizes sizes = mc.sizes.train > 0 ? mc.sizes : default_sizes(exp);
    if (log)
      (*log) << "[run-matrix] " << experiment_name(exp) << ": sizes " << sizes.train << "/"
             << sizes.valid << "/" << sizes.test << "\n";
    const std::vector<Trajectory> test =
        generate_set(exp, mc.seed, kTagTest, 0, 0, sizes.test, mc.threads);
    GraphTopology g = build_graph(test.front().n_x, test.front().length, 3);

    std::vector<RunResult> cells(mc.models.size());
    for (size_t mi = 0; mi < mc.models.size(); ++mi) {
      cells[mi].exp = exp;
      cells[mi].model = mc.models[mi];
    }
    for (int64_t fold = 0; fold < mc.folds; ++fold) {
      const std::vector<Trajectory> train_set =
          generate_set(exp, mc.seed, kTagTrainValid, static_cast<uint64_t>(fold), 0, sizes.train,
                       mc.threads);
      const std::vector<Trajectory> valid_set =
          generate_set(exp, mc.seed, kTagTrainValid, static_cast<uint64_t>(fold), sizes.train,
                       sizes.valid, mc.threads);
      for (size_t mi = 0; mi < mc.models.size(); ++mi) {
        ModelConfig cfg = make_model_config(mc.models[mi], experiment_channels(exp),
                                            experiment_d_eta(exp));
        cfg.n_hid = mc.n_hid;
        cfg.n_layers = mc.n_layers;
        TrainConfig tc = mc.train;
        tc.threads = mc.threads;
        // fold changes the dataset and resamples the initial weights
        tc.seed = derive_seed(mc.seed, {0xF01Du, static_cast<uint64_t>(fold),
                                        static_cast<uint64_t>(mc.models[mi])});
        if (log)
          (*log) << "[run-matrix] " << experiment_name(exp) << " "
                 << model_kind_name(mc.models[mi]) << " fold " << fold << ": training...\n"
                 << std::flush;
        TrainResult tr = train_model(cfg, train_set, valid_set, tc, log);
        const double re = evaluate_re(cfg, tr.params, g, test, mc.threads);
        cells[mi].fold_re.push_back(re);
        std::fprintf(rf, "%s,%s,%lld,%.10g\n", experiment_name(exp),
                     model_kind_name(mc.models[mi]), static_cast<long long>(fold), re);
        std::fflush(rf);
        if (log)
          (*log) << "[run-matrix] " << experiment_name(exp) << " "
                 << model_kind_name(mc.models[mi]) << " fold " << fold << ": test RE = " << re
                 << "\n"
                 << std::flush;
      }
    }
    for (auto& c : cells) {
      c.finalize();
      results.push_back(c);
    }
  }
  std::fclose(rf);

  const std::string summary_path = out_dir + "/summary.csv";
  std::FILE* sf = std::fopen(summary_path.c_str(), "w");
  check(sf != nullptr, "cannot open " + summary_path);
  std::fprintf(sf, "experiment,model,mean_re,std_re,folds\n");
  for (const auto& r : results)
    std::fprintf(sf, "%s,%s,%.10g,%.10g,%zu\n", experiment_name(r.exp),
                 model_kind_name(r.model), r.mean, r.stddev, r.fold_re.size());
  std::fclose(sf);
  return results;
}

}  // namespace msmp
