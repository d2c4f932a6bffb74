#pragma once

#include <cmath>
#include <vector>

#include "dataset.hpp"
#include "graph.hpp"
#include "model.hpp"
#include "threading.hpp"

namespace msmp {

// ---------------------------------------------------------------------------
// Full-trajectory rollout
// ---------------------------------------------------------------------------

struct Rollout {
  Trajectory pred;
  bool nan_flag = false;  // a call produced non-finite output; not dropped
};

// Seeds with the ground-truth window u^{0:K} and applies the model
// (n_t - K)/K times, each call consuming the previous call's output.
template <class Real>
Rollout unroll(const ModelConfig& cfg, const ParamStore<Real>& ps, const GraphTopology& g,
               const Trajectory& truth) {
  const int64_t K = cfg.K;
  check(truth.n_t > K, "unroll: trajectory shorter than one window");
  check(truth.n_x == g.n_nodes && truth.n_ch == cfg.n_ch, "unroll: shape mismatch");
  Rollout r;
  r.pred = truth;  // copies metadata; predicted steps overwritten below
  for (int64_t m = K; m < truth.n_t; ++m)
    for (int64_t i = 0; i < truth.n_x; ++i)
      for (int64_t c = 0; c < truth.n_ch; ++c) r.pred.at(m, i, c) = 0.0;

  SampleInput<Real> in;
  in.window = extract_window<Real>(truth, 0, K);
  for (double e : truth.eta) in.eta.push_back(static_cast<Real>(e));
  in.dt = static_cast<Real>(truth.dt());
  const int64_t n_calls = (truth.n_t - K) / K;
  for (int64_t c = 0; c < n_calls; ++c) {
    const int64_t s = c * K;  // input window covers [s, s+K)
    in.t_anchor = static_cast<Real>(truth.t[static_cast<size_t>(s + K - 1)]);
    Tensor<Real> out = model_forward_eval(cfg, ps, g, in);
    if (!out.all_finite()) {
      r.nan_flag = true;
      for (int64_t m = s + K; m < truth.n_t; ++m)
        for (int64_t i = 0; i < truth.n_x; ++i)
          for (int64_t ch = 0; ch < truth.n_ch; ++ch)
            r.pred.at(m, i, ch) = std::numeric_limits<double>::quiet_NaN();
      return r;
    }
    for (int64_t i = 0; i < truth.n_x; ++i)
      for (int64_t ch = 0; ch < truth.n_ch; ++ch)
        for (int64_t l = 0; l < K; ++l)
          r.pred.at(s + K + l, i, ch) = static_cast<double>(out.at(i, ch * K + l));
    in.window = std::move(out);
  }
  return r;
}

// ---------------------------------------------------------------------------
// Relative L2 error over the predicted portion of the trajectories
// ---------------------------------------------------------------------------

// Discrete L2(Omega x ]0,T]) norm over steps m >= from_step.
inline double trajectory_norm(const Trajectory& t, int64_t from_step) {
  double acc = 0.0;
  for (int64_t m = from_step; m < t.n_t; ++m)
    for (int64_t i = 0; i < t.n_x; ++i)
      for (int64_t c = 0; c < t.n_ch; ++c) acc += t.at(m, i, c) * t.at(m, i, c);
  return std::sqrt(t.dt() * t.dx() * acc);
}

inline double error_norm(const Trajectory& pred, const Trajectory& truth, int64_t from_step) {
  check(pred.n_t == truth.n_t && pred.n_x == truth.n_x && pred.n_ch == truth.n_ch,
        "error_norm: shape mismatch");
  double acc = 0.0;
  for (int64_t m = from_step; m < truth.n_t; ++m)
    for (int64_t i = 0; i < truth.n_x; ++i)
      for (int64_t c = 0; c < truth.n_ch; ++c) {
        const double d = pred.at(m, i, c) - truth.at(m, i, c);
        acc += d * d;
      }
  return std::sqrt(truth.dt() * truth.dx() * acc);
}

// RE = mean_i ||pred_i - truth_i|| / mean_i ||truth_i||, the ratio of means.
inline double relative_error(const std::vector<Trajectory>& pred,
                             const std::vector<Trajectory>& truth, int64_t from_step) {
  check(!truth.empty() && pred.size() == truth.size(), "relative_error: need >= 1 sample pair");
  double err = 0.0, sol = 0.0;
  for (size_t i = 0; i < truth.size(); ++i) {
    err += error_norm(pred[i], truth[i], from_step);
    sol += trajectory_norm(truth[i], from_step);
  }
  check(sol > 0.0, "relative_error: zero solution norm");
  return err / sol;
}

// Unrolls every test trajectory and reports RE; NaN rollouts flag the result
// (RE becomes NaN) and are counted, never dropped.
template <class Real>
double evaluate_re(const ModelConfig& cfg, const ParamStore<Real>& ps, const GraphTopology& g,
                   const std::vector<Trajectory>& test, int threads, int64_t* nan_count = nullptr) {
  std::vector<Trajectory> preds(test.size());
  std::vector<char> nan(test.size(), 0);
  parallel_for(static_cast<int64_t>(test.size()), threads, [&](int64_t i) {
    Rollout r = unroll(cfg, ps, g, test[static_cast<size_t>(i)]);
    preds[static_cast<size_t>(i)] = std::move(r.pred);
    nan[static_cast<size_t>(i)] = r.nan_flag ? 1 : 0;
  });
  int64_t n_nan = 0;
  for (char c : nan) n_nan += c;
  if (nan_count) *nan_count = n_nan;
  return relative_error(preds, test, cfg.K);
}

// ---------------------------------------------------------------------------
// Per-cell result of the ablation matrix
// ---------------------------------------------------------------------------

struct RunResult {
  Experiment exp = Experiment::e1;
  ModelKind model = ModelKind::mp_pde;
  std::vector<double> fold_re;
  double mean = 0.0;
  double stddev = 0.0;  // sample convention (n - 1)

  void finalize() {
    check(!fold_re.empty(), "RunResult: no folds");
    double s = 0.0;
    for (double v : fold_re) s += v;
    mean = s / static_cast<double>(fold_re.size());
    double q = 0.0;
    for (double v : fold_re) q += (v - mean) * (v - mean);
    stddev = fold_re.size() > 1 ? std::sqrt(q / static_cast<double>(fold_re.size() - 1)) : 0.0;
  }
};

inline double median(std::vector<double> v) {
  check(!v.empty(), "median: empty");
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace msmp
