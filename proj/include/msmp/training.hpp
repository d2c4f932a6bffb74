#pragma once

#include <cmath>
#include <ostream>
#include <vector>

#include "dataset.hpp"
#include "evaluation.hpp"
#include "model.hpp"
#include "threading.hpp"

namespace msmp {

// ---------------------------------------------------------------------------
// Configuration and schedule
// ---------------------------------------------------------------------------

struct TrainConfig {
  int64_t epochs = 20;
  int64_t batch = 16;
  double lr0 = 1e-4;
  double lr_decay = 0.4;
  int64_t lr_decay_every = 5;
  int64_t max_unroll = 2;
  double weight_decay = 1e-8;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;  // AdamW moments
  int64_t warmup_steps = 0;  // linear lr ramp over the first N optimizer steps
  uint64_t seed = 0;
  int threads = 0;       // 0 = hardware concurrency
  int64_t max_steps = 0; // 0 = no cap; smoke tests cap the optimizer steps
};

inline double lr_at(const TrainConfig& cfg, int64_t epoch) {
  check(epoch >= 0, "lr_at: negative epoch");
  double lr = cfg.lr0;
  for (int64_t k = 0; k < epoch / cfg.lr_decay_every; ++k) lr *= cfg.lr_decay;
  return lr;
}

// ---------------------------------------------------------------------------
// Loss
// ---------------------------------------------------------------------------

// Root mean squared error over all K * n_x * n_ch entries of the window.
template <class Real>
Var rmse_loss(Tape<Real>& t, Var pred, Var target) {
  Var d = t.sub(pred, target);
  return t.sqrt_scalar(t.mean_all(t.mul(d, d)));
}

template <class Real>
double rmse_value(const Tensor<Real>& pred, const Tensor<Real>& target) {
  check(pred.same_shape(target), "rmse: shape mismatch " + pred.shape_str() + " vs " +
                                     target.shape_str());
  double acc = 0.0;
  for (int64_t i = 0; i < pred.numel(); ++i) {
    const double d = static_cast<double>(pred.data[i]) - static_cast<double>(target.data[i]);
    acc += d * d;
  }
  return std::sqrt(acc / static_cast<double>(pred.numel()));
}

// ---------------------------------------------------------------------------
// AdamW (decoupled weight decay)
// ---------------------------------------------------------------------------

struct AdamWConfig {
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
};

template <class Real>
struct AdamWState {
  std::vector<Real> m, v;
  int64_t step = 0;
};

// theta <- theta - lr * (m_hat / (sqrt(v_hat) + eps) + lambda * theta)
template <class Real>
void adamw_step(std::vector<Real>& theta, const std::vector<Real>& grad, AdamWState<Real>& st,
                double lr, double weight_decay, const AdamWConfig& cfg = {}) {
  check(theta.size() == grad.size(), "adamw: size mismatch");
  if (st.m.empty()) {
    st.m.assign(theta.size(), Real(0));
    st.v.assign(theta.size(), Real(0));
  }
  check(st.m.size() == theta.size(), "adamw: state size mismatch");
  ++st.step;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(st.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(st.step));
  for (size_t i = 0; i < theta.size(); ++i) {
    const double g = static_cast<double>(grad[i]);
    const double m = cfg.beta1 * static_cast<double>(st.m[i]) + (1.0 - cfg.beta1) * g;
    const double v = cfg.beta2 * static_cast<double>(st.v[i]) + (1.0 - cfg.beta2) * g * g;
    st.m[i] = static_cast<Real>(m);
    st.v[i] = static_cast<Real>(v);
    const double m_hat = m / bc1;
    const double v_hat = v / bc2;
    theta[i] = static_cast<Real>(
        static_cast<double>(theta[i]) -
        lr * (m_hat / (std::sqrt(v_hat) + cfg.eps) + weight_decay * static_cast<double>(theta[i])));
  }
}

// ---------------------------------------------------------------------------
// Autoregressive training with pushforward truncation
// ---------------------------------------------------------------------------

struct EpochStats {
  int64_t epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;  // mean batch loss over the epoch
  double valid_re = std::numeric_limits<double>::quiet_NaN();
};

struct TrainResult {
  ParamStore<float> params;  // best checkpoint (validation RE), else final
  int64_t best_epoch = -1;
  double best_valid_re = std::numeric_limits<double>::infinity();
  std::vector<EpochStats> epochs;
  std::vector<double> step_losses;
  int64_t total_steps = 0;
};

namespace detail {

struct DrawnSample {
  int64_t traj = 0;
  int64_t unroll = 1;  // r
  int64_t start = 0;   // input window start (multiple of K)
};

}  // namespace detail

// One pass over all (trajectory, window-slot) pairs per epoch: each epoch
// concatenates n_window shuffles of the trajectory list and walks it in
// batches. Every batch member draws its own unroll depth r ~ U{1..max_unroll}
// and a depth-valid window start; for r = 2 the model pushes the input one
// window forward without gradient recording and only the final call is
// backpropagated, against the ground truth at offset start + 2K.
inline TrainResult train_model(const ModelConfig& cfg, const std::vector<Trajectory>& train,
                               const std::vector<Trajectory>& valid, const TrainConfig& tc,
                               std::ostream* log = nullptr) {
  cfg.validate();
  check(!train.empty(), "train: empty training set");
  check(tc.max_unroll >= 1, "train: max_unroll must be >= 1");
  const Trajectory& t0 = train.front();
  const int64_t K = cfg.K, n_t = t0.n_t;
  const int64_t n_windows = (n_t - K) / K;
  check(n_windows >= 1, "train: trajectories too short for one window pair");
  GraphTopology g = build_graph(t0.n_x, t0.length, 3);

  ParamStore<float> params = build_params<float>(cfg);
  params.init_uniform(derive_seed(tc.seed, {0x17u}));
  std::vector<float> flat = params.flat();
  AdamWState<float> opt;
  Rng rng(derive_seed(tc.seed, {0x18u}));

  // largest depth for which at least one start exists
  const auto starts_for = [&](int64_t r) { return (n_t - (r + 1) * K) / K + 1; };
  int64_t r_cap = 0;
  while (r_cap + 1 <= tc.max_unroll && n_t >= (r_cap + 2) * K) ++r_cap;
  check(r_cap >= 1, "train: no valid window starts");

  TrainResult result;
  result.params = params;
  const int64_t n_traj = static_cast<int64_t>(train.size());

  std::vector<detail::DrawnSample> batch;
  std::vector<double> member_loss;
  std::vector<std::vector<float>> member_grad;
  bool stop = false;

  for (int64_t epoch = 0; epoch < tc.epochs && !stop; ++epoch) {
    const double lr = lr_at(tc, epoch);
    // epoch stream: n_windows independent shuffles of the trajectory list
    std::vector<int64_t> stream;
    stream.reserve(static_cast<size_t>(n_traj * n_windows));
    for (int64_t pass = 0; pass < n_windows; ++pass) {
      std::vector<int64_t> order(static_cast<size_t>(n_traj));
      for (int64_t i = 0; i < n_traj; ++i) order[static_cast<size_t>(i)] = i;
      for (int64_t i = n_traj - 1; i > 0; --i)
        std::swap(order[static_cast<size_t>(i)],
                  order[static_cast<size_t>(rng.uniform_int(0, i))]);
      stream.insert(stream.end(), order.begin(), order.end());
    }

    double epoch_loss = 0.0;
    int64_t epoch_batches = 0;
    for (size_t off = 0; off < stream.size() && !stop; off += static_cast<size_t>(tc.batch)) {
      const int64_t b = std::min<int64_t>(tc.batch, static_cast<int64_t>(stream.size() - off));
      batch.clear();
      for (int64_t k = 0; k < b; ++k) {
        detail::DrawnSample s;
        s.traj = stream[off + static_cast<size_t>(k)];
        s.unroll = rng.uniform_int(1, r_cap);
        s.start = K * rng.uniform_int(0, starts_for(s.unroll) - 1);
        batch.push_back(s);
      }
      member_loss.assign(static_cast<size_t>(b), 0.0);
      member_grad.assign(static_cast<size_t>(b), {});
      parallel_for(b, tc.threads, [&](int64_t k) {
        const detail::DrawnSample& s = batch[static_cast<size_t>(k)];
        const Trajectory& traj = train[static_cast<size_t>(s.traj)];
        SampleInput<float> in;
        for (double e : traj.eta) in.eta.push_back(static_cast<float>(e));
        in.dt = static_cast<float>(traj.dt());
        int64_t win_start = s.start;
        in.window = extract_window<float>(traj, win_start, K);
        // pushforward: gradient-free calls advance the window r-1 times
        for (int64_t hop = 1; hop < s.unroll; ++hop) {
          in.t_anchor = static_cast<float>(traj.t[static_cast<size_t>(win_start + K - 1)]);
          in.window = model_forward_eval(cfg, params, g, in);
          win_start += K;
        }
        in.t_anchor = static_cast<float>(traj.t[static_cast<size_t>(win_start + K - 1)]);
        Tensor<float> target = extract_window<float>(traj, win_start + K, K);
        Tape<float> tape;
        BoundParams<float> bp = bind_params(tape, params);
        Var out = model_forward(tape, cfg, bp, g, in);
        Var loss = rmse_loss(tape, out, tape.leaf(target));
        tape.backward(loss);
        member_loss[static_cast<size_t>(k)] = static_cast<double>(tape.val(loss).data[0]);
        member_grad[static_cast<size_t>(k)] = collect_param_grads(tape, bp);
      });
      // fixed-order reduction keeps training bit-reproducible at any thread count
      double loss_sum = 0.0;
      std::vector<float> grad(flat.size(), 0.0f);
      for (int64_t k = 0; k < b; ++k) {
        loss_sum += member_loss[static_cast<size_t>(k)];
        const auto& gk = member_grad[static_cast<size_t>(k)];
        for (size_t i = 0; i < grad.size(); ++i) grad[i] += gk[i];
      }
      const double batch_loss = loss_sum / static_cast<double>(b);
      const float inv_b = 1.0f / static_cast<float>(b);
      for (auto& v : grad) v *= inv_b;
      if (!std::isfinite(batch_loss))
        throw std::runtime_error("train: non-finite loss at epoch " + std::to_string(epoch) +
                                 " step " + std::to_string(result.total_steps));
      double lr_step = lr;
      if (tc.warmup_steps > 0 && result.total_steps < tc.warmup_steps)
        lr_step = lr * static_cast<double>(result.total_steps + 1) /
                  static_cast<double>(tc.warmup_steps);
      adamw_step(flat, grad, opt, lr_step, tc.weight_decay,
                 AdamWConfig{tc.beta1, tc.beta2, tc.eps});
      params.set_flat(flat);
      result.step_losses.push_back(batch_loss);
      epoch_loss += batch_loss;
      ++epoch_batches;
      ++result.total_steps;
      if (tc.max_steps > 0 && result.total_steps >= tc.max_steps) stop = true;
    }

    EpochStats st;
    st.epoch = epoch;
    st.lr = lr;
    st.train_loss = epoch_batches ? epoch_loss / static_cast<double>(epoch_batches) : 0.0;
    if (!valid.empty()) {
      st.valid_re = evaluate_re(cfg, params, g, valid, tc.threads);
      // early stopping keeps the best-of-epochs checkpoint
      if (st.valid_re < result.best_valid_re) {
        result.best_valid_re = st.valid_re;
        result.best_epoch = epoch;
        result.params = params;
      }
    }
    result.epochs.push_back(st);
    if (log)
      (*log) << "epoch " << st.epoch << " lr " << st.lr << " train_loss " << st.train_loss
             << " valid_re " << st.valid_re << "\n"
             << std::flush;
  }
  if (valid.empty() || result.best_epoch < 0) {
    result.params = params;  // no validation: final weights are the artifact
    result.best_valid_re = std::numeric_limits<double>::quiet_NaN();
  }
  return result;
}

}  // namespace msmp
