#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "fourier.hpp"
#include "tensor.hpp"

namespace msmp {

// Discretized solution field u[t][x][channel] with grid metadata and the
// PDE parameter vector eta. Generation is done in f64.
struct Trajectory {
  int64_t n_t = 0, n_x = 0, n_ch = 1;
  double length = 16.0, t_final = 4.0;
  std::vector<double> u;    // [n_t][n_x][n_ch]
  std::vector<double> x;    // [n_x], uniform on [0, L)
  std::vector<double> t;    // [n_t], uniform on [0, T]
  std::vector<double> eta;  // PDE parameters (empty for E1)

  double& at(int64_t it, int64_t ix, int64_t ic) {
    return u[static_cast<size_t>((it * n_x + ix) * n_ch + ic)];
  }
  double at(int64_t it, int64_t ix, int64_t ic) const {
    return u[static_cast<size_t>((it * n_x + ix) * n_ch + ic)];
  }
  double dt() const { return t_final / static_cast<double>(n_t - 1); }
  double dx() const { return length / static_cast<double>(n_x); }

  void alloc() {
    u.assign(static_cast<size_t>(n_t * n_x * n_ch), 0.0);
    x.resize(static_cast<size_t>(n_x));
    for (int64_t i = 0; i < n_x; ++i) x[static_cast<size_t>(i)] = length * i / n_x;
    t.resize(static_cast<size_t>(n_t));
    for (int64_t m = 0; m < n_t; ++m) t[static_cast<size_t>(m)] = t_final * m / (n_t - 1);
  }
};

// ---------------------------------------------------------------------------
// WENO5 reconstruction (Jiang-Shu weights)
// ---------------------------------------------------------------------------

inline constexpr double kWenoEps = 1e-6;

// Fifth-order reconstruction of the value at the right cell interface
// x_{i+1/2} from the five cell averages v[0..4] = v_{i-2..i+2}.
inline double weno5_reconstruct(const double v[5]) {
  const double b0 = (13.0 / 12.0) * (v[0] - 2.0 * v[1] + v[2]) * (v[0] - 2.0 * v[1] + v[2]) +
                    0.25 * (v[0] - 4.0 * v[1] + 3.0 * v[2]) * (v[0] - 4.0 * v[1] + 3.0 * v[2]);
  const double b1 = (13.0 / 12.0) * (v[1] - 2.0 * v[2] + v[3]) * (v[1] - 2.0 * v[2] + v[3]) +
                    0.25 * (v[1] - v[3]) * (v[1] - v[3]);
  const double b2 = (13.0 / 12.0) * (v[2] - 2.0 * v[3] + v[4]) * (v[2] - 2.0 * v[3] + v[4]) +
                    0.25 * (3.0 * v[2] - 4.0 * v[3] + v[4]) * (3.0 * v[2] - 4.0 * v[3] + v[4]);
  const double a0 = 0.1 / ((kWenoEps + b0) * (kWenoEps + b0));
  const double a1 = 0.6 / ((kWenoEps + b1) * (kWenoEps + b1));
  const double a2 = 0.3 / ((kWenoEps + b2) * (kWenoEps + b2));
  const double s = a0 + a1 + a2;
  const double p0 = (2.0 * v[0] - 7.0 * v[1] + 11.0 * v[2]) / 6.0;
  const double p1 = (-v[1] + 5.0 * v[2] + 2.0 * v[3]) / 6.0;
  const double p2 = (2.0 * v[2] + 5.0 * v[3] - v[4]) / 6.0;
  return (a0 * p0 + a1 * p1 + a2 * p2) / s;
}

// ---------------------------------------------------------------------------
// Conservation-law integrator: WENO5-LF convection, 4th-order central
// diffusion, pointwise forcing, classical RK4 with a CFL step controller.
// ---------------------------------------------------------------------------

struct ConservationLaw {
  std::function<double(double)> flux;            // f(u)
  std::function<double(const std::vector<double>&)> alpha_max;  // max |f'(u)| over state
  double beta = 0.0;                             // diffusion coefficient
  std::function<double(double, double)> forcing; // f(t, x), nullptr-free: empty = none
};

struct IntegratorConfig {
  double length = 16.0, t_final = 4.0;
  int64_t n_t = 250, n_x = 200;
  double cfl = 0.4;
  std::string label;  // used in failure messages (e.g. the sample seed)
};

namespace detail {

inline void conservation_rhs(const ConservationLaw& law, const IntegratorConfig& cfg,
                             const std::vector<double>& u, double t, const std::vector<double>& xs,
                             std::vector<double>& rhs, std::vector<double>& fp,
                             std::vector<double>& fm, std::vector<double>& fhat) {
  const int64_t n = static_cast<int64_t>(u.size());
  const double dx = cfg.length / static_cast<double>(n);
  const double alpha = law.alpha_max(u);
  fp.resize(u.size());
  fm.resize(u.size());
  fhat.resize(u.size());
  for (int64_t i = 0; i < n; ++i) {
    const double f = law.flux(u[static_cast<size_t>(i)]);
    fp[static_cast<size_t>(i)] = 0.5 * (f + alpha * u[static_cast<size_t>(i)]);
    fm[static_cast<size_t>(i)] = 0.5 * (f - alpha * u[static_cast<size_t>(i)]);
  }
  auto wrap = [n](int64_t i) { return static_cast<size_t>(((i % n) + n) % n); };
  for (int64_t i = 0; i < n; ++i) {
    // f+ reconstructed left-biased at x_{i+1/2}; f- mirrored (right-biased).
    const double sp[5] = {fp[wrap(i - 2)], fp[wrap(i - 1)], fp[wrap(i)], fp[wrap(i + 1)],
                          fp[wrap(i + 2)]};
    const double sm[5] = {fm[wrap(i + 3)], fm[wrap(i + 2)], fm[wrap(i + 1)], fm[wrap(i)],
                          fm[wrap(i - 1)]};
    fhat[static_cast<size_t>(i)] = weno5_reconstruct(sp) + weno5_reconstruct(sm);
  }
  for (int64_t i = 0; i < n; ++i) {
    double r = -(fhat[static_cast<size_t>(i)] - fhat[wrap(i - 1)]) / dx;
    if (law.beta != 0.0) {
      r += law.beta *
           (-u[wrap(i - 2)] + 16.0 * u[wrap(i - 1)] - 30.0 * u[wrap(i)] + 16.0 * u[wrap(i + 1)] -
            u[wrap(i + 2)]) /
           (12.0 * dx * dx);
    }
    if (law.forcing) r += law.forcing(t, xs[static_cast<size_t>(i)]);
    rhs[static_cast<size_t>(i)] = r;
  }
}

}  // namespace detail

// Integrates du/dt = -d/dx f(u) + beta u_xx + forcing on a periodic grid of
// point values, storing snapshots at the n_t uniform output times. Step size
// dt = cfl * min(dx / alpha_max, dx^2 / (2 beta)), clipped to land exactly on
// output times; with a vacuous CFL bound (zero wave speed, no diffusion) the
// step is the distance to the next output time.
template <class InitFn>
Trajectory integrate_conservation_law(const ConservationLaw& law, const IntegratorConfig& cfg,
                                      InitFn&& initial) {
  Trajectory traj;
  traj.n_t = cfg.n_t;
  traj.n_x = cfg.n_x;
  traj.n_ch = 1;
  traj.length = cfg.length;
  traj.t_final = cfg.t_final;
  traj.alloc();

  const int64_t n = cfg.n_x;
  const double dx = cfg.length / static_cast<double>(n);
  std::vector<double> u(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) u[static_cast<size_t>(i)] = initial(traj.x[static_cast<size_t>(i)]);

  std::vector<double> rhs(u.size()), k1(u.size()), k2(u.size()), k3(u.size()), k4(u.size()),
      stage(u.size());
  std::vector<double> fp, fm, fhat;

  auto eval_rhs = [&](const std::vector<double>& state, double tt, std::vector<double>& out) {
    detail::conservation_rhs(law, cfg, state, tt, traj.x, out, fp, fm, fhat);
  };
  auto fail = [&](double tt) {
    throw std::runtime_error("conservation-law solver: non-finite state at t=" +
                             std::to_string(tt) +
                             (cfg.label.empty() ? "" : " (sample " + cfg.label + ")"));
  };

  double t = 0.0;
  for (int64_t m = 0; m < cfg.n_t; ++m) {
    const double t_out = traj.t[static_cast<size_t>(m)];
    while (t < t_out - 1e-13) {
      const double alpha = law.alpha_max(u);
      double dt_cfl = std::numeric_limits<double>::infinity();
      if (alpha > 0.0) dt_cfl = dx / alpha;
      if (law.beta > 0.0) dt_cfl = std::min(dt_cfl, dx * dx / (2.0 * law.beta));
      double dt = std::isfinite(dt_cfl) ? cfg.cfl * dt_cfl : t_out - t;
      dt = std::min(dt, t_out - t);
      eval_rhs(u, t, k1);
      for (size_t i = 0; i < u.size(); ++i) stage[i] = u[i] + 0.5 * dt * k1[i];
      eval_rhs(stage, t + 0.5 * dt, k2);
      for (size_t i = 0; i < u.size(); ++i) stage[i] = u[i] + 0.5 * dt * k2[i];
      eval_rhs(stage, t + 0.5 * dt, k3);
      for (size_t i = 0; i < u.size(); ++i) stage[i] = u[i] + dt * k3[i];
      eval_rhs(stage, t + dt, k4);
      for (size_t i = 0; i < u.size(); ++i)
        u[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
      t += dt;
      for (double v : u)
        if (!std::isfinite(v)) fail(t);
    }
    for (int64_t i = 0; i < n; ++i) traj.at(m, i, 0) = u[static_cast<size_t>(i)];
  }
  return traj;
}

// ---------------------------------------------------------------------------
// Burgers (E1/E2): d_t u + d_x(u^2 - beta d_x u) = alpha f(t, x)
// ---------------------------------------------------------------------------

struct BurgersConfig {
  double alpha = 0.0;  // forcing switch (0 or 1)
  double beta = 0.0;   // viscosity in [0, 0.2]
  double length = 16.0, t_final = 4.0;
  int64_t n_t = 250, n_x_fine = 200;
  double cfl = 0.4;
};

// IC is f(0, .); the same series provides the forcing when alpha = 1.
// The flux is u^2 exactly as the equation is written (not u^2/2), so the
// local wave speed is 2u. `label` names the sample in failure messages.
inline Trajectory solve_burgers(const BurgersConfig& cfg, const FourierSeries& f,
                                const std::string& label = {}) {
  ConservationLaw law;
  law.flux = [](double u) { return u * u; };
  law.alpha_max = [](const std::vector<double>& u) {
    double a = 0.0;
    for (double v : u) a = std::max(a, 2.0 * std::fabs(v));
    return a;
  };
  law.beta = cfg.beta;
  if (cfg.alpha != 0.0) {
    const double a = cfg.alpha;
    law.forcing = [a, &f](double t, double x) { return a * f.eval(t, x); };
  }
  IntegratorConfig icfg;
  icfg.length = cfg.length;
  icfg.t_final = cfg.t_final;
  icfg.n_t = cfg.n_t;
  icfg.n_x = cfg.n_x_fine;
  icfg.cfl = cfg.cfl;
  icfg.label = label;
  Trajectory traj =
      integrate_conservation_law(law, icfg, [&f](double x) { return f.eval(0.0, x); });
  if (cfg.beta != 0.0) traj.eta = {cfg.beta};
  return traj;
}

// ---------------------------------------------------------------------------
// MS-wave: two-speed advection system solved exactly by characteristics.
//
//   d_t u + A d_x u = 0,  A = [[a+b, b-a], [b-a, a+b]]
//   w = R^{-1} u decouples into speeds 2a and 2b with
//   R = [[-1, 1], [1, 1]], R^{-1} = [[-1/2, 1/2], [1/2, 1/2]].
// ---------------------------------------------------------------------------

struct AdvectionConfig {
  double a = 0.5;  // slow half-speed, [0.1, 1]
  double b = 5.0;  // fast half-speed, [1, 10]
  double length = 16.0, t_final = 4.0;
  int64_t n_t = 250, n_x_fine = 200;
};

// Exact pointwise solution at (t, x); channels (u1, u2). Shared by the grid
// sampler below and by test oracles that probe single points.
inline void advection_exact(const AdvectionConfig& cfg, const FourierSeries& u0_1,
                            const FourierSeries& u0_2, double t, double x, double out[2]) {
  const double xa = x - 2.0 * cfg.a * t;  // series are L-periodic: no explicit wrap
  const double xb = x - 2.0 * cfg.b * t;
  const double w1 = 0.5 * (-u0_1.eval(0.0, xa) + u0_2.eval(0.0, xa));
  const double w2 = 0.5 * (u0_1.eval(0.0, xb) + u0_2.eval(0.0, xb));
  out[0] = -w1 + w2;
  out[1] = w1 + w2;
}

inline Trajectory solve_advection(const AdvectionConfig& cfg, const FourierSeries& u0_1,
                                  const FourierSeries& u0_2) {
  Trajectory traj;
  traj.n_t = cfg.n_t;
  traj.n_x = cfg.n_x_fine;
  traj.n_ch = 2;
  traj.length = cfg.length;
  traj.t_final = cfg.t_final;
  traj.alloc();
  traj.eta = {cfg.a, cfg.b};
  double val[2];
  for (int64_t m = 0; m < cfg.n_t; ++m)
    for (int64_t i = 0; i < cfg.n_x_fine; ++i) {
      advection_exact(cfg, u0_1, u0_2, traj.t[static_cast<size_t>(m)],
                      traj.x[static_cast<size_t>(i)], val);
      traj.at(m, i, 0) = val[0];
      traj.at(m, i, 1) = val[1];
    }
  return traj;
}

// ---------------------------------------------------------------------------
// Spatial downsampling: 2-tap box kernel (1/2, 1/2), stride 2, per channel.
// ---------------------------------------------------------------------------

inline Trajectory downsample(const Trajectory& fine) {
  check(fine.n_x % 2 == 0, "downsample: n_x must be even, got " + std::to_string(fine.n_x));
  Trajectory out;
  out.n_t = fine.n_t;
  out.n_x = fine.n_x / 2;
  out.n_ch = fine.n_ch;
  out.length = fine.length;
  out.t_final = fine.t_final;
  out.alloc();
  out.eta = fine.eta;
  for (int64_t m = 0; m < out.n_t; ++m)
    for (int64_t i = 0; i < out.n_x; ++i)
      for (int64_t c = 0; c < out.n_ch; ++c)
        out.at(m, i, c) = 0.5 * (fine.at(m, 2 * i, c) + fine.at(m, 2 * i + 1, c));
  return out;
}

}  // namespace msmp
