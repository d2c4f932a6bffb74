#include <cmath>
#include <vector>

#include "doctest.h"
#include "msmp/fourier.hpp"
#include "msmp/solvers.hpp"

using namespace msmp;

namespace {

// Analytic cell average of sin(k x) over [lo, hi].
double sine_cell_average(double k, double lo, double hi) {
  return (std::cos(k * lo) - std::cos(k * hi)) / (k * (hi - lo));
}

double rel_l2(const std::vector<double>& a, const std::vector<double>& b) {
  double num = 0.0, den = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den += b[i] * b[i];
  }
  return std::sqrt(num / den);
}

ConservationLaw linear_advection(double speed) {
  ConservationLaw law;
  law.flux = [speed](double u) { return speed * u; };
  law.alpha_max = [speed](const std::vector<double>&) { return std::fabs(speed); };
  return law;
}

}  // namespace

TEST_CASE("weno5: constant stencil reproduced exactly (machine precision)") {
  for (double c : {0.0, 1.0, -3.7, 123.456}) {
    const double v[5] = {c, c, c, c, c};
    CHECK(std::fabs(weno5_reconstruct(v) - c) <= 4.0 * std::fabs(c) * 2.220446049250313e-16);
  }
}

TEST_CASE("weno5: fifth-order convergence on smooth cell averages") {
  // Reconstruct sin(kx) at the right interface from exact cell averages and
  // fit the error order across dyadic refinements.
  const double k = 2.0 * kPi / 16.0 * 3.0;
  std::vector<double> hs, errs;
  for (int64_t n : {25, 50, 100, 200, 400}) {
    const double h = 16.0 / static_cast<double>(n);
    double max_err = 0.0;
    for (int64_t i = 2; i + 2 < n; ++i) {
      double v[5];
      for (int s = 0; s < 5; ++s) {
        const double lo = (i + s - 2) * h;
        v[s] = sine_cell_average(k, lo, lo + h);
      }
      const double xi = (i + 1) * h;  // right interface of cell i
      max_err = std::max(max_err, std::fabs(weno5_reconstruct(v) - std::sin(k * xi)));
    }
    hs.push_back(std::log(h));
    errs.push_back(std::log(max_err));
  }
  // least squares slope of log err vs log h
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(hs.size());
  for (size_t i = 0; i < hs.size(); ++i) {
    sx += hs[i];
    sy += errs[i];
    sxx += hs[i] * hs[i];
    sxy += hs[i] * errs[i];
  }
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  CHECK(slope >= 4.5);
}

TEST_CASE("weno5: no overshoot on step stencils") {
  for (double lo : {0.0, -1.0, 2.5}) {
    for (double hi : {1.0, 3.0, 10.0}) {
      for (int split = 1; split < 5; ++split) {
        double v[5], w[5];
        for (int s = 0; s < 5; ++s) {
          v[s] = s < split ? lo : hi;
          w[s] = s < split ? hi : lo;
        }
        const double mn = std::min(lo, hi) - 1e-8, mx = std::max(lo, hi) + 1e-8;
        for (const double* st : {v, w}) {
          const double r = weno5_reconstruct(st);
          CHECK(r >= mn);
          CHECK(r <= mx);
        }
      }
    }
  }
}

TEST_CASE("burgers: zero initial data with no forcing stays zero") {
  FourierSeries f;
  f.amplitude = {0.0};
  f.omega = {0.0};
  f.phase = {0.0};
  f.mode = {1};
  f.domain_length = 16.0;
  BurgersConfig cfg;  // alpha = beta = 0 (E1 mode)
  cfg.n_t = 10;       // temporal snapshots only; dynamics are trivial
  Trajectory traj = solve_burgers(cfg, f);
  for (double v : traj.u) CHECK(v == 0.0);
  CHECK(traj.eta.empty());
}

TEST_CASE("burgers: output grid shape is (250, 200, 1)") {
  Rng rng(31);
  FourierSeries f = sample_fourier(rng, 5, true, 16.0);
  for (auto& a : f.amplitude) a *= 0.05;  // keep it cheap: weak waves, few steps
  BurgersConfig cfg;
  cfg.t_final = 0.2;
  cfg.n_t = 250;
  Trajectory traj = solve_burgers(cfg, f);
  CHECK(traj.n_t == 250);
  CHECK(traj.n_x == 200);
  CHECK(traj.n_ch == 1);
  CHECK(static_cast<int64_t>(traj.u.size()) == 250 * 200);
  for (double v : traj.u) CHECK(std::isfinite(v));
}

TEST_CASE("burgers: pre-shock solution matches 4x finer self-reference") {
  // Smooth sine, inviscid; shock forms at t* = 4/(pi A) ~ 2.5 for A = 1/2.
  FourierSeries f;
  f.amplitude = {0.5};
  f.omega = {0.0};
  f.phase = {0.0};
  f.mode = {1};
  f.domain_length = 16.0;
  BurgersConfig coarse;
  coarse.t_final = 1.0;
  coarse.n_t = 11;
  coarse.n_x_fine = 200;
  BurgersConfig fine = coarse;
  fine.n_x_fine = 800;
  Trajectory tc = solve_burgers(coarse, f);
  Trajectory tf = solve_burgers(fine, f);
  std::vector<double> uc(200), uf(200);
  for (int64_t i = 0; i < 200; ++i) {
    uc[i] = tc.at(coarse.n_t - 1, i, 0);
    uf[i] = tf.at(fine.n_t - 1, 4 * i, 0);  // grids nest: x_i^c = x_{4i}^f
  }
  CHECK(rel_l2(uc, uf) < 1e-3);
}

TEST_CASE("burgers: finite-volume mass conservation before shocks") {
  FourierSeries f;
  f.amplitude = {0.4};
  f.omega = {0.0};
  f.phase = {1.1};
  f.mode = {2};
  f.domain_length = 16.0;
  BurgersConfig cfg;
  cfg.t_final = 1.0;
  cfg.n_t = 11;
  Trajectory traj = solve_burgers(cfg, f);
  const double dx = traj.dx();
  double m0 = 0.0, m1 = 0.0;
  for (int64_t i = 0; i < traj.n_x; ++i) {
    m0 += traj.at(0, i, 0) * dx;
    m1 += traj.at(traj.n_t - 1, i, 0) * dx;
  }
  CHECK(std::fabs(m1 - m0) < 1e-6 * cfg.t_final);
}

TEST_CASE("weno5 pipeline: linear advection converges at order >= 4.5") {
  // Time step scaled as dx^1.5 so the RK4 error is subdominant to the
  // fifth-order spatial error.
  const double speed = 1.0, T = 0.8, L = 16.0;
  const double kx = 2.0 * kPi / L;
  std::vector<double> lh, le;
  for (int64_t n : {50, 100, 200, 400}) {
    ConservationLaw law = linear_advection(speed);
    IntegratorConfig cfg;
    cfg.length = L;
    cfg.t_final = T;
    cfg.n_t = 2;
    cfg.n_x = n;
    cfg.cfl = 0.4 * std::sqrt(50.0 / static_cast<double>(n));
    Trajectory traj =
        integrate_conservation_law(law, cfg, [kx](double x) { return std::sin(kx * x); });
    double err = 0.0;
    for (int64_t i = 0; i < n; ++i) {
      const double exact = std::sin(kx * (traj.x[i] - speed * T));
      err += (traj.at(1, i, 0) - exact) * (traj.at(1, i, 0) - exact);
    }
    err = std::sqrt(err / static_cast<double>(n));
    lh.push_back(std::log(L / static_cast<double>(n)));
    le.push_back(std::log(err));
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double m = static_cast<double>(lh.size());
  for (size_t i = 0; i < lh.size(); ++i) {
    sx += lh[i];
    sy += le[i];
    sxx += lh[i] * lh[i];
    sxy += lh[i] * le[i];
  }
  const double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
  CHECK(slope >= 4.5);
}

TEST_CASE("advection: symmetric initial data moves at the fast speed only") {
  FourierSeries g;
  g.amplitude = {1.0};
  g.omega = {0.0};
  g.phase = {0.0};
  g.mode = {1};
  g.domain_length = 16.0;
  AdvectionConfig cfg;
  cfg.a = 0.3;
  cfg.b = 4.0;
  cfg.n_t = 25;
  cfg.n_x_fine = 64;
  Trajectory traj = solve_advection(cfg, g, g);
  for (int64_t m = 0; m < traj.n_t; ++m)
    for (int64_t i = 0; i < traj.n_x; ++i) {
      const double expect = g.eval(0.0, traj.x[i] - 2.0 * cfg.b * traj.t[m]);
      CHECK(traj.at(m, i, 0) == doctest::Approx(expect).epsilon(1e-13).scale(1.0));
      CHECK(traj.at(m, i, 1) == doctest::Approx(expect).epsilon(1e-13).scale(1.0));
    }
  CHECK(traj.eta == std::vector<double>{0.3, 4.0});
}

TEST_CASE("advection: antisymmetric initial data moves at the slow speed only") {
  FourierSeries g;
  g.amplitude = {0.7};
  g.omega = {0.0};
  g.phase = {0.4};
  g.mode = {2};
  g.domain_length = 16.0;
  FourierSeries neg = g;
  neg.amplitude[0] = -g.amplitude[0];
  AdvectionConfig cfg;
  cfg.a = 0.3;
  cfg.b = 4.0;
  cfg.n_t = 25;
  cfg.n_x_fine = 64;
  Trajectory traj = solve_advection(cfg, neg, g);
  for (int64_t m = 0; m < traj.n_t; ++m)
    for (int64_t i = 0; i < traj.n_x; ++i) {
      const double expect = g.eval(0.0, traj.x[i] - 2.0 * cfg.a * traj.t[m]);
      CHECK(traj.at(m, i, 0) == doctest::Approx(-expect).epsilon(1e-13).scale(1.0));
      CHECK(traj.at(m, i, 1) == doctest::Approx(expect).epsilon(1e-13).scale(1.0));
    }
}

TEST_CASE("advection: grid values match the pointwise characteristic formula") {
  Rng rng(41);
  FourierSeries f1 = sample_fourier(rng, 5, false, 16.0);
  FourierSeries f2 = sample_fourier(rng, 5, false, 16.0);
  AdvectionConfig cfg;
  cfg.a = rng.uniform(0.1, 1.0);
  cfg.b = rng.uniform(1.0, 10.0);
  Trajectory traj = solve_advection(cfg, f1, f2);
  for (int rep = 0; rep < 200; ++rep) {
    const int64_t m = rng.uniform_int(0, cfg.n_t - 1);
    const int64_t i = rng.uniform_int(0, cfg.n_x_fine - 1);
    // independent transcription of the eigen-decomposed solution
    const double t = traj.t[m], x = traj.x[i];
    const double xa = x - 2.0 * cfg.a * t, xb = x - 2.0 * cfg.b * t;
    const double w1 = 0.5 * (f2.eval(0.0, xa) - f1.eval(0.0, xa));
    const double w2 = 0.5 * (f1.eval(0.0, xb) + f2.eval(0.0, xb));
    CHECK(std::fabs(traj.at(m, i, 0) - (-w1 + w2)) <= 1e-12);
    CHECK(std::fabs(traj.at(m, i, 1) - (w1 + w2)) <= 1e-12);
  }
}

TEST_CASE("advection: characteristic-variable means are time-invariant") {
  Rng rng(42);
  FourierSeries f1 = sample_fourier(rng, 5, false, 16.0);
  FourierSeries f2 = sample_fourier(rng, 5, false, 16.0);
  AdvectionConfig cfg;
  cfg.a = 0.47;
  cfg.b = 6.3;
  cfg.n_t = 50;
  Trajectory traj = solve_advection(cfg, f1, f2);
  std::vector<double> w1_mean(traj.n_t, 0.0), w2_mean(traj.n_t, 0.0);
  for (int64_t m = 0; m < traj.n_t; ++m) {
    for (int64_t i = 0; i < traj.n_x; ++i) {
      w1_mean[m] += 0.5 * (traj.at(m, i, 1) - traj.at(m, i, 0));
      w2_mean[m] += 0.5 * (traj.at(m, i, 0) + traj.at(m, i, 1));
    }
    w1_mean[m] /= static_cast<double>(traj.n_x);
    w2_mean[m] /= static_cast<double>(traj.n_x);
  }
  for (int64_t m = 1; m < traj.n_t; ++m) {
    CHECK(std::fabs(w1_mean[m] - w1_mean[0]) < 1e-12);
    CHECK(std::fabs(w2_mean[m] - w2_mean[0]) < 1e-12);
  }
}

TEST_CASE("downsample: constants preserved, shapes halved, odd n_x rejected") {
  Trajectory traj;
  traj.n_t = 250;
  traj.n_x = 200;
  traj.n_ch = 2;
  traj.alloc();
  for (auto& v : traj.u) v = 3.25;
  Trajectory down = downsample(traj);
  CHECK(down.n_t == 250);
  CHECK(down.n_x == 100);
  CHECK(down.n_ch == 2);
  for (double v : down.u) CHECK(v == 3.25);
  CHECK(down.dx() == doctest::Approx(0.16));

  Trajectory odd;
  odd.n_t = 2;
  odd.n_x = 7;
  odd.n_ch = 1;
  odd.alloc();
  CHECK_THROWS(downsample(odd));
}

TEST_CASE("downsample: pure mode is scaled by cos(pi l / n_x) and phase-shifted") {
  // Closed form for the (1/2, 1/2) stride-2 kernel on sin(2 pi l x / L):
  // y_m = cos(pi l / n_x) sin(2 pi l (x_{2m} + dx/2) / L).
  const int64_t n_x = 200;
  const double L = 16.0;
  for (int ell : {1, 2, 3}) {
    Trajectory traj;
    traj.n_t = 1;
    traj.n_x = n_x;
    traj.n_ch = 1;
    traj.length = L;
    traj.alloc();
    for (int64_t i = 0; i < n_x; ++i)
      traj.at(0, i, 0) = std::sin(2.0 * kPi * ell * traj.x[i] / L);
    Trajectory down = downsample(traj);
    const double gain = std::cos(kPi * ell / static_cast<double>(n_x));
    const double dxf = L / static_cast<double>(n_x);
    for (int64_t m = 0; m < down.n_x; ++m) {
      const double xs = traj.x[2 * m] + 0.5 * dxf;
      const double expect = gain * std::sin(2.0 * kPi * ell * xs / L);
      CHECK(down.at(0, m, 0) == doctest::Approx(expect).epsilon(1e-12).scale(1.0));
    }
  }
}
