#pragma once

#include <cmath>
#include <vector>

#include "rng.hpp"
#include "tensor.hpp"

namespace msmp {

inline constexpr double kPi = 3.14159265358979323846;

// Truncated Fourier series f(t, x) = sum_j A_j sin(omega_j t + 2 pi l_j x / L + phi_j).
// Serves as both initial condition and forcing; L-periodic in x by construction.
struct FourierSeries {
  std::vector<double> amplitude;  // A_j in [-1/2, 1/2]
  std::vector<double> omega;      // temporal frequency, [-0.4, 0.4] (0 when not drawn)
  std::vector<double> phase;      // phi_j in [0, 2pi)
  std::vector<int> mode;          // l_j in {1, 2, 3}
  double domain_length = 16.0;

  int modes() const { return static_cast<int>(amplitude.size()); }

  double eval(double t, double x) const {
    double acc = 0.0;
    for (int j = 0; j < modes(); ++j)
      acc += amplitude[static_cast<size_t>(j)] *
             std::sin(omega[static_cast<size_t>(j)] * t +
                      2.0 * kPi * mode[static_cast<size_t>(j)] * x / domain_length +
                      phase[static_cast<size_t>(j)]);
    return acc;
  }
};

// Draw order per mode is fixed (A, omega if drawn, phi, l) so regeneration
// is byte-identical for a given stream.
inline FourierSeries sample_fourier(Rng& rng, int n_modes, bool with_omega, double length) {
  check(n_modes >= 1, "sample_fourier: need at least one mode");
  FourierSeries f;
  f.domain_length = length;
  f.amplitude.resize(static_cast<size_t>(n_modes));
  f.omega.assign(static_cast<size_t>(n_modes), 0.0);
  f.phase.resize(static_cast<size_t>(n_modes));
  f.mode.resize(static_cast<size_t>(n_modes));
  for (int j = 0; j < n_modes; ++j) {
    f.amplitude[static_cast<size_t>(j)] = rng.uniform(-0.5, 0.5);
    if (with_omega) f.omega[static_cast<size_t>(j)] = rng.uniform(-0.4, 0.4);
    f.phase[static_cast<size_t>(j)] = rng.uniform(0.0, 2.0 * kPi);
    f.mode[static_cast<size_t>(j)] = static_cast<int>(rng.uniform_int(1, 3));
  }
  return f;
}

}  // namespace msmp
