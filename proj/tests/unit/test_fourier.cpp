#include <cmath>

#include "doctest.h"
#include "msmp/fourier.hpp"

using namespace msmp;

TEST_CASE("sample_fourier: coefficient ranges and omega switch") {
  Rng rng(101);
  for (int rep = 0; rep < 50; ++rep) {
    FourierSeries f = sample_fourier(rng, 5, /*with_omega=*/true, 16.0);
    REQUIRE(f.modes() == 5);
    for (int j = 0; j < 5; ++j) {
      CHECK(f.amplitude[j] >= -0.5);
      CHECK(f.amplitude[j] <= 0.5);
      CHECK(f.omega[j] >= -0.4);
      CHECK(f.omega[j] <= 0.4);
      CHECK(f.phase[j] >= 0.0);
      CHECK(f.phase[j] <= 2.0 * kPi);
      CHECK(f.mode[j] >= 1);
      CHECK(f.mode[j] <= 3);
    }
  }
  Rng rng2(102);
  FourierSeries g = sample_fourier(rng2, 5, /*with_omega=*/false, 16.0);
  for (int j = 0; j < 5; ++j) CHECK(g.omega[j] == 0.0);
}

TEST_CASE("sample_fourier: zero amplitude evaluates to zero; same seed reproduces") {
  Rng rng(103);
  FourierSeries f = sample_fourier(rng, 1, true, 16.0);
  f.amplitude[0] = 0.0;
  for (double x : {0.0, 1.3, 7.9}) CHECK(f.eval(0.7, x) == 0.0);

  Rng a(104), b(104);
  FourierSeries fa = sample_fourier(a, 5, true, 16.0);
  FourierSeries fb = sample_fourier(b, 5, true, 16.0);
  CHECK(fa.amplitude == fb.amplitude);
  CHECK(fa.omega == fb.omega);
  CHECK(fa.phase == fb.phase);
  CHECK(fa.mode == fb.mode);
}

TEST_CASE("eval_series: known points of a single sine mode") {
  FourierSeries f;
  f.amplitude = {1.0};
  f.omega = {0.0};
  f.phase = {0.0};
  f.mode = {1};
  f.domain_length = 16.0;
  CHECK(f.eval(0.0, 0.0) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(f.eval(0.0, 4.0) == doctest::Approx(1.0).epsilon(1e-15));  // sin(pi/2)
}

TEST_CASE("eval_series: matches independent term-by-term summation") {
  Rng rng(105);
  FourierSeries f = sample_fourier(rng, 2, true, 16.0);
  for (int rep = 0; rep < 20; ++rep) {
    const double t = rng.uniform(0.0, 4.0);
    const double x = rng.uniform(0.0, 16.0);
    long double acc = 0.0L;
    for (int j = 0; j < f.modes(); ++j)
      acc += static_cast<long double>(f.amplitude[j]) *
             sinl(static_cast<long double>(f.omega[j]) * t +
                  2.0L * 3.141592653589793238462643383279503L * f.mode[j] * x / 16.0L +
                  static_cast<long double>(f.phase[j]));
    CHECK(f.eval(t, x) == doctest::Approx(static_cast<double>(acc)).epsilon(1e-12));
  }
}

TEST_CASE("eval_series: L-periodicity to 1e-12") {
  Rng rng(106);
  FourierSeries f = sample_fourier(rng, 5, true, 16.0);
  for (int rep = 0; rep < 100; ++rep) {
    const double t = rng.uniform(0.0, 4.0);
    const double x = rng.uniform(0.0, 16.0);
    CHECK(std::fabs(f.eval(t, x + 16.0) - f.eval(t, x)) < 1e-12);
  }
}
