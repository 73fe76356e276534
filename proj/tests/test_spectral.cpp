#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "homsim/common.hpp"
#include "homsim/spectral.hpp"

using namespace homsim;

namespace {

// Convolution of two Cauchy profiles in closed form.
double overlap_closed_form(double gamma_f, double gamma_nv, double detuning) {
  double g = gamma_f + gamma_nv;
  return gamma_f * g / (g * g + detuning * detuning);
}

} // namespace

TEST_CASE("transmission profile basics") {
  FilterSpec s{100.0, 25.0, 0.9, 0.05};
  CHECK(transmission(100.0, s) == doctest::Approx(0.95).epsilon(1e-12));
  CHECK(transmission(125.0, s) == doctest::Approx(0.45 + 0.05).epsilon(1e-12)); // HWHM point
  CHECK(transmission(75.0, s) == doctest::Approx(transmission(125.0, s)).epsilon(1e-12));
  CHECK(transmission(1e6, s) == doctest::Approx(0.05).epsilon(1e-6));
  CHECK_THROWS_AS((void)transmission(0.0, FilterSpec{0.0, -1.0, 1.0, 0.0}), ConfigError);
  CHECK_THROWS_AS((void)transmission(0.0, FilterSpec{0.0, 25.0, 0.0, 0.0}), ConfigError);
}

TEST_CASE("transmission to frequency round trip") {
  FilterSpec s{0.0, 25.0, 1.0, 0.02};
  SplitMix64 rng(3);
  for (int i = 0; i < 200; ++i) {
    double f = s.f0_mhz - 120.0 * rng.uniform(); // root-minus branch
    double t_rel = transmission(f, s) / (s.peak + s.background);
    double back = frequency_from_transmission(t_rel, s);
    CHECK(back == doctest::Approx(f).epsilon(1e-9));
  }
  CHECK(frequency_from_transmission(1.0, s) == doctest::Approx(s.f0_mhz).epsilon(1e-12));
  // Below the background floor or above the maximum is not invertible.
  CHECK_THROWS_AS((void)frequency_from_transmission(0.01, s), std::domain_error);
  CHECK_THROWS_AS((void)frequency_from_transmission(1.01, s), std::domain_error);
}

TEST_CASE("overlap transmission matches the Cauchy convolution closed form") {
  SplitMix64 rng(11);
  for (int i = 0; i < 100; ++i) {
    double gamma_f = 1.0 + 49.0 * rng.uniform();
    double gamma_nv = 0.5 + 19.5 * rng.uniform();
    FilterSpec s{0.0, gamma_f, 1.0, 0.0};
    EmissionLine line{0.0, gamma_nv};
    double numeric = photon_transmission_probability(s, line);
    CHECK(numeric == doctest::Approx(gamma_f / (gamma_f + gamma_nv)).epsilon(1e-6));
  }
}

TEST_CASE("off-center overlap and monotonicity") {
  EmissionLine line{0.0, 6.35};
  for (double detuning : {0.0, 5.0, 12.0, 30.0}) {
    FilterSpec s{detuning, 25.0, 1.0, 0.0};
    double numeric = photon_transmission_probability(s, line);
    CHECK(numeric == doctest::Approx(overlap_closed_form(25.0, 6.35, detuning)).epsilon(1e-6));
  }
  // Decreasing in |detuning| and in the emission width.
  double prev = 1.0;
  for (double detuning : {0.0, 2.0, 8.0, 20.0, 50.0}) {
    double p = photon_transmission_probability(FilterSpec{detuning, 25.0, 1.0, 0.0}, line);
    CHECK(p < prev);
    prev = p;
  }
  prev = 1.0;
  for (double gnv : {1.0, 4.0, 10.0, 20.0}) {
    double p = photon_transmission_probability(FilterSpec{0.0, 25.0, 1.0, 0.0},
                                               EmissionLine{0.0, gnv});
    CHECK(p < prev);
    prev = p;
  }
}

TEST_CASE("default widths give the expected overlap level") {
  double p = photon_transmission_probability(FilterSpec{0.0, 25.0, 1.0, 0.0},
                                             EmissionLine{0.0, 6.35});
  CHECK(p == doctest::Approx(25.0 / 31.35).epsilon(1e-6));
  CHECK(p > 0.75);
  CHECK(p < 0.85);
}

TEST_CASE("drift sensitivity is small and matches the closed form") {
  FilterSpec s{0.0, 25.0, 1.0, 0.0};
  EmissionLine line{0.0, 6.35};
  for (double df : {-1.0, -0.5, 0.5, 1.0}) {
    double drift = transmission_drift(s, line, df);
    double expected = overlap_closed_form(25.0, 6.35, df) / overlap_closed_form(25.0, 6.35, 0.0) -
                      1.0;
    CHECK(drift == doctest::Approx(expected).epsilon(1e-6));
    CHECK(std::abs(drift) < 0.02);
  }
  CHECK(transmission_drift(s, line, 0.0) == doctest::Approx(0.0).epsilon(1e-9));
  CHECK_THROWS_AS((void)transmission_drift(s, line, 6.0), ConfigError);
}

TEST_CASE("difference-frequency pump relation") {
  CHECK(pump_frequency(470.4, 194.0) == doctest::Approx(276.4).epsilon(1e-12));
  // Unit slope: shifting the excitation shifts the pump one-for-one.
  double base = pump_frequency(470.4, 194.0);
  CHECK(pump_frequency(470.4 + 0.003, 194.0) - base == doctest::Approx(0.003).epsilon(1e-9));
  CHECK_THROWS_AS((void)pump_frequency(100.0, 194.0), std::domain_error);
}
