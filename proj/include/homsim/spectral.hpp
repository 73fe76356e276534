#pragma once

// Cauchy (Lorentzian) transmission model of the ultra-narrow filter, its
// inversion from transmission to frequency, the overlap transmission
// probability of a Lorentzian emission line, drift sensitivity, and the
// difference-frequency pump relation.

#include <cmath>

#include "homsim/common.hpp"

namespace homsim {

// T(f) = I / (1 + ((f - f0)/gamma)^2) + B; FWHM = 2 gamma.
struct FilterSpec {
  double f0_mhz = 0.0;    // center, relative to the target frequency
  double gamma_mhz = 25.0; // half width at half maximum
  double peak = 1.0;       // I
  double background = 0.0; // B

  void validate() const {
    if (!(gamma_mhz > 0.0)) throw ConfigError("filter gamma must be positive");
    if (!(peak > 0.0)) throw ConfigError("filter peak must be positive");
    if (!(background >= 0.0)) throw ConfigError("filter background must be nonnegative");
  }
};

// Normalized Cauchy emission line.
struct EmissionLine {
  double f_nv_mhz = 0.0;
  double gamma_nv_mhz = 6.35; // half the ~12.7 MHz natural linewidth

  void validate() const {
    if (!(gamma_nv_mhz > 0.0)) throw ConfigError("line gamma must be positive");
  }
};

struct LockOffsets {
  double stabilization_offset_mhz = 400.0;
  double reference_detuning_mhz = 25.0;
};

inline double transmission(double f_mhz, const FilterSpec& s) {
  s.validate();
  double x = (f_mhz - s.f0_mhz) / s.gamma_mhz;
  return s.peak / (1.0 + x * x) + s.background;
}

// Inverts the relative transmission (fraction of the I+B maximum) back to a
// frequency on the root-minus branch (f <= f0).
inline double frequency_from_transmission(double t_meas, const FilterSpec& s) {
  s.validate();
  double denom = t_meas * (s.peak + s.background) - s.background;
  if (!(denom > 0.0) || t_meas > 1.0) {
    throw std::domain_error("transmission outside invertible range (B/(I+B), 1]");
  }
  double arg = -1.0 + s.peak / denom;
  if (arg < 0.0) arg = 0.0; // t_meas == 1 up to rounding
  return s.f0_mhz - s.gamma_mhz * std::sqrt(arg);
}

// Overlap integral of the peak-normalized filter profile with the emission
// line. Cauchy tails are truncated at +/- 200 * max(gamma, gamma_nv) around
// the line center; the remainder contributes < 1e-6.
inline double photon_transmission_probability(const FilterSpec& s, const EmissionLine& line) {
  s.validate();
  line.validate();
  double gamma = s.gamma_mhz;
  double gnv = line.gamma_nv_mhz;
  double span = 200.0 * std::max(gamma, gnv);
  auto integrand = [&](double f) {
    double xl = (f - line.f_nv_mhz) / gnv;
    double line_pdf = 1.0 / (M_PI * gnv * (1.0 + xl * xl));
    double xf = (f - s.f0_mhz) / gamma;
    double t_profile = 1.0 / (1.0 + xf * xf);
    return line_pdf * t_profile;
  };
  return integrate(integrand, line.f_nv_mhz - span, line.f_nv_mhz + span, 1e-8);
}

// Relative change in overlap transmission when the filter center shifts by
// delta_f away from its nominal position.
inline double transmission_drift(const FilterSpec& s, const EmissionLine& line, double delta_f_mhz,
                                 double max_delta_f_mhz = 5.0) {
  if (std::abs(delta_f_mhz) > max_delta_f_mhz) {
    throw ConfigError("drift exceeds configured bound");
  }
  double centered = photon_transmission_probability(s, line);
  FilterSpec shifted = s;
  shifted.f0_mhz += delta_f_mhz;
  return (photon_transmission_probability(shifted, line) - centered) / centered;
}

// Difference frequency generation: the pump makes up the gap between the
// excitation frequency and the fixed target, with unit slope.
inline double pump_frequency(double f_excitation_ghz, double f_target_ghz) {
  double f = f_excitation_ghz - f_target_ghz;
  if (!(f > 0.0)) throw std::domain_error("excitation frequency must exceed the target");
  return f;
}

} // namespace homsim
