#pragma once

// Analytic temporal densities of coincidence arrival-time differences inside a
// detection window: emitter-emitter, emitter-background and
// background-background contributions, plus their weighted composition.

#include <cmath>
#include <ostream>
#include <vector>

#include "homsim/coincidence.hpp"
#include "homsim/common.hpp"

namespace homsim {

// Analysis window [t_start, t_end] in ns relative to the excitation pulse
// peak, with the emitter excited-state lifetime tau.
struct DetectionWindow {
  double t_start_ns = 5.0;
  double t_end_ns = 25.0;
  double tau_ns = 12.5;

  double length() const { return t_end_ns - t_start_ns; }

  void validate() const {
    if (!(t_start_ns > 0.0 && t_end_ns > t_start_ns)) {
      throw ConfigError("window requires 0 < t_start < t_end");
    }
    if (!(tau_ns > 0.0)) throw ConfigError("tau must be positive");
  }
};

// |phi(t)|^2 of a windowed exponential wave packet, normalized to 1 over the
// window.
inline double nv_wavepacket_density(double t_ns, const DetectionWindow& w) {
  if (t_ns < w.t_start_ns || t_ns > w.t_end_ns) return 0.0;
  double norm = w.tau_ns * (std::exp(-w.t_start_ns / w.tau_ns) - std::exp(-w.t_end_ns / w.tau_ns));
  return std::exp(-t_ns / w.tau_ns) / norm;
}

// Cross-correlation of two distinguishable exponential wave packets. Each of
// the three pure shapes below integrates to 1/2 over [-W, W].
inline double g2_nvnv(double delta_t_ns, const DetectionWindow& w) {
  double adt = std::abs(delta_t_ns);
  if (adt > w.length()) return 0.0;
  double tau = w.tau_ns;
  double edge = std::exp(-w.t_start_ns / tau) - std::exp(-w.t_end_ns / tau);
  double num = std::exp(-(2.0 * w.t_start_ns + adt) / tau) - std::exp(-(2.0 * w.t_end_ns - adt) / tau);
  return num / (4.0 * tau * edge * edge);
}

inline double g2_nvdc(double delta_t_ns, const DetectionWindow& w) {
  double adt = std::abs(delta_t_ns);
  double width = w.length();
  if (adt > width) return 0.0;
  double tau = w.tau_ns;
  double edge = std::exp(-w.t_start_ns / tau) - std::exp(-w.t_end_ns / tau);
  double num = std::exp(-w.t_start_ns / tau) - std::exp(-(w.t_end_ns - adt) / tau) +
               std::exp(-(w.t_start_ns + adt) / tau) - std::exp(-w.t_end_ns / tau);
  return num / (4.0 * width * edge);
}

inline double g2_dcdc(double delta_t_ns, const DetectionWindow& w) {
  double adt = std::abs(delta_t_ns);
  double width = w.length();
  if (adt > width) return 0.0;
  return (width - adt) / (2.0 * width * width);
}

// Composed arrival-time-difference curve. Each pure shape is doubled so it
// carries unit area, then weighted by its coincidence probability; the total
// area therefore equals the coincidence probability per bin pair. Use
// normalized() for a unit-area curve.
struct TemporalShape {
  std::vector<double> delta_t_ns;
  std::vector<double> density; // per ns
  double w_nvnv = 0.0;
  double w_nvdc = 0.0;
  double w_dcdc = 0.0;

  double area() const {
    // trapezoid over the stored grid
    double a = 0.0;
    for (std::size_t i = 1; i < delta_t_ns.size(); ++i) {
      a += 0.5 * (density[i] + density[i - 1]) * (delta_t_ns[i] - delta_t_ns[i - 1]);
    }
    return a;
  }

  TemporalShape normalized() const {
    TemporalShape out = *this;
    double a = area();
    if (a > 0.0) {
      for (double& v : out.density) v /= a;
    }
    return out;
  }

  void write_csv(std::ostream& os) const {
    os << "# w_nvnv=" << w_nvnv << " w_nvdc=" << w_nvdc << " w_dcdc=" << w_dcdc << "\n";
    os << "delta_t_ns,density_per_ns\n";
    for (std::size_t i = 0; i < delta_t_ns.size(); ++i) {
      os << delta_t_ns[i] << "," << density[i] << "\n";
    }
  }
};

inline TemporalShape compose_shape(const DetectionWindow& w, const RateEstimates& r,
                                   const InterferenceParams& ip, bool zero_bin,
                                   double grid_step_ns = 0.1) {
  w.validate();
  r.validate();
  ip.validate();
  double cross = r.p1A * r.p2B + r.p1B * r.p2A;
  double w_nvnv = zero_bin ? cross * (1.0 - ip.eta) : p_coinc_nvnv(r);
  double w_nvdc = p_coinc_nvdc(r);
  double w_dcdc = p_coinc_dcdc(r);
  if (w_nvnv + w_nvdc + w_dcdc <= 0.0) throw AnalysisError("all contribution weights are zero");

  TemporalShape shape;
  shape.w_nvnv = w_nvnv;
  shape.w_nvdc = w_nvdc;
  shape.w_dcdc = w_dcdc;
  double width = w.length();
  auto n = static_cast<std::size_t>(std::ceil(2.0 * width / grid_step_ns)) + 1;
  shape.delta_t_ns.reserve(n);
  shape.density.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    double dt = -width + static_cast<double>(i) * grid_step_ns;
    if (dt > width) dt = width;
    shape.delta_t_ns.push_back(dt);
    shape.density.push_back(2.0 * (w_nvnv * g2_nvnv(dt, w) + w_nvdc * g2_nvdc(dt, w) +
                                   w_dcdc * g2_dcdc(dt, w)));
  }
  return shape;
}

} // namespace homsim
