#pragma once

// Closed-form coincidence probabilities per detection-bin difference for two
// pulsed single-photon emitters interfering on a beamsplitter, with uniform
// background counts on both detectors. Also visibility extraction with the
// unbalanced-emitter correction and the beamsplitter-imbalance factor.

#include <array>
#include <cmath>
#include <cstdlib>

#include "homsim/common.hpp"

namespace homsim {

inline constexpr int kMaxBinDifference = 9;
inline constexpr int kNumDifferenceBins = 2 * kMaxBinDifference + 1; // 19

// Per-round detection probabilities: pXY is the probability that a photon
// emitted by node X lands in detector Y; pDCA/pDCB are background
// probabilities per detection window.
struct RateEstimates {
  double p1A = 0.0;
  double p1B = 0.0;
  double p2A = 0.0;
  double p2B = 0.0;
  double pDCA = 0.0;
  double pDCB = 0.0;

  // Splits aggregate per-node probabilities evenly over the two detectors.
  static RateEstimates symmetric_split(double p1, double p2, double pdca, double pdcb) {
    return RateEstimates{0.5 * p1, 0.5 * p1, 0.5 * p2, 0.5 * p2, pdca, pdcb};
  }

  void validate() const {
    for (double p : {p1A, p1B, p2A, p2B, pDCA, pDCB}) {
      if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("rate outside [0,1]");
    }
  }

  // The closed forms assume probabilities far below saturation.
  bool realistic() const {
    for (double p : {p1A, p1B, p2A, p2B, pDCA, pDCB}) {
      if (p >= 0.01) return false;
    }
    return true;
  }
};

struct InterferenceParams {
  double eta = 0.0;          // indistinguishability
  double reflectivity = 0.5; // beamsplitter R
  double transmittivity = 0.5;

  void validate() const {
    if (!(eta >= 0.0 && eta <= 1.0)) throw ConfigError("eta outside [0,1]");
    if (!(reflectivity > 0.0 && reflectivity < 1.0 && transmittivity > 0.0 &&
          transmittivity < 1.0 && reflectivity + transmittivity <= 1.0)) {
      throw ConfigError("beamsplitter R, T must be in (0,1) with R+T <= 1");
    }
  }
};

struct VisibilityResult {
  double c_m = 0.0;       // measured zero-bin coincidences
  double c_e = 0.0;       // extrapolated zero-bin coincidences
  double c_dist = 0.0;    // corrected distinguishable expectation
  double n_attempt = 0.0; // excitation attempts
  double v = 0.0;         // 1 - c_m / c_dist
};

// Number of bin pairs at difference d within a block of 10 pulses.
inline int scaling_factor(int d) {
  if (std::abs(d) > kMaxBinDifference) throw std::domain_error("bin difference out of [-9,9]");
  return 10 - std::abs(d);
}

inline double p_coinc_nvnv(const RateEstimates& r) {
  return r.p1A * r.p2B + r.p1B * r.p2A + r.p1A * r.p1B + r.p2A * r.p2B;
}

inline double p_coinc_nvdc(const RateEstimates& r) {
  return r.pDCA * (r.p1B + r.p2B) + r.pDCB * (r.p1A + r.p2A);
}

inline double p_coinc_dcdc(const RateEstimates& r) { return r.pDCA * r.pDCB; }

// Coincidence probability per bin pair for non-zero bin differences.
inline double p_coinc_nonzero(const RateEstimates& r) {
  return p_coinc_nvnv(r) + p_coinc_nvdc(r) + p_coinc_dcdc(r);
}

// Same-bin coincidence probability: the cross-node term is suppressed by the
// indistinguishability and same-emitter pairs cannot occur within one bin.
inline double p_coinc_zero(const RateEstimates& r, const InterferenceParams& ip) {
  double cross = r.p1A * r.p2B + r.p1B * r.p2A;
  return cross * (1.0 - ip.eta) + p_coinc_nvdc(r) + p_coinc_dcdc(r);
}

// Real-valued expectation per bin difference d in [-9, 9], index d + 9.
struct ExpectedHistogram {
  std::array<double, kNumDifferenceBins> expected{};
  double& at(int d) { return expected[static_cast<std::size_t>(d + kMaxBinDifference)]; }
  double at(int d) const { return expected[static_cast<std::size_t>(d + kMaxBinDifference)]; }
};

inline ExpectedHistogram expected_histogram(const RateEstimates& r, const InterferenceParams& ip,
                                            double n_blocks) {
  if (!(n_blocks > 0)) throw ConfigError("n_blocks must be positive");
  ExpectedHistogram h;
  double p_nz = p_coinc_nonzero(r);
  for (int d = -kMaxBinDifference; d <= kMaxBinDifference; ++d) {
    h.at(d) = scaling_factor(d) * p_nz * n_blocks;
  }
  h.at(0) = 10.0 * p_coinc_zero(r, ip) * n_blocks;
  return h;
}

// Removes the same-emitter contribution from the extrapolated zero-bin count.
inline double correct_extrapolation(double c_e, const RateEstimates& r, double n_attempt) {
  if (c_e < 0.0) throw ConfigError("C_E must be nonnegative");
  double c_dist = c_e - (r.p1A * r.p1B + r.p2A * r.p2B) * n_attempt;
  if (c_dist < 0.0) {
    throw AnalysisError("inconsistent inputs: same-emitter correction exceeds extrapolated counts");
  }
  return c_dist;
}

inline double visibility(double c_m, double c_dist) {
  if (!(c_dist > 0.0)) throw std::domain_error("C_dist must be positive");
  return 1.0 - c_m / c_dist;
}

inline VisibilityResult extract_visibility(double c_m, double c_e, const RateEstimates& r,
                                           double n_attempt) {
  VisibilityResult out;
  out.c_m = c_m;
  out.c_e = c_e;
  out.n_attempt = n_attempt;
  out.c_dist = correct_extrapolation(c_e, r, n_attempt);
  out.v = visibility(c_m, out.c_dist);
  return out;
}

// Residual interference factor of an unbalanced splitter; eta is effectively
// scaled by this. Reported alongside results, not folded into eta by default.
inline double beamsplitter_factor(double reflectivity, double transmittivity) {
  double denom = reflectivity * reflectivity + transmittivity * transmittivity;
  if (!(denom > 0.0)) throw std::domain_error("R and T cannot both be zero");
  double diff = reflectivity - transmittivity;
  return 1.0 - diff * diff / denom;
}

} // namespace homsim
