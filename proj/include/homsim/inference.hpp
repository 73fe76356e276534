#pragma once

// Likelihood-free Bayesian posterior over the indistinguishability eta: draw
// detection probabilities from their estimated uncertainties, simulate
// (C_E, C_M) outcome pairs, and score each eta grid point by the fraction of
// simulated pairs matching the measurement.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "homsim/coincidence.hpp"
#include "homsim/common.hpp"

namespace homsim {

inline constexpr std::uint64_t kTagInference = 5;

// Gaussian uncertainty model of the estimated detection probabilities.
struct ParameterStats {
  RateEstimates mean;
  RateEstimates sigma;
  double n_attempt = 0.0;

  void validate() const {
    mean.validate();
    for (double s : {sigma.p1A, sigma.p1B, sigma.p2A, sigma.p2B, sigma.pDCA, sigma.pDCB}) {
      if (!(s >= 0.0)) throw ConfigError("parameter sigma must be nonnegative");
    }
    if (!(n_attempt > 0.0)) throw ConfigError("n_attempt must be positive");
  }
};

struct Measurement {
  double c_m = 0.0;
  double c_e = 0.0;
  double c_e_sigma = 0.0;

  void validate() const {
    if (!(c_m >= 0.0)) throw ConfigError("C_M must be nonnegative");
    if (!(c_e > 0.0)) throw ConfigError("C_E must be positive");
    if (!(c_e_sigma >= 0.0)) throw ConfigError("C_E sigma must be nonnegative");
  }
};

struct OutcomePair {
  double c_e = 0.0;
  double c_m = 0.0;
};

struct PosteriorDensity {
  std::vector<double> eta;
  std::vector<double> density; // normalized, sums to 1 over the grid
  double map = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  bool multimodal = false;
};

struct InferenceSettings {
  int grid_points = 201;
  int draws = 1000;        // parameter draws N
  int realizations = 1000; // Poisson realizations K per draw
  double t_m = 0.0;        // match tolerance on C_M
  double t_e = -1.0;       // match tolerance on C_E; < 0 -> max(1, c_e_sigma)
  unsigned threads = 1;

  void validate() const {
    if (grid_points < 2) throw ConfigError("grid needs at least 2 points");
    if (draws < 1 || realizations < 1) throw ConfigError("draws and realizations must be >= 1");
    if (!(t_m >= 0.0)) throw ConfigError("t_m must be nonnegative");
  }
};

namespace detail {

inline double truncated_normal_01(std::mt19937_64& rng, double mu, double sigma) {
  if (sigma <= 0.0) return std::clamp(mu, 0.0, 1.0);
  std::normal_distribution<double> d(mu, sigma);
  for (;;) {
    double v = d(rng);
    if (v >= 0.0 && v <= 1.0) return v;
  }
}

// Streams N*K simulated (C_E, C_M) pairs into fn without materializing them.
template <class Fn>
void for_each_outcome(const ParameterStats& stats, double eta, int n_draws, int k_realizations,
                      std::mt19937_64& rng, Fn&& fn) {
  const InterferenceParams ip{eta, 0.5, 0.5};
  for (int n = 0; n < n_draws; ++n) {
    RateEstimates theta;
    theta.p1A = truncated_normal_01(rng, stats.mean.p1A, stats.sigma.p1A);
    theta.p1B = truncated_normal_01(rng, stats.mean.p1B, stats.sigma.p1B);
    theta.p2A = truncated_normal_01(rng, stats.mean.p2A, stats.sigma.p2A);
    theta.p2B = truncated_normal_01(rng, stats.mean.p2B, stats.sigma.p2B);
    theta.pDCA = truncated_normal_01(rng, stats.mean.pDCA, stats.sigma.pDCA);
    theta.pDCB = truncated_normal_01(rng, stats.mean.pDCB, stats.sigma.pDCB);
    double lambda_e = p_coinc_nonzero(theta) * stats.n_attempt;
    double lambda_m = p_coinc_zero(theta, ip) * stats.n_attempt;
    std::poisson_distribution<long long> pe(lambda_e);
    std::poisson_distribution<long long> pm(lambda_m);
    for (int k = 0; k < k_realizations; ++k) {
      double ce = lambda_e > 0.0 ? static_cast<double>(pe(rng)) : 0.0;
      double cm = lambda_m > 0.0 ? static_cast<double>(pm(rng)) : 0.0;
      fn(ce, cm);
    }
  }
}

} // namespace detail

inline std::vector<OutcomePair> simulate_outcomes(const ParameterStats& stats, double eta,
                                                  int n_draws, int k_realizations,
                                                  std::uint64_t seed) {
  stats.validate();
  InterferenceParams{eta, 0.5, 0.5}.validate();
  if (n_draws < 1 || k_realizations < 1) throw ConfigError("draws and realizations must be >= 1");
  std::vector<OutcomePair> out;
  out.reserve(static_cast<std::size_t>(n_draws) * static_cast<std::size_t>(k_realizations));
  std::mt19937_64 rng(seed);
  detail::for_each_outcome(stats, eta, n_draws, k_realizations, rng,
                           [&](double ce, double cm) { out.push_back({ce, cm}); });
  return out;
}

// Fills map/lo/hi on the density. The interval holds 34% of the mass on each
// side of the MAP; mass that cannot be placed beyond a boundary moves to the
// other side.
inline void map_and_ci(PosteriorDensity& pdf) {
  const std::size_t n = pdf.eta.size();
  if (n == 0 || pdf.density.size() != n) throw AnalysisError("empty posterior density");

  std::size_t imax = 0;
  for (std::size_t i = 1; i < n; ++i) {
    if (pdf.density[i] > pdf.density[imax]) imax = i;
  }
  pdf.multimodal = false;
  for (std::size_t i = 0; i < n; ++i) {
    if (i != imax && pdf.density[i] == pdf.density[imax]) {
      pdf.multimodal = true;
      break;
    }
  }
  pdf.map = pdf.eta[imax];

  auto sweep = [&](std::size_t from, int step, double target, std::size_t& edge) {
    // Accumulates mass outward from the MAP; returns the unplaced deficit.
    double acc = 0.0;
    edge = imax;
    std::size_t i = from;
    while (acc < target) {
      // Drop the final cell when excluding it lands closer to the target,
      // so the interval mass is unbiased rather than always rounded up.
      if (edge != imax && target - acc < 0.5 * pdf.density[i]) break;
      acc += pdf.density[i];
      edge = i;
      if ((step < 0 && i == 0) || (step > 0 && i + 1 == n)) break;
      i = static_cast<std::size_t>(static_cast<std::ptrdiff_t>(i) + step);
    }
    return std::max(0.0, target - acc);
  };

  const double side = std::max(0.0, 0.5 * (0.68 - pdf.density[imax]));
  std::size_t lo_i = imax, hi_i = imax;
  double deficit_hi = (imax + 1 < n) ? sweep(imax + 1, +1, side, hi_i) : side;
  double deficit_lo = (imax > 0) ? sweep(imax - 1, -1, side + deficit_hi, lo_i) : side + deficit_hi;
  if (deficit_lo > 0.0 && hi_i + 1 < n) {
    sweep(imax + 1, +1, side + deficit_lo, hi_i);
  }
  pdf.lo = pdf.eta[lo_i];
  pdf.hi = pdf.eta[hi_i];
}

inline PosteriorDensity posterior(const ParameterStats& stats, const Measurement& m,
                                  const InferenceSettings& s, std::uint64_t seed) {
  stats.validate();
  m.validate();
  s.validate();
  double t_e = s.t_e >= 0.0 ? s.t_e : std::max(1.0, m.c_e_sigma);

  PosteriorDensity pdf;
  auto n = static_cast<std::size_t>(s.grid_points);
  pdf.eta.resize(n);
  pdf.density.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    pdf.eta[i] = static_cast<double>(i) / static_cast<double>(n - 1);
  }

  parallel_for(n, s.threads, [&](std::size_t i) {
    std::mt19937_64 rng(substream_seed(seed, i, kTagInference));
    std::uint64_t matches = 0;
    detail::for_each_outcome(stats, pdf.eta[i], s.draws, s.realizations, rng,
                             [&](double ce, double cm) {
                               if (std::abs(cm - m.c_m) <= s.t_m && std::abs(ce - m.c_e) <= t_e) {
                                 ++matches;
                               }
                             });
    pdf.density[i] = static_cast<double>(matches) /
                     (static_cast<double>(s.draws) * static_cast<double>(s.realizations));
  });

  double total = 0.0;
  for (double d : pdf.density) total += d;
  if (total <= 0.0) {
    throw AnalysisError(
        "insufficient samples: no simulated outcome matched the measurement at any eta; "
        "increase the match tolerance or the number of draws");
  }
  for (double& d : pdf.density) d /= total;
  map_and_ci(pdf);
  return pdf;
}

} // namespace homsim
