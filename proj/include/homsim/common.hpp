#pragma once

#include <cstdint>
#include <cmath>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace homsim {

// Time tags are stored in 80 ps ticks.
inline constexpr double kTickPs = 80.0;
inline constexpr double kTicksPerNs = 1000.0 / kTickPs; // 12.5
inline constexpr double kNsPerTick = kTickPs / 1000.0;  // 0.08

using Tick = std::uint64_t;

inline Tick ns_to_ticks(double t_ns) {
  return static_cast<Tick>(std::llround(t_ns * kTicksPerNs));
}
inline double ticks_to_ns(std::int64_t ticks) { return static_cast<double>(ticks) * kNsPerTick; }

// Error categories, mapped to CLI exit codes (config=2, io=3, analysis=4).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct AnalysisError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// SplitMix64: counter-based generator, cheap to seed per block index so that
// streams are reproducible independent of worker count.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  // Uniform in (0, 1]; never 0 so log() is safe.
  double uniform() {
    return (static_cast<double>(next() >> 11) + 1.0) * 0x1.0p-53;
  }

  double exponential(double mean) { return -mean * std::log(uniform()); }

  // Exponential with given mean, truncated to [0, cap), via inverse CDF.
  double truncated_exponential(double mean, double cap) {
    double c = -std::expm1(-cap / mean); // P(X < cap)
    double u = uniform() * c;
    return -mean * std::log1p(-u);
  }

  // Inversion sampling; intended for small lambda.
  std::uint32_t poisson_small(double lambda) {
    double p = std::exp(-lambda);
    double cdf = p;
    double u = uniform();
    std::uint32_t k = 0;
    while (u > cdf && k < 1000) {
      ++k;
      p *= lambda / k;
      cdf += p;
    }
    return k;
  }

 private:
  std::uint64_t state_;
};

// Derives an independent seed for substream `index` of stream class `tag`.
inline std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t index, std::uint64_t tag) {
  SplitMix64 g(seed ^ (tag * 0xD1B54A32D192ED03ull) ^ (index * 0x8CB92BA72F3D8DD7ull));
  return g.next();
}

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ull;
  }
  return h;
}

// Static partition of [0, n) over `threads` workers. Results must be written to
// preassigned slots so the outcome does not depend on scheduling.
template <class F>
void parallel_for(std::size_t n, unsigned threads, F&& body) {
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  if (threads > n) threads = static_cast<unsigned>(n);
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (unsigned w = 0; w < threads; ++w) {
    pool.emplace_back([w, threads, n, &body] {
      for (std::size_t i = w; i < n; i += threads) body(i);
    });
  }
  for (auto& t : pool) t.join();
}

// Adaptive Simpson quadrature.
namespace detail {
template <class F>
double simpson_step(F& f, double a, double fa, double b, double fb, double m, double fm,
                    double whole, double tol, int depth) {
  double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  double flm = f(lm), frm = f(rm);
  double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  return simpson_step(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1) +
         simpson_step(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1);
}
} // namespace detail

template <class F>
double integrate(F f, double a, double b, double tol = 1e-10, int max_depth = 40) {
  if (a == b) return 0.0;
  double fa = f(a), fb = f(b), m = 0.5 * (a + b), fm = f(m);
  double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return detail::simpson_step(f, a, fa, b, fb, m, fm, whole, tol, max_depth);
}

} // namespace homsim
