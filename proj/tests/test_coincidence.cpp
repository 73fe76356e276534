#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <cmath>

#include "homsim/coincidence.hpp"
#include "homsim/common.hpp"

using namespace homsim;

namespace {

// Window length [ns], p1, p2 [1e-5], pDCA, pDCB [1e-6], C_M, C_dist.
struct RefRow {
  double window;
  double p1, p2, pdca, pdcb;
  double c_m, c_dist;
};

constexpr std::array<RefRow, 13> kRefRows{{
    {6, 2.1, 1.4, 0.84, 0.84, 13, 92.37},
    {8, 2.7, 1.8, 1.12, 1.12, 19, 154.7},
    {10, 3.2, 2.1, 1.40, 1.40, 30, 221.7},
    {12, 3.7, 2.4, 1.67, 1.68, 37, 297.9},
    {14, 4.1, 2.7, 1.95, 1.96, 44, 367.6},
    {16, 4.4, 2.9, 2.23, 2.24, 53, 436.9},
    {18, 4.7, 3.1, 2.51, 2.52, 74, 496.5},
    {20, 5.0, 3.2, 2.8, 2.79, 93, 558.9},
    {22, 5.2, 3.4, 3.1, 3.1, 103, 611.1},
    {24, 5.4, 3.5, 3.3, 3.4, 118, 662.9},
    {26, 5.5, 3.6, 3.6, 3.6, 133, 708.5},
    {28, 5.7, 3.7, 3.9, 3.9, 148, 749.5},
    {30, 5.8, 3.7, 4.2, 4.2, 159, 785.7},
}};

RateEstimates row_rates(const RefRow& r) {
  return RateEstimates::symmetric_split(r.p1 * 1e-5, r.p2 * 1e-5, r.pdca * 1e-6, r.pdcb * 1e-6);
}

} // namespace

TEST_CASE("scaling factor counts bin pairs per block") {
  CHECK(scaling_factor(0) == 10);
  CHECK(scaling_factor(1) == 9);
  CHECK(scaling_factor(-1) == 9);
  CHECK(scaling_factor(9) == 1);
  CHECK(scaling_factor(-9) == 1);
  CHECK_THROWS_AS((void)scaling_factor(10), std::domain_error);
  CHECK_THROWS_AS((void)scaling_factor(-10), std::domain_error);
}

TEST_CASE("symmetric split and validation") {
  auto r = RateEstimates::symmetric_split(4e-5, 2e-5, 1e-6, 2e-6);
  CHECK(r.p1A == doctest::Approx(2e-5));
  CHECK(r.p1B == doctest::Approx(2e-5));
  CHECK(r.p2A == doctest::Approx(1e-5));
  CHECK(r.p2B == doctest::Approx(1e-5));
  CHECK(r.pDCA == doctest::Approx(1e-6));
  CHECK(r.pDCB == doctest::Approx(2e-6));
  CHECK(r.realistic());

  RateEstimates bad = r;
  bad.p1A = -1e-6;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad.p1A = 1.5;
  CHECK_THROWS_AS(bad.validate(), ConfigError);

  RateEstimates large = r;
  large.p1A = 0.02;
  CHECK_NOTHROW(large.validate());
  CHECK_FALSE(large.realistic());
}

TEST_CASE("coincidence probability terms match the closed forms") {
  RateEstimates r{2e-5, 3e-5, 1.5e-5, 1e-5, 2e-6, 3e-6};
  CHECK(p_coinc_nvnv(r) ==
        doctest::Approx(2e-5 * 1e-5 + 3e-5 * 1.5e-5 + 2e-5 * 3e-5 + 1.5e-5 * 1e-5).epsilon(1e-12));
  CHECK(p_coinc_nvdc(r) ==
        doctest::Approx(2e-6 * (3e-5 + 1e-5) + 3e-6 * (2e-5 + 1.5e-5)).epsilon(1e-12));
  CHECK(p_coinc_dcdc(r) == doctest::Approx(2e-6 * 3e-6).epsilon(1e-12));
  CHECK(p_coinc_nonzero(r) ==
        doctest::Approx(p_coinc_nvnv(r) + p_coinc_nvdc(r) + p_coinc_dcdc(r)).epsilon(1e-12));
}

TEST_CASE("zero-bin probability: suppression and same-emitter exclusion") {
  RateEstimates r{2e-5, 3e-5, 1.5e-5, 1e-5, 2e-6, 3e-6};
  double cross = r.p1A * r.p2B + r.p1B * r.p2A;

  SUBCASE("eta=0 keeps the full cross term but no same-emitter pairs") {
    double p0 = p_coinc_zero(r, {0.0, 0.5, 0.5});
    CHECK(p0 == doctest::Approx(cross + p_coinc_nvdc(r) + p_coinc_dcdc(r)).epsilon(1e-12));
    CHECK(p_coinc_nonzero(r) - p0 == doctest::Approx(r.p1A * r.p1B + r.p2A * r.p2B).epsilon(1e-12));
  }
  SUBCASE("eta=1 leaves only background coincidences") {
    double p0 = p_coinc_zero(r, {1.0, 0.5, 0.5});
    CHECK(p0 == doctest::Approx(p_coinc_nvdc(r) + p_coinc_dcdc(r)).epsilon(1e-12));
  }
  SUBCASE("monotone decreasing in eta") {
    double prev = p_coinc_zero(r, {0.0, 0.5, 0.5});
    for (double eta : {0.2, 0.4, 0.6, 0.8, 1.0}) {
      double p0 = p_coinc_zero(r, {eta, 0.5, 0.5});
      CHECK(p0 < prev);
      prev = p0;
    }
  }
}

TEST_CASE("expected histogram shape") {
  RateEstimates r = row_rates(kRefRows[7]);
  InterferenceParams ip{0.9, 0.5, 0.5};
  double n_blocks = 1e7;
  ExpectedHistogram h = expected_histogram(r, ip, n_blocks);

  double p_nz = p_coinc_nonzero(r);
  for (int d = 1; d <= kMaxBinDifference; ++d) {
    CHECK(h.at(d) == doctest::Approx(scaling_factor(d) * p_nz * n_blocks).epsilon(1e-12));
    CHECK(h.at(-d) == doctest::Approx(h.at(d)).epsilon(1e-12));
  }
  CHECK(h.at(0) == doctest::Approx(10.0 * p_coinc_zero(r, ip) * n_blocks).epsilon(1e-12));
  CHECK(h.at(0) < h.at(1));
  CHECK_THROWS_AS(expected_histogram(r, ip, 0.0), ConfigError);
}

TEST_CASE("visibility arithmetic for every reference row") {
  for (const RefRow& row : kRefRows) {
    double v = visibility(row.c_m, row.c_dist);
    CHECK(v == doctest::Approx(1.0 - row.c_m / row.c_dist).epsilon(1e-15));
    CHECK(v > 0.0);
    CHECK(v < 1.0);
  }
  // 30 ns row and the headline number.
  double v30 = visibility(kRefRows[12].c_m, kRefRows[12].c_dist);
  CHECK(v30 == doctest::Approx(0.7976).epsilon(2e-4));
  CHECK(std::abs(v30 - 0.79) < 0.03);
  // Non-increasing from the 16 ns row onward.
  for (std::size_t i = 6; i < kRefRows.size(); ++i) {
    CHECK(visibility(kRefRows[i].c_m, kRefRows[i].c_dist) <=
          visibility(kRefRows[i - 1].c_m, kRefRows[i - 1].c_dist));
  }
}

TEST_CASE("extrapolation correction removes the same-emitter contribution") {
  RateEstimates r = row_rates(kRefRows[7]);
  double n_attempt = 2.82226e11;
  double same = (r.p1A * r.p1B + r.p2A * r.p2B) * n_attempt;
  CHECK(same == doctest::Approx(248.6).epsilon(1e-3));

  double c_dist = correct_extrapolation(558.9 + same, r, n_attempt);
  CHECK(c_dist == doctest::Approx(558.9).epsilon(1e-9));

  VisibilityResult vr = extract_visibility(93.0, 558.9 + same, r, n_attempt);
  CHECK(vr.c_dist == doctest::Approx(558.9).epsilon(1e-9));
  CHECK(vr.v == doctest::Approx(1.0 - 93.0 / 558.9).epsilon(1e-9));

  CHECK_THROWS_AS((void)correct_extrapolation(-1.0, r, n_attempt), ConfigError);
  CHECK_THROWS_AS((void)correct_extrapolation(same * 0.5, r, n_attempt), AnalysisError);
  CHECK_THROWS_AS((void)visibility(10.0, 0.0), std::domain_error);
}

TEST_CASE("beamsplitter imbalance factor") {
  CHECK(beamsplitter_factor(0.5, 0.5) == doctest::Approx(1.0).epsilon(1e-15));
  double f = beamsplitter_factor(0.496, 0.504);
  CHECK(1.0 - f == doctest::Approx(1.2799e-4).epsilon(1e-4));
  CHECK(1.0 - f < 1.28e-4);
  CHECK(beamsplitter_factor(0.6, 0.4) < 1.0);
  CHECK_THROWS_AS((void)beamsplitter_factor(0.0, 0.0), std::domain_error);
}

TEST_CASE("Bernoulli Monte-Carlo oracle for the pairwise coincidence formulas") {
  // Scaled-up probabilities keep the MC cheap; the closed forms are second
  // order, so the relative model error is O(p) ~ 0.5%.
  RateEstimates r{2e-3, 2e-3, 1.5e-3, 1.5e-3, 2e-4, 2e-4};
  const std::uint64_t n_rounds = 100'000'000;
  SplitMix64 rng(20240817);

  const double pa = r.p1A + r.p2A + r.pDCA;
  const double pb = r.p1B + r.p2B + r.pDCB;

  SUBCASE("nonzero-difference coincidence probability") {
    // Two independent bins: detector A fires in one, detector B in the other.
    std::uint64_t hits = 0;
    for (std::uint64_t i = 0; i < n_rounds; ++i) {
      bool a = rng.uniform() < pa;
      bool b = rng.uniform() < pb;
      if (a && b) ++hits;
    }
    double p_mc = static_cast<double>(hits) / static_cast<double>(n_rounds);
    double p_model = p_coinc_nonzero(r);
    double sigma = std::sqrt(p_model / static_cast<double>(n_rounds));
    // 4 sigma statistical band plus the second-order truncation error.
    CHECK(std::abs(p_mc - p_model) < 4.0 * sigma + 0.01 * p_model);
  }

  SUBCASE("zero-bin coincidence probability with thinning") {
    const double eta = 0.9;
    std::uint64_t hits = 0;
    for (std::uint64_t i = 0; i < n_rounds; ++i) {
      double u1 = rng.uniform();
      int n1 = u1 < r.p1A ? 0 : (u1 < r.p1A + r.p1B ? 1 : -1); // detector index or none
      double u2 = rng.uniform();
      int n2 = u2 < r.p2A ? 0 : (u2 < r.p2A + r.p2B ? 1 : -1);
      if (n1 >= 0 && n2 >= 0 && n1 != n2 && rng.uniform() < eta) {
        if (rng.uniform() < 0.5) {
          n1 = -1;
        } else {
          n2 = -1;
        }
      }
      bool a = n1 == 0 || n2 == 0 || rng.uniform() < r.pDCA;
      bool b = n1 == 1 || n2 == 1 || rng.uniform() < r.pDCB;
      if (a && b) ++hits;
    }
    double p_mc = static_cast<double>(hits) / static_cast<double>(n_rounds);
    double p_model = p_coinc_zero(r, {eta, 0.5, 0.5});
    double sigma = std::sqrt(p_model / static_cast<double>(n_rounds));
    CHECK(std::abs(p_mc - p_model) < 4.0 * sigma + 0.01 * p_model);
  }
}

TEST_CASE("interference parameter validation") {
  CHECK_THROWS_AS((InterferenceParams{-0.1, 0.5, 0.5}).validate(), ConfigError);
  CHECK_THROWS_AS((InterferenceParams{1.1, 0.5, 0.5}).validate(), ConfigError);
  CHECK_THROWS_AS((InterferenceParams{0.5, 0.0, 0.5}).validate(), ConfigError);
  CHECK_THROWS_AS((InterferenceParams{0.5, 0.7, 0.7}).validate(), ConfigError);
  CHECK_NOTHROW((InterferenceParams{0.5, 0.496, 0.504}).validate());
}
