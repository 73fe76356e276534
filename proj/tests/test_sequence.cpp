#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

#include "homsim/common.hpp"
#include "homsim/sequence.hpp"

using namespace homsim;

namespace {

std::vector<Tick> channel_times(const TagStream& s, Channel ch) {
  std::vector<Tick> out;
  for (const TagEvent& e : s.events) {
    if (e.channel == ch) out.push_back(e.timestamp);
  }
  return out;
}

} // namespace

TEST_CASE("config validation names the violated budget") {
  SequenceConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  CHECK(cfg.block_duration_us() == doctest::Approx(3.5));
  CHECK(cfg.gen_offset_us() == doctest::Approx(47.5));
  CHECK(cfg.blocks_per_ready() == 78);

  SequenceConfig bad = cfg;
  bad.blocks_per_heartbeat = 60; // 47.5 + 210 > 200
  try {
    bad.validate();
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("heartbeat") != std::string::npos);
  }

  bad = cfg;
  bad.tag_resolution_ps = 100.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.cr_pass_rate = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("schedule for one ready cycle") {
  SequenceConfig cfg;
  Schedule s = build_schedule(cfg, 1);
  CHECK(s.heartbeat_times_us.size() == 2);
  CHECK(s.marker_times_us.size() == 78);
  CHECK(s.excitation_times_us.size() == 780);

  CHECK(s.marker_times_us[0] == doctest::Approx(47.5));
  CHECK(s.marker_times_us[1] == doctest::Approx(51.0));
  CHECK(s.excitation_times_us[0] == doctest::Approx(49.0));
  CHECK(s.excitation_times_us[1] == doctest::Approx(49.2));
  // Last block of the first heartbeat ends inside the period.
  CHECK(s.marker_times_us[38] + cfg.block_duration_us() <= 200.0 + 1e-9);
  // Second heartbeat repeats the pattern with a 200 us offset.
  CHECK(s.marker_times_us[39] == doctest::Approx(247.5));
}

TEST_CASE("charge-resonance wait statistics") {
  SequenceConfig cfg;
  SplitMix64 rng(123);
  double sum1 = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    CrWaitResult r = simulate_cr_wait(cfg, rng, 0.0);
    sum1 += r.node1_duration_us;
    CHECK(r.start_heartbeat >= 1);
    // The agreed heartbeat strictly follows both ready times plus the
    // communication slot.
    double ready = std::max(r.node1_duration_us, r.node2_duration_us) + cfg.comm_slot_us;
    CHECK(static_cast<double>(r.start_heartbeat) * cfg.heartbeat_period_us > ready);
    CHECK((static_cast<double>(r.start_heartbeat) - 1.0) * cfg.heartbeat_period_us <= ready);
  }
  // Geometric attempts times the attempt duration average to the mean duration.
  double mean = sum1 / n;
  double se = cfg.cr_mean_duration_us / std::sqrt(static_cast<double>(n));
  CHECK(std::abs(mean - cfg.cr_mean_duration_us) < 4.0 * se);

  SequenceConfig instant = cfg;
  instant.cr_pass_rate = 1.0;
  SplitMix64 rng2(5);
  CrWaitResult r = simulate_cr_wait(instant, rng2, 0.0);
  CHECK(r.node1_duration_us == doctest::Approx(instant.cr_mean_duration_us));
}

TEST_CASE("simulated stream structure") {
  SequenceConfig cfg;
  EmitterDetectorModel model;
  model.rates = RateEstimates{2e-3, 2e-3, 1.5e-3, 1.5e-3, 0.0, 0.0};
  const std::uint64_t n_blocks = 5000;
  TagStream s = simulate_run(cfg, model, 0.0, 99, n_blocks);
  CHECK(s.n_blocks == n_blocks);

  auto m1 = channel_times(s, Channel::MarkerNode1);
  auto m2 = channel_times(s, Channel::MarkerNode2);
  REQUIRE(m1.size() == n_blocks);
  REQUIRE(m2 == m1);

  // Markers sit on the schedule grid of their heartbeat.
  Tick hb_ticks = ns_to_ticks(cfg.heartbeat_period_us * 1e3);
  Tick offset_ticks = ns_to_ticks(cfg.gen_offset_us() * 1e3);
  Tick block_ticks = ns_to_ticks(cfg.block_duration_us() * 1e3);
  for (Tick m : m1) {
    Tick in_hb = m % hb_ticks;
    CHECK((in_hb - offset_ticks) % block_ticks == 0);
  }

  auto hb = channel_times(s, Channel::Heartbeat);
  REQUIRE(!hb.empty());
  for (std::size_t i = 0; i < hb.size(); ++i) {
    CHECK(hb[i] == static_cast<Tick>(i) * hb_ticks);
  }
  CHECK(hb.back() >= m1.back() - m1.back() % hb_ticks);

  CHECK(std::is_sorted(s.events.begin(), s.events.end(), [](auto& a, auto& b) {
    return a.timestamp < b.timestamp;
  }));
}

TEST_CASE("stream is deterministic in the seed") {
  SequenceConfig cfg;
  EmitterDetectorModel model;
  model.rates = RateEstimates{2e-3, 2e-3, 1.5e-3, 1.5e-3, 0.0, 0.0};
  TagStream a = simulate_run(cfg, model, 0.5, 7, 2000);
  TagStream b = simulate_run(cfg, model, 0.5, 7, 2000);
  REQUIRE(a.events.size() == b.events.size());
  for (std::size_t i = 0; i < a.events.size(); ++i) {
    CHECK(a.events[i].timestamp == b.events[i].timestamp);
    CHECK(a.events[i].channel == b.events[i].channel);
  }
  TagStream c = simulate_run(cfg, model, 0.5, 8, 2000);
  bool differs = c.events.size() != a.events.size();
  for (std::size_t i = 0; !differs && i < a.events.size(); ++i) {
    differs = a.events[i].timestamp != c.events[i].timestamp ||
              a.events[i].channel != c.events[i].channel;
  }
  CHECK(differs);
}

TEST_CASE("full indistinguishability and no background: zero same-bin cross coincidences") {
  SequenceConfig cfg;
  EmitterDetectorModel model;
  model.dark_hz = model.blinding_hz = model.spdc_hz = 0.0;
  model.rates = RateEstimates{4e-3, 4e-3, 3e-3, 3e-3, 0.0, 0.0};
  TagStream s = simulate_run(cfg, model, 1.0, 31, 20000);

  // Group detector events per block bin and look for same-bin A+B pairs.
  Tick spacing = ns_to_ticks(cfg.pulse_spacing_ns);
  Tick reset = ns_to_ticks(cfg.spin_reset_us * 1e3);
  std::map<Tick, std::array<int, 2>> bins;
  Tick block_start = 0;
  for (const TagEvent& e : s.events) {
    if (e.channel == Channel::MarkerNode1) block_start = e.timestamp;
    if (e.channel == Channel::DetA || e.channel == Channel::DetB) {
      Tick bin = (e.timestamp - block_start - reset) / spacing;
      bins[block_start + bin * spacing][static_cast<std::size_t>(e.channel)] += 1;
    }
  }
  int same_bin_pairs = 0;
  for (auto& [key, counts] : bins) {
    if (counts[0] > 0 && counts[1] > 0) ++same_bin_pairs;
  }
  CHECK(same_bin_pairs == 0);
}

TEST_CASE("singles rates and arrival-time law") {
  SequenceConfig cfg;
  EmitterDetectorModel model;
  model.dark_hz = model.blinding_hz = model.spdc_hz = 0.0;
  model.rates = RateEstimates{3e-3, 2e-3, 2e-3, 3e-3, 0.0, 0.0};
  const std::uint64_t n_blocks = 100000;
  TagStream s = simulate_run(cfg, model, 0.0, 17, n_blocks);
  double n_exc = static_cast<double>(n_blocks) * 10.0;

  auto det_a = channel_times(s, Channel::DetA);
  auto det_b = channel_times(s, Channel::DetB);
  double pa = model.rates.p1A + model.rates.p2A;
  double pb = model.rates.p1B + model.rates.p2B;
  CHECK(std::abs(det_a.size() - pa * n_exc) < 4.0 * std::sqrt(pa * n_exc));
  CHECK(std::abs(det_b.size() - pb * n_exc) < 4.0 * std::sqrt(pb * n_exc));

  // Kolmogorov-Smirnov against the truncated exponential, using in-bin offsets.
  Tick spacing = ns_to_ticks(cfg.pulse_spacing_ns);
  Tick reset = ns_to_ticks(cfg.spin_reset_us * 1e3);
  std::vector<double> rel;
  Tick block_start = 0;
  for (const TagEvent& e : s.events) {
    if (e.channel == Channel::MarkerNode1) block_start = e.timestamp;
    if (e.channel == Channel::DetA) {
      rel.push_back(ticks_to_ns((e.timestamp - block_start - reset) % spacing));
    }
  }
  std::sort(rel.begin(), rel.end());
  double trunc = -std::expm1(-cfg.pulse_spacing_ns / model.tau_ns);
  double d_stat = 0.0;
  for (std::size_t i = 0; i < rel.size(); ++i) {
    double cdf = -std::expm1(-rel[i] / model.tau_ns) / trunc;
    double emp_hi = static_cast<double>(i + 1) / static_cast<double>(rel.size());
    double emp_lo = static_cast<double>(i) / static_cast<double>(rel.size());
    d_stat = std::max({d_stat, std::abs(cdf - emp_hi), std::abs(cdf - emp_lo)});
  }
  // 4-sigma-ish KS band plus the 80 ps quantization bias.
  CHECK(d_stat < 1.95 / std::sqrt(static_cast<double>(rel.size())) + 0.04 / model.tau_ns);
}

TEST_CASE("dead time is enforced per detector") {
  SequenceConfig cfg;
  EmitterDetectorModel model;
  model.rates = RateEstimates{5e-3, 5e-3, 5e-3, 5e-3, 0.0, 0.0};
  model.spdc_hz = 5000.0; // strong background to provoke close pairs
  TagStream s = simulate_run(cfg, model, 0.0, 42, 20000);
  Tick dead = ns_to_ticks(cfg.dead_time_ns);
  for (Channel ch : {Channel::DetA, Channel::DetB}) {
    auto t = channel_times(s, ch);
    for (std::size_t i = 1; i < t.size(); ++i) {
      CHECK(t[i] - t[i - 1] >= dead);
    }
  }
}

TEST_CASE("burst injection places dense bursts inside blocks") {
  SequenceConfig cfg;
  EmitterDetectorModel model;
  model.rates = RateEstimates{2e-3, 2e-3, 1.5e-3, 1.5e-3, 0.0, 0.0};
  TagStream clean = simulate_run(cfg, model, 0.0, 57, 5000);

  BurstSpec spec;
  spec.fixed_count = 40;
  TagStream noisy = inject_bursts(clean, spec, cfg, 57);
  REQUIRE(noisy.burst_times.size() == 40);
  CHECK(noisy.events.size() == clean.events.size() + 40 * 2 * 3);

  auto markers = channel_times(clean, Channel::MarkerNode1);
  Tick reset = ns_to_ticks(cfg.spin_reset_us * 1e3);
  Tick live = ns_to_ticks(cfg.pulses_per_block * cfg.pulse_spacing_ns);
  for (Tick t0 : noisy.burst_times) {
    // Every burst lies inside some block's excitation span.
    auto it = std::upper_bound(markers.begin(), markers.end(), t0);
    REQUIRE(it != markers.begin());
    Tick m = *(--it);
    CHECK(t0 >= m + reset);
    CHECK(t0 + ns_to_ticks(spec.span_ns) <= m + reset + live);
  }

  BurstSpec bad;
  bad.multiplicity = 2;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = BurstSpec{};
  bad.span_ns = 200.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}
