#pragma once

// Discrete-event generator of synthetic time-tagged detector streams following
// the heartbeat-synchronized four-stage sequence: charge-resonance gating,
// cross-node ready agreement, a frequency-lock slot, and repeated blocks of
// spin reset plus pulsed excitation. Produces a single merged logical stream
// with marker channels.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "homsim/coincidence.hpp"
#include "homsim/common.hpp"

namespace homsim {

struct SequenceConfig {
  double heartbeat_period_us = 200.0;
  double lock_slot_us = 2.5;
  double photon_gen_delay_us = 45.0;
  int blocks_per_heartbeat = 39;
  int pulses_per_block = 10;
  double spin_reset_us = 1.5;
  double pulse_spacing_ns = 200.0; // also the detection-bin length
  int heartbeats_per_ready = 2;
  double cr_pass_rate = 0.075;
  double cr_mean_duration_us = 1500.0;
  double comm_slot_us = 200.0;
  double pulse_width_ns = 2.0;
  double tag_resolution_ps = 80.0;
  double dead_time_ns = 20.0;

  double block_duration_us() const {
    return spin_reset_us + pulses_per_block * pulse_spacing_ns * 1e-3;
  }
  double gen_offset_us() const { return lock_slot_us + photon_gen_delay_us; }
  int blocks_per_ready() const { return blocks_per_heartbeat * heartbeats_per_ready; }

  void validate() const {
    if (!(heartbeat_period_us > 0 && lock_slot_us > 0 && photon_gen_delay_us > 0 &&
          spin_reset_us > 0 && pulse_spacing_ns > 0 && pulse_width_ns > 0 && dead_time_ns > 0 &&
          comm_slot_us > 0)) {
      throw ConfigError("all sequence durations must be positive");
    }
    if (blocks_per_heartbeat < 1 || pulses_per_block < 1 || heartbeats_per_ready < 1) {
      throw ConfigError("sequence counts must be at least 1");
    }
    if (!(cr_pass_rate > 0.0 && cr_pass_rate <= 1.0)) {
      throw ConfigError("cr_pass_rate must be in (0,1]");
    }
    if (tag_resolution_ps != kTickPs) {
      throw ConfigError("only 80 ps tag resolution is supported");
    }
    double budget = gen_offset_us() + blocks_per_heartbeat * block_duration_us();
    if (budget > heartbeat_period_us) {
      throw ConfigError("schedule does not fit the heartbeat period: lock slot + generation "
                        "delay + blocks need " +
                        std::to_string(budget) + " us of " +
                        std::to_string(heartbeat_period_us) + " us");
    }
  }
};

struct BurstSpec {
  double rate_hz = 0.0;
  int multiplicity = 3; // events per detector per burst
  double span_ns = 160.0;
  int fixed_count = -1; // >= 0 forces exactly this many bursts

  void validate() const {
    if (multiplicity <= 2) throw ConfigError("burst multiplicity must exceed 2");
    if (!(span_ns > 0.0 && span_ns <= 160.0)) throw ConfigError("burst span must be in (0, 160] ns");
    if (rate_hz < 0.0) throw ConfigError("burst rate must be nonnegative");
  }
};

struct EmitterDetectorModel {
  double tau_ns = 12.5;
  RateEstimates rates;      // p1A..p2B used; background is given in Hz below
  double dark_hz = 5.0;     // per detector
  double blinding_hz = 35.0;
  double spdc_hz = 150.0;
  double pulse_leak_prob = 0.0; // per excitation per detector
  BurstSpec burst;

  double background_hz() const { return dark_hz + blinding_hz + spdc_hz; }

  void validate() const {
    rates.validate();
    if (dark_hz < 0 || blinding_hz < 0 || spdc_hz < 0) {
      throw ConfigError("background rates must be nonnegative");
    }
    if (!(pulse_leak_prob >= 0.0 && pulse_leak_prob <= 1.0)) {
      throw ConfigError("pulse_leak_prob must be in [0,1]");
    }
    if (!(tau_ns > 0.0)) throw ConfigError("tau must be positive");
  }
};

enum class Channel : std::uint8_t {
  DetA = 0,
  DetB = 1,
  Heartbeat = 2,
  MarkerNode1 = 3,
  MarkerNode2 = 4,
};

struct TagEvent {
  Tick timestamp = 0; // 80 ps ticks
  Channel channel = Channel::DetA;
  std::uint8_t multiplicity = 1;
};

struct TagStream {
  std::vector<TagEvent> events; // time-ordered
  std::uint64_t seed = 0;
  std::uint64_t n_blocks = 0;
  double tick_ps = kTickPs;
  std::vector<Tick> burst_times; // metadata for injected bursts
};

// ---------------------------------------------------------------------------
// Schedule

struct Schedule {
  std::vector<double> excitation_times_us; // pulse peaks
  std::vector<double> marker_times_us;     // block starts
  std::vector<double> heartbeat_times_us;
};

// Deterministic zero-wait schedule: ready cycles run back to back, each
// occupying heartbeats_per_ready heartbeat periods.
inline Schedule build_schedule(const SequenceConfig& cfg, std::uint64_t n_ready_cycles) {
  cfg.validate();
  Schedule s;
  double hb = cfg.heartbeat_period_us;
  std::uint64_t total_hb = n_ready_cycles * static_cast<std::uint64_t>(cfg.heartbeats_per_ready);
  for (std::uint64_t h = 0; h < total_hb; ++h) {
    double hb_start = static_cast<double>(h) * hb;
    s.heartbeat_times_us.push_back(hb_start);
    for (int b = 0; b < cfg.blocks_per_heartbeat; ++b) {
      double block_start = hb_start + cfg.gen_offset_us() + b * cfg.block_duration_us();
      s.marker_times_us.push_back(block_start);
      for (int k = 0; k < cfg.pulses_per_block; ++k) {
        s.excitation_times_us.push_back(block_start + cfg.spin_reset_us +
                                        k * cfg.pulse_spacing_ns * 1e-3);
      }
    }
  }
  return s;
}

// ---------------------------------------------------------------------------
// Charge-resonance gating

struct CrWaitResult {
  double wait_us = 0.0;            // from now until the agreed start heartbeat
  std::uint64_t start_heartbeat = 0; // absolute heartbeat index
  double node1_duration_us = 0.0;
  double node2_duration_us = 0.0;
};

// Per node: geometric number of attempts, each taking
// cr_mean_duration * cr_pass_rate, so the mean total equals cr_mean_duration.
// The agreed start is the first heartbeat strictly after both nodes are ready
// plus one communication slot.
inline CrWaitResult simulate_cr_wait(const SequenceConfig& cfg, SplitMix64& rng,
                                     double now_us = 0.0) {
  double p = cfg.cr_pass_rate;
  auto attempts = [&]() -> double {
    if (p >= 1.0) return 1.0;
    double u = rng.uniform();
    return 1.0 + std::floor(std::log(u) / std::log1p(-p));
  };
  double attempt_us = cfg.cr_mean_duration_us * p;
  CrWaitResult out;
  out.node1_duration_us = attempts() * attempt_us;
  out.node2_duration_us = attempts() * attempt_us;
  double ready_us = now_us + std::max(out.node1_duration_us, out.node2_duration_us) +
                    cfg.comm_slot_us;
  out.start_heartbeat =
      static_cast<std::uint64_t>(std::floor(ready_us / cfg.heartbeat_period_us)) + 1;
  out.wait_us = static_cast<double>(out.start_heartbeat) * cfg.heartbeat_period_us - now_us;
  return out;
}

// ---------------------------------------------------------------------------
// Forward sampler

namespace detail {

inline constexpr std::uint64_t kTagBlock = 1;
inline constexpr std::uint64_t kTagCr = 2;
inline constexpr std::uint64_t kTagHbBg = 3;
inline constexpr std::uint64_t kTagBurst = 4;

enum class NodeOutcome : std::uint8_t { None, DetA, DetB };

inline void add_background(std::vector<TagEvent>& events, SplitMix64& rng, double rate_hz,
                           double start_ns, double span_ns, Channel ch) {
  if (rate_hz <= 0.0 || span_ns <= 0.0) return;
  double lambda = rate_hz * span_ns * 1e-9;
  std::uint32_t n = rng.poisson_small(lambda);
  for (std::uint32_t i = 0; i < n; ++i) {
    events.push_back({ns_to_ticks(start_ns + rng.uniform() * span_ns), ch, 1});
  }
}

} // namespace detail

// Generates the tag stream for n_blocks photon-generation blocks. Each block
// draws from its own counter-based substream, so the stream is identical for
// identical (config, model, eta, seed) regardless of how work is scheduled.
// Interference is applied as same-bin cross-node coincidence thinning by
// (1 - eta), matching the detection-level model the analysis estimates.
inline TagStream simulate_run(const SequenceConfig& cfg, const EmitterDetectorModel& model,
                              double eta, std::uint64_t seed, std::uint64_t n_blocks) {
  cfg.validate();
  model.validate();
  if (!(eta >= 0.0 && eta <= 1.0)) throw ConfigError("eta outside [0,1]");

  TagStream stream;
  stream.seed = seed;
  stream.n_blocks = n_blocks;
  auto& events = stream.events;
  events.reserve(2 * n_blocks + n_blocks / 8 + 1024);

  const int npulse = cfg.pulses_per_block;
  const double hb_us = cfg.heartbeat_period_us;
  const double block_us = cfg.block_duration_us();
  const double spacing_ns = cfg.pulse_spacing_ns;
  const double bg_hz = model.background_hz();
  const RateEstimates& r = model.rates;
  const double p1_any = r.p1A + r.p1B;
  const double p2_any = r.p2A + r.p2B;

  std::vector<detail::NodeOutcome> n1(static_cast<std::size_t>(npulse));
  std::vector<detail::NodeOutcome> n2(static_cast<std::size_t>(npulse));

  std::uint64_t block_index = 0;
  std::uint64_t cycle = 0;
  std::uint64_t heartbeat = 0; // next available heartbeat index
  double now_us = 0.0;
  std::uint64_t last_gen_heartbeat = 0;

  while (block_index < n_blocks) {
    SplitMix64 cr_rng(substream_seed(seed, cycle, detail::kTagCr));
    CrWaitResult cr = simulate_cr_wait(cfg, cr_rng, now_us);
    std::uint64_t gen_hb = std::max(cr.start_heartbeat, heartbeat);

    for (int h = 0; h < cfg.heartbeats_per_ready && block_index < n_blocks; ++h) {
      std::uint64_t hb_index = gen_hb + static_cast<std::uint64_t>(h);
      last_gen_heartbeat = hb_index;
      double hb_start_us = static_cast<double>(hb_index) * hb_us;
      int blocks_here = std::min<std::uint64_t>(cfg.blocks_per_heartbeat, n_blocks - block_index);

      // Background outside the block spans of this heartbeat.
      {
        SplitMix64 hb_rng(substream_seed(seed, hb_index, detail::kTagHbBg));
        double pre_ns = cfg.gen_offset_us() * 1e3;
        double blocks_end_us = cfg.gen_offset_us() + blocks_here * block_us;
        double tail_ns = (hb_us - blocks_end_us) * 1e3;
        detail::add_background(events, hb_rng, bg_hz, hb_start_us * 1e3, pre_ns, Channel::DetA);
        detail::add_background(events, hb_rng, bg_hz, hb_start_us * 1e3, pre_ns, Channel::DetB);
        double tail_start_ns = (hb_start_us + blocks_end_us) * 1e3;
        detail::add_background(events, hb_rng, bg_hz, tail_start_ns, tail_ns, Channel::DetA);
        detail::add_background(events, hb_rng, bg_hz, tail_start_ns, tail_ns, Channel::DetB);
      }

      for (int b = 0; b < blocks_here; ++b, ++block_index) {
        SplitMix64 rng(substream_seed(seed, block_index, detail::kTagBlock));
        double block_start_us = hb_start_us + cfg.gen_offset_us() + b * block_us;
        double block_start_ns = block_start_us * 1e3;
        Tick marker = ns_to_ticks(block_start_ns);
        events.push_back({marker, Channel::MarkerNode1, 1});
        events.push_back({marker, Channel::MarkerNode2, 1});

        double first_pulse_ns = block_start_ns + cfg.spin_reset_us * 1e3;
        for (int k = 0; k < npulse; ++k) {
          double u1 = rng.uniform();
          n1[static_cast<std::size_t>(k)] = u1 < r.p1A   ? detail::NodeOutcome::DetA
                                            : u1 < p1_any ? detail::NodeOutcome::DetB
                                                          : detail::NodeOutcome::None;
          double u2 = rng.uniform();
          n2[static_cast<std::size_t>(k)] = u2 < r.p2A   ? detail::NodeOutcome::DetA
                                            : u2 < p2_any ? detail::NodeOutcome::DetB
                                                          : detail::NodeOutcome::None;
        }

        // Same-bin cross-node coincidence thinning.
        if (eta > 0.0) {
          for (int k = 0; k < npulse; ++k) {
            auto a = n1[static_cast<std::size_t>(k)];
            auto b2 = n2[static_cast<std::size_t>(k)];
            if (a != detail::NodeOutcome::None && b2 != detail::NodeOutcome::None && a != b2) {
              if (rng.uniform() < eta) {
                if (rng.uniform() < 0.5) {
                  n1[static_cast<std::size_t>(k)] = detail::NodeOutcome::None;
                } else {
                  n2[static_cast<std::size_t>(k)] = detail::NodeOutcome::None;
                }
              }
            }
          }
        }

        for (int k = 0; k < npulse; ++k) {
          double pulse_ns = first_pulse_ns + k * spacing_ns;
          for (auto outcome : {n1[static_cast<std::size_t>(k)], n2[static_cast<std::size_t>(k)]}) {
            if (outcome == detail::NodeOutcome::None) continue;
            double arrival = pulse_ns + rng.truncated_exponential(model.tau_ns, spacing_ns);
            Channel ch = outcome == detail::NodeOutcome::DetA ? Channel::DetA : Channel::DetB;
            events.push_back({ns_to_ticks(arrival), ch, 1});
          }
          if (model.pulse_leak_prob > 0.0) {
            for (Channel ch : {Channel::DetA, Channel::DetB}) {
              if (rng.uniform() < model.pulse_leak_prob) {
                double t = pulse_ns + rng.uniform() * cfg.pulse_width_ns;
                events.push_back({ns_to_ticks(t), ch, 1});
              }
            }
          }
        }

        double block_span_ns = block_us * 1e3;
        detail::add_background(events, rng, bg_hz, block_start_ns, block_span_ns, Channel::DetA);
        detail::add_background(events, rng, bg_hz, block_start_ns, block_span_ns, Channel::DetB);
      }
    }

    heartbeat = gen_hb + static_cast<std::uint64_t>(cfg.heartbeats_per_ready);
    now_us = static_cast<double>(heartbeat) * hb_us;
    ++cycle;
  }

  for (std::uint64_t h = 0; h <= last_gen_heartbeat; ++h) {
    events.push_back({ns_to_ticks(static_cast<double>(h) * hb_us * 1e3), Channel::Heartbeat, 1});
  }

  std::sort(events.begin(), events.end(), [](const TagEvent& a, const TagEvent& b) {
    if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
    return static_cast<std::uint8_t>(a.channel) < static_cast<std::uint8_t>(b.channel);
  });

  // Detector dead time.
  const Tick dead_ticks = ns_to_ticks(cfg.dead_time_ns);
  std::array<Tick, 2> last_kept{0, 0};
  std::array<bool, 2> seen{false, false};
  std::size_t out = 0;
  for (std::size_t i = 0; i < events.size(); ++i) {
    const TagEvent& e = events[i];
    if (e.channel == Channel::DetA || e.channel == Channel::DetB) {
      auto d = static_cast<std::size_t>(e.channel);
      if (seen[d] && e.timestamp - last_kept[d] < dead_ticks) continue;
      seen[d] = true;
      last_kept[d] = e.timestamp;
    }
    events[out++] = e;
  }
  events.resize(out);
  return stream;
}

// Inserts simultaneous multi-count bursts on both detectors inside randomly
// chosen generation blocks, deliberately violating the dead time. Burst times
// are recorded in the stream metadata.
inline TagStream inject_bursts(const TagStream& input, const BurstSpec& spec,
                               const SequenceConfig& cfg, std::uint64_t seed) {
  spec.validate();
  cfg.validate();
  TagStream out = input;
  if (spec.rate_hz == 0.0 && spec.fixed_count <= 0) return out;

  std::vector<Tick> markers;
  for (const TagEvent& e : input.events) {
    if (e.channel == Channel::MarkerNode1) markers.push_back(e.timestamp);
  }
  if (markers.empty()) return out;

  double block_live_ns = cfg.pulses_per_block * cfg.pulse_spacing_ns;
  double exposure_s = static_cast<double>(markers.size()) * block_live_ns * 1e-9;
  SplitMix64 rng(substream_seed(seed, 0, detail::kTagBurst));
  std::uint64_t n_bursts = spec.fixed_count >= 0
                               ? static_cast<std::uint64_t>(spec.fixed_count)
                               : rng.poisson_small(spec.rate_hz * exposure_s);

  for (std::uint64_t i = 0; i < n_bursts; ++i) {
    std::size_t m = static_cast<std::size_t>(rng.uniform() * static_cast<double>(markers.size()));
    if (m >= markers.size()) m = markers.size() - 1;
    double offset_ns = cfg.spin_reset_us * 1e3 +
                       rng.uniform() * (block_live_ns - spec.span_ns);
    Tick t0 = markers[m] + ns_to_ticks(offset_ns);
    out.burst_times.push_back(t0);
    for (Channel ch : {Channel::DetA, Channel::DetB}) {
      for (int j = 0; j < spec.multiplicity; ++j) {
        out.events.push_back({t0 + ns_to_ticks(rng.uniform() * spec.span_ns), ch, 1});
      }
    }
  }

  std::sort(out.events.begin(), out.events.end(), [](const TagEvent& a, const TagEvent& b) {
    if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
    return static_cast<std::uint8_t>(a.channel) < static_cast<std::uint8_t>(b.channel);
  });
  std::sort(out.burst_times.begin(), out.burst_times.end());
  return out;
}

} // namespace homsim
