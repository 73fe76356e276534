#pragma once

// JSON (de)serialization for all run configuration, plus the config hash that
// every output embeds for provenance.

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "homsim/common.hpp"
#include "homsim/inference.hpp"
#include "homsim/pipeline.hpp"
#include "homsim/sequence.hpp"
#include "homsim/spectral.hpp"
#include "homsim/temporal.hpp"

namespace homsim {

inline constexpr const char* kToolVersion = "1.0.0";

using nlohmann::json;

// All readers accept partial objects and keep the defaults for absent keys.

inline void to_json(json& j, const RateEstimates& r) {
  j = json{{"p1A", r.p1A}, {"p1B", r.p1B}, {"p2A", r.p2A},
           {"p2B", r.p2B}, {"pDCA", r.pDCA}, {"pDCB", r.pDCB}};
}
inline void from_json(const json& j, RateEstimates& r) {
  r.p1A = j.value("p1A", r.p1A);
  r.p1B = j.value("p1B", r.p1B);
  r.p2A = j.value("p2A", r.p2A);
  r.p2B = j.value("p2B", r.p2B);
  r.pDCA = j.value("pDCA", r.pDCA);
  r.pDCB = j.value("pDCB", r.pDCB);
}

inline void to_json(json& j, const SequenceConfig& c) {
  j = json{{"heartbeat_period_us", c.heartbeat_period_us},
           {"lock_slot_us", c.lock_slot_us},
           {"photon_gen_delay_us", c.photon_gen_delay_us},
           {"blocks_per_heartbeat", c.blocks_per_heartbeat},
           {"pulses_per_block", c.pulses_per_block},
           {"spin_reset_us", c.spin_reset_us},
           {"pulse_spacing_ns", c.pulse_spacing_ns},
           {"heartbeats_per_ready", c.heartbeats_per_ready},
           {"cr_pass_rate", c.cr_pass_rate},
           {"cr_mean_duration_us", c.cr_mean_duration_us},
           {"comm_slot_us", c.comm_slot_us},
           {"pulse_width_ns", c.pulse_width_ns},
           {"tag_resolution_ps", c.tag_resolution_ps},
           {"dead_time_ns", c.dead_time_ns}};
}
inline void from_json(const json& j, SequenceConfig& c) {
  c.heartbeat_period_us = j.value("heartbeat_period_us", c.heartbeat_period_us);
  c.lock_slot_us = j.value("lock_slot_us", c.lock_slot_us);
  c.photon_gen_delay_us = j.value("photon_gen_delay_us", c.photon_gen_delay_us);
  c.blocks_per_heartbeat = j.value("blocks_per_heartbeat", c.blocks_per_heartbeat);
  c.pulses_per_block = j.value("pulses_per_block", c.pulses_per_block);
  c.spin_reset_us = j.value("spin_reset_us", c.spin_reset_us);
  c.pulse_spacing_ns = j.value("pulse_spacing_ns", c.pulse_spacing_ns);
  c.heartbeats_per_ready = j.value("heartbeats_per_ready", c.heartbeats_per_ready);
  c.cr_pass_rate = j.value("cr_pass_rate", c.cr_pass_rate);
  c.cr_mean_duration_us = j.value("cr_mean_duration_us", c.cr_mean_duration_us);
  c.comm_slot_us = j.value("comm_slot_us", c.comm_slot_us);
  c.pulse_width_ns = j.value("pulse_width_ns", c.pulse_width_ns);
  c.tag_resolution_ps = j.value("tag_resolution_ps", c.tag_resolution_ps);
  c.dead_time_ns = j.value("dead_time_ns", c.dead_time_ns);
}

inline void to_json(json& j, const BurstSpec& b) {
  j = json{{"rate_hz", b.rate_hz},
           {"multiplicity", b.multiplicity},
           {"span_ns", b.span_ns},
           {"fixed_count", b.fixed_count}};
}
inline void from_json(const json& j, BurstSpec& b) {
  b.rate_hz = j.value("rate_hz", b.rate_hz);
  b.multiplicity = j.value("multiplicity", b.multiplicity);
  b.span_ns = j.value("span_ns", b.span_ns);
  b.fixed_count = j.value("fixed_count", b.fixed_count);
}

inline void to_json(json& j, const EmitterDetectorModel& m) {
  j = json{{"tau_ns", m.tau_ns},
           {"rates", m.rates},
           {"dark_hz", m.dark_hz},
           {"blinding_hz", m.blinding_hz},
           {"spdc_hz", m.spdc_hz},
           {"pulse_leak_prob", m.pulse_leak_prob},
           {"burst", m.burst}};
}
inline void from_json(const json& j, EmitterDetectorModel& m) {
  m.tau_ns = j.value("tau_ns", m.tau_ns);
  if (j.contains("rates")) j.at("rates").get_to(m.rates);
  m.dark_hz = j.value("dark_hz", m.dark_hz);
  m.blinding_hz = j.value("blinding_hz", m.blinding_hz);
  m.spdc_hz = j.value("spdc_hz", m.spdc_hz);
  m.pulse_leak_prob = j.value("pulse_leak_prob", m.pulse_leak_prob);
  if (j.contains("burst")) j.at("burst").get_to(m.burst);
}

inline void to_json(json& j, const DetectionWindow& w) {
  j = json{{"t_start_ns", w.t_start_ns}, {"t_end_ns", w.t_end_ns}, {"tau_ns", w.tau_ns}};
}
inline void from_json(const json& j, DetectionWindow& w) {
  w.t_start_ns = j.value("t_start_ns", w.t_start_ns);
  w.t_end_ns = j.value("t_end_ns", w.t_end_ns);
  w.tau_ns = j.value("tau_ns", w.tau_ns);
}

inline void to_json(json& j, const FilterSpec& s) {
  j = json{{"f0_mhz", s.f0_mhz},
           {"gamma_mhz", s.gamma_mhz},
           {"peak", s.peak},
           {"background", s.background}};
}
inline void from_json(const json& j, FilterSpec& s) {
  s.f0_mhz = j.value("f0_mhz", s.f0_mhz);
  s.gamma_mhz = j.value("gamma_mhz", s.gamma_mhz);
  s.peak = j.value("peak", s.peak);
  s.background = j.value("background", s.background);
}

inline void to_json(json& j, const EmissionLine& l) {
  j = json{{"f_nv_mhz", l.f_nv_mhz}, {"gamma_nv_mhz", l.gamma_nv_mhz}};
}
inline void from_json(const json& j, EmissionLine& l) {
  l.f_nv_mhz = j.value("f_nv_mhz", l.f_nv_mhz);
  l.gamma_nv_mhz = j.value("gamma_nv_mhz", l.gamma_nv_mhz);
}

inline void to_json(json& j, const InferenceSettings& s) {
  j = json{{"grid_points", s.grid_points},
           {"draws", s.draws},
           {"realizations", s.realizations},
           {"t_m", s.t_m},
           {"t_e", s.t_e},
           {"threads", s.threads}};
}
inline void from_json(const json& j, InferenceSettings& s) {
  s.grid_points = j.value("grid_points", s.grid_points);
  s.draws = j.value("draws", s.draws);
  s.realizations = j.value("realizations", s.realizations);
  s.t_m = j.value("t_m", s.t_m);
  s.t_e = j.value("t_e", s.t_e);
  s.threads = j.value("threads", s.threads);
}

inline void to_json(json& j, const AnalysisOptions& o) {
  j = json{{"window", o.window},
           {"node1_share_a", o.node1_share_a},
           {"node1_share_b", o.node1_share_b},
           {"fit_with_intercept", o.fit_with_intercept},
           {"burst_window_ns", o.burst_window_ns},
           {"burst_threshold", o.burst_threshold},
           {"eta_for_shape", o.eta_for_shape}};
}
inline void from_json(const json& j, AnalysisOptions& o) {
  if (j.contains("window")) j.at("window").get_to(o.window);
  o.node1_share_a = j.value("node1_share_a", o.node1_share_a);
  o.node1_share_b = j.value("node1_share_b", o.node1_share_b);
  o.fit_with_intercept = j.value("fit_with_intercept", o.fit_with_intercept);
  o.burst_window_ns = j.value("burst_window_ns", o.burst_window_ns);
  o.burst_threshold = j.value("burst_threshold", o.burst_threshold);
  o.eta_for_shape = j.value("eta_for_shape", o.eta_for_shape);
}

struct RunConfig {
  SequenceConfig sequence;
  EmitterDetectorModel model;
  double eta = 0.9;
  std::uint64_t n_blocks = 100000;
  std::uint64_t seed = 1;
  AnalysisOptions analysis;
  std::vector<double> window_sweep_ns; // t_end values; empty = single window
  InferenceSettings inference;
  FilterSpec filter;
  EmissionLine line;

  void validate() const {
    sequence.validate();
    model.validate();
    if (!(eta >= 0.0 && eta <= 1.0)) throw ConfigError("eta outside [0,1]");
    if (n_blocks == 0) throw ConfigError("n_blocks must be positive");
    analysis.window.validate();
    inference.validate();
    filter.validate();
    line.validate();
  }
};

inline void to_json(json& j, const RunConfig& c) {
  j = json{{"sequence", c.sequence},
           {"model", c.model},
           {"eta", c.eta},
           {"n_blocks", c.n_blocks},
           {"seed", c.seed},
           {"analysis", c.analysis},
           {"window_sweep_ns", c.window_sweep_ns},
           {"inference", c.inference},
           {"filter", c.filter},
           {"line", c.line}};
}
inline void from_json(const json& j, RunConfig& c) {
  if (j.contains("sequence")) j.at("sequence").get_to(c.sequence);
  if (j.contains("model")) j.at("model").get_to(c.model);
  c.eta = j.value("eta", c.eta);
  c.n_blocks = j.value("n_blocks", c.n_blocks);
  c.seed = j.value("seed", c.seed);
  if (j.contains("analysis")) j.at("analysis").get_to(c.analysis);
  c.window_sweep_ns = j.value("window_sweep_ns", c.window_sweep_ns);
  if (j.contains("inference")) j.at("inference").get_to(c.inference);
  if (j.contains("filter")) j.at("filter").get_to(c.filter);
  if (j.contains("line")) j.at("line").get_to(c.line);
}

inline std::uint64_t config_hash(const RunConfig& c) {
  return fnv1a64(json(c).dump());
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config: " + path);
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw ConfigError("invalid config JSON in " + path + ": " + e.what());
  }
  RunConfig c;
  try {
    j.get_to(c);
  } catch (const json::exception& e) {
    throw ConfigError("config schema error in " + path + ": " + e.what());
  }
  c.validate();
  return c;
}

inline void save_json(const std::string& path, const json& j) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open " + path + " for writing");
  os << j.dump(2) << "\n";
  if (!os) throw IoError("write failed: " + path);
}

} // namespace homsim
