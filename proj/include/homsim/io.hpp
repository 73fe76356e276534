#pragma once

// Binary tag-stream file format (fixed 16-byte little-endian records behind a
// small header) with a JSON sidecar carrying provenance and simulation truth,
// plus the analysis report serializer.

#include <array>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "homsim/config.hpp"
#include "homsim/pipeline.hpp"
#include "homsim/sequence.hpp"

namespace homsim {

inline constexpr std::array<unsigned char, 8> kStreamMagic = {'H', 'O', 'M', 'T',
                                                             'A', 'G', '0', '1'};
inline constexpr std::size_t kStreamEventBytes = 16;

inline void write_stream(const std::string& path, const TagStream& stream) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path + " for writing");
  std::array<unsigned char, 32> header{};
  std::copy(kStreamMagic.begin(), kStreamMagic.end(), header.begin());
  detail::put_le(header.data() + 8, static_cast<std::uint64_t>(stream.events.size()));
  detail::put_le(header.data() + 16, stream.seed);
  detail::put_le(header.data() + 24, stream.n_blocks);
  os.write(reinterpret_cast<const char*>(header.data()), header.size());

  std::array<unsigned char, kStreamEventBytes> rec{};
  for (const TagEvent& e : stream.events) {
    detail::put_le(rec.data() + 0, e.timestamp);
    rec[8] = static_cast<unsigned char>(e.channel);
    rec[9] = e.multiplicity;
    // bytes 10..15 reserved
    os.write(reinterpret_cast<const char*>(rec.data()), rec.size());
  }
  if (!os) throw IoError("write failed: " + path);
}

inline TagStream read_stream(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path);
  std::array<unsigned char, 32> header{};
  if (!is.read(reinterpret_cast<char*>(header.data()), header.size())) {
    throw IoError("truncated stream header: " + path);
  }
  if (!std::equal(kStreamMagic.begin(), kStreamMagic.end(), header.begin())) {
    throw IoError("not a tag-stream file: " + path);
  }
  TagStream stream;
  std::uint64_t n = detail::get_le<std::uint64_t>(header.data() + 8);
  stream.seed = detail::get_le<std::uint64_t>(header.data() + 16);
  stream.n_blocks = detail::get_le<std::uint64_t>(header.data() + 24);
  stream.events.reserve(n);
  std::array<unsigned char, kStreamEventBytes> rec{};
  for (std::uint64_t i = 0; i < n; ++i) {
    if (!is.read(reinterpret_cast<char*>(rec.data()), rec.size())) {
      throw IoError("truncated stream file: " + path);
    }
    TagEvent e;
    e.timestamp = detail::get_le<std::uint64_t>(rec.data() + 0);
    if (rec[8] > 4) throw IoError("invalid channel in stream: " + path);
    e.channel = static_cast<Channel>(rec[8]);
    e.multiplicity = rec[9];
    stream.events.push_back(e);
  }
  return stream;
}

inline std::string sidecar_path(const std::string& stream_path) { return stream_path + ".json"; }

inline void write_sidecar(const std::string& stream_path, const RunConfig& cfg,
                          const TagStream& stream) {
  json j;
  j["version"] = kToolVersion;
  j["config"] = cfg;
  j["config_hash"] = config_hash(cfg);
  j["seed"] = stream.seed;
  j["n_blocks"] = stream.n_blocks;
  j["n_events"] = stream.events.size();
  j["tick_ps"] = stream.tick_ps;
  j["burst_times"] = stream.burst_times;
  // Ground-truth per-detector node shares for the rate split.
  double a_tot = cfg.model.rates.p1A + cfg.model.rates.p2A;
  double b_tot = cfg.model.rates.p1B + cfg.model.rates.p2B;
  j["truth"] = {{"eta", cfg.eta},
                {"node1_share_a", a_tot > 0 ? cfg.model.rates.p1A / a_tot : 0.5},
                {"node1_share_b", b_tot > 0 ? cfg.model.rates.p1B / b_tot : 0.5}};
  save_json(sidecar_path(stream_path), j);
}

inline json load_sidecar(const std::string& stream_path) {
  std::ifstream is(sidecar_path(stream_path));
  if (!is) throw IoError("cannot open sidecar: " + sidecar_path(stream_path));
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw IoError("invalid sidecar JSON: " + std::string(e.what()));
  }
  return j;
}

inline json rates_to_json(const RateStats& r) {
  return json{{"mean", r.mean},
              {"stderr", r.stderr_},
              {"n_attempt", r.n_attempt},
              {"bg_rate_a_hz", r.bg_rate_a_hz},
              {"bg_rate_b_hz", r.bg_rate_b_hz}};
}

inline json analysis_report(const AnalysisResult& res, const AnalysisOptions& opt,
                            const RunConfig& cfg) {
  json j;
  j["version"] = kToolVersion;
  j["config_hash"] = config_hash(cfg);
  j["seed"] = cfg.seed;
  j["window"] = opt.window;
  j["n_blocks"] = res.n_blocks;
  j["n_blocks_kept"] = res.n_blocks_kept;
  j["out_of_window_events"] = res.out_of_window;
  j["burst_filter"] = {{"removed_blocks", res.burst.removed_blocks},
                       {"expected_false_removals", res.burst.expected_false_removals},
                       {"peak_rate_a_hz", res.burst.peak_rate_a_hz},
                       {"peak_rate_b_hz", res.burst.peak_rate_b_hz}};
  j["histogram"] = res.hist.counts;
  if (res.n_blocks_kept > 0) {
    j["rates"] = rates_to_json(res.rates);
  }
  j["fit_ok"] = res.fit_ok;
  if (res.fit_ok) {
    j["fit"] = {{"c_e", res.fit.c_e},
                {"c_e_sigma", res.fit.c_e_sigma},
                {"slope", res.fit.slope},
                {"intercept", res.fit.intercept}};
    j["visibility"] = {{"c_m", res.vis.c_m},
                       {"c_e", res.vis.c_e},
                       {"c_dist", res.vis.c_dist},
                       {"n_attempt", res.vis.n_attempt},
                       {"v", res.vis.v}};
    j["self_check"] = {{"analytic_c_dist", res.analytic_c_dist}, {"z", res.self_check_z}};
  }
  return j;
}

} // namespace homsim
