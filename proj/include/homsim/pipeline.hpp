#pragma once

// Reduction pipeline from a time-tagged event stream to visibility numbers:
// marker alignment, burst filtering, compact per-bin records, bin-difference
// histograms, rate and background estimation, zero-bin extrapolation and the
// corrected visibility.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "homsim/coincidence.hpp"
#include "homsim/common.hpp"
#include "homsim/sequence.hpp"
#include "homsim/temporal.hpp"

namespace homsim {

// ---------------------------------------------------------------------------
// Alignment

struct AlignedEvent {
  std::uint64_t trigger_index = 0; // block index in marker order
  std::uint32_t bin = 0;           // detection bin within the block
  std::int32_t rel_ticks = 0;      // w.r.t. the bin start (pulse peak)
  std::uint8_t detector = 0;       // 0 = A, 1 = B
};

struct MarkerPair {
  std::uint64_t trigger_index = 0;
  Tick node1_timestamp = 0;
  Tick node2_timestamp = 0;
};

struct AlignedData {
  std::vector<AlignedEvent> events; // ordered by (trigger, bin)
  std::vector<MarkerPair> markers;  // only blocks that contain events
  std::uint64_t n_blocks = 0;
  std::uint64_t n_blocks_kept = 0; // after burst filtering
  std::uint64_t out_of_window = 0; // events not inside any detection bin
  SequenceConfig cfg;

  std::uint64_t n_excitations_kept() const {
    return n_blocks_kept * static_cast<std::uint64_t>(cfg.pulses_per_block);
  }
};

// Maps every detector event to (trigger, detection bin, relative timestamp) or
// classifies it out-of-window. Markers must come in node1/node2 pairs with
// matching timestamps.
inline AlignedData align(const TagStream& stream, const SequenceConfig& cfg) {
  cfg.validate();
  AlignedData out;
  out.cfg = cfg;

  const Tick spin_reset_ticks = ns_to_ticks(cfg.spin_reset_us * 1e3);
  const Tick spacing_ticks = ns_to_ticks(cfg.pulse_spacing_ns);
  const Tick block_live_ticks = spacing_ticks * static_cast<Tick>(cfg.pulses_per_block);

  bool have_block = false;
  Tick block_pulse0 = 0;
  MarkerPair current;
  bool current_recorded = false;
  std::optional<Tick> pending_node1;

  for (std::size_t i = 0; i < stream.events.size(); ++i) {
    const TagEvent& e = stream.events[i];
    switch (e.channel) {
      case Channel::Heartbeat:
        break;
      case Channel::MarkerNode1:
        if (pending_node1) {
          throw AnalysisError("stream integrity: duplicated node1 marker at event offset " +
                              std::to_string(i));
        }
        pending_node1 = e.timestamp;
        break;
      case Channel::MarkerNode2: {
        if (!pending_node1) {
          throw AnalysisError("stream integrity: node2 marker without node1 at event offset " +
                              std::to_string(i));
        }
        current = MarkerPair{out.n_blocks, *pending_node1, e.timestamp};
        pending_node1.reset();
        current_recorded = false;
        block_pulse0 = current.node1_timestamp + spin_reset_ticks;
        have_block = true;
        ++out.n_blocks;
        break;
      }
      case Channel::DetA:
      case Channel::DetB: {
        if (!have_block || e.timestamp < block_pulse0 ||
            e.timestamp >= block_pulse0 + block_live_ticks) {
          ++out.out_of_window;
          break;
        }
        Tick off = e.timestamp - block_pulse0;
        auto bin = static_cast<std::uint32_t>(off / spacing_ticks);
        auto rel = static_cast<std::int32_t>(off % spacing_ticks);
        if (!current_recorded) {
          out.markers.push_back(current);
          current_recorded = true;
        }
        out.events.push_back({current.trigger_index, bin, rel,
                              static_cast<std::uint8_t>(e.channel == Channel::DetB ? 1 : 0)});
        break;
      }
    }
  }
  if (pending_node1) {
    throw AnalysisError("stream integrity: unmatched node1 marker at end of stream");
  }
  out.n_blocks_kept = out.n_blocks;
  return out;
}

// ---------------------------------------------------------------------------
// Burst filter

struct BurstFilterResult {
  std::uint64_t removed_blocks = 0;
  double expected_false_removals = 0.0;
  double peak_rate_a_hz = 0.0;
  double peak_rate_b_hz = 0.0;
};

namespace detail {

inline double poisson_more_than_two(double lambda) {
  return 1.0 - std::exp(-lambda) * (1.0 + lambda + 0.5 * lambda * lambda);
}

// Peak singles rate from a coarse in-bin time histogram, per detector.
inline std::array<double, 2> peak_singles_rates(const AlignedData& a, double hist_bin_ns = 2.0) {
  std::array<double, 2> peak{0.0, 0.0};
  auto n_bins = static_cast<std::size_t>(std::ceil(a.cfg.pulse_spacing_ns / hist_bin_ns));
  std::vector<std::uint64_t> hist(2 * n_bins, 0);
  for (const AlignedEvent& e : a.events) {
    auto b = static_cast<std::size_t>(ticks_to_ns(e.rel_ticks) / hist_bin_ns);
    if (b < n_bins) ++hist[e.detector * n_bins + b];
  }
  double n_exc = static_cast<double>(std::max<std::uint64_t>(
      a.n_blocks * static_cast<std::uint64_t>(a.cfg.pulses_per_block), 1));
  for (int d = 0; d < 2; ++d) {
    std::uint64_t m = 0;
    for (std::size_t b = 0; b < n_bins; ++b) {
      m = std::max(m, hist[static_cast<std::size_t>(d) * n_bins + b]);
    }
    peak[static_cast<std::size_t>(d)] = static_cast<double>(m) / (n_exc * hist_bin_ns * 1e-9);
  }
  return peak;
}

} // namespace detail

// Removes blocks in which more than `threshold` events fall inside one
// window_ns span on both detectors. Also reports the expected number of false
// removals for Poissonian singles at the measured peak rate.
inline BurstFilterResult burst_filter(AlignedData& a, double window_ns = 160.0,
                                      std::uint32_t threshold = 2) {
  BurstFilterResult res;
  auto peaks = detail::peak_singles_rates(a);
  res.peak_rate_a_hz = peaks[0];
  res.peak_rate_b_hz = peaks[1];
  double lam_a = peaks[0] * window_ns * 1e-9;
  double lam_b = peaks[1] * window_ns * 1e-9;
  res.expected_false_removals = static_cast<double>(a.n_blocks) *
                                detail::poisson_more_than_two(lam_a) *
                                detail::poisson_more_than_two(lam_b);

  const double spacing_ns = a.cfg.pulse_spacing_ns;
  std::vector<AlignedEvent> kept;
  kept.reserve(a.events.size());
  std::vector<double> times[2];

  std::size_t i = 0;
  while (i < a.events.size()) {
    std::size_t j = i;
    std::uint64_t trig = a.events[i].trigger_index;
    times[0].clear();
    times[1].clear();
    while (j < a.events.size() && a.events[j].trigger_index == trig) {
      const AlignedEvent& e = a.events[j];
      times[e.detector].push_back(e.bin * spacing_ns + ticks_to_ns(e.rel_ticks));
      ++j;
    }
    bool bursty = true;
    for (auto& ts : times) {
      std::sort(ts.begin(), ts.end());
      bool trip = false;
      for (std::size_t k = 0; k + threshold < ts.size(); ++k) {
        if (ts[k + threshold] - ts[k] <= window_ns) {
          trip = true;
          break;
        }
      }
      bursty = bursty && trip;
    }
    if (bursty) {
      ++res.removed_blocks;
    } else {
      kept.insert(kept.end(), a.events.begin() + static_cast<std::ptrdiff_t>(i),
                  a.events.begin() + static_cast<std::ptrdiff_t>(j));
    }
    i = j;
  }
  a.events = std::move(kept);
  a.n_blocks_kept = a.n_blocks - res.removed_blocks;
  return res;
}

// ---------------------------------------------------------------------------
// Filtered per-bin records

inline constexpr std::int32_t kNoDetectionSentinel = std::numeric_limits<std::int32_t>::min();
inline constexpr std::size_t kRecordBytes = 40;

struct FilteredCoincidenceRecord {
  std::uint64_t trigger_index = 0;
  std::uint64_t node1_trigger_timestamp = 0;
  std::uint64_t node2_trigger_timestamp = 0;
  std::uint32_t detection_bin_index = 0;
  std::uint16_t detA_counts = 0;
  std::uint16_t detB_counts = 0;
  std::int32_t detA_relative_timestamp = kNoDetectionSentinel;
  std::int32_t detB_relative_timestamp = kNoDetectionSentinel;

  bool operator==(const FilteredCoincidenceRecord&) const = default;
};

namespace detail {

template <class T>
inline void put_le(unsigned char* p, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    p[i] = static_cast<unsigned char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xFF);
  }
}

template <class T>
inline T get_le(const unsigned char* p) {
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  }
  return static_cast<T>(v);
}

} // namespace detail

inline void pack_record(const FilteredCoincidenceRecord& r, unsigned char* buf) {
  detail::put_le(buf + 0, r.trigger_index);
  detail::put_le(buf + 8, r.node1_trigger_timestamp);
  detail::put_le(buf + 16, r.node2_trigger_timestamp);
  detail::put_le(buf + 24, r.detection_bin_index);
  detail::put_le(buf + 28, r.detA_counts);
  detail::put_le(buf + 30, r.detB_counts);
  detail::put_le(buf + 32, static_cast<std::uint32_t>(r.detA_relative_timestamp));
  detail::put_le(buf + 36, static_cast<std::uint32_t>(r.detB_relative_timestamp));
}

inline FilteredCoincidenceRecord unpack_record(const unsigned char* buf) {
  FilteredCoincidenceRecord r;
  r.trigger_index = detail::get_le<std::uint64_t>(buf + 0);
  r.node1_trigger_timestamp = detail::get_le<std::uint64_t>(buf + 8);
  r.node2_trigger_timestamp = detail::get_le<std::uint64_t>(buf + 16);
  r.detection_bin_index = detail::get_le<std::uint32_t>(buf + 24);
  r.detA_counts = detail::get_le<std::uint16_t>(buf + 28);
  r.detB_counts = detail::get_le<std::uint16_t>(buf + 30);
  r.detA_relative_timestamp = static_cast<std::int32_t>(detail::get_le<std::uint32_t>(buf + 32));
  r.detB_relative_timestamp = static_cast<std::int32_t>(detail::get_le<std::uint32_t>(buf + 36));
  return r;
}

inline void write_records(const std::string& path, const std::vector<FilteredCoincidenceRecord>& recs) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path + " for writing");
  std::array<unsigned char, kRecordBytes> buf{};
  for (const auto& r : recs) {
    pack_record(r, buf.data());
    os.write(reinterpret_cast<const char*>(buf.data()), kRecordBytes);
  }
  if (!os) throw IoError("write failed: " + path);
}

inline std::vector<FilteredCoincidenceRecord> read_records(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path);
  std::vector<FilteredCoincidenceRecord> recs;
  std::array<unsigned char, kRecordBytes> buf{};
  while (is.read(reinterpret_cast<char*>(buf.data()), kRecordBytes)) {
    recs.push_back(unpack_record(buf.data()));
  }
  if (is.gcount() != 0) throw IoError("truncated record file: " + path);
  return recs;
}

// One record per (block, detection bin) holding at least one in-window event.
// The earliest in-window event per detector provides the timing; the counts
// fields record multiplicity.
inline std::vector<FilteredCoincidenceRecord> emit_records(const AlignedData& a,
                                                           const DetectionWindow& w) {
  w.validate();
  std::vector<FilteredCoincidenceRecord> recs;
  const std::int32_t lo = static_cast<std::int32_t>(std::ceil(w.t_start_ns * kTicksPerNs));
  const std::int32_t hi = static_cast<std::int32_t>(std::floor(w.t_end_ns * kTicksPerNs));

  std::size_t mk = 0;
  std::size_t i = 0;
  while (i < a.events.size()) {
    std::uint64_t trig = a.events[i].trigger_index;
    std::uint32_t bin = a.events[i].bin;
    FilteredCoincidenceRecord rec;
    rec.trigger_index = trig;
    rec.detection_bin_index = bin;
    while (mk < a.markers.size() && a.markers[mk].trigger_index < trig) ++mk;
    if (mk < a.markers.size() && a.markers[mk].trigger_index == trig) {
      rec.node1_trigger_timestamp = a.markers[mk].node1_timestamp;
      rec.node2_trigger_timestamp = a.markers[mk].node2_timestamp;
    }
    while (i < a.events.size() && a.events[i].trigger_index == trig && a.events[i].bin == bin) {
      const AlignedEvent& e = a.events[i];
      if (e.rel_ticks >= lo && e.rel_ticks <= hi) {
        if (e.detector == 0) {
          if (rec.detA_counts == std::numeric_limits<std::uint16_t>::max()) {
            throw AnalysisError("record field overflow: detA_counts at trigger " +
                                std::to_string(trig));
          }
          ++rec.detA_counts;
          if (rec.detA_relative_timestamp == kNoDetectionSentinel ||
              e.rel_ticks < rec.detA_relative_timestamp) {
            rec.detA_relative_timestamp = e.rel_ticks;
          }
        } else {
          if (rec.detB_counts == std::numeric_limits<std::uint16_t>::max()) {
            throw AnalysisError("record field overflow: detB_counts at trigger " +
                                std::to_string(trig));
          }
          ++rec.detB_counts;
          if (rec.detB_relative_timestamp == kNoDetectionSentinel ||
              e.rel_ticks < rec.detB_relative_timestamp) {
            rec.detB_relative_timestamp = e.rel_ticks;
          }
        }
      }
      ++i;
    }
    if (rec.detA_counts > 0 || rec.detB_counts > 0) recs.push_back(rec);
  }
  return recs;
}

// ---------------------------------------------------------------------------
// Histogram

struct BinDifferenceHistogram {
  std::array<std::uint64_t, kNumDifferenceBins> counts{};
  std::uint64_t n_blocks = 0;
  DetectionWindow window;

  std::uint64_t& at(int d) { return counts[static_cast<std::size_t>(d + kMaxBinDifference)]; }
  std::uint64_t at(int d) const { return counts[static_cast<std::size_t>(d + kMaxBinDifference)]; }
  std::uint64_t total() const {
    std::uint64_t t = 0;
    for (auto c : counts) t += c;
    return t;
  }
};

// Presence-based pairing: within each block, every (bin-with-A, bin-with-B)
// pair contributes one count at difference binB - binA.
inline BinDifferenceHistogram histogram(const std::vector<FilteredCoincidenceRecord>& recs,
                                        const DetectionWindow& w, std::uint64_t n_blocks) {
  BinDifferenceHistogram h;
  h.window = w;
  h.n_blocks = n_blocks;
  std::size_t i = 0;
  while (i < recs.size()) {
    std::size_t j = i;
    while (j < recs.size() && recs[j].trigger_index == recs[i].trigger_index) ++j;
    for (std::size_t ia = i; ia < j; ++ia) {
      if (recs[ia].detA_counts == 0) continue;
      for (std::size_t ib = i; ib < j; ++ib) {
        if (recs[ib].detB_counts == 0) continue;
        int d = static_cast<int>(recs[ib].detection_bin_index) -
                static_cast<int>(recs[ia].detection_bin_index);
        if (std::abs(d) <= kMaxBinDifference) ++h.at(d);
      }
    }
    i = j;
  }
  return h;
}

// ---------------------------------------------------------------------------
// Rate estimation

struct RateStats {
  RateEstimates mean;
  RateEstimates stderr_;
  double n_attempt = 0.0;
  double bg_rate_a_hz = 0.0;
  double bg_rate_b_hz = 0.0;
};

// Per-detector singles inside the window minus the background level estimated
// from the late slice of each bin, split over the nodes by the given shares
// (from interleaved single-node rounds or the simulator ground truth).
inline RateStats estimate_rates(const AlignedData& a, const DetectionWindow& w,
                                double node1_share_a = 0.5, double node1_share_b = 0.5) {
  w.validate();
  double n_exc = static_cast<double>(a.n_excitations_kept());
  if (n_exc <= 0.0) throw AnalysisError("rate estimation requires at least one usable round");

  const double spacing = a.cfg.pulse_spacing_ns;
  const double bg_lo = 0.6 * spacing;
  const double bg_hi = 0.975 * spacing;
  if (w.t_end_ns > bg_lo) {
    throw AnalysisError("analysis window overlaps the background slice");
  }

  std::array<double, 2> win_counts{0.0, 0.0};
  std::array<double, 2> bg_counts{0.0, 0.0};
  for (const AlignedEvent& e : a.events) {
    double t = ticks_to_ns(e.rel_ticks);
    if (t >= w.t_start_ns && t <= w.t_end_ns) ++win_counts[e.detector];
    if (t >= bg_lo && t < bg_hi) ++bg_counts[e.detector];
  }

  RateStats out;
  out.n_attempt = n_exc;
  const double slice_ns = bg_hi - bg_lo;
  const double window_ns = w.length();
  std::array<double, 2> p_sig{}, sig_err{}, p_dc{}, dc_err{};
  for (int d = 0; d < 2; ++d) {
    auto di = static_cast<std::size_t>(d);
    double p_win = win_counts[di] / n_exc;
    double rate_per_ns = bg_counts[di] / (n_exc * slice_ns); // per excitation per ns
    p_dc[di] = rate_per_ns * window_ns;
    dc_err[di] = std::sqrt(std::max(bg_counts[di], 1.0)) / (n_exc * slice_ns) * window_ns;
    p_sig[di] = std::max(0.0, p_win - p_dc[di]);
    double win_err = std::sqrt(std::max(p_win * (1.0 - p_win), 0.0) / n_exc);
    sig_err[di] = std::sqrt(win_err * win_err + dc_err[di] * dc_err[di]);
  }
  out.mean.p1A = node1_share_a * p_sig[0];
  out.mean.p2A = (1.0 - node1_share_a) * p_sig[0];
  out.mean.p1B = node1_share_b * p_sig[1];
  out.mean.p2B = (1.0 - node1_share_b) * p_sig[1];
  out.mean.pDCA = p_dc[0];
  out.mean.pDCB = p_dc[1];
  out.stderr_.p1A = node1_share_a * sig_err[0];
  out.stderr_.p2A = (1.0 - node1_share_a) * sig_err[0];
  out.stderr_.p1B = node1_share_b * sig_err[1];
  out.stderr_.p2B = (1.0 - node1_share_b) * sig_err[1];
  out.stderr_.pDCA = dc_err[0];
  out.stderr_.pDCB = dc_err[1];
  out.bg_rate_a_hz = out.mean.pDCA / (window_ns * 1e-9);
  out.bg_rate_b_hz = out.mean.pDCB / (window_ns * 1e-9);
  return out;
}

// ---------------------------------------------------------------------------
// Zero-bin extrapolation fit

struct FitResult {
  double c_e = 0.0;
  double c_e_sigma = 0.0;
  double slope = 0.0;     // counts per scaling-factor unit
  double intercept = 0.0; // zero unless fitted with an intercept
};

// Least squares of counts[d] against s(d) over d != 0. The default is a
// slope-only fit through the origin; C_E = 10 * slope.
inline FitResult fit_extrapolate(const BinDifferenceHistogram& h, bool with_intercept = false) {
  int populated = 0;
  for (int d = -kMaxBinDifference; d <= kMaxBinDifference; ++d) {
    if (d != 0 && h.at(d) > 0) ++populated;
  }
  if (populated < 4) {
    throw AnalysisError("degenerate extrapolation fit: fewer than 4 populated nonzero bins");
  }

  FitResult out;
  double sxx = 0, sxy = 0, sx = 0, sy = 0;
  int n = 0;
  for (int d = -kMaxBinDifference; d <= kMaxBinDifference; ++d) {
    if (d == 0) continue;
    double x = scaling_factor(d);
    double y = static_cast<double>(h.at(d));
    sxx += x * x;
    sxy += x * y;
    sx += x;
    sy += y;
    ++n;
  }

  if (!with_intercept) {
    out.slope = sxy / sxx;
    double rss = 0;
    for (int d = -kMaxBinDifference; d <= kMaxBinDifference; ++d) {
      if (d == 0) continue;
      double r = static_cast<double>(h.at(d)) - out.slope * scaling_factor(d);
      rss += r * r;
    }
    double var = rss / (n - 1);
    out.c_e = 10.0 * out.slope;
    out.c_e_sigma = 10.0 * std::sqrt(var / sxx);
  } else {
    double denom = n * sxx - sx * sx;
    if (denom == 0.0) throw AnalysisError("degenerate extrapolation fit");
    out.slope = (n * sxy - sx * sy) / denom;
    out.intercept = (sy - out.slope * sx) / n;
    double rss = 0;
    for (int d = -kMaxBinDifference; d <= kMaxBinDifference; ++d) {
      if (d == 0) continue;
      double r = static_cast<double>(h.at(d)) - (out.intercept + out.slope * scaling_factor(d));
      rss += r * r;
    }
    double var = rss / (n - 2);
    out.c_e = out.intercept + 10.0 * out.slope;
    out.c_e_sigma = std::sqrt(var * (1.0 / n + (10.0 - sx / n) * (10.0 - sx / n) / (sxx - sx * sx / n)));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Signal-to-background curve and window recommendation

struct SbrCurve {
  std::vector<double> t_ns;
  std::vector<double> signal_a, background_a, ratio_a;
  std::vector<double> signal_b, background_b, ratio_b;
  DetectionWindow recommended;
  bool unbounded = false; // background-free stream
};

// Pointwise SBR per detector from the in-bin arrival histogram. The
// recommended window starts where the leaked excitation pulse ends and
// extends as long as the window-averaged SBR stays above the threshold.
inline SbrCurve sbr_curve(const AlignedData& a, double hist_bin_ns = 0.8,
                          double threshold = 10.0, double tau_ns = 12.5,
                          double start_override_ns = -1.0) {
  double n_exc = static_cast<double>(a.n_excitations_kept());
  if (n_exc <= 0.0) throw AnalysisError("sbr estimation requires at least one usable round");

  const double spacing = a.cfg.pulse_spacing_ns;
  const double bg_lo = 0.6 * spacing;
  const double bg_hi = 0.975 * spacing;
  auto n_bins = static_cast<std::size_t>(std::floor(spacing / hist_bin_ns));

  std::vector<double> counts[2]{std::vector<double>(n_bins, 0.0), std::vector<double>(n_bins, 0.0)};
  std::array<double, 2> bg_counts{0.0, 0.0};
  for (const AlignedEvent& e : a.events) {
    double t = ticks_to_ns(e.rel_ticks);
    auto b = static_cast<std::size_t>(t / hist_bin_ns);
    if (b < n_bins) ++counts[e.detector][b];
    if (t >= bg_lo && t < bg_hi) ++bg_counts[e.detector];
  }
  std::array<double, 2> bg_per_bin{};
  for (int d = 0; d < 2; ++d) {
    bg_per_bin[static_cast<std::size_t>(d)] =
        bg_counts[static_cast<std::size_t>(d)] / (bg_hi - bg_lo) * hist_bin_ns;
  }

  SbrCurve out;
  out.unbounded = bg_per_bin[0] <= 0.0 && bg_per_bin[1] <= 0.0;
  out.t_ns.reserve(n_bins);
  for (std::size_t b = 0; b < n_bins; ++b) {
    double t = (static_cast<double>(b) + 0.5) * hist_bin_ns;
    out.t_ns.push_back(t);
    auto fill = [&](int d, std::vector<double>& sig, std::vector<double>& bg,
                    std::vector<double>& ratio) {
      auto di = static_cast<std::size_t>(d);
      double s = counts[di][b] - bg_per_bin[di];
      sig.push_back(s);
      bg.push_back(bg_per_bin[di]);
      ratio.push_back(bg_per_bin[di] > 0.0 ? s / bg_per_bin[di]
                                           : std::numeric_limits<double>::infinity());
    };
    fill(0, out.signal_a, out.background_a, out.ratio_a);
    fill(1, out.signal_b, out.background_b, out.ratio_b);
  }

  // Window start: end of the leaked excitation pulse (override wins).
  double start = start_override_ns > 0.0 ? start_override_ns : a.cfg.pulse_width_ns;
  out.recommended = DetectionWindow{start, spacing * 0.5, tau_ns};
  if (out.unbounded) {
    out.recommended.t_end_ns = bg_lo;
    return out;
  }
  double cum_sig = 0.0, cum_bg = 0.0, best_end = start + hist_bin_ns;
  bool found = false;
  for (std::size_t b = 0; b < n_bins; ++b) {
    double t_hi = (static_cast<double>(b) + 1.0) * hist_bin_ns;
    if (out.t_ns[b] < start || t_hi > bg_lo) continue;
    cum_sig += out.signal_a[b] + out.signal_b[b];
    cum_bg += out.background_a[b] + out.background_b[b];
    if (cum_bg > 0.0 && cum_sig / cum_bg > threshold) {
      best_end = t_hi;
      found = true;
    }
  }
  if (!found) {
    throw AnalysisError("no window end satisfies the SBR threshold");
  }
  out.recommended.t_end_ns = best_end;
  return out;
}

// ---------------------------------------------------------------------------
// End-to-end analysis

struct AnalysisOptions {
  DetectionWindow window;
  double node1_share_a = 0.5;
  double node1_share_b = 0.5;
  bool fit_with_intercept = false;
  double burst_window_ns = 160.0;
  std::uint32_t burst_threshold = 2;
  double eta_for_shape = 0.9; // only used for the emitted zero-bin curve
};

struct AnalysisResult {
  std::uint64_t n_blocks = 0;
  std::uint64_t n_blocks_kept = 0;
  std::uint64_t out_of_window = 0;
  BurstFilterResult burst;
  BinDifferenceHistogram hist;
  RateStats rates;
  bool fit_ok = false;
  FitResult fit;
  VisibilityResult vis;
  double analytic_c_dist = 0.0; // model expectation from estimated rates
  double self_check_z = 0.0;
  std::vector<FilteredCoincidenceRecord> records;
};

inline AnalysisResult analyze_aligned(AlignedData& aligned, const AnalysisOptions& opt) {
  AnalysisResult res;
  res.n_blocks = aligned.n_blocks;
  res.out_of_window = aligned.out_of_window;
  res.hist.window = opt.window;
  if (aligned.n_blocks == 0) {
    res.n_blocks_kept = 0;
    return res;
  }
  res.burst = burst_filter(aligned, opt.burst_window_ns, opt.burst_threshold);
  res.n_blocks_kept = aligned.n_blocks_kept;
  res.records = emit_records(aligned, opt.window);
  res.hist = histogram(res.records, opt.window, res.n_blocks_kept);
  res.rates = estimate_rates(aligned, opt.window, opt.node1_share_a, opt.node1_share_b);

  try {
    res.fit = fit_extrapolate(res.hist, opt.fit_with_intercept);
    res.vis = extract_visibility(static_cast<double>(res.hist.at(0)), res.fit.c_e,
                                 res.rates.mean, res.rates.n_attempt);
    res.fit_ok = true;
  } catch (const AnalysisError&) {
    res.fit_ok = false;
  }

  // Attempts-normalization self check: the corrected C_dist should match
  // 10 * n_blocks * p_zero(rates, eta = 0) within Poisson scatter.
  res.analytic_c_dist = 10.0 * static_cast<double>(res.n_blocks_kept) *
                        p_coinc_zero(res.rates.mean, InterferenceParams{0.0, 0.5, 0.5});
  if (res.fit_ok && res.analytic_c_dist > 0.0) {
    res.self_check_z = (res.vis.c_dist - res.analytic_c_dist) / std::sqrt(res.analytic_c_dist);
  }
  return res;
}

inline AnalysisResult analyze_stream(const TagStream& stream, const SequenceConfig& cfg,
                                     const AnalysisOptions& opt) {
  AlignedData aligned = align(stream, cfg);
  return analyze_aligned(aligned, opt);
}

} // namespace homsim
