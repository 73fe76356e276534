// Command-line front end: simulate | analyze | infer | filter-model | report.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "homsim/config.hpp"
#include "homsim/inference.hpp"
#include "homsim/io.hpp"
#include "homsim/pipeline.hpp"
#include "homsim/sequence.hpp"
#include "homsim/spectral.hpp"
#include "homsim/temporal.hpp"

namespace {

using namespace homsim;

std::ofstream open_out(const std::string& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open " + path + " for writing");
  return os;
}

json require_field(const json& j, const std::string& key, const std::string& what) {
  if (!j.contains(key)) throw ConfigError(what + " missing field: " + key);
  return j.at(key);
}

int cmd_simulate(const std::string& config_path, const std::string& out_path, std::int64_t blocks,
                 std::int64_t seed, double eta) {
  RunConfig cfg = config_path.empty() ? RunConfig{} : load_config(config_path);
  if (blocks >= 0) cfg.n_blocks = static_cast<std::uint64_t>(blocks);
  if (seed >= 0) cfg.seed = static_cast<std::uint64_t>(seed);
  if (eta >= 0.0) cfg.eta = eta;
  cfg.validate();

  TagStream stream = simulate_run(cfg.sequence, cfg.model, cfg.eta, cfg.seed, cfg.n_blocks);
  if (cfg.model.burst.rate_hz > 0.0 || cfg.model.burst.fixed_count > 0) {
    stream = inject_bursts(stream, cfg.model.burst, cfg.sequence, cfg.seed);
  }
  write_stream(out_path, stream);
  write_sidecar(out_path, cfg, stream);
  std::cout << "wrote " << stream.events.size() << " events (" << cfg.n_blocks << " blocks) to "
            << out_path << "\n";
  return 0;
}

void write_hist_csv(const std::string& path, const BinDifferenceHistogram& h) {
  auto os = open_out(path);
  os << "bin_difference,counts\n";
  for (int d = -kMaxBinDifference; d <= kMaxBinDifference; ++d) {
    os << d << "," << h.at(d) << "\n";
  }
}

void write_shape_csv(const std::string& path, const DetectionWindow& w, const RateEstimates& r,
                     double eta) {
  TemporalShape zero = compose_shape(w, r, InterferenceParams{eta, 0.5, 0.5}, true);
  TemporalShape nonzero = compose_shape(w, r, InterferenceParams{eta, 0.5, 0.5}, false);
  auto os = open_out(path);
  os << "delta_t_ns,zero_bin_density,nonzero_bin_density\n";
  for (std::size_t i = 0; i < zero.delta_t_ns.size(); ++i) {
    os << zero.delta_t_ns[i] << "," << zero.density[i] << "," << nonzero.density[i] << "\n";
  }
}

void write_sbr_csv(const std::string& path, const SbrCurve& c) {
  auto os = open_out(path);
  os << "t_ns,signal_a,background_a,sbr_a,signal_b,background_b,sbr_b\n";
  for (std::size_t i = 0; i < c.t_ns.size(); ++i) {
    os << c.t_ns[i] << "," << c.signal_a[i] << "," << c.background_a[i] << "," << c.ratio_a[i]
       << "," << c.signal_b[i] << "," << c.background_b[i] << "," << c.ratio_b[i] << "\n";
  }
}

int cmd_analyze(const std::string& stream_path, const std::string& config_path,
                const std::string& out_path, const std::string& hist_csv,
                const std::string& shape_csv, const std::string& sbr_csv) {
  TagStream stream = read_stream(stream_path);
  RunConfig cfg;
  if (!config_path.empty()) {
    cfg = load_config(config_path);
  } else {
    json side = load_sidecar(stream_path);
    require_field(side, "config", "sidecar").get_to(cfg);
    if (side.contains("truth")) {
      cfg.analysis.node1_share_a =
          side["truth"].value("node1_share_a", cfg.analysis.node1_share_a);
      cfg.analysis.node1_share_b =
          side["truth"].value("node1_share_b", cfg.analysis.node1_share_b);
    }
  }
  cfg.validate();

  AlignedData aligned = align(stream, cfg.sequence);
  AnalysisResult res = analyze_aligned(aligned, cfg.analysis);
  json report = analysis_report(res, cfg.analysis, cfg);

  if (!cfg.window_sweep_ns.empty() && res.n_blocks_kept > 0) {
    json sweep = json::array();
    for (double t_end : cfg.window_sweep_ns) {
      AnalysisOptions o = cfg.analysis;
      o.window.t_end_ns = t_end;
      o.window.validate();
      auto recs = emit_records(aligned, o.window);
      auto h = histogram(recs, o.window, aligned.n_blocks_kept);
      auto rates = estimate_rates(aligned, o.window, o.node1_share_a, o.node1_share_b);
      json row = {{"t_end_ns", t_end}, {"c_m", h.at(0)}};
      try {
        auto fit = fit_extrapolate(h, o.fit_with_intercept);
        auto vis = extract_visibility(static_cast<double>(h.at(0)), fit.c_e, rates.mean,
                                      rates.n_attempt);
        row["c_e"] = fit.c_e;
        row["c_e_sigma"] = fit.c_e_sigma;
        row["c_dist"] = vis.c_dist;
        row["v"] = vis.v;
        row["rates"] = rates_to_json(rates);
      } catch (const AnalysisError& e) {
        row["error"] = e.what();
      }
      sweep.push_back(row);
    }
    report["sweep"] = sweep;
  }

  if (res.n_blocks_kept > 0) {
    if (!hist_csv.empty()) write_hist_csv(hist_csv, res.hist);
    if (!shape_csv.empty()) {
      write_shape_csv(shape_csv, cfg.analysis.window, res.rates.mean, cfg.analysis.eta_for_shape);
    }
    if (!sbr_csv.empty()) {
      write_sbr_csv(sbr_csv, sbr_curve(aligned, 0.8, 10.0, cfg.model.tau_ns,
                                       cfg.sequence.pulse_width_ns));
    }
  }

  save_json(out_path, report);
  if (res.fit_ok) {
    std::cout << "V = " << res.vis.v << " (C_M = " << res.vis.c_m << ", C_dist = " << res.vis.c_dist
              << ", blocks kept = " << res.n_blocks_kept << ")\n";
  } else {
    std::cout << "analysis complete; visibility unavailable (insufficient counts)\n";
  }
  return 0;
}

int cmd_infer(const std::string& report_path, const std::string& out_csv,
              const std::string& summary_path, InferenceSettings settings, std::uint64_t seed) {
  std::ifstream is(report_path);
  if (!is) throw IoError("cannot open report: " + report_path);
  json report;
  try {
    is >> report;
  } catch (const json::exception& e) {
    throw ConfigError("invalid report JSON: " + std::string(e.what()));
  }

  json jrates = require_field(report, "rates", "report");
  json jvis = require_field(report, "visibility", "report");
  ParameterStats stats;
  require_field(jrates, "mean", "report.rates").get_to(stats.mean);
  require_field(jrates, "stderr", "report.rates").get_to(stats.sigma);
  stats.n_attempt = require_field(jrates, "n_attempt", "report.rates").get<double>();
  Measurement m;
  m.c_m = require_field(jvis, "c_m", "report.visibility").get<double>();
  m.c_e = require_field(jvis, "c_e", "report.visibility").get<double>();
  m.c_e_sigma = report.contains("fit") ? report["fit"].value("c_e_sigma", 0.0) : 0.0;

  PosteriorDensity pdf = posterior(stats, m, settings, seed);

  auto os = open_out(out_csv);
  os << "eta,density\n";
  for (std::size_t i = 0; i < pdf.eta.size(); ++i) {
    os << pdf.eta[i] << "," << pdf.density[i] << "\n";
  }

  json summary = {{"version", kToolVersion},
                  {"map", pdf.map},
                  {"lo", pdf.lo},
                  {"hi", pdf.hi},
                  {"multimodal", pdf.multimodal},
                  {"seed", seed},
                  {"settings", settings},
                  {"measurement", {{"c_m", m.c_m}, {"c_e", m.c_e}, {"c_e_sigma", m.c_e_sigma}}}};
  if (report.contains("config_hash")) summary["config_hash"] = report["config_hash"];
  if (!summary_path.empty()) save_json(summary_path, summary);
  std::cout << "eta MAP = " << pdf.map << " [" << pdf.lo << ", " << pdf.hi << "]\n";
  return 0;
}

int cmd_filter_model(FilterSpec spec, double gamma_nv, const std::string& out_csv, bool overlap,
                     double drift_sweep_mhz) {
  spec.validate();
  EmissionLine line{0.0, gamma_nv};
  line.validate();

  if (!out_csv.empty()) {
    auto os = open_out(out_csv);
    os << "f_mhz,transmission\n";
    double span = 6.0 * spec.gamma_mhz;
    for (int i = 0; i <= 600; ++i) {
      double f = spec.f0_mhz - span + (2.0 * span) * i / 600.0;
      os << f << "," << transmission(f, spec) << "\n";
    }
  }
  if (overlap) {
    double numeric = photon_transmission_probability(spec, line);
    double closed = spec.gamma_mhz / (spec.gamma_mhz + line.gamma_nv_mhz);
    std::cout << "overlap transmission P_t = " << numeric
              << " (centered closed form = " << closed << ")\n";
  }
  if (drift_sweep_mhz > 0.0) {
    double worst = 0.0;
    for (int i = -10; i <= 10; ++i) {
      double df = drift_sweep_mhz * i / 10.0;
      worst = std::max(worst, std::abs(transmission_drift(spec, line, df)));
    }
    std::cout << "max |relative transmission change| over +/-" << drift_sweep_mhz
              << " MHz drift: " << worst << "\n";
  }
  return 0;
}

int cmd_report(const std::string& report_path) {
  std::ifstream is(report_path);
  if (!is) throw IoError("cannot open report: " + report_path);
  json report;
  try {
    is >> report;
  } catch (const json::exception& e) {
    throw ConfigError("invalid report JSON: " + std::string(e.what()));
  }
  std::cout << "blocks: " << report.value("n_blocks", 0ull) << " (kept "
            << report.value("n_blocks_kept", 0ull) << ")\n";
  if (report.contains("visibility")) {
    const json& v = report["visibility"];
    std::cout << "C_M = " << v.value("c_m", 0.0) << ", C_E = " << v.value("c_e", 0.0)
              << ", C_dist = " << v.value("c_dist", 0.0) << ", V = " << v.value("v", 0.0) << "\n";
  }
  if (report.contains("self_check")) {
    std::cout << "self-check z = " << report["self_check"].value("z", 0.0) << "\n";
  }
  if (report.contains("sweep")) {
    std::cout << "window sweep:\n";
    for (const json& row : report["sweep"]) {
      std::cout << "  t_end = " << row.value("t_end_ns", 0.0) << " ns, V = "
                << row.value("v", 0.0) << "\n";
    }
  }
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-emitter interference simulator and analysis toolkit"};
  app.require_subcommand(1);
  unsigned threads = 1;
  app.add_option("--threads", threads, "worker cap for parallel stages")->capture_default_str();

  auto* sim = app.add_subcommand("simulate", "generate a synthetic tag stream");
  std::string sim_config, sim_out = "stream.bin";
  std::int64_t sim_blocks = -1, sim_seed = -1;
  double sim_eta = -1.0;
  sim->add_option("--config", sim_config, "run config JSON");
  sim->add_option("--out", sim_out, "output stream path")->capture_default_str();
  sim->add_option("--blocks", sim_blocks, "override block count");
  sim->add_option("--seed", sim_seed, "override seed");
  sim->add_option("--eta", sim_eta, "override indistinguishability");

  auto* ana = app.add_subcommand("analyze", "reduce a tag stream to a report");
  std::string ana_stream, ana_config, ana_out = "report.json";
  std::string ana_hist, ana_shape, ana_sbr;
  ana->add_option("--stream", ana_stream, "input stream path")->required();
  ana->add_option("--config", ana_config, "run config JSON (default: stream sidecar)");
  ana->add_option("--out", ana_out, "report JSON path")->capture_default_str();
  ana->add_option("--hist-csv", ana_hist, "bin-difference histogram CSV");
  ana->add_option("--shape-csv", ana_shape, "temporal shape CSV");
  ana->add_option("--sbr-csv", ana_sbr, "signal-to-background CSV");

  auto* inf = app.add_subcommand("infer", "posterior over eta from a report");
  std::string inf_report, inf_out = "posterior.csv", inf_summary;
  InferenceSettings inf_settings;
  std::uint64_t inf_seed = 1;
  inf->add_option("--report", inf_report, "analysis report JSON")->required();
  inf->add_option("--out", inf_out, "posterior CSV path")->capture_default_str();
  inf->add_option("--summary", inf_summary, "summary JSON path");
  inf->add_option("--grid", inf_settings.grid_points, "grid points")->capture_default_str();
  inf->add_option("--draws", inf_settings.draws, "parameter draws N")->capture_default_str();
  inf->add_option("--realizations", inf_settings.realizations, "Poisson realizations K")
      ->capture_default_str();
  inf->add_option("--t-m", inf_settings.t_m, "match tolerance on C_M")->capture_default_str();
  inf->add_option("--t-e", inf_settings.t_e, "match tolerance on C_E (<0: max(1, sigma))");
  inf->add_option("--seed", inf_seed, "RNG seed")->capture_default_str();

  auto* flt = app.add_subcommand("filter-model", "filter transmission utilities");
  FilterSpec flt_spec;
  double flt_gamma_nv = 6.35, flt_drift = 0.0;
  std::string flt_out;
  bool flt_overlap = false;
  flt->add_option("--f0", flt_spec.f0_mhz, "filter center (MHz)")->capture_default_str();
  flt->add_option("--gamma", flt_spec.gamma_mhz, "filter HWHM (MHz)")->capture_default_str();
  flt->add_option("--peak", flt_spec.peak, "peak transmission")->capture_default_str();
  flt->add_option("--background", flt_spec.background, "background level")->capture_default_str();
  flt->add_option("--gamma-nv", flt_gamma_nv, "emission HWHM (MHz)")->capture_default_str();
  flt->add_option("--out", flt_out, "transmission curve CSV");
  flt->add_flag("--overlap", flt_overlap, "print overlap transmission probability");
  flt->add_option("--drift-sweep", flt_drift, "max drift (MHz) for sensitivity sweep");

  auto* rep = app.add_subcommand("report", "print a report summary");
  std::string rep_path;
  rep->add_option("--report", rep_path, "analysis report JSON")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) return cmd_simulate(sim_config, sim_out, sim_blocks, sim_seed, sim_eta);
    if (ana->parsed()) {
      return cmd_analyze(ana_stream, ana_config, ana_out, ana_hist, ana_shape, ana_sbr);
    }
    if (inf->parsed()) {
      inf_settings.threads = threads;
      return cmd_infer(inf_report, inf_out, inf_summary, inf_settings, inf_seed);
    }
    if (flt->parsed()) {
      return cmd_filter_model(flt_spec, flt_gamma_nv, flt_out, flt_overlap, flt_drift);
    }
    if (rep->parsed()) return cmd_report(rep_path);
  } catch (const homsim::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const homsim::IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 3;
  } catch (const homsim::AnalysisError& e) {
    std::cerr << "analysis error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
