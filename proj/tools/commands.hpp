#pragma once

// Sweep drivers behind the `ghostlab` subcommands. Each command takes a
// resolved JSON config, writes its artifacts into an output directory and
// returns a process exit status.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ghostlab/ghostlab.hpp"

namespace ghostlab::cli {

using json = nlohmann::json;
namespace fs = std::filesystem;

/// Defaults for every field; user documents are merged on top.
inline json default_config() {
  return json{
      {"seed", 0},
      {"threads", 0},
      {"out", "ghostlab_out"},
      {"analytic",
       {{"orders", {2, 3, 4}},
        {"modes", {1, 10}},
        {"intensities", {{"logspace", {-2.0, 3.0, 51}}}},
        {"spdc_modes", {1, 10}}}},
      {"mc",
       {{"orders", {2, 3, 4}},
        {"modes", {1, 2, 5, 10}},
        {"intensities", {0.1, 1.0, 10.0}},
        {"trials", 1000000},
        {"batches", 128},
        {"regime", "photocount_factorial"},
        {"sigma_threshold", 3.0}}},
      {"image",
       {{"width", 768},
        {"height", 512},
        {"speckle_fwhm", 30.0},
        {"mean_intensity", 1.0},
        {"frames", 5000},
        {"orders", {2, 3, 4}},
        {"slit_modes", {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16, 17, 18, 19, 20}},
        {"slit_widths", json::array()},
        {"export_widths", json::array()},
        {"s_scale", kDefaultModeScale},
        {"noise_mode", "slit_pixels"},
        {"normalization", "none"},
        {"detector_noise", 0.0},
        {"save_frames", 0},
        {"frames_in", ""},
        {"frames_per_chunk", 16}}},
  };
}

/// Recursive merge; unknown keys are rejected so typos do not pass silently.
inline void merge_config(json& base, const json& patch, const std::string& path = "") {
  if (!patch.is_object()) throw ConfigError((path.empty() ? "config" : path) + ": expected an object");
  for (const auto& [key, value] : patch.items()) {
    const std::string field = path.empty() ? key : path + "." + key;
    if (!base.contains(key)) throw ConfigError(field + ": unknown field");
    if (base[key].is_object() && value.is_object() && !base[key].contains("logspace"))
      merge_config(base[key], value, field);
    else
      base[key] = value;
  }
}

inline json load_config_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  json merged = default_config();
  merge_config(merged, doc);
  return merged;
}

namespace detail {

template <class T>
T field(const json& node, const std::string& path) {
  try {
    return node.get<T>();
  } catch (const json::exception&) {
    throw ConfigError(path + ": expected " + (std::is_same_v<T, std::string> ? std::string("a string")
                                                                               : std::string("a number")) +
                      ", got " + node.dump());
  }
}

template <class T>
std::vector<T> list(const json& node, const std::string& path, bool allow_empty = false) {
  if (!node.is_array()) throw ConfigError(path + ": expected an array, got " + node.dump());
  if (node.empty() && !allow_empty) throw ConfigError(path + ": sweep axis must not be empty");
  std::vector<T> out;
  for (std::size_t i = 0; i < node.size(); ++i) out.push_back(field<T>(node[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

}  // namespace detail

/// Intensity axis: explicit list, or {"logspace": [log10_from, log10_to, points]}.
inline std::vector<double> intensity_axis(const json& node, const std::string& path) {
  if (node.is_object()) {
    if (!node.contains("logspace")) throw ConfigError(path + ": expected a list or {\"logspace\": [from, to, points]}");
    const auto spec = detail::list<double>(node["logspace"], path + ".logspace");
    if (spec.size() != 3 || spec[2] < 1 || spec[2] != std::floor(spec[2]))
      throw ConfigError(path + ".logspace: expected [log10_from, log10_to, integer points >= 1]");
    const int points = static_cast<int>(spec[2]);
    std::vector<double> out;
    for (int i = 0; i < points; ++i) {
      const double e = points == 1 ? spec[0] : spec[0] + (spec[1] - spec[0]) * i / (points - 1);
      out.push_back(std::pow(10.0, e));
    }
    return out;
  }
  return detail::list<double>(node, path);
}

inline void stamp(CsvTable& table, const json& config, const std::string& command) {
  table.comment("ghostlab " + std::string(kVersion) + " " + command);
  table.comment("seed: " + std::to_string(config.at("seed").get<std::uint64_t>()));
  json resolved = config;
  resolved.erase("threads");  // scheduling only; results are thread-count independent
  resolved.erase("out");
  table.comment("config: " + resolved.dump());
}

struct Timing {
  CsvTable table{{"index", "label", "wall_time_s"}};
  void add(std::size_t index, const std::string& label, double seconds) {
    table.add_row({static_cast<std::uint64_t>(index), label, seconds});
  }
};

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

inline void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw ConfigError("output directory '" + dir.string() + "' is not writable");
}

// ---------------------------------------------------------------- analytic

inline CsvTable analytic_table(const json& config, Timing* timing = nullptr) {
  const json& a = config.at("analytic");
  const auto orders = detail::list<int>(a.at("orders"), "analytic.orders");
  const auto modes = detail::list<int>(a.at("modes"), "analytic.modes");
  const auto intensities = intensity_axis(a.at("intensities"), "analytic.intensities");

  CsvTable table({"order", "modes", "intensity", "g_max", "g_back", "visibility", "var_back", "snr_thermal", "snr_low",
                  "snr_low_unrooted", "snr_high", "snr_spdc", "snr_spdc_limit"});
  stamp(table, config, "analytic");
  std::size_t index = 0;
  for (int n : orders)
    for (int m : modes)
      for (double i : intensities) {
        const auto t0 = std::chrono::steady_clock::now();
        const GiParameters p{n, m, i};
        const auto r = analyze(p);
        table.add_row({std::int64_t{n}, std::int64_t{m}, i, r.g_max, r.g_back, r.visibility, r.var_back, r.snr,
                       snr_low_intensity(p), snr_low_intensity_unrooted(p), snr_high_intensity(n, m),
                       snr_spdc({i, m}), snr_spdc_limit(m)});
        if (timing) timing->add(index, "n=" + std::to_string(n) + " M=" + std::to_string(m), seconds_since(t0));
        ++index;
      }
  return table;
}

inline CsvTable spdc_table(const json& config) {
  const json& a = config.at("analytic");
  const auto modes = detail::list<int>(a.at("spdc_modes"), "analytic.spdc_modes");
  const auto intensities = intensity_axis(a.at("intensities"), "analytic.intensities");
  CsvTable table({"modes", "mean_photons", "snr_spdc", "snr_thermal_n2", "snr_spdc_limit", "peak_mean_photons",
                  "peak_snr"});
  stamp(table, config, "analytic/spdc");
  for (int m : modes) {
    const auto peak = spdc_peak(m);
    for (double i : intensities)
      table.add_row({std::int64_t{m}, i, snr_spdc({i, m}), snr_thermal({2, m, i}), snr_spdc_limit(m),
                     peak.mean_photons, peak.snr});
  }
  return table;
}

inline int cmd_analytic(const json& config, const fs::path& out, std::ostream& log = std::cerr) {
  ensure_dir(out);
  Timing timing;
  analytic_table(config, &timing).write(out / "analytic.csv");
  spdc_table(config).write(out / "spdc.csv");
  timing.table.write(out / "analytic_timing.csv");
  log << "analytic: wrote " << (out / "analytic.csv").string() << " and " << (out / "spdc.csv").string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------- mc

struct McReference {
  double g_max, g_back, snr, visibility;
};

inline McReference mc_reference(const GiParameters& p, Regime regime) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  McReference ref{};
  switch (regime) {
    case Regime::photocount_factorial:
      ref = {g_max(p), g_back(p), snr_thermal(p), 0.0};
      break;
    case Regime::classical_intensity:
      // Shot-noise-free limit: the SNR does not depend on the intensity.
      ref = {g_max(p), g_back(p), snr_high_intensity(p.order, p.modes), 0.0};
      break;
    case Regime::photocount_plain:
      ref = {g_max_plain(p), g_back_plain(p), nan, 0.0};
      break;
  }
  ref.visibility = (ref.g_max - ref.g_back) / (ref.g_max + ref.g_back);
  return ref;
}

inline double z_score(double estimate, double reference, double std_error) {
  if (std::isnan(reference)) return std::numeric_limits<double>::quiet_NaN();
  if (!(std_error > 0.0)) return estimate == reference ? 0.0 : std::numeric_limits<double>::infinity();
  return std::fabs(estimate - reference) / std_error;
}

struct McOutcome {
  CsvTable table;
  bool all_agree = true;
};

inline McOutcome mc_table(const json& config, unsigned threads, Timing* timing = nullptr) {
  const json& c = config.at("mc");
  const auto orders = detail::list<int>(c.at("orders"), "mc.orders");
  const auto modes = detail::list<int>(c.at("modes"), "mc.modes");
  const auto intensities = intensity_axis(c.at("intensities"), "mc.intensities");
  const auto trials = detail::field<std::uint64_t>(c.at("trials"), "mc.trials");
  const auto batches = detail::field<std::uint32_t>(c.at("batches"), "mc.batches");
  const auto threshold = detail::field<double>(c.at("sigma_threshold"), "mc.sigma_threshold");
  const Regime regime = parse_regime(detail::field<std::string>(c.at("regime"), "mc.regime"));
  const auto seed = config.at("seed").get<std::uint64_t>();
  if (trials < 2) throw ConfigError("mc.trials: must be >= 2 (variance undefined for a single trial)");

  McOutcome outcome{CsvTable({"order", "modes", "intensity", "regime", "trials", "batches", "g_max_hat", "g_max_se",
                              "g_back_hat", "g_back_se", "var_max_hat", "var_max_se", "var_back_hat", "var_back_se",
                              "cov_hat", "cov_se", "signal", "signal_se", "noise", "noise_se", "snr_hat", "snr_se",
                              "visibility_hat", "visibility_se", "g_max_ref", "g_back_ref", "snr_ref",
                              "visibility_ref", "z_g_max", "z_g_back", "z_snr", "z_visibility", "agree"})};
  stamp(outcome.table, config, "mc");
  std::size_t index = 0;
  for (int n : orders)
    for (int m : modes)
      for (double i : intensities) {
        const auto t0 = std::chrono::steady_clock::now();
        const GiParameters p{n, m, i};
        // Each sweep point gets its own seed so points are independent.
        const TrialBatch batch{p, trials, regime, seed + 0x9E3779B97F4A7C15ull * (index + 1), batches};
        const auto s = estimate_cf(batch, threads);
        const auto ref = mc_reference(p, regime);
        const double zs[] = {z_score(s.g_max_hat, ref.g_max, s.std_errors.g_max),
                             z_score(s.g_back_hat, ref.g_back, s.std_errors.g_back),
                             z_score(s.snr_hat, ref.snr, s.std_errors.snr),
                             z_score(s.visibility_hat, ref.visibility, s.std_errors.visibility)};
        bool agree = true;
        for (double z : zs)
          if (!std::isnan(z) && !(z <= threshold)) agree = false;
        outcome.all_agree = outcome.all_agree && agree;
        const auto& e = s.std_errors;
        outcome.table.add_row({std::int64_t{n}, std::int64_t{m}, i, std::string(to_string(regime)), trials,
                               std::uint64_t{s.batches}, s.g_max_hat, e.g_max, s.g_back_hat, e.g_back, s.var_max_hat,
                               e.var_max, s.var_back_hat, e.var_back, s.cov_hat, e.cov, s.signal, e.signal, s.noise,
                               e.noise, s.snr_hat, e.snr, s.visibility_hat, e.visibility, ref.g_max, ref.g_back,
                               ref.snr, ref.visibility, zs[0], zs[1], zs[2], zs[3], agree});
        if (timing)
          timing->add(index, "n=" + std::to_string(n) + " M=" + std::to_string(m) + " I=" + format_number(i),
                      seconds_since(t0));
        ++index;
      }
  return outcome;
}

inline int cmd_mc(const json& config, const fs::path& out, unsigned threads, std::ostream& log = std::cerr) {
  ensure_dir(out);
  Timing timing;
  auto outcome = mc_table(config, threads, &timing);
  outcome.table.write(out / "mc.csv");
  timing.table.write(out / "mc_timing.csv");
  log << "mc: wrote " << (out / "mc.csv").string() << (outcome.all_agree ? "" : " (agreement flags exceeded)") << "\n";
  return outcome.all_agree ? 0 : 1;
}

// ------------------------------------------------------------------- image

inline ImagingPlan imaging_plan(const json& config) {
  const json& c = config.at("image");
  ImagingPlan plan;
  plan.speckle.width = detail::field<int>(c.at("width"), "image.width");
  plan.speckle.height = detail::field<int>(c.at("height"), "image.height");
  plan.speckle.speckle_fwhm = detail::field<double>(c.at("speckle_fwhm"), "image.speckle_fwhm");
  plan.speckle.mean_intensity = detail::field<double>(c.at("mean_intensity"), "image.mean_intensity");
  plan.speckle.frames = detail::field<std::uint64_t>(c.at("frames"), "image.frames");
  plan.speckle.seed = config.at("seed").get<std::uint64_t>();
  plan.orders = detail::list<int>(c.at("orders"), "image.orders");
  plan.s_scale = detail::field<double>(c.at("s_scale"), "image.s_scale");
  plan.frames_per_chunk = detail::field<std::size_t>(c.at("frames_per_chunk"), "image.frames_per_chunk");
  plan.detector_noise = {detail::field<double>(c.at("detector_noise"), "image.detector_noise"), plan.speckle.seed};
  const auto mode = detail::field<std::string>(c.at("noise_mode"), "image.noise_mode");
  if (mode == "slit_pixels")
    plan.noise_mode = NoiseMode::slit_pixels;
  else if (mode == "background_pixels")
    plan.noise_mode = NoiseMode::background_pixels;
  else
    throw ConfigError("image.noise_mode: expected 'slit_pixels' or 'background_pixels', got '" + mode + "'");
  const auto norm = detail::field<std::string>(c.at("normalization"), "image.normalization");
  if (norm == "none")
    plan.normalization = GhostNormalization::none;
  else if (norm == "marginal")
    plan.normalization = GhostNormalization::marginal;
  else
    throw ConfigError("image.normalization: expected 'none' or 'marginal', got '" + norm + "'");

  plan.slit_widths = detail::list<int>(c.at("slit_widths"), "image.slit_widths", true);
  if (plan.slit_widths.empty()) {
    for (int m : detail::list<int>(c.at("slit_modes"), "image.slit_modes"))
      plan.slit_widths.push_back(static_cast<int>(std::lround(m * plan.speckle.speckle_fwhm * plan.s_scale)));
  }
  plan.export_widths = detail::list<int>(c.at("export_widths"), "image.export_widths", true);
  if (plan.export_widths.empty()) {
    const auto [lo, hi] = std::minmax_element(plan.slit_widths.begin(), plan.slit_widths.end());
    plan.export_widths.push_back(*lo);
    if (*hi != *lo) plan.export_widths.push_back(*hi);
  }
  plan.validate();
  return plan;
}

struct ImageOutcome {
  ImagingResult result;
  std::vector<fs::path> files;
};

inline ImageOutcome run_image(const json& config, const fs::path& out, unsigned threads, Timing* timing = nullptr) {
  ensure_dir(out);
  const ImagingPlan plan = imaging_plan(config);
  const json& c = config.at("image");
  const auto frames_in = detail::field<std::string>(c.at("frames_in"), "image.frames_in");
  const auto save_frames = detail::field<std::uint64_t>(c.at("save_frames"), "image.save_frames");

  ImageOutcome outcome;
  const auto t0 = std::chrono::steady_clock::now();
  std::unique_ptr<FrameWriter> writer;
  std::uint64_t frame_count = plan.speckle.frames;
  std::vector<SpeckleFrame> loaded;
  if (!frames_in.empty()) {
    loaded = read_frames(frames_in);
    frame_count = loaded.size();
  }
  const std::uint64_t to_save = std::min(save_frames, frame_count);
  if (to_save > 0) {
    outcome.files.push_back(out / "frames.gifr");
    writer = std::make_unique<FrameWriter>(outcome.files.back(), plan.speckle.width, plan.speckle.height,
                                           static_cast<std::uint32_t>(to_save));
  }
  FrameSink sink;
  if (writer)
    sink = [&](std::uint64_t f, const SpeckleFrame& frame) {
      if (f < to_save) writer->append(frame);
    };
  if (!loaded.empty()) {
    outcome.result = run_imaging(
        plan, [&](std::uint64_t f) { return loaded[f]; }, frame_count, threads, sink);
  } else {
    outcome.result = run_imaging(plan, threads, sink);
  }
  if (writer) writer->close();
  if (timing) timing->add(0, "imaging", seconds_since(t0));

  const auto& r = outcome.result;
  for (std::size_t i = 0; i < r.exported.size(); ++i) {
    const std::string stem =
        "ghost_n" + std::to_string(r.exported[i].order) + "_w" + std::to_string(r.exported_widths[i]);
    outcome.files.push_back(out / (stem + ".gifr"));
    write_ghost_image(outcome.files.back(), r.exported[i]);
    outcome.files.push_back(out / (stem + ".pgm"));
    write_pgm(outcome.files.back(), r.exported[i]);
  }

  CsvTable metrics({"slit_width", "raw_width_fwhm", "m_eff", "order", "visibility", "model_visibility",
                    "rel_residual", "snr_normalized", "signal", "noise", "slit_mean", "background_mean",
                    "noise_degenerate", "f_n", "frames"});
  stamp(metrics, config, "image");
  for (const auto& row : r.rows) {
    const auto& m = row.metrics;
    metrics.add_row({std::int64_t{row.slit_width}, m.raw_width, m.effective_modes, std::int64_t{row.order},
                     m.visibility, row.model_visibility, row.rel_residual, m.snr_normalized, m.signal, m.noise,
                     m.slit_mean, m.background_mean, m.noise_degenerate, r.calibration[row.order], r.frames_used});
  }
  outcome.files.push_back(out / "image_metrics.csv");
  metrics.write(outcome.files.back());

  // Wide per-order curves, one row per slit width.
  std::vector<std::string> vis_cols{"slit_width", "m_eff"}, snr_cols{"slit_width", "m_eff"};
  for (int n : plan.orders) {
    vis_cols.push_back("visibility_n" + std::to_string(n));
    vis_cols.push_back("model_n" + std::to_string(n));
    snr_cols.push_back("snr_normalized_n" + std::to_string(n));
  }
  CsvTable vis(vis_cols), snr(snr_cols);
  stamp(vis, config, "image/visibility_vs_modes");
  stamp(snr, config, "image/snr_vs_modes");
  const std::size_t no = plan.orders.size();
  for (std::size_t s = 0; s < plan.slit_widths.size(); ++s) {
    std::vector<CsvCell> vrow{std::int64_t{plan.slit_widths[s]}, r.rows[s * no].metrics.effective_modes};
    std::vector<CsvCell> srow = vrow;
    for (std::size_t o = 0; o < no; ++o) {
      vrow.push_back(r.rows[s * no + o].metrics.visibility);
      vrow.push_back(r.rows[s * no + o].model_visibility);
      srow.push_back(r.rows[s * no + o].metrics.snr_normalized);
    }
    vis.add_row(vrow);
    snr.add_row(srow);
  }
  outcome.files.push_back(out / "visibility_vs_modes.csv");
  vis.write(outcome.files.back());
  outcome.files.push_back(out / "snr_vs_modes.csv");
  snr.write(outcome.files.back());

  CsvTable calib({"quantity", "value"});
  stamp(calib, config, "image/calibration");
  for (std::size_t k = 2; k < r.calibration.size(); ++k) calib.add_row({"F_" + std::to_string(k), r.calibration[k]});
  calib.add_row({std::string("s_scale_fit"), r.fit.s_scale});
  calib.add_row({std::string("max_rel_residual"), r.fit.max_rel_residual});
  outcome.files.push_back(out / "calibration.csv");
  calib.write(outcome.files.back());
  return outcome;
}

inline int cmd_image(const json& config, const fs::path& out, unsigned threads, std::ostream& log = std::cerr) {
  Timing timing;
  const auto outcome = run_image(config, out, threads, &timing);
  timing.table.write(out / "image_timing.csv");
  log << "image: " << outcome.result.frames_used << " frames, fitted s_scale "
      << format_number(outcome.result.fit.s_scale) << ", max visibility residual "
      << format_number(outcome.result.fit.max_rel_residual) << "\n";
  return 0;
}

}  // namespace ghostlab::cli
