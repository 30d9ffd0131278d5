#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "acceptance.hpp"
#include "commands.hpp"

namespace {

using ghostlab::cli::json;

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<unsigned> threads;
  std::vector<std::string> sets;
};

// "a.b.c=<json>" ; bare words that are not valid JSON are taken as strings.
void apply_set(json& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ghostlab::ConfigError("--set expects key.path=value, got '" + assignment + "'");
  const std::string path = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  json patch = value;
  std::string rest = path;
  std::vector<std::string> keys;
  for (std::size_t dot; (dot = rest.find('.')) != std::string::npos; rest = rest.substr(dot + 1))
    keys.push_back(rest.substr(0, dot));
  keys.push_back(rest);
  for (auto it = keys.rbegin(); it != keys.rend(); ++it) patch = json{{*it, patch}};
  ghostlab::cli::merge_config(config, patch);
}

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_path, "JSON config file (unset fields keep their defaults)");
  cmd->add_option("--seed", c.seed, "master seed");
  cmd->add_option("--out", c.out, "output directory");
  cmd->add_option("--threads", c.threads, "worker threads, 0 = auto (env GHOSTLAB_THREADS)");
  cmd->add_option("--set", c.sets, "override a config field, e.g. --set mc.trials=2e5")->take_all();
}

json resolve(const Common& c) {
  json config = c.config_path.empty() ? ghostlab::cli::default_config() : ghostlab::cli::load_config_file(c.config_path);
  for (const auto& s : c.sets) apply_set(config, s);
  if (c.seed) config["seed"] = *c.seed;
  if (c.out) config["out"] = *c.out;
  if (c.threads) config["threads"] = *c.threads;
  return config;
}

unsigned threads_of(const json& config) {
  return ghostlab::resolve_threads(ghostlab::cli::detail::field<unsigned>(config.at("threads"), "threads"));
}

std::string out_of(const json& config) { return ghostlab::cli::detail::field<std::string>(config.at("out"), "out"); }

template <class T>
void override_if(json& node, const char* key, const std::optional<T>& v) {
  if (v) node[key] = *v;
}

template <class T>
void override_list(json& node, const char* key, const std::vector<T>& v) {
  if (!v.empty()) node[key] = v;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ghostlab: higher-order thermal ghost imaging toolkit"};
  app.set_version_flag("--version", std::string(ghostlab::kVersion));
  app.require_subcommand(1);

  Common analytic_opts, mc_opts, image_opts, self_opts;

  auto* analytic = app.add_subcommand("analytic", "closed-form visibility/SNR curves and SPDC comparison");
  add_common(analytic, analytic_opts);
  std::vector<int> a_orders, a_modes;
  std::vector<double> a_intensities;
  analytic->add_option("--orders", a_orders, "correlation orders");
  analytic->add_option("--modes", a_modes, "mode counts M");
  analytic->add_option("--intensities", a_intensities, "mean photons per mode");

  auto* mc = app.add_subcommand("mc", "Monte-Carlo estimates checked against the closed forms");
  add_common(mc, mc_opts);
  std::vector<int> m_orders, m_modes;
  std::vector<double> m_intensities;
  std::optional<std::uint64_t> m_trials, m_batches;
  std::optional<std::string> m_regime;
  mc->add_option("--orders", m_orders, "correlation orders");
  mc->add_option("--modes", m_modes, "mode counts M");
  mc->add_option("--intensities", m_intensities, "mean photons per mode");
  mc->add_option("--trials", m_trials, "trials per sweep point");
  mc->add_option("--batches", m_batches, "batches for standard errors");
  mc->add_option("--regime", m_regime, "classical | photocount_factorial | photocount_plain");

  auto* image = app.add_subcommand("image", "synthetic speckle ghost-imaging experiment");
  add_common(image, image_opts);
  std::optional<std::uint64_t> i_frames, i_save;
  std::optional<double> i_fwhm;
  std::optional<int> i_width, i_height;
  std::optional<std::string> i_noise, i_norm, i_frames_in;
  std::vector<int> i_slit_modes, i_orders;
  image->add_option("--frames", i_frames, "number of speckle frames");
  image->add_option("--fwhm", i_fwhm, "speckle FWHM in pixels");
  image->add_option("--width", i_width, "grid width");
  image->add_option("--height", i_height, "grid height");
  image->add_option("--orders", i_orders, "ghost-image orders");
  image->add_option("--slit-modes", i_slit_modes, "slit widths in units of FWHM * s_scale");
  image->add_option("--noise-mode", i_noise, "slit_pixels | background_pixels");
  image->add_option("--normalization", i_norm, "none | marginal");
  image->add_option("--save-frames", i_save, "store the first K frames in frames.gifr");
  image->add_option("--frames-in", i_frames_in, "read frames from a GIFR file instead of synthesizing");

  auto* selftest = app.add_subcommand("selftest", "run the acceptance criteria");
  add_common(selftest, self_opts);
  std::vector<int> criteria;
  selftest->add_option("--criteria", criteria, "subset of criteria (1-9), default all");

  CLI11_PARSE(app, argc, argv);

  try {
    if (analytic->parsed()) {
      json config = resolve(analytic_opts);
      override_list(config["analytic"], "orders", a_orders);
      override_list(config["analytic"], "modes", a_modes);
      override_list(config["analytic"], "intensities", a_intensities);
      return ghostlab::cli::cmd_analytic(config, out_of(config));
    }
    if (mc->parsed()) {
      json config = resolve(mc_opts);
      json& m = config["mc"];
      override_list(m, "orders", m_orders);
      override_list(m, "modes", m_modes);
      override_list(m, "intensities", m_intensities);
      override_if(m, "trials", m_trials);
      override_if(m, "batches", m_batches);
      override_if(m, "regime", m_regime);
      return ghostlab::cli::cmd_mc(config, out_of(config), threads_of(config));
    }
    if (image->parsed()) {
      json config = resolve(image_opts);
      json& c = config["image"];
      override_if(c, "frames", i_frames);
      override_if(c, "speckle_fwhm", i_fwhm);
      override_if(c, "width", i_width);
      override_if(c, "height", i_height);
      override_list(c, "orders", i_orders);
      override_list(c, "slit_modes", i_slit_modes);
      override_if(c, "noise_mode", i_noise);
      override_if(c, "normalization", i_norm);
      override_if(c, "save_frames", i_save);
      override_if(c, "frames_in", i_frames_in);
      return ghostlab::cli::cmd_image(config, out_of(config), threads_of(config));
    }
    if (selftest->parsed()) {
      const json config = resolve(self_opts);
      ghostlab::acceptance::Options o;
      o.seed = config.at("seed").get<std::uint64_t>();
      if (!self_opts.seed) o.seed = ghostlab::acceptance::Options{}.seed;
      o.threads = threads_of(config);
      o.out = out_of(config);
      o.criteria = criteria;
      return ghostlab::acceptance::run(o) ? 0 : 1;
    }
  } catch (const ghostlab::Error& e) {
    std::cerr << "ghostlab: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "ghostlab: unexpected failure: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
