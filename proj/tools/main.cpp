// Command-line front end: scenario simulation, single-scene estimation,
// Monte Carlo sweeps and normalized spectrum export.

#include <cstdio>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "tsdoa/errors.hpp"
#include "tsdoa/experiment.hpp"

namespace {

using tsdoa::ExperimentConfig;
using tsdoa::OutputFormat;

constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;
constexpr int kExitEstimation = 4;
constexpr int kExitInternal = 5;

struct CommonArgs {
  std::string config_path;
  std::string out_path;  // empty = stdout
  std::string format = "csv";
  std::optional<int> trials;
  std::optional<uint64_t> seed;
  std::optional<int> threads;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool with_trials = true) {
  cmd->add_option("--config", args.config_path, "experiment config (json)")
      ->required();
  cmd->add_option("--out", args.out_path, "output path (default: stdout)");
  cmd->add_option("--format", args.format, "csv or json")
      ->check(CLI::IsMember({"csv", "json"}));
  if (with_trials) cmd->add_option("--trials", args.trials, "override trial count");
  cmd->add_option("--seed", args.seed, "override base seed");
  cmd->add_option("--threads", args.threads,
                  "worker threads (wall time only, never results)");
}

ExperimentConfig load(const CommonArgs& args) {
  ExperimentConfig cfg = tsdoa::load_experiment_config(args.config_path);
  if (args.trials) cfg.trials = *args.trials;
  if (args.seed) cfg.seed = *args.seed;
  if (args.threads) cfg.threads = *args.threads;
  cfg.validate();
  return cfg;
}

OutputFormat format_of(const CommonArgs& args) {
  return args.format == "json" ? OutputFormat::Json : OutputFormat::Csv;
}

void emit(const CommonArgs& args, const std::string& text) {
  if (args.out_path.empty()) {
    std::fputs(text.c_str(), stdout);
  } else {
    tsdoa::write_file(args.out_path, text);
  }
}

// scene realization shared by simulate / estimate / spectrum: the first
// trial of the first sweep value, matching the sweep's own derivation
std::pair<tsdoa::SceneTruth, tsdoa::SnapshotMatrix> realize_scene(
    const ExperimentConfig& cfg) {
  const tsdoa::SceneTemplate tpl = cfg.scene_at(0);
  const tsdoa::UlaConfig ula{tpl.num_sensors, tpl.num_calibrated};
  const uint64_t child = tsdoa::derive_seed(cfg.seed, 0, 0);
  tsdoa::SceneTruth scene;
  scene.ula = ula;
  scene.sources = tpl.sources;
  scene.gain_phase = tsdoa::draw_gain_phase(tpl.sigma_rho, tpl.sigma_phi_deg, ula,
                                            tsdoa::derive_seed(child, 0xA1, 0));
  scene.noise_var =
      tpl.sources.front().power * std::pow(10.0, -tpl.snr_db / 10.0);
  auto z = tsdoa::generate_snapshots(scene, tpl.num_snapshots,
                                     tsdoa::derive_seed(child, 0xB2, 0));
  return {std::move(scene), std::move(z)};
}

tsdoa::EstimationResult run_estimate(const ExperimentConfig& cfg) {
  auto [scene, z] = realize_scene(cfg);
  tsdoa::PipelineConfig pcfg = cfg.pipeline_config();
  if (cfg.solver.assume_noise_known) pcfg.known_noise_var = scene.noise_var;
  return tsdoa::two_stage_pipeline(z, pcfg);
}

int fail(const char* category, const std::string& message, int code) {
  nlohmann::json err{{"category", category}, {"message", message}};
  std::fprintf(stderr, "%s\n", err.dump().c_str());
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"two-stage sparse DOA estimation for distributed sources"};
  app.require_subcommand(1);

  CommonArgs sim_args, est_args, sweep_args, spec_args;
  CLI::App* sim = app.add_subcommand("simulate", "emit raw array snapshots");
  add_common(sim, sim_args, false);
  CLI::App* est = app.add_subcommand("estimate", "run the pipeline on one scene");
  add_common(est, est_args, false);
  CLI::App* sweep = app.add_subcommand("sweep", "Monte Carlo RMSE table");
  add_common(sweep, sweep_args);
  CLI::App* spec =
      app.add_subcommand("spectrum", "normalized spatial spectra of one scene");
  add_common(spec, spec_args, false);

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) {
      const auto cfg = load(sim_args);
      auto [scene, z] = realize_scene(cfg);
      emit(sim_args, tsdoa::format_snapshots(z, format_of(sim_args)));
    } else if (est->parsed()) {
      const auto cfg = load(est_args);
      const auto result = run_estimate(cfg);
      emit(est_args, tsdoa::format_estimate(result, format_of(est_args)));
    } else if (sweep->parsed()) {
      const auto cfg = load(sweep_args);
      const auto table = tsdoa::run_monte_carlo(cfg);
      emit(sweep_args, tsdoa::format_table(table, format_of(sweep_args)));
    } else if (spec->parsed()) {
      const auto cfg = load(spec_args);
      const auto result = run_estimate(cfg);
      std::vector<std::pair<std::string, tsdoa::SparseSpectrum>> spectra;
      if (result.stage1_spectrum) spectra.emplace_back("stage1", *result.stage1_spectrum);
      if (result.stage2_spectrum) spectra.emplace_back("stage2", *result.stage2_spectrum);
      emit(spec_args, tsdoa::format_spectra(spectra, format_of(spec_args)));
    }
  } catch (const tsdoa::ConfigError& e) {
    return fail("config", e.what(), kExitConfig);
  } catch (const tsdoa::PipelineError& e) {
    return fail("estimation", e.what(), kExitEstimation);
  } catch (const tsdoa::NumericalFailureError& e) {
    return fail("estimation", e.what(), kExitEstimation);
  } catch (const std::domain_error& e) {
    return fail("config", e.what(), kExitConfig);
  } catch (const std::runtime_error& e) {
    return fail("io", e.what(), kExitIo);
  } catch (const std::exception& e) {
    return fail("internal", e.what(), kExitInternal);
  }
  return 0;
}
