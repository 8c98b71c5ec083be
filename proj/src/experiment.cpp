#include "tsdoa/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <nlohmann/json.hpp>

#include "tsdoa/errors.hpp"

namespace tsdoa {

using json = nlohmann::ordered_json;

std::string to_string(SweepVariable v) {
  switch (v) {
    case SweepVariable::SnrDb: return "snr_db";
    case SweepVariable::NumSnapshots: return "num_snapshots";
    case SweepVariable::SpreadDeg: return "spread_deg";
  }
  return "?";
}

std::string to_string(EstimatorKind e) {
  return e == EstimatorKind::Stage1 ? "stage1" : "stage2";
}

namespace {

std::string fmt6(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

void reject_unknown_keys(const json& obj, const std::set<std::string>& allowed,
                         const std::string& context) {
  for (const auto& item : obj.items()) {
    if (!allowed.count(item.key())) {
      throw ConfigError("unknown key '" + item.key() + "' in " + context);
    }
  }
}

double require_number(const json& obj, const std::string& key, double fallback,
                      const std::string& context) {
  if (!obj.contains(key)) return fallback;
  if (!obj.at(key).is_number()) {
    throw ConfigError("key '" + key + "' in " + context + " must be a number");
  }
  return obj.at(key).get<double>();
}

DeviationLaw parse_law(const std::string& s) {
  if (s == "gaussian") return DeviationLaw::Gaussian;
  if (s == "uniform") return DeviationLaw::Uniform;
  throw ConfigError("deviation_law must be 'gaussian' or 'uniform', got '" + s + "'");
}

}  // namespace

void ExperimentConfig::validate() const {
  UlaConfig ula{scene.num_sensors, scene.num_calibrated};
  try {
    ula.validate();
    for (const auto& s : scene.sources) s.validate();
  } catch (const std::domain_error& e) {
    throw ConfigError(e.what());
  }
  if (scene.sources.empty()) throw ConfigError("scene.sources must be nonempty");
  for (size_t i = 0; i < scene.sources.size(); ++i) {
    for (size_t j = i + 1; j < scene.sources.size(); ++j) {
      if (scene.sources[i].theta_deg == scene.sources[j].theta_deg) {
        throw ConfigError("scene.sources angles must be pairwise distinct");
      }
    }
  }
  if (scene.sigma_rho < 0 || scene.sigma_rho >= 1.0 / std::sqrt(3.0)) {
    throw ConfigError("scene.sigma_rho must lie in [0, 1/sqrt(3))");
  }
  if (scene.sigma_phi_deg < 0) throw ConfigError("scene.sigma_phi_deg must be >= 0");
  if (scene.num_snapshots < 1) throw ConfigError("scene.num_snapshots must be >= 1");
  if (trials < 1) throw ConfigError("trials must be >= 1");
  if (sweep_values.empty()) throw ConfigError("sweep.values must be nonempty");
  if (!std::is_sorted(sweep_values.begin(), sweep_values.end())) {
    throw ConfigError("sweep.values must be sorted ascending");
  }
  if (sweep_var == SweepVariable::NumSnapshots) {
    for (double v : sweep_values) {
      if (v < 1 || v != std::floor(v)) {
        throw ConfigError("num_snapshots sweep values must be positive integers");
      }
    }
  }
  if (sweep_var == SweepVariable::SpreadDeg) {
    for (double v : sweep_values) {
      if (v < 0) throw ConfigError("spread_deg sweep values must be >= 0");
    }
  }
  if (grid_resolution_deg <= 0) throw ConfigError("grid_resolution_deg must be > 0");
  if (estimators.empty()) throw ConfigError("estimators must be nonempty");
  if (threads < 0) throw ConfigError("threads must be >= 0");
}

SceneTemplate ExperimentConfig::scene_at(int sweep_index) const {
  SceneTemplate s = scene;
  const double value = sweep_values[static_cast<size_t>(sweep_index)];
  switch (sweep_var) {
    case SweepVariable::SnrDb:
      s.snr_db = value;
      break;
    case SweepVariable::NumSnapshots:
      s.num_snapshots = static_cast<int>(value);
      break;
    case SweepVariable::SpreadDeg:
      for (auto& src : s.sources) src.spread_deg = value;
      break;
  }
  return s;
}

PipelineConfig ExperimentConfig::pipeline_config() const {
  PipelineConfig p;
  p.ula = UlaConfig{scene.num_sensors, scene.num_calibrated};
  p.grid_resolution_deg = grid_resolution_deg;
  p.num_sources =
      solver.known_source_count ? static_cast<int>(scene.sources.size()) : 0;
  p.peak_rel_threshold = solver.peak_rel_threshold;
  p.noise_max_sources = solver.noise_max_sources;
  p.lambda_grid_size = solver.lambda_grid_size;
  p.lambda_min_factor = solver.lambda_min_factor;
  p.stls_epsilon = solver.stls_epsilon;
  p.stls_max_iter = solver.stls_max_iter;
  p.lasso_tol = solver.lasso_tol;
  p.lasso_max_iter = solver.lasso_max_iter;
  return p;
}

double rmse(std::vector<double> estimated, std::vector<double> truth) {
  if (estimated.size() != truth.size()) {
    throw std::domain_error("rmse requires equal-length DOA lists");
  }
  if (estimated.empty()) throw std::domain_error("rmse of empty lists");
  std::sort(estimated.begin(), estimated.end());
  std::sort(truth.begin(), truth.end());
  double acc = 0.0;
  for (size_t i = 0; i < truth.size(); ++i) {
    const double d = estimated[i] - truth[i];
    acc += d * d;
  }
  return std::sqrt(acc / static_cast<double>(truth.size()));
}

namespace {

bool trace_nonincreasing(const std::vector<double>& trace) {
  for (size_t i = 1; i < trace.size(); ++i) {
    if (trace[i] > trace[i - 1] * (1 + 1e-12) + 1e-12) return false;
  }
  return true;
}

TrialResult run_one_trial(const ExperimentConfig& config, int sweep_index,
                          int trial) {
  const SceneTemplate tpl = config.scene_at(sweep_index);
  const UlaConfig ula{tpl.num_sensors, tpl.num_calibrated};
  const uint64_t child =
      derive_seed(config.seed, static_cast<uint64_t>(sweep_index),
                  static_cast<uint64_t>(trial));

  SceneTruth scene;
  scene.ula = ula;
  scene.sources = tpl.sources;
  scene.gain_phase = draw_gain_phase(tpl.sigma_rho, tpl.sigma_phi_deg, ula,
                                     derive_seed(child, 0xA1, 0));
  scene.noise_var =
      tpl.sources.front().power * std::pow(10.0, -tpl.snr_db / 10.0);

  const SnapshotMatrix z =
      generate_snapshots(scene, tpl.num_snapshots, derive_seed(child, 0xB2, 0));

  const int k = static_cast<int>(tpl.sources.size());
  TrialResult out;
  PipelineConfig pcfg = config.pipeline_config();
  if (config.solver.assume_noise_known) pcfg.known_noise_var = scene.noise_var;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    const EstimationResult res = two_stage_pipeline(z, pcfg);
    out.stage1_doas_deg = res.stage1_doas_deg;
    out.stage2_doas_deg = res.stage2_doas_deg;
    out.stage1_ok = static_cast<int>(res.stage1_doas_deg.size()) == k;
    out.stage2_ok = res.diagnostics.stage2_ran &&
                    static_cast<int>(res.stage2_doas_deg.size()) == k;
    out.stls_converged = res.diagnostics.stls_converged;
    out.stls_iterations = res.diagnostics.stage2_iterations;
    out.stls_trace_nonincreasing =
        trace_nonincreasing(res.diagnostics.stage2_objective_trace);
  } catch (const PipelineError& e) {
    out.pipeline_error = true;
    out.error_stage = e.stage();
  }
  out.runtime_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                t0)
          .count();
  return out;
}

void parallel_for(int count, int threads, const std::function<void(int)>& body) {
  int t = threads > 0 ? threads
                      : static_cast<int>(std::thread::hardware_concurrency());
  if (t < 1) t = 1;
  t = std::min(t, count);
  if (t <= 1) {
    for (int i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  pool.reserve(static_cast<size_t>(t));
  for (int w = 0; w < t; ++w) {
    pool.emplace_back([&] {
      for (int i = next.fetch_add(1); i < count; i = next.fetch_add(1)) body(i);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace

std::vector<TrialResult> run_trials(const ExperimentConfig& config,
                                    int sweep_index) {
  config.validate();
  std::vector<TrialResult> results(static_cast<size_t>(config.trials));
  parallel_for(config.trials, config.threads, [&](int trial) {
    results[static_cast<size_t>(trial)] = run_one_trial(config, sweep_index, trial);
  });
  return results;
}

RmseTable run_monte_carlo(const ExperimentConfig& config) {
  config.validate();
  RmseTable table;
  table.sweep_var = config.sweep_var;
  table.trials = config.trials;

  std::vector<double> truth;
  truth.reserve(config.scene.sources.size());
  for (const auto& s : config.scene.sources) truth.push_back(s.theta_deg);
  std::sort(truth.begin(), truth.end());

  const int num_values = static_cast<int>(config.sweep_values.size());
  std::vector<std::vector<TrialResult>> all(static_cast<size_t>(num_values));
  for (int v = 0; v < num_values; ++v) all[static_cast<size_t>(v)] = run_trials(config, v);

  for (EstimatorKind est : config.estimators) {
    for (int v = 0; v < num_values; ++v) {
      RmseRow row;
      row.estimator = est;
      row.sweep_value = config.sweep_values[static_cast<size_t>(v)];
      double sq_sum = 0.0;
      double rt_sum = 0.0;
      int used = 0;
      for (const TrialResult& tr : all[static_cast<size_t>(v)]) {
        rt_sum += tr.runtime_ms;
        const bool ok = est == EstimatorKind::Stage1 ? tr.stage1_ok : tr.stage2_ok;
        if (!ok) continue;
        const auto& doas = est == EstimatorKind::Stage1 ? tr.stage1_doas_deg
                                                        : tr.stage2_doas_deg;
        const double r = rmse(doas, truth);
        sq_sum += r * r;
        ++used;
      }
      row.trials_used = used;
      row.failure_rate =
          static_cast<double>(config.trials - used) / config.trials;
      row.rmse_deg = used > 0 ? std::sqrt(sq_sum / used) : 0.0;
      row.mean_runtime_ms = rt_sum / config.trials;
      table.rows.push_back(row);
    }
  }
  return table;
}

namespace {

ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig cfg;
  reject_unknown_keys(j,
                      {"scene", "sweep", "trials", "seed", "threads",
                       "grid_resolution_deg", "estimators", "solver"},
                      "config");
  if (!j.contains("scene") || !j.at("scene").is_object()) {
    throw ConfigError("config requires a 'scene' object");
  }

  const json& scene = j.at("scene");
  reject_unknown_keys(scene,
                      {"num_sensors", "num_calibrated", "sources", "num_paths",
                       "deviation_law", "sigma_rho", "sigma_phi_deg", "snr_db",
                       "num_snapshots"},
                      "scene");
  cfg.scene.num_sensors =
      static_cast<int>(require_number(scene, "num_sensors", 16, "scene"));
  cfg.scene.num_calibrated =
      static_cast<int>(require_number(scene, "num_calibrated", 8, "scene"));
  const int default_paths =
      static_cast<int>(require_number(scene, "num_paths", 20, "scene"));
  DeviationLaw default_law = DeviationLaw::Gaussian;
  if (scene.contains("deviation_law")) {
    default_law = parse_law(scene.at("deviation_law").get<std::string>());
  }
  cfg.scene.sigma_rho = require_number(scene, "sigma_rho", 0.1, "scene");
  cfg.scene.sigma_phi_deg = require_number(scene, "sigma_phi_deg", 40.0, "scene");
  cfg.scene.snr_db = require_number(scene, "snr_db", 0.0, "scene");
  cfg.scene.num_snapshots =
      static_cast<int>(require_number(scene, "num_snapshots", 200, "scene"));

  if (!scene.contains("sources") || !scene.at("sources").is_array() ||
      scene.at("sources").empty()) {
    throw ConfigError("scene.sources must be a nonempty array");
  }
  for (const json& s : scene.at("sources")) {
    reject_unknown_keys(
        s, {"theta_deg", "spread_deg", "power", "num_paths", "deviation_law"},
        "source");
    if (!s.contains("theta_deg")) throw ConfigError("source requires theta_deg");
    SourceTruth src;
    src.theta_deg = require_number(s, "theta_deg", 0.0, "source");
    src.spread_deg = require_number(s, "spread_deg", 0.0, "source");
    src.power = require_number(s, "power", 1.0, "source");
    src.num_paths =
        static_cast<int>(require_number(s, "num_paths", default_paths, "source"));
    src.deviation_law = s.contains("deviation_law")
                            ? parse_law(s.at("deviation_law").get<std::string>())
                            : default_law;
    cfg.scene.sources.push_back(src);
  }

  if (j.contains("sweep")) {
    const json& sweep = j.at("sweep");
    reject_unknown_keys(sweep, {"variable", "values"}, "sweep");
    const std::string var = sweep.at("variable").get<std::string>();
    if (var == "snr_db") cfg.sweep_var = SweepVariable::SnrDb;
    else if (var == "num_snapshots") cfg.sweep_var = SweepVariable::NumSnapshots;
    else if (var == "spread_deg") cfg.sweep_var = SweepVariable::SpreadDeg;
    else throw ConfigError("unknown sweep variable '" + var + "'");
    if (!sweep.contains("values") || !sweep.at("values").is_array()) {
      throw ConfigError("sweep.values must be an array");
    }
    for (const json& v : sweep.at("values")) {
      if (!v.is_number()) throw ConfigError("sweep.values must be numbers");
      cfg.sweep_values.push_back(v.get<double>());
    }
  } else {
    cfg.sweep_var = SweepVariable::SnrDb;
    cfg.sweep_values = {cfg.scene.snr_db};
  }

  cfg.trials = static_cast<int>(require_number(j, "trials", 300, "config"));
  if (j.contains("seed")) {
    if (!j.at("seed").is_number_unsigned() && !j.at("seed").is_number_integer()) {
      throw ConfigError("seed must be an integer");
    }
    cfg.seed = j.at("seed").get<uint64_t>();
  }
  cfg.threads = static_cast<int>(require_number(j, "threads", 0, "config"));
  cfg.grid_resolution_deg =
      require_number(j, "grid_resolution_deg", 0.5, "config");

  if (j.contains("estimators")) {
    cfg.estimators.clear();
    for (const json& e : j.at("estimators")) {
      const std::string name = e.get<std::string>();
      if (name == "stage1") cfg.estimators.push_back(EstimatorKind::Stage1);
      else if (name == "stage2") cfg.estimators.push_back(EstimatorKind::Stage2);
      else throw ConfigError("unknown estimator '" + name + "'");
    }
  }

  if (j.contains("solver")) {
    const json& s = j.at("solver");
    reject_unknown_keys(s,
                        {"lambda_grid_size", "lambda_min_factor", "stls_epsilon",
                         "stls_max_iterations", "lasso_tolerance",
                         "lasso_max_iterations", "peak_rel_threshold",
                         "known_source_count", "noise_max_sources",
                         "noise_variance"},
                        "solver");
    SolverSettings& so = cfg.solver;
    so.lambda_grid_size =
        static_cast<int>(require_number(s, "lambda_grid_size", 20, "solver"));
    so.lambda_min_factor = require_number(s, "lambda_min_factor", 1e-3, "solver");
    so.stls_epsilon = require_number(s, "stls_epsilon", 1e-6, "solver");
    so.stls_max_iter =
        static_cast<int>(require_number(s, "stls_max_iterations", 30, "solver"));
    so.lasso_tol = require_number(s, "lasso_tolerance", 1e-8, "solver");
    so.lasso_max_iter =
        static_cast<int>(require_number(s, "lasso_max_iterations", 5000, "solver"));
    so.peak_rel_threshold =
        require_number(s, "peak_rel_threshold", 0.05, "solver");
    if (s.contains("known_source_count")) {
      so.known_source_count = s.at("known_source_count").get<bool>();
    }
    so.noise_max_sources =
        static_cast<int>(require_number(s, "noise_max_sources", 0, "solver"));
    if (s.contains("noise_variance")) {
      const std::string policy = s.at("noise_variance").get<std::string>();
      if (policy == "known") so.assume_noise_known = true;
      else if (policy == "estimated") so.assume_noise_known = false;
      else throw ConfigError("noise_variance must be 'known' or 'estimated'");
    }
  }

  cfg.validate();
  return cfg;
}

}  // namespace

ExperimentConfig parse_experiment_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  return config_from_json(j);
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_experiment_config(ss.str());
}

std::string format_table(const RmseTable& table, OutputFormat format) {
  if (format == OutputFormat::Csv) {
    std::string out =
        "estimator,sweep_var,sweep_value,rmse_deg,failure_rate,trials_used\n";
    for (const RmseRow& r : table.rows) {
      out += to_string(r.estimator) + "," + to_string(table.sweep_var) + "," +
             fmt6(r.sweep_value) + "," + fmt6(r.rmse_deg) + "," +
             fmt6(r.failure_rate) + "," + std::to_string(r.trials_used) + "\n";
    }
    return out;
  }
  json j;
  j["sweep_var"] = to_string(table.sweep_var);
  j["trials"] = table.trials;
  j["rows"] = json::array();
  for (const RmseRow& r : table.rows) {
    j["rows"].push_back({{"estimator", to_string(r.estimator)},
                         {"sweep_value", r.sweep_value},
                         {"rmse_deg", r.rmse_deg},
                         {"failure_rate", r.failure_rate},
                         {"trials_used", r.trials_used},
                         {"mean_runtime_ms", r.mean_runtime_ms}});
  }
  return j.dump(2) + "\n";
}

std::string format_spectra(
    const std::vector<std::pair<std::string, SparseSpectrum>>& spectra,
    OutputFormat format) {
  auto normalized = [](const SparseSpectrum& s) {
    const double m = s.values.size() > 0 ? s.values.maxCoeff() : 0.0;
    return m > 0 ? (s.values / m).eval() : s.values;
  };
  if (format == OutputFormat::Csv) {
    std::string out = "estimator,angle_deg,value\n";
    for (const auto& [name, spec] : spectra) {
      const Eigen::VectorXd v = normalized(spec);
      for (int i = 0; i < v.size(); ++i) {
        out += name + "," + fmt6(spec.grid[i]) + "," + fmt6(v(i)) + "\n";
      }
    }
    return out;
  }
  json j = json::array();
  for (const auto& [name, spec] : spectra) {
    const Eigen::VectorXd v = normalized(spec);
    json angles = json::array(), values = json::array();
    for (int i = 0; i < v.size(); ++i) {
      angles.push_back(spec.grid[i]);
      values.push_back(v(i));
    }
    j.push_back({{"estimator", name}, {"angle_deg", angles}, {"value", values}});
  }
  return j.dump(2) + "\n";
}

std::string format_snapshots(const SnapshotMatrix& z, OutputFormat format) {
  if (format == OutputFormat::Csv) {
    std::string out = "snapshot,sensor,re,im\n";
    for (int t = 0; t < z.num_snapshots(); ++t) {
      for (int m = 0; m < z.num_sensors(); ++m) {
        out += std::to_string(t) + "," + std::to_string(m) + "," +
               fmt6(z.data(m, t).real()) + "," + fmt6(z.data(m, t).imag()) + "\n";
      }
    }
    return out;
  }
  json j;
  j["num_sensors"] = z.num_sensors();
  j["num_snapshots"] = z.num_snapshots();
  json re = json::array(), im = json::array();
  for (int m = 0; m < z.num_sensors(); ++m) {
    json rrow = json::array(), irow = json::array();
    for (int t = 0; t < z.num_snapshots(); ++t) {
      rrow.push_back(z.data(m, t).real());
      irow.push_back(z.data(m, t).imag());
    }
    re.push_back(rrow);
    im.push_back(irow);
  }
  j["re"] = re;
  j["im"] = im;
  return j.dump(2) + "\n";
}

std::string format_estimate(const EstimationResult& result, OutputFormat format) {
  if (format == OutputFormat::Csv) {
    std::string out = "estimator,doa_index,doa_deg\n";
    for (size_t i = 0; i < result.stage1_doas_deg.size(); ++i) {
      out += "stage1," + std::to_string(i) + "," + fmt6(result.stage1_doas_deg[i]) + "\n";
    }
    for (size_t i = 0; i < result.stage2_doas_deg.size(); ++i) {
      out += "stage2," + std::to_string(i) + "," + fmt6(result.stage2_doas_deg[i]) + "\n";
    }
    return out;
  }
  json j;
  j["stage1_doas_deg"] = result.stage1_doas_deg;
  j["stage2_doas_deg"] = result.stage2_doas_deg;
  json g = json::array();
  for (int m = 0; m < result.gain_phase_est.size(); ++m) {
    g.push_back({{"re", result.gain_phase_est(m).real()},
                 {"im", result.gain_phase_est(m).imag()}});
  }
  j["gain_phase_est"] = g;
  j["power_est"] = std::vector<double>(
      result.power_est.data(), result.power_est.data() + result.power_est.size());
  const Diagnostics& d = result.diagnostics;
  j["diagnostics"] = {{"noise_var", d.noise_var},
                      {"lambda_stage1", d.lambda_stage1},
                      {"lambda_stage2", d.lambda_stage2},
                      {"stage1_iterations", d.stage1_iterations},
                      {"stage2_iterations", d.stage2_iterations},
                      {"stage1_resolved", d.stage1_resolved},
                      {"stage2_resolved", d.stage2_resolved},
                      {"stage2_ran", d.stage2_ran},
                      {"lcurve_degenerate_stage1", d.lcurve_degenerate_stage1},
                      {"lcurve_degenerate_stage2", d.lcurve_degenerate_stage2},
                      {"stls_converged", d.stls_converged},
                      {"power_clamped", d.power_clamped},
                      {"power_imag_residue", d.power_imag_residue}};
  return j.dump(2) + "\n";
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace tsdoa
