#ifndef TSDOA_EXPERIMENT_HPP
#define TSDOA_EXPERIMENT_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "tsdoa/estimator.hpp"
#include "tsdoa/simulate.hpp"

namespace tsdoa {

enum class SweepVariable { SnrDb, NumSnapshots, SpreadDeg };
enum class EstimatorKind { Stage1, Stage2 };
enum class OutputFormat { Csv, Json };

std::string to_string(SweepVariable v);
std::string to_string(EstimatorKind e);

/// Scene template the sweep perturbs; SNR is per-source power over noise
/// power, referenced to the first source.
struct SceneTemplate {
  int num_sensors = 16;
  int num_calibrated = 8;
  std::vector<SourceTruth> sources;
  double sigma_rho = 0.1;
  double sigma_phi_deg = 40.0;
  double snr_db = 0.0;
  int num_snapshots = 200;
};

struct SolverSettings {
  int lambda_grid_size = 20;
  double lambda_min_factor = 1e-3;
  double stls_epsilon = 1e-6;
  int stls_max_iter = 30;
  double lasso_tol = 1e-8;
  int lasso_max_iter = 5000;
  double peak_rel_threshold = 0.05;
  bool known_source_count = true;
  bool assume_noise_known = true;  ///< pass the scene's true noise variance
  int noise_max_sources = 0;       ///< 0 = auto (estimated-noise path)
};

struct ExperimentConfig {
  SceneTemplate scene;
  SweepVariable sweep_var = SweepVariable::SnrDb;
  std::vector<double> sweep_values;  ///< defaults to the scene's own value
  int trials = 300;
  uint64_t seed = 20250810;
  int threads = 0;  ///< 0 = hardware concurrency; affects wall time only
  double grid_resolution_deg = 0.5;
  std::vector<EstimatorKind> estimators = {EstimatorKind::Stage1,
                                           EstimatorKind::Stage2};
  SolverSettings solver;

  void validate() const;
  SceneTemplate scene_at(int sweep_index) const;
  PipelineConfig pipeline_config() const;
};

/// One Monte Carlo trial. Failure = the estimator did not return exactly K
/// peaks (or the pipeline threw); failed trials are excluded from RMSE.
struct TrialResult {
  std::vector<double> stage1_doas_deg;
  std::vector<double> stage2_doas_deg;
  bool stage1_ok = false;
  bool stage2_ok = false;
  bool pipeline_error = false;
  std::string error_stage;
  double runtime_ms = 0.0;
  bool stls_converged = false;
  bool stls_trace_nonincreasing = true;
  int stls_iterations = 0;
};

struct RmseRow {
  EstimatorKind estimator;
  double sweep_value = 0.0;
  double rmse_deg = 0.0;
  double failure_rate = 0.0;
  int trials_used = 0;
  double mean_runtime_ms = 0.0;
};

struct RmseTable {
  SweepVariable sweep_var = SweepVariable::SnrDb;
  int trials = 0;
  std::vector<RmseRow> rows;
};

/// Order-statistic pairing: both lists sorted ascending, then RMS difference.
double rmse(std::vector<double> estimated, std::vector<double> truth);

/// Runs every trial at one sweep value on a worker pool. Child seeds derive
/// from (seed, sweep_index, trial), so results do not depend on thread count.
std::vector<TrialResult> run_trials(const ExperimentConfig& config,
                                    int sweep_index);

RmseTable run_monte_carlo(const ExperimentConfig& config);

ExperimentConfig load_experiment_config(const std::string& path);
ExperimentConfig parse_experiment_config(const std::string& json_text);

std::string format_table(const RmseTable& table, OutputFormat format);

/// Spectra normalized to unit maximum, one (angle, value) pair per grid point.
std::string format_spectra(
    const std::vector<std::pair<std::string, SparseSpectrum>>& spectra,
    OutputFormat format);

std::string format_snapshots(const SnapshotMatrix& z, OutputFormat format);
std::string format_estimate(const EstimationResult& result, OutputFormat format);

/// Writes `text` to `path`; throws on I/O failure naming the path.
void write_file(const std::string& path, const std::string& text);

}  // namespace tsdoa

#endif
