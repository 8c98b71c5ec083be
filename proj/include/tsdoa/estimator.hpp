#ifndef TSDOA_ESTIMATOR_HPP
#define TSDOA_ESTIMATOR_HPP

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "tsdoa/covariance.hpp"
#include "tsdoa/solvers.hpp"
#include "tsdoa/steering.hpp"

namespace tsdoa {

enum class Stage { One, Two };

struct SparseSpectrum {
  AngularGrid grid;
  Eigen::VectorXd values;  ///< nonnegative, one per grid angle
  Stage stage;
};

struct PeakExtraction {
  std::vector<double> doas_deg;  ///< sorted ascending
  bool all_zero = false;
};

/// Local maxima of the spectrum (plateaus keep their leftmost index).
/// num_sources > 0 returns the that many largest peaks; 0 means unknown and
/// returns every peak above rel_threshold * max(values).
PeakExtraction extract_peaks(const SparseSpectrum& spectrum, int num_sources,
                             double rel_threshold = 0.05);

/// Least-squares power estimate from the stage-1 augmented vector at the
/// estimated DOAs. Throws IllConditionedError for near-coincident angles.
Eigen::VectorXd refine_power(const Eigen::VectorXcd& r_1,
                             const std::vector<double>& doas_deg,
                             int num_calibrated,
                             double* imag_residue = nullptr);

/// Per-sensor gain estimate r_2(m) / (A_hat p_hat)(m) on the uncalibrated
/// tail; calibrated entries are exactly 1. Power entries are clamped at 1e-12
/// before entering the denominator.
Eigen::VectorXcd estimate_gain_phase(const Eigen::VectorXcd& r_2,
                                     const std::vector<double>& doas_deg,
                                     const Eigen::VectorXd& p_hat,
                                     const UlaConfig& config);

/// Pipeline knobs; defaults reproduce the reference configuration.
struct PipelineConfig {
  UlaConfig ula;
  double grid_resolution_deg = 0.5;
  int num_sources = 0;  ///< 0 = unknown (threshold-based peak extraction)
  double peak_rel_threshold = 0.05;
  std::optional<double> known_noise_var;  ///< unset = eigenvalue estimate
  int noise_max_sources = 0;              ///< 0 = auto (2K known, else M/2)
  int lambda_grid_size = 20;
  double lambda_min_factor = 1e-3;
  double stls_epsilon = 1e-6;
  int stls_max_iter = 30;
  double lasso_tol = 1e-8;
  int lasso_max_iter = 5000;
};

struct StageEstimate {
  SparseSpectrum spectrum;
  std::vector<double> doas_deg;
  double lambda = 0.0;
  int iterations = 0;
  bool solver_converged = false;
  bool lcurve_degenerate = false;
  bool all_zero_spectrum = false;
  bool resolved = false;  ///< peak count == requested source count
};

/// First stage: L-curve lasso on (Phi, r_1), then peak extraction.
StageEstimate stage1_estimate(const CovarianceProducts& products,
                              const Dictionary& dict_phi, int num_sources,
                              const PipelineConfig& config);

/// Second stage: alternating sparse total least squares on (Psi, r_4),
/// seeded from the stage-1 spectrum.
StageEstimate stage2_estimate(const Eigen::VectorXcd& r_4,
                              const Dictionary& dict_psi, double lambda,
                              const SparseSpectrum& stage1_spectrum,
                              int num_sources, const PipelineConfig& config,
                              std::vector<double>* objective_trace = nullptr);

struct Diagnostics {
  double noise_var = 0.0;
  double lambda_stage1 = 0.0;
  double lambda_stage2 = 0.0;
  int stage1_iterations = 0;
  int stage2_iterations = 0;
  bool stage1_resolved = false;
  bool stage2_resolved = false;
  bool stage2_ran = false;
  bool lcurve_degenerate_stage1 = false;
  bool lcurve_degenerate_stage2 = false;
  bool stls_converged = false;
  bool power_clamped = false;      ///< some refined power hit the 1e-12 floor
  double power_imag_residue = 0.0; ///< |Im| left behind by the power solve
  std::vector<double> stage2_objective_trace;
};

struct EstimationResult {
  std::vector<double> stage1_doas_deg;
  std::vector<double> stage2_doas_deg;
  Eigen::VectorXcd gain_phase_est;
  Eigen::VectorXd power_est;
  std::optional<SparseSpectrum> stage1_spectrum;
  std::optional<SparseSpectrum> stage2_spectrum;
  Diagnostics diagnostics;
};

/// Full pipeline: covariance -> stage 1 -> power -> gain-phase -> compensate
/// -> stage 2. Errors from any stage rethrow as PipelineError with the stage
/// name. A stage-1 spectrum with no peaks skips stage 2 and flags the result.
EstimationResult two_stage_pipeline(const SnapshotMatrix& z,
                                    const PipelineConfig& config);

}  // namespace tsdoa

#endif
