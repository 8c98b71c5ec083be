#include "tsdoa/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "tsdoa/errors.hpp"

namespace tsdoa {

PeakExtraction extract_peaks(const SparseSpectrum& spectrum, int num_sources,
                             double rel_threshold) {
  if (!(rel_threshold > 0 && rel_threshold < 1)) {
    throw std::domain_error("rel_threshold must lie in (0, 1)");
  }
  if (num_sources < 0) throw std::domain_error("num_sources must be >= 0");
  const Eigen::VectorXd& v = spectrum.values;
  const int n = static_cast<int>(v.size());

  PeakExtraction out;
  const double vmax = n > 0 ? v.maxCoeff() : 0.0;
  if (vmax <= 0) {
    out.all_zero = true;
    return out;
  }

  // local maxima; a plateau counts once at its leftmost index
  std::vector<int> peaks;
  int i = 0;
  while (i < n) {
    int j = i;
    while (j + 1 < n && v(j + 1) == v(i)) ++j;
    const bool left_ok = i == 0 || v(i) > v(i - 1);
    const bool right_ok = j == n - 1 || v(i) > v(j + 1);
    if (v(i) > 0 && left_ok && right_ok) peaks.push_back(i);
    i = j + 1;
  }

  if (num_sources > 0) {
    std::sort(peaks.begin(), peaks.end(), [&](int a, int b) {
      if (v(a) != v(b)) return v(a) > v(b);
      return a < b;
    });
    if (static_cast<int>(peaks.size()) > num_sources) peaks.resize(num_sources);
  } else {
    std::erase_if(peaks, [&](int p) { return !(v(p) > rel_threshold * vmax); });
  }

  std::sort(peaks.begin(), peaks.end());
  out.doas_deg.reserve(peaks.size());
  for (int p : peaks) out.doas_deg.push_back(spectrum.grid[p]);
  return out;
}

Eigen::VectorXd refine_power(const Eigen::VectorXcd& r_1,
                             const std::vector<double>& doas_deg,
                             int num_calibrated, double* imag_residue) {
  if (doas_deg.empty()) throw std::domain_error("need at least one DOA estimate");
  const int k = static_cast<int>(doas_deg.size());
  Eigen::MatrixXcd b(2 * num_calibrated - 1, k);
  for (int c = 0; c < k; ++c) {
    b.col(c) = augmented_steering_b(doas_deg[static_cast<size_t>(c)], num_calibrated);
  }
  if (b.rows() != r_1.size()) throw std::domain_error("r_1 length mismatch");

  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(b, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const double smax = svd.singularValues()(0);
  const double smin = svd.singularValues()(svd.singularValues().size() - 1);
  if (!(smin > 0) || (smax / smin) * (smax / smin) > 1e12) {
    throw IllConditionedError("near-coincident DOAs: power system condition > 1e12");
  }
  const Eigen::VectorXcd p = svd.solve(r_1);
  if (imag_residue) *imag_residue = p.imag().cwiseAbs().maxCoeff();
  return p.real();
}

Eigen::VectorXcd estimate_gain_phase(const Eigen::VectorXcd& r_2,
                                     const std::vector<double>& doas_deg,
                                     const Eigen::VectorXd& p_hat,
                                     const UlaConfig& config) {
  config.validate();
  if (doas_deg.empty()) throw std::domain_error("need at least one DOA estimate");
  if (static_cast<int>(doas_deg.size()) != p_hat.size()) {
    throw std::domain_error("DOA and power counts differ");
  }
  if (r_2.size() != config.num_sensors) throw std::domain_error("r_2 length mismatch");

  const int m = config.num_sensors;
  Eigen::MatrixXcd a(m, p_hat.size());
  for (int c = 0; c < p_hat.size(); ++c) {
    a.col(c) = steering(doas_deg[static_cast<size_t>(c)], m);
  }
  const Eigen::VectorXd p_clamped = p_hat.cwiseMax(1e-12);
  const Eigen::VectorXcd v = a * p_clamped.cast<std::complex<double>>();

  Eigen::VectorXcd g = Eigen::VectorXcd::Ones(m);
  for (int i = config.num_calibrated; i < m; ++i) {
    if (std::abs(v(i)) < 1e-9) {
      throw DegenerateResponseError(
          i, "predicted response below 1e-9 at sensor " + std::to_string(i));
    }
    g(i) = r_2(i) / v(i);
  }
  return g;
}

namespace {

// goodness of fit of a candidate support: least-squares residual of r_1
// against the augmented steering atoms at the extracted peaks
double support_fit_residual(const Eigen::VectorXcd& r_1,
                            const std::vector<double>& doas_deg,
                            int num_calibrated) {
  Eigen::MatrixXcd b(2 * num_calibrated - 1, static_cast<int>(doas_deg.size()));
  for (int c = 0; c < b.cols(); ++c) {
    b.col(c) = augmented_steering_b(doas_deg[static_cast<size_t>(c)], num_calibrated);
  }
  const Eigen::VectorXcd coef = b.colPivHouseholderQr().solve(r_1);
  return (r_1 - b * coef).squaredNorm();
}

}  // namespace

StageEstimate stage1_estimate(const CovarianceProducts& products,
                              const Dictionary& dict_phi, int num_sources,
                              const PipelineConfig& config) {
  if (dict_phi.kind != DictionaryKind::Stage1Augmented) {
    throw std::domain_error("stage 1 requires a Stage1Augmented dictionary");
  }
  const int num_calibrated = (static_cast<int>(dict_phi.columns.rows()) + 1) / 2;
  LambdaSelection sel = select_lambda_lcurve(
      dict_phi.columns, products.r_1,
      default_lambda_grid(dict_phi.columns, products.r_1, config.lambda_grid_size,
                          config.lambda_min_factor));

  int chosen = sel.chosen_index;
  PeakExtraction chosen_peaks = extract_peaks(
      SparseSpectrum{dict_phi.grid,
                     sel.solutions[static_cast<size_t>(chosen)].coeffs, Stage::One},
      num_sources, config.peak_rel_threshold);

  // the corner estimate is noisy at covariance-vector scales; with a known
  // source count, re-rank candidate supports along the path by the
  // least-squares fit of their atoms (ties toward larger lambda). Candidates
  // per path point: every K-subset of the top K+2 local maxima.
  if (num_sources > 0 && !sel.degenerate) {
    double best_score = std::numeric_limits<double>::infinity();
    int best_index = -1;
    std::vector<double> best_doas;
    for (int i = 0; i < static_cast<int>(sel.solutions.size()); ++i) {
      PeakExtraction cand = extract_peaks(
          SparseSpectrum{dict_phi.grid,
                         sel.solutions[static_cast<size_t>(i)].coeffs, Stage::One},
          num_sources + 2, config.peak_rel_threshold);
      const int m = static_cast<int>(cand.doas_deg.size());
      if (m < num_sources) continue;
      std::vector<int> pick(static_cast<size_t>(num_sources));
      for (int j = 0; j < num_sources; ++j) pick[static_cast<size_t>(j)] = j;
      while (true) {
        std::vector<double> doas(static_cast<size_t>(num_sources));
        for (int j = 0; j < num_sources; ++j) {
          doas[static_cast<size_t>(j)] =
              cand.doas_deg[static_cast<size_t>(pick[static_cast<size_t>(j)])];
        }
        const double score =
            support_fit_residual(products.r_1, doas, num_calibrated);
        if (score <= best_score) {
          best_score = score;
          best_index = i;
          best_doas = std::move(doas);
        }
        // next combination
        int j = num_sources - 1;
        while (j >= 0 && pick[static_cast<size_t>(j)] == m - num_sources + j) --j;
        if (j < 0) break;
        ++pick[static_cast<size_t>(j)];
        for (int l = j + 1; l < num_sources; ++l) {
          pick[static_cast<size_t>(l)] = pick[static_cast<size_t>(l - 1)] + 1;
        }
      }
    }
    if (best_index >= 0) {
      chosen = best_index;
      chosen_peaks.doas_deg = std::move(best_doas);
      chosen_peaks.all_zero = false;
    }
  }

  const LassoSolution& sol = sel.solutions[static_cast<size_t>(chosen)];
  StageEstimate est{SparseSpectrum{dict_phi.grid, sol.coeffs, Stage::One},
                    {},
                    sel.grid[static_cast<size_t>(chosen)],
                    sol.iterations,
                    sol.converged,
                    sel.degenerate,
                    false,
                    false};
  est.doas_deg = std::move(chosen_peaks.doas_deg);
  est.all_zero_spectrum = chosen_peaks.all_zero;
  est.resolved = num_sources == 0
                     ? !est.doas_deg.empty()
                     : static_cast<int>(est.doas_deg.size()) == num_sources;
  return est;
}

StageEstimate stage2_estimate(const Eigen::VectorXcd& r_4,
                              const Dictionary& dict_psi, double lambda,
                              const SparseSpectrum& stage1_spectrum,
                              int num_sources, const PipelineConfig& config,
                              std::vector<double>* objective_trace) {
  if (dict_psi.kind != DictionaryKind::Stage2Augmented) {
    throw std::domain_error("stage 2 requires a Stage2Augmented dictionary");
  }
  Eigen::VectorXd p_init = stage1_spectrum.values;
  if (p_init.size() != dict_psi.columns.cols()) {
    p_init = Eigen::VectorXd::Zero(dict_psi.columns.cols());
  }
  StlsSolution sol = stls_alternating(dict_psi.columns, r_4, lambda,
                                      config.stls_epsilon, config.stls_max_iter,
                                      p_init, config.lasso_tol,
                                      config.lasso_max_iter);
  if (objective_trace) *objective_trace = sol.objective_trace;

  StageEstimate est{SparseSpectrum{dict_psi.grid, sol.coeffs, Stage::Two},
                    {},
                    lambda,
                    sol.iterations,
                    sol.converged,
                    false,
                    false,
                    false};
  PeakExtraction peaks =
      extract_peaks(est.spectrum, num_sources, config.peak_rel_threshold);
  est.doas_deg = std::move(peaks.doas_deg);
  est.all_zero_spectrum = peaks.all_zero;
  est.resolved = num_sources == 0
                     ? !est.doas_deg.empty()
                     : static_cast<int>(est.doas_deg.size()) == num_sources;
  return est;
}

namespace {
template <typename Fn>
auto run_stage(const char* name, Fn&& fn) {
  try {
    return fn();
  } catch (const PipelineError&) {
    throw;
  } catch (const std::exception& e) {
    throw PipelineError(name, e.what());
  }
}
}  // namespace

EstimationResult two_stage_pipeline(const SnapshotMatrix& z,
                                    const PipelineConfig& config) {
  config.ula.validate();
  if (z.num_sensors() != config.ula.num_sensors) {
    throw PipelineError("input", "snapshot rows do not match num_sensors");
  }

  EstimationResult result;
  Diagnostics& diag = result.diagnostics;

  const CovarianceProducts products = run_stage("covariance", [&] {
    int max_sources = config.noise_max_sources;
    if (max_sources <= 0) {
      max_sources = config.num_sources > 0
                        ? std::min(2 * config.num_sources, config.ula.num_sensors - 1)
                        : config.ula.num_sensors / 2;
    }
    return build_covariance_products(
        z, config.ula, config.known_noise_var ? *config.known_noise_var : -1.0,
        max_sources);
  });
  diag.noise_var = products.noise_var;

  const AngularGrid grid = AngularGrid::uniform(config.grid_resolution_deg);
  const Dictionary dict_phi =
      build_dictionary(grid, DictionaryKind::Stage1Augmented, config.ula);

  StageEstimate s1 = run_stage("stage1", [&] {
    return stage1_estimate(products, dict_phi, config.num_sources, config);
  });
  diag.lambda_stage1 = s1.lambda;
  diag.stage1_iterations = s1.iterations;
  diag.lcurve_degenerate_stage1 = s1.lcurve_degenerate;
  diag.stage1_resolved = s1.resolved;
  result.stage1_doas_deg = s1.doas_deg;
  result.stage1_spectrum = s1.spectrum;

  if (s1.doas_deg.empty()) {
    // nothing to anchor the gain-phase estimate on; report the partial result
    return result;
  }

  const Eigen::VectorXd p_hat = run_stage("refine_power", [&] {
    return refine_power(products.r_1, s1.doas_deg, config.ula.num_calibrated,
                        &diag.power_imag_residue);
  });
  result.power_est = p_hat;
  diag.power_clamped = (p_hat.array() < 1e-12).any();

  const Eigen::VectorXcd g_hat = run_stage("gain_phase", [&] {
    return estimate_gain_phase(products.r_2, s1.doas_deg, p_hat, config.ula);
  });
  result.gain_phase_est = g_hat;

  const Eigen::VectorXcd r_4 = run_stage("compensate", [&] {
    return augment_r4(compensate(products.r_2, g_hat));
  });

  const Dictionary dict_psi =
      build_dictionary(grid, DictionaryKind::Stage2Augmented, config.ula);
  StageEstimate s2 = run_stage("stage2", [&] {
    // stage 2 reuses the stage-1 penalty: the alternating solver is flat
    // across the safe mid-range and the stage-1 value always lands there,
    // while a fresh corner pick on the compensated vector is unreliable
    diag.lambda_stage2 = s1.lambda;
    return stage2_estimate(r_4, dict_psi, s1.lambda, s1.spectrum,
                           config.num_sources, config,
                           &diag.stage2_objective_trace);
  });
  diag.stage2_ran = true;
  diag.stage2_iterations = s2.iterations;
  diag.stls_converged = s2.solver_converged;

  // same support re-ranking as stage 1, with candidates from the stage-2
  // spectrum and fit measured against the calibrated data
  if (config.num_sources > 0) {
    PeakExtraction cand = extract_peaks(s2.spectrum, config.num_sources + 2,
                                        config.peak_rel_threshold);
    const int m = static_cast<int>(cand.doas_deg.size());
    const int k = config.num_sources;
    double best_score = std::numeric_limits<double>::infinity();
    std::vector<double> best_doas;
    // the stage-1 support is always a candidate; stage 2 can only match or
    // improve the measured fit
    if (static_cast<int>(s1.doas_deg.size()) == k) {
      best_doas = s1.doas_deg;
      best_score = support_fit_residual(products.r_1, best_doas,
                                        config.ula.num_calibrated);
    }
    if (m >= k) {
      std::vector<int> pick(static_cast<size_t>(k));
      for (int j = 0; j < k; ++j) pick[static_cast<size_t>(j)] = j;
      while (true) {
        std::vector<double> doas(static_cast<size_t>(k));
        for (int j = 0; j < k; ++j) {
          doas[static_cast<size_t>(j)] =
              cand.doas_deg[static_cast<size_t>(pick[static_cast<size_t>(j)])];
        }
        const double score = support_fit_residual(products.r_1, doas,
                                                  config.ula.num_calibrated);
        if (score < best_score) {
          best_score = score;
          best_doas = std::move(doas);
        }
        int j = k - 1;
        while (j >= 0 && pick[static_cast<size_t>(j)] == m - k + j) --j;
        if (j < 0) break;
        ++pick[static_cast<size_t>(j)];
        for (int l = j + 1; l < k; ++l) {
          pick[static_cast<size_t>(l)] = pick[static_cast<size_t>(l - 1)] + 1;
        }
      }
    }
    if (!best_doas.empty()) {
      s2.doas_deg = std::move(best_doas);
      s2.resolved = static_cast<int>(s2.doas_deg.size()) == k;
    }
  }

  diag.stage2_resolved = s2.resolved;
  result.stage2_doas_deg = s2.doas_deg;
  result.stage2_spectrum = s2.spectrum;
  return result;
}

}  // namespace tsdoa
