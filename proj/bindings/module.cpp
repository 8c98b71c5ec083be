#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "tsdoa/covariance.hpp"
#include "tsdoa/errors.hpp"
#include "tsdoa/estimator.hpp"
#include "tsdoa/experiment.hpp"
#include "tsdoa/simulate.hpp"
#include "tsdoa/solvers.hpp"
#include "tsdoa/steering.hpp"

namespace py = pybind11;
using namespace tsdoa;

PYBIND11_MODULE(_tsdoa, m) {
  m.doc() = "two-stage sparse DOA estimation for distributed sources on "
            "partly calibrated arrays";

  // ---- array model -------------------------------------------------------
  py::class_<UlaConfig>(m, "UlaConfig")
      .def(py::init([](int num_sensors, int num_calibrated) {
             UlaConfig c{num_sensors, num_calibrated};
             c.validate();
             return c;
           }),
           py::arg("num_sensors") = 16, py::arg("num_calibrated") = 8)
      .def_readonly("num_sensors", &UlaConfig::num_sensors)
      .def_readonly("num_calibrated", &UlaConfig::num_calibrated);

  py::class_<AngularGrid>(m, "AngularGrid")
      .def(py::init<std::vector<double>, double>(), py::arg("angles_deg"),
           py::arg("resolution_deg"))
      .def_static("uniform", &AngularGrid::uniform, py::arg("resolution_deg"))
      .def_property_readonly("angles", &AngularGrid::angles)
      .def_property_readonly("resolution", &AngularGrid::resolution)
      .def("__len__", &AngularGrid::size);

  py::enum_<DictionaryKind>(m, "DictionaryKind")
      .value("Stage1Augmented", DictionaryKind::Stage1Augmented)
      .value("Stage2Augmented", DictionaryKind::Stage2Augmented);

  py::class_<Dictionary>(m, "Dictionary")
      .def_readonly("columns", &Dictionary::columns)
      .def_readonly("kind", &Dictionary::kind)
      .def_readonly("grid", &Dictionary::grid);

  m.def("steering", &steering, py::arg("theta_deg"), py::arg("num_sensors"));
  m.def("steering_derivative", &steering_derivative, py::arg("theta_deg"),
        py::arg("num_sensors"));
  m.def("augmented_steering_b", &augmented_steering_b, py::arg("theta_deg"),
        py::arg("num_calibrated"));
  m.def("augmented_steering_c", &augmented_steering_c, py::arg("theta_deg"),
        py::arg("num_sensors"));
  m.def("build_dictionary", &build_dictionary, py::arg("grid"), py::arg("kind"),
        py::arg("config"));

  // ---- scene simulation --------------------------------------------------
  py::enum_<DeviationLaw>(m, "DeviationLaw")
      .value("Gaussian", DeviationLaw::Gaussian)
      .value("Uniform", DeviationLaw::Uniform);

  py::class_<SourceTruth>(m, "SourceTruth")
      .def(py::init([](double theta_deg, double spread_deg, double power,
                       int num_paths, DeviationLaw law) {
             SourceTruth s{theta_deg, spread_deg, power, num_paths, law};
             s.validate();
             return s;
           }),
           py::arg("theta_deg"), py::arg("spread_deg") = 0.0,
           py::arg("power") = 1.0, py::arg("num_paths") = 1,
           py::arg("deviation_law") = DeviationLaw::Gaussian)
      .def_readonly("theta_deg", &SourceTruth::theta_deg)
      .def_readonly("spread_deg", &SourceTruth::spread_deg)
      .def_readonly("power", &SourceTruth::power)
      .def_readonly("num_paths", &SourceTruth::num_paths);

  py::class_<GainPhaseTruth>(m, "GainPhaseTruth")
      .def(py::init([](Eigen::VectorXcd g) { return GainPhaseTruth{std::move(g)}; }),
           py::arg("g"))
      .def_readonly("g", &GainPhaseTruth::g);

  py::class_<SceneTruth>(m, "SceneTruth")
      .def(py::init([](UlaConfig ula, std::vector<SourceTruth> sources,
                       GainPhaseTruth gain_phase, double noise_var) {
             SceneTruth s{ula, std::move(sources), std::move(gain_phase),
                          noise_var};
             s.validate();
             return s;
           }),
           py::arg("ula"), py::arg("sources"), py::arg("gain_phase"),
           py::arg("noise_var") = 0.0)
      .def_readonly("ula", &SceneTruth::ula)
      .def_readonly("sources", &SceneTruth::sources)
      .def_readonly("gain_phase", &SceneTruth::gain_phase)
      .def_readonly("noise_var", &SceneTruth::noise_var);

  py::class_<SnapshotMatrix>(m, "SnapshotMatrix")
      .def(py::init([](Eigen::MatrixXcd data) { return SnapshotMatrix{std::move(data)}; }),
           py::arg("data"))
      .def_readonly("data", &SnapshotMatrix::data)
      .def_property_readonly("num_sensors", &SnapshotMatrix::num_sensors)
      .def_property_readonly("num_snapshots", &SnapshotMatrix::num_snapshots);

  m.def("draw_gain_phase", &draw_gain_phase, py::arg("sigma_rho"),
        py::arg("sigma_phi_deg"), py::arg("config"), py::arg("seed"));
  m.def("generate_snapshots", &generate_snapshots, py::arg("scene"),
        py::arg("num_snapshots"), py::arg("seed"));
  m.def("derive_seed", &derive_seed, py::arg("base"), py::arg("a"), py::arg("b"));

  // ---- covariance products -----------------------------------------------
  py::class_<CovarianceProducts>(m, "CovarianceProducts")
      .def_readonly("R", &CovarianceProducts::R)
      .def_readonly("noise_var", &CovarianceProducts::noise_var)
      .def_readonly("r_c", &CovarianceProducts::r_c)
      .def_readonly("r_1", &CovarianceProducts::r_1)
      .def_readonly("r_2", &CovarianceProducts::r_2);

  m.def("sample_covariance", &sample_covariance, py::arg("snapshots"));
  m.def("estimate_noise_variance", &estimate_noise_variance, py::arg("R"),
        py::arg("max_sources"));
  m.def("extract_rc", &extract_rc, py::arg("R"), py::arg("config"),
        py::arg("noise_var"));
  m.def("augment_r1", &augment_r1, py::arg("r_c"));
  m.def("extract_r2", &extract_r2, py::arg("R"), py::arg("noise_var"));
  m.def("compensate", &compensate, py::arg("r_2"), py::arg("g_hat"));
  m.def("augment_r4", &augment_r4, py::arg("r_3"));
  m.def("build_covariance_products", &build_covariance_products,
        py::arg("snapshots"), py::arg("config"), py::arg("noise_var") = -1.0,
        py::arg("max_sources") = 1);

  // ---- solvers -------------------------------------------------------------
  py::class_<LassoSolution>(m, "LassoSolution")
      .def_readonly("coeffs", &LassoSolution::coeffs)
      .def_readonly("objective", &LassoSolution::objective)
      .def_readonly("iterations", &LassoSolution::iterations)
      .def_readonly("converged", &LassoSolution::converged)
      .def_readonly("objective_trace", &LassoSolution::objective_trace);

  m.def(
      "nonneg_lasso",
      [](const Eigen::MatrixXcd& dict, const Eigen::VectorXcd& y, double lambda,
         double tol, int max_iter) {
        return nonneg_lasso(dict, y, lambda, tol, max_iter);
      },
      py::arg("dict"), py::arg("y"), py::arg("lambda_"), py::arg("tol") = 1e-8,
      py::arg("max_iter") = 5000);

  py::class_<LambdaSelection>(m, "LambdaSelection")
      .def_readonly("lambda_", &LambdaSelection::lambda)
      .def_readonly("chosen_index", &LambdaSelection::chosen_index)
      .def_readonly("degenerate", &LambdaSelection::degenerate)
      .def_readonly("grid", &LambdaSelection::grid);

  m.def("default_lambda_grid", &default_lambda_grid, py::arg("dict"),
        py::arg("y"), py::arg("size") = 20, py::arg("min_factor") = 1e-3);
  m.def("select_lambda_lcurve", &select_lambda_lcurve, py::arg("dict"),
        py::arg("y"), py::arg("lambda_grid") = std::vector<double>{});

  py::class_<StlsSolution>(m, "StlsSolution")
      .def_readonly("coeffs", &StlsSolution::coeffs)
      .def_readonly("gamma_left", &StlsSolution::gamma_left)
      .def_readonly("gamma_right", &StlsSolution::gamma_right)
      .def_readonly("objective_trace", &StlsSolution::objective_trace)
      .def_readonly("iterations", &StlsSolution::iterations)
      .def_readonly("converged", &StlsSolution::converged);

  m.def(
      "stls_alternating",
      [](const Eigen::MatrixXcd& dict_psi, const Eigen::VectorXcd& r4,
         double lambda, double epsilon, int max_iter, const Eigen::VectorXd& p_init) {
        return stls_alternating(dict_psi, r4, lambda, epsilon, max_iter, p_init);
      },
      py::arg("dict_psi"), py::arg("r4"), py::arg("lambda_"),
      py::arg("epsilon") = 1e-6, py::arg("max_iter") = 30,
      py::arg("p_init") = Eigen::VectorXd());

  // ---- estimator -----------------------------------------------------------
  py::enum_<Stage>(m, "Stage").value("One", Stage::One).value("Two", Stage::Two);

  py::class_<SparseSpectrum>(m, "SparseSpectrum")
      .def_readonly("grid", &SparseSpectrum::grid)
      .def_readonly("values", &SparseSpectrum::values)
      .def_readonly("stage", &SparseSpectrum::stage);

  py::class_<PipelineConfig>(m, "PipelineConfig")
      .def(py::init<>())
      .def_readwrite("ula", &PipelineConfig::ula)
      .def_readwrite("grid_resolution_deg", &PipelineConfig::grid_resolution_deg)
      .def_readwrite("num_sources", &PipelineConfig::num_sources)
      .def_readwrite("peak_rel_threshold", &PipelineConfig::peak_rel_threshold)
      .def_readwrite("known_noise_var", &PipelineConfig::known_noise_var)
      .def_readwrite("noise_max_sources", &PipelineConfig::noise_max_sources)
      .def_readwrite("lambda_grid_size", &PipelineConfig::lambda_grid_size)
      .def_readwrite("lambda_min_factor", &PipelineConfig::lambda_min_factor)
      .def_readwrite("stls_epsilon", &PipelineConfig::stls_epsilon)
      .def_readwrite("stls_max_iter", &PipelineConfig::stls_max_iter)
      .def_readwrite("lasso_tol", &PipelineConfig::lasso_tol)
      .def_readwrite("lasso_max_iter", &PipelineConfig::lasso_max_iter);

  py::class_<Diagnostics>(m, "Diagnostics")
      .def_readonly("noise_var", &Diagnostics::noise_var)
      .def_readonly("lambda_stage1", &Diagnostics::lambda_stage1)
      .def_readonly("lambda_stage2", &Diagnostics::lambda_stage2)
      .def_readonly("stage1_iterations", &Diagnostics::stage1_iterations)
      .def_readonly("stage2_iterations", &Diagnostics::stage2_iterations)
      .def_readonly("stage1_resolved", &Diagnostics::stage1_resolved)
      .def_readonly("stage2_resolved", &Diagnostics::stage2_resolved)
      .def_readonly("stage2_ran", &Diagnostics::stage2_ran)
      .def_readonly("stls_converged", &Diagnostics::stls_converged)
      .def_readonly("power_clamped", &Diagnostics::power_clamped)
      .def_readonly("power_imag_residue", &Diagnostics::power_imag_residue)
      .def_readonly("stage2_objective_trace", &Diagnostics::stage2_objective_trace);

  py::class_<EstimationResult>(m, "EstimationResult")
      .def_readonly("stage1_doas_deg", &EstimationResult::stage1_doas_deg)
      .def_readonly("stage2_doas_deg", &EstimationResult::stage2_doas_deg)
      .def_readonly("gain_phase_est", &EstimationResult::gain_phase_est)
      .def_readonly("power_est", &EstimationResult::power_est)
      .def_readonly("stage1_spectrum", &EstimationResult::stage1_spectrum)
      .def_readonly("stage2_spectrum", &EstimationResult::stage2_spectrum)
      .def_readonly("diagnostics", &EstimationResult::diagnostics);

  m.def(
      "extract_peaks",
      [](const SparseSpectrum& spectrum, int num_sources, double rel_threshold) {
        const auto out = extract_peaks(spectrum, num_sources, rel_threshold);
        return py::make_tuple(out.doas_deg, out.all_zero);
      },
      py::arg("spectrum"), py::arg("num_sources") = 0,
      py::arg("rel_threshold") = 0.05);
  m.def(
      "refine_power",
      [](const Eigen::VectorXcd& r_1, const std::vector<double>& doas_deg,
         int num_calibrated) { return refine_power(r_1, doas_deg, num_calibrated); },
      py::arg("r_1"), py::arg("doas_deg"), py::arg("num_calibrated"));
  m.def("estimate_gain_phase", &estimate_gain_phase, py::arg("r_2"),
        py::arg("doas_deg"), py::arg("p_hat"), py::arg("config"));
  m.def("two_stage_pipeline", &two_stage_pipeline, py::arg("snapshots"),
        py::arg("config"));

  // ---- experiment harness --------------------------------------------------
  py::class_<RmseRow>(m, "RmseRow")
      .def_readonly("sweep_value", &RmseRow::sweep_value)
      .def_readonly("rmse_deg", &RmseRow::rmse_deg)
      .def_readonly("failure_rate", &RmseRow::failure_rate)
      .def_readonly("trials_used", &RmseRow::trials_used)
      .def_readonly("mean_runtime_ms", &RmseRow::mean_runtime_ms)
      .def_property_readonly("estimator", [](const RmseRow& r) {
        return to_string(r.estimator);
      });

  py::class_<RmseTable>(m, "RmseTable")
      .def_readonly("trials", &RmseTable::trials)
      .def_readonly("rows", &RmseTable::rows)
      .def_property_readonly("sweep_var", [](const RmseTable& t) {
        return to_string(t.sweep_var);
      });

  py::class_<ExperimentConfig>(m, "ExperimentConfig")
      .def_readwrite("trials", &ExperimentConfig::trials)
      .def_readwrite("seed", &ExperimentConfig::seed)
      .def_readwrite("threads", &ExperimentConfig::threads);

  m.def("rmse", &rmse, py::arg("estimated"), py::arg("truth"));
  m.def("load_experiment_config", &load_experiment_config, py::arg("path"));
  m.def("parse_experiment_config", &parse_experiment_config, py::arg("json_text"));
  m.def("run_monte_carlo", &run_monte_carlo, py::arg("config"),
        py::call_guard<py::gil_scoped_release>());
  m.def(
      "table_to_csv",
      [](const RmseTable& table) { return format_table(table, OutputFormat::Csv); },
      py::arg("table"));
  m.def(
      "table_to_json",
      [](const RmseTable& table) { return format_table(table, OutputFormat::Json); },
      py::arg("table"));

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<PipelineError>(m, "PipelineError", PyExc_RuntimeError);

#ifdef TSDOA_VERSION
  m.attr("__version__") = TSDOA_VERSION;
#else
  m.attr("__version__") = "dev";
#endif
}
