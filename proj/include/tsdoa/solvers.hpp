#ifndef TSDOA_SOLVERS_HPP
#define TSDOA_SOLVERS_HPP

#include <Eigen/Dense>
#include <vector>

namespace tsdoa {

/// Result of the nonnegative l2-l1 solve.
struct LassoSolution {
  Eigen::VectorXd coeffs;  ///< nonnegative coefficients over the grid
  double objective = 0.0;  ///< ||y - D x||^2 + lambda * sum(x)
  int iterations = 0;
  bool converged = false;
  std::vector<double> objective_trace;  ///< per-iteration objective values
};

/// Minimizes ||y - D x||_2^2 + lambda * ||x||_1 over x >= 0 by accelerated
/// projected proximal gradient with fixed step 1/(2*lambda_max(D^H D)) and a
/// monotone safeguard (an overshooting momentum step falls back to a plain
/// proximal step, which cannot increase the objective).
LassoSolution nonneg_lasso(const Eigen::MatrixXcd& dict, const Eigen::VectorXcd& y,
                           double lambda, double tol = 1e-8, int max_iter = 5000,
                           const Eigen::VectorXd* warm_start = nullptr);

/// 20 log-spaced values in [min_factor, 1] * lambda0 where
/// lambda0 = 2 * max(Re(D^H y))_+ is the smallest lambda with all-zero solution.
std::vector<double> default_lambda_grid(const Eigen::MatrixXcd& dict,
                                        const Eigen::VectorXcd& y, int size = 20,
                                        double min_factor = 1e-3);

struct LambdaSelection {
  double lambda = 0.0;
  int chosen_index = 0;
  bool degenerate = false;  ///< all grid solutions identical; median returned
  std::vector<double> grid;
  std::vector<LassoSolution> solutions;  ///< one per grid value, same order
};

/// L-curve selection: solves the lasso along the grid, forms
/// (log residual norm, log l1 norm) points and returns the lambda of maximum
/// discrete three-point curvature, ties broken toward larger lambda.
LambdaSelection select_lambda_lcurve(const Eigen::MatrixXcd& dict,
                                     const Eigen::VectorXcd& y,
                                     std::vector<double> lambda_grid = {});

/// Sparse total least squares solution; the dictionary perturbation is the
/// rank-one matrix gamma_left * gamma_right^T.
struct StlsSolution {
  Eigen::VectorXd coeffs;
  Eigen::VectorXcd gamma_left;
  Eigen::VectorXd gamma_right;
  std::vector<double> objective_trace;  ///< full objective, non-increasing
  int iterations = 0;
  bool converged = false;
};

/// Closed-form minimizer of ||u - Gamma p||^2 + ||Gamma||_F^2:
/// Gamma = u p^T / (1 + ||p||^2), returned in factored form.
void stls_gamma_update(const Eigen::VectorXcd& residual, const Eigen::VectorXd& p,
                       Eigen::VectorXcd& gamma_left, Eigen::VectorXd& gamma_right);

/// Alternating descent on
///   ||r4 - (Psi + Gamma) p||^2 + ||Gamma||_F^2 + lambda ||p||_1,  p >= 0:
/// a warm-started lasso in p, then the closed-form Gamma update. Stops when
/// ||p_i - p_{i-1}|| < epsilon or after max_iter iterations.
StlsSolution stls_alternating(const Eigen::MatrixXcd& dict_psi,
                              const Eigen::VectorXcd& r4, double lambda,
                              double epsilon = 1e-6, int max_iter = 30,
                              const Eigen::VectorXd& p_init = Eigen::VectorXd(),
                              double lasso_tol = 1e-8, int lasso_max_iter = 5000);

}  // namespace tsdoa

#endif
