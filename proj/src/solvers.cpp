#include "tsdoa/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "tsdoa/errors.hpp"

namespace tsdoa {

namespace {

// Real/imaginary split of a complex dictionary: D x for real x and
// Re(D^H r) each cost two real mat-vecs instead of a full complex product.
struct SplitDict {
  Eigen::MatrixXd re, im;

  explicit SplitDict(const Eigen::MatrixXcd& d) : re(d.real()), im(d.imag()) {}

  Eigen::VectorXcd mul(const Eigen::VectorXd& x) const {
    Eigen::VectorXcd out(re.rows());
    out.real() = re * x;
    out.imag() = im * x;
    return out;
  }

  // Re(D^H r)
  Eigen::VectorXd grad_mul(const Eigen::VectorXcd& r) const {
    return re.transpose() * r.real() + im.transpose() * r.imag();
  }
};

// Largest eigenvalue of D^H D via the smaller Gram matrix.
double gram_spectral_max(const Eigen::MatrixXcd& d) {
  Eigen::MatrixXcd gram;
  if (d.rows() <= d.cols()) {
    gram = d * d.adjoint();
  } else {
    gram = d.adjoint() * d;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(gram, Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

double lasso_objective(const Eigen::VectorXcd& residual, const Eigen::VectorXd& x,
                       double lambda) {
  return residual.squaredNorm() + lambda * x.sum();
}

}  // namespace

LassoSolution nonneg_lasso(const Eigen::MatrixXcd& dict, const Eigen::VectorXcd& y,
                           double lambda, double tol, int max_iter,
                           const Eigen::VectorXd* warm_start) {
  if (dict.rows() != y.size()) {
    throw std::domain_error("dictionary rows do not match observation length");
  }
  if (lambda < 0) throw std::domain_error("lambda must be nonnegative");
  const int n = static_cast<int>(dict.cols());

  LassoSolution sol;
  const double lip = 2.0 * gram_spectral_max(dict);
  if (!(lip > 0)) {  // zero dictionary: penalty alone drives x to 0
    sol.coeffs = Eigen::VectorXd::Zero(n);
    sol.objective = y.squaredNorm();
    sol.converged = true;
    sol.objective_trace.push_back(sol.objective);
    return sol;
  }
  const double step = 1.0 / lip;

  SplitDict sd(dict);
  Eigen::VectorXd x = (warm_start && warm_start->size() == n)
                          ? warm_start->cwiseMax(0.0).eval()
                          : Eigen::VectorXd::Zero(n);
  Eigen::VectorXd x_prev = x;
  Eigen::VectorXcd dx = sd.mul(x);
  Eigen::VectorXcd dx_prev = dx;
  double fx = lasso_objective(dx - y, x, lambda);
  sol.objective_trace.push_back(fx);

  double t_momentum = 1.0;
  for (int iter = 0; iter < max_iter; ++iter) {
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t_momentum * t_momentum));
    const double beta = (t_momentum - 1.0) / t_next;

    // momentum point and its gradient, using cached products
    Eigen::VectorXd v = x + beta * (x - x_prev);
    Eigen::VectorXcd dv = dx + beta * (dx - dx_prev);
    Eigen::VectorXd grad = 2.0 * sd.grad_mul(dv - y);
    Eigen::VectorXd z = (v - step * (grad + Eigen::VectorXd::Constant(n, lambda)))
                            .cwiseMax(0.0);
    Eigen::VectorXcd dz = sd.mul(z);
    double fz = lasso_objective(dz - y, z, lambda);

    if (fz > fx) {
      // overshoot: plain proximal step from x, guaranteed non-increasing
      grad = 2.0 * sd.grad_mul(dx - y);
      z = (x - step * (grad + Eigen::VectorXd::Constant(n, lambda))).cwiseMax(0.0);
      dz = sd.mul(z);
      fz = lasso_objective(dz - y, z, lambda);
      t_momentum = 1.0;
    } else {
      t_momentum = t_next;
    }

    x_prev.swap(x);
    dx_prev.swap(dx);
    x = std::move(z);
    dx = std::move(dz);
    sol.iterations = iter + 1;
    sol.objective_trace.push_back(fz);

    if (!std::isfinite(fz)) {
      throw NumericalFailureError("lasso objective became non-finite");
    }
    if (std::abs(fx - fz) <= tol * std::max(1.0, std::abs(fx))) {
      fx = fz;
      sol.converged = true;
      break;
    }
    fx = fz;
  }
  sol.coeffs = std::move(x);
  sol.objective = fx;
  return sol;
}

std::vector<double> default_lambda_grid(const Eigen::MatrixXcd& dict,
                                        const Eigen::VectorXcd& y, int size,
                                        double min_factor) {
  if (size < 3) throw std::domain_error("lambda grid needs at least 3 values");
  if (!(min_factor > 0 && min_factor < 1)) {
    throw std::domain_error("min_factor must lie in (0, 1)");
  }
  const double lambda0 = std::max(0.0, (dict.adjoint() * y).real().maxCoeff());
  std::vector<double> grid(static_cast<size_t>(size));
  const double log_min = std::log10(min_factor);
  for (int i = 0; i < size; ++i) {
    const double frac = static_cast<double>(i) / (size - 1);
    grid[static_cast<size_t>(i)] =
        2.0 * lambda0 * std::pow(10.0, log_min * (1.0 - frac));
  }
  return grid;
}

LambdaSelection select_lambda_lcurve(const Eigen::MatrixXcd& dict,
                                     const Eigen::VectorXcd& y,
                                     std::vector<double> lambda_grid) {
  if (lambda_grid.empty()) lambda_grid = default_lambda_grid(dict, y);
  if (lambda_grid.size() < 3) {
    throw std::domain_error("lambda grid needs at least 3 values");
  }
  if (!std::is_sorted(lambda_grid.begin(), lambda_grid.end())) {
    throw std::domain_error("lambda grid must be ascending");
  }

  LambdaSelection sel;
  sel.grid = std::move(lambda_grid);
  const int n = static_cast<int>(sel.grid.size());
  sel.solutions.resize(static_cast<size_t>(n));

  // solve from the largest lambda down, warm-starting each solve
  const Eigen::VectorXd* warm = nullptr;
  for (int i = n - 1; i >= 0; --i) {
    sel.solutions[static_cast<size_t>(i)] =
        nonneg_lasso(dict, y, sel.grid[static_cast<size_t>(i)], 1e-8, 5000, warm);
    warm = &sel.solutions[static_cast<size_t>(i)].coeffs;
  }

  // L-curve points, skipping zero-norm solutions (log undefined, never a corner)
  struct Point {
    int index;
    double lx, ly;
  };
  std::vector<Point> pts;
  const double y_norm = y.norm();
  const double floor_val = std::max(1e-300, 1e-15 * std::max(1.0, y_norm));
  double resid_min = y_norm;
  for (int i = 0; i < n; ++i) {
    const auto& s = sel.solutions[static_cast<size_t>(i)];
    const double l1 = s.coeffs.sum();
    const double resid = std::sqrt(
        std::max(0.0, s.objective - sel.grid[static_cast<size_t>(i)] * l1));
    resid_min = std::min(resid_min, resid);
    if (l1 <= 0) continue;
    pts.push_back({i, std::log(std::max(resid, floor_val)), std::log(l1)});
  }

  bool all_same = true;
  for (size_t i = 1; i < sel.solutions.size() && all_same; ++i) {
    if ((sel.solutions[i].coeffs - sel.solutions[0].coeffs).cwiseAbs().maxCoeff() >
        0) {
      all_same = false;
    }
  }
  if (all_same || pts.size() < 3) {
    sel.degenerate = true;
    sel.chosen_index = n / 2;
    sel.lambda = sel.grid[static_cast<size_t>(sel.chosen_index)];
    return sel;
  }

  // unfittable data has no corner at all; take the most regularized solution
  if (resid_min >= 0.5 * y_norm) {
    sel.chosen_index = pts.back().index;
    sel.lambda = sel.grid[static_cast<size_t>(sel.chosen_index)];
    return sel;
  }

  // normalize both axes, then drop points closer than 2% of the unit box to
  // their already-kept larger-lambda neighbor: near-duplicates carry solver
  // noise that swamps the curvature estimate
  double lx_min = pts.front().lx, lx_max = pts.front().lx;
  double ly_min = pts.front().ly, ly_max = pts.front().ly;
  for (const Point& p : pts) {
    lx_min = std::min(lx_min, p.lx);
    lx_max = std::max(lx_max, p.lx);
    ly_min = std::min(ly_min, p.ly);
    ly_max = std::max(ly_max, p.ly);
  }
  const double sx = lx_max > lx_min ? 1.0 / (lx_max - lx_min) : 1.0;
  const double sy = ly_max > ly_min ? 1.0 / (ly_max - ly_min) : 1.0;
  std::vector<Point> kept;
  for (size_t ri = pts.size(); ri-- > 0;) {
    if (!kept.empty()) {
      const double dx = (pts[ri].lx - kept.back().lx) * sx;
      const double dy = (pts[ri].ly - kept.back().ly) * sy;
      if (std::hypot(dx, dy) < 0.02) continue;
    }
    kept.push_back(pts[ri]);
  }
  std::reverse(kept.begin(), kept.end());
  if (kept.size() < 3) {
    sel.chosen_index = kept.back().index;
    sel.lambda = sel.grid[static_cast<size_t>(sel.chosen_index)];
    return sel;
  }

  // signed three-point curvature; the positive turn is the corner orientation
  // of the L, ties broken toward larger lambda
  double best_curv = -std::numeric_limits<double>::infinity();
  int best_index = kept[1].index;
  for (size_t i = 1; i + 1 < kept.size(); ++i) {
    const double ax = (kept[i].lx - kept[i - 1].lx) * sx;
    const double ay = (kept[i].ly - kept[i - 1].ly) * sy;
    const double bx = (kept[i + 1].lx - kept[i].lx) * sx;
    const double by = (kept[i + 1].ly - kept[i].ly) * sy;
    const double cx = (kept[i + 1].lx - kept[i - 1].lx) * sx;
    const double cy = (kept[i + 1].ly - kept[i - 1].ly) * sy;
    const double la = std::hypot(ax, ay), lb = std::hypot(bx, by),
                 lc = std::hypot(cx, cy);
    if (la == 0 || lb == 0 || lc == 0) continue;
    const double curv = 2.0 * (ax * by - ay * bx) / (la * lb * lc);
    if (curv >= best_curv) {
      best_curv = curv;
      best_index = kept[i].index;
    }
  }
  sel.chosen_index = best_index;
  sel.lambda = sel.grid[static_cast<size_t>(best_index)];
  return sel;
}

void stls_gamma_update(const Eigen::VectorXcd& residual, const Eigen::VectorXd& p,
                       Eigen::VectorXcd& gamma_left, Eigen::VectorXd& gamma_right) {
  const double denom = 1.0 + p.squaredNorm();
  gamma_left = residual / denom;
  gamma_right = p;
}

StlsSolution stls_alternating(const Eigen::MatrixXcd& dict_psi,
                              const Eigen::VectorXcd& r4, double lambda,
                              double epsilon, int max_iter,
                              const Eigen::VectorXd& p_init, double lasso_tol,
                              int lasso_max_iter) {
  if (dict_psi.rows() != r4.size()) {
    throw std::domain_error("dictionary rows do not match r4 length");
  }
  if (max_iter < 1) throw std::domain_error("max_iter must be >= 1");
  const int n = static_cast<int>(dict_psi.cols());

  StlsSolution sol;
  Eigen::VectorXd p = p_init.size() == n ? p_init.cwiseMax(0.0).eval()
                                         : Eigen::VectorXd::Zero(n);
  sol.gamma_left = Eigen::VectorXcd::Zero(r4.size());
  sol.gamma_right = Eigen::VectorXd::Zero(n);

  auto objective = [&](const Eigen::VectorXd& pv) {
    const Eigen::VectorXcd fit =
        dict_psi * pv.cast<std::complex<double>>() +
        sol.gamma_left * (sol.gamma_right.dot(pv));
    const double gamma_fro2 =
        sol.gamma_left.squaredNorm() * sol.gamma_right.squaredNorm();
    return (r4 - fit).squaredNorm() + gamma_fro2 + lambda * pv.sum();
  };
  sol.objective_trace.push_back(objective(p));

  Eigen::MatrixXcd dict_eff(dict_psi.rows(), n);
  for (int iter = 0; iter < max_iter; ++iter) {
    dict_eff = dict_psi;
    if (sol.gamma_right.cwiseAbs().maxCoeff() > 0) {
      dict_eff.noalias() +=
          sol.gamma_left * sol.gamma_right.transpose().cast<std::complex<double>>();
    }
    LassoSolution inner =
        nonneg_lasso(dict_eff, r4, lambda, lasso_tol, lasso_max_iter, &p);
    Eigen::VectorXd p_new = std::move(inner.coeffs);

    const Eigen::VectorXcd residual =
        r4 - dict_psi * p_new.cast<std::complex<double>>();
    stls_gamma_update(residual, p_new, sol.gamma_left, sol.gamma_right);

    const double obj = objective(p_new);
    if (!std::isfinite(obj)) {
      throw NumericalFailureError("stls objective became non-finite");
    }
    sol.objective_trace.push_back(obj);
    sol.iterations = iter + 1;

    const double delta = (p_new - p).norm();
    p = std::move(p_new);
    if (delta < epsilon) {
      sol.converged = true;
      break;
    }
  }
  sol.coeffs = std::move(p);
  return sol;
}

}  // namespace tsdoa
