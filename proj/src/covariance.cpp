#include "tsdoa/covariance.hpp"

#include <stdexcept>
#include <string>

#include "tsdoa/errors.hpp"

namespace tsdoa {

Eigen::MatrixXcd sample_covariance(const SnapshotMatrix& z) {
  if (z.num_snapshots() < 1) throw std::domain_error("need at least one snapshot");
  Eigen::MatrixXcd r =
      (z.data * z.data.adjoint()) / static_cast<double>(z.num_snapshots());
  return ((r + r.adjoint()) / 2.0).eval();
}

double estimate_noise_variance(const Eigen::MatrixXcd& r, int max_sources) {
  const int m = static_cast<int>(r.rows());
  if (max_sources < 1 || max_sources >= m) {
    throw std::domain_error("require 1 <= max_sources < M, got " +
                            std::to_string(max_sources));
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(r, Eigen::EigenvaluesOnly);
  const double mean = es.eigenvalues().head(m - max_sources).mean();
  return mean > 0 ? mean : 0.0;
}

Eigen::VectorXcd extract_rc(const Eigen::MatrixXcd& r, const UlaConfig& config,
                            double noise_var) {
  config.validate();
  if (noise_var < 0) throw std::domain_error("negative noise variance");
  if (r.rows() < config.num_sensors) throw std::domain_error("covariance too small");
  Eigen::VectorXcd rc = r.col(0).head(config.num_calibrated);
  rc(0) -= noise_var;
  return rc;
}

Eigen::VectorXcd augment_r1(const Eigen::VectorXcd& r_c) {
  const int mc = static_cast<int>(r_c.size());
  if (mc < 2) throw std::domain_error("need at least two entries to augment");
  Eigen::VectorXcd r1(2 * mc - 1);
  for (int i = 0; i < mc; ++i) r1(i) = std::conj(r_c(mc - 1 - i));
  for (int i = 1; i < mc; ++i) r1(mc - 1 + i) = r_c(i);
  return r1;
}

Eigen::VectorXcd extract_r2(const Eigen::MatrixXcd& r, double noise_var) {
  if (noise_var < 0) throw std::domain_error("negative noise variance");
  Eigen::VectorXcd r2 = r.col(0);
  r2(0) -= noise_var;
  return r2;
}

Eigen::VectorXcd compensate(const Eigen::VectorXcd& r_2,
                            const Eigen::VectorXcd& g_hat) {
  if (r_2.size() != g_hat.size()) throw std::domain_error("length mismatch");
  Eigen::VectorXcd r3(r_2.size());
  for (int m = 0; m < r_2.size(); ++m) {
    if (std::abs(g_hat(m)) < 1e-9) {
      throw DegenerateGainError(m, "gain estimate at sensor " + std::to_string(m) +
                                       " below 1e-9 in modulus");
    }
    r3(m) = r_2(m) / g_hat(m);
  }
  return r3;
}

Eigen::VectorXcd augment_r4(const Eigen::VectorXcd& r_3) { return augment_r1(r_3); }

CovarianceProducts build_covariance_products(const SnapshotMatrix& z,
                                             const UlaConfig& config,
                                             double noise_var, int max_sources) {
  config.validate();
  CovarianceProducts out;
  out.R = sample_covariance(z);
  out.noise_var =
      noise_var >= 0 ? noise_var : estimate_noise_variance(out.R, max_sources);
  out.r_c = extract_rc(out.R, config, out.noise_var);
  out.r_1 = augment_r1(out.r_c);
  out.r_2 = extract_r2(out.R, out.noise_var);
  return out;
}

}  // namespace tsdoa
