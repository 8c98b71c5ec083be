#ifndef TSDOA_COVARIANCE_HPP
#define TSDOA_COVARIANCE_HPP

#include <Eigen/Dense>

#include "tsdoa/simulate.hpp"
#include "tsdoa/steering.hpp"

namespace tsdoa {

/// Sample covariance and the vectors derived from its first column.
struct CovarianceProducts {
  Eigen::MatrixXcd R;      ///< Hermitian M x M
  double noise_var = 0.0;  ///< value subtracted from the diagonal entry
  Eigen::VectorXcd r_c;    ///< calibrated prefix of column 0, length M_c
  Eigen::VectorXcd r_1;    ///< conjugate-symmetric augmentation, length 2*M_c-1
  Eigen::VectorXcd r_2;    ///< full column 0, length M
};

/// R = (1/N) * Z * Z^H, symmetrized to (R + R^H)/2.
Eigen::MatrixXcd sample_covariance(const SnapshotMatrix& z);

/// Mean of the M - max_sources smallest eigenvalues of R (clamped at 0).
double estimate_noise_variance(const Eigen::MatrixXcd& r, int max_sources);

/// First M_c entries of column 0 with noise_var subtracted from entry 0.
Eigen::VectorXcd extract_rc(const Eigen::MatrixXcd& r, const UlaConfig& config,
                            double noise_var);

/// [flip(conj(r_c)), r_c(1:)]; conjugate-symmetric, length 2*M_c-1.
Eigen::VectorXcd augment_r1(const Eigen::VectorXcd& r_c);

/// Full column 0 with noise_var subtracted from entry 0.
Eigen::VectorXcd extract_r2(const Eigen::MatrixXcd& r, double noise_var);

/// Elementwise division by the estimated gain-phase vector.
Eigen::VectorXcd compensate(const Eigen::VectorXcd& r_2,
                            const Eigen::VectorXcd& g_hat);

/// augment_r1 over the full aperture; length 2*M-1.
Eigen::VectorXcd augment_r4(const Eigen::VectorXcd& r_3);

/// Convenience: covariance plus r_c / r_1 / r_2 in one pass.
/// `noise_var` < 0 requests eigenvalue-based estimation with `max_sources`.
CovarianceProducts build_covariance_products(const SnapshotMatrix& z,
                                             const UlaConfig& config,
                                             double noise_var, int max_sources);

}  // namespace tsdoa

#endif
