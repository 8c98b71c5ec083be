#ifndef TSDOA_STEERING_HPP
#define TSDOA_STEERING_HPP

#include <Eigen/Dense>
#include <complex>
#include <vector>

namespace tsdoa {

/// Half-wavelength uniform linear array with a calibrated prefix of sensors.
struct UlaConfig {
  int num_sensors = 16;     ///< M
  int num_calibrated = 8;   ///< M_c, first sensors with known unit response

  /// Throws std::domain_error unless 2 <= num_calibrated <= num_sensors.
  void validate() const;
};

/// Sorted angular grid over (-90, 90] degrees with uniform spacing.
class AngularGrid {
public:
  AngularGrid(std::vector<double> angles_deg, double resolution_deg);

  /// Uniform grid anchored at +90 deg, stepping down by `resolution_deg`
  /// while staying inside (-90, 90].
  static AngularGrid uniform(double resolution_deg);

  const std::vector<double>& angles() const noexcept { return angles_; }
  double resolution() const noexcept { return resolution_; }
  int size() const noexcept { return static_cast<int>(angles_.size()); }
  double operator[](int i) const { return angles_[static_cast<size_t>(i)]; }

private:
  std::vector<double> angles_;
  double resolution_;
};

enum class DictionaryKind {
  Stage1Augmented,  ///< rows = 2*M_c - 1, columns from augmented_steering_b
  Stage2Augmented,  ///< rows = 2*M - 1, columns from augmented_steering_c
};

/// On-grid steering dictionary; one unit-modulus column per grid angle.
struct Dictionary {
  Eigen::MatrixXcd columns;
  DictionaryKind kind;
  AngularGrid grid;
};

/// Array steering vector, element m = exp(-j*m*pi*sin(theta)).
Eigen::VectorXcd steering(double theta_deg, int num_sensors);

/// d/dtheta (radians) of steering: element m = -j*m*pi*cos(theta)*exp(-j*m*pi*sin(theta)).
/// Element 0 is exactly zero.
Eigen::VectorXcd steering_derivative(double theta_deg, int num_sensors);

/// Conjugate-symmetric augmented steering over the calibrated subarray,
/// element i = exp(j*(M_c-1-i)*pi*sin(theta)), length 2*M_c-1.
Eigen::VectorXcd augmented_steering_b(double theta_deg, int num_calibrated);

/// Full-aperture variant of augmented_steering_b, length 2*M-1.
Eigen::VectorXcd augmented_steering_c(double theta_deg, int num_sensors);

Dictionary build_dictionary(const AngularGrid& grid, DictionaryKind kind,
                            const UlaConfig& config);

namespace detail {
/// steering() without the (-90, 90] range check; used by the simulator where
/// a nominal angle plus deviation may step outside the principal range.
Eigen::VectorXcd steering_any(double theta_deg, int num_sensors);
}  // namespace detail

}  // namespace tsdoa

#endif
