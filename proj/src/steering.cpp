#include "tsdoa/steering.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace tsdoa {

namespace {
constexpr double kPi = std::numbers::pi;
constexpr double kDegToRad = kPi / 180.0;

void check_angle(double theta_deg) {
  if (!(theta_deg > -90.0 && theta_deg <= 90.0)) {
    throw std::domain_error("angle " + std::to_string(theta_deg) +
                            " deg outside (-90, 90]");
  }
}

void check_sensors(int m, int minimum) {
  if (m < minimum) {
    throw std::domain_error("sensor count " + std::to_string(m) + " below " +
                            std::to_string(minimum));
  }
}
}  // namespace

void UlaConfig::validate() const {
  if (num_calibrated < 2 || num_calibrated > num_sensors) {
    throw std::domain_error("require 2 <= num_calibrated <= num_sensors, got M_c=" +
                            std::to_string(num_calibrated) + " M=" +
                            std::to_string(num_sensors));
  }
}

AngularGrid::AngularGrid(std::vector<double> angles_deg, double resolution_deg)
    : angles_(std::move(angles_deg)), resolution_(resolution_deg) {
  if (angles_.empty()) throw std::domain_error("empty angular grid");
  if (resolution_ <= 0) throw std::domain_error("grid resolution must be positive");
  for (size_t i = 0; i < angles_.size(); ++i) {
    if (!(angles_[i] > -90.0 && angles_[i] <= 90.0)) {
      throw std::domain_error("grid angle outside (-90, 90]");
    }
    if (i > 0) {
      const double step = angles_[i] - angles_[i - 1];
      if (step <= 0) throw std::domain_error("grid angles must be strictly increasing");
      if (std::abs(step - resolution_) > 1e-12) {
        throw std::domain_error("grid spacing deviates from stated resolution");
      }
    }
  }
}

AngularGrid AngularGrid::uniform(double resolution_deg) {
  if (resolution_deg <= 0) throw std::domain_error("grid resolution must be positive");
  // largest n with 90 - (n-1)*res > -90
  const int n = static_cast<int>(std::floor(180.0 / resolution_deg - 1e-9)) + 1;
  std::vector<double> angles(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    angles[static_cast<size_t>(i)] = 90.0 - resolution_deg * (n - 1 - i);
  }
  return AngularGrid(std::move(angles), resolution_deg);
}

namespace detail {
Eigen::VectorXcd steering_any(double theta_deg, int num_sensors) {
  const double s = std::sin(theta_deg * kDegToRad);
  Eigen::VectorXcd a(num_sensors);
  for (int m = 0; m < num_sensors; ++m) {
    a(m) = std::polar(1.0, -m * kPi * s);
  }
  return a;
}
}  // namespace detail

Eigen::VectorXcd steering(double theta_deg, int num_sensors) {
  check_angle(theta_deg);
  check_sensors(num_sensors, 1);
  return detail::steering_any(theta_deg, num_sensors);
}

Eigen::VectorXcd steering_derivative(double theta_deg, int num_sensors) {
  check_angle(theta_deg);
  check_sensors(num_sensors, 1);
  const double rad = theta_deg * kDegToRad;
  const double s = std::sin(rad);
  const double c = std::cos(rad);
  Eigen::VectorXcd d(num_sensors);
  for (int m = 0; m < num_sensors; ++m) {
    const std::complex<double> phase = std::polar(1.0, -m * kPi * s);
    d(m) = std::complex<double>(0.0, -m * kPi * c) * phase;
  }
  return d;
}

namespace {
Eigen::VectorXcd augmented_steering(double theta_deg, int half_size) {
  check_angle(theta_deg);
  check_sensors(half_size, 2);
  const double s = std::sin(theta_deg * kDegToRad);
  const int n = 2 * half_size - 1;
  Eigen::VectorXcd b(n);
  for (int i = 0; i < n; ++i) {
    b(i) = std::polar(1.0, (half_size - 1 - i) * kPi * s);
  }
  return b;
}
}  // namespace

Eigen::VectorXcd augmented_steering_b(double theta_deg, int num_calibrated) {
  return augmented_steering(theta_deg, num_calibrated);
}

Eigen::VectorXcd augmented_steering_c(double theta_deg, int num_sensors) {
  return augmented_steering(theta_deg, num_sensors);
}

Dictionary build_dictionary(const AngularGrid& grid, DictionaryKind kind,
                            const UlaConfig& config) {
  config.validate();
  if (grid.size() == 0) throw std::domain_error("empty angular grid");
  const int half =
      kind == DictionaryKind::Stage1Augmented ? config.num_calibrated : config.num_sensors;
  const int rows = 2 * half - 1;
  Eigen::MatrixXcd cols(rows, grid.size());
  for (int g = 0; g < grid.size(); ++g) {
    cols.col(g) = augmented_steering(grid[g], half);
  }
  return Dictionary{std::move(cols), kind, grid};
}

}  // namespace tsdoa
