#include "tsdoa/simulate.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>

namespace tsdoa {

namespace {
constexpr double kDegToRad = std::numbers::pi / 180.0;
constexpr double kSqrt12 = 3.4641016151377543863;  // sqrt(12)
constexpr double kSqrt3 = 1.7320508075688772935;   // sqrt(3)

uint64_t splitmix64(uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}
}  // namespace

uint64_t derive_seed(uint64_t base, uint64_t a, uint64_t b) {
  uint64_t s = splitmix64(base ^ 0x2545f4914f6cdd1dULL);
  s = splitmix64(s ^ splitmix64(a));
  s = splitmix64(s ^ splitmix64(b));
  return s;
}

void SourceTruth::validate() const {
  if (!(theta_deg > -90.0 && theta_deg <= 90.0)) {
    throw std::domain_error("source angle outside (-90, 90]");
  }
  if (spread_deg < 0) throw std::domain_error("negative angular spread");
  if (!(power > 0)) throw std::domain_error("source power must be positive");
  if (num_paths < 1) throw std::domain_error("num_paths must be >= 1");
}

void SceneTruth::validate() const {
  ula.validate();
  if (sources.empty()) throw std::domain_error("scene needs at least one source");
  for (const auto& s : sources) s.validate();
  for (size_t i = 0; i < sources.size(); ++i) {
    for (size_t j = i + 1; j < sources.size(); ++j) {
      if (sources[i].theta_deg == sources[j].theta_deg) {
        throw std::domain_error("source angles must be pairwise distinct");
      }
    }
  }
  if (noise_var < 0) throw std::domain_error("negative noise variance");
  if (gain_phase.g.size() != ula.num_sensors) {
    throw std::domain_error("gain-phase vector length != num_sensors");
  }
  for (int m = 0; m < ula.num_calibrated; ++m) {
    if (gain_phase.g(m) != std::complex<double>(1.0, 0.0)) {
      throw std::domain_error("calibrated gain-phase entries must equal 1");
    }
  }
  for (int m = 0; m < ula.num_sensors; ++m) {
    if (!(std::abs(gain_phase.g(m)) > 0)) {
      throw std::domain_error("gain magnitude must be positive at sensor " +
                              std::to_string(m));
    }
  }
}

GainPhaseTruth draw_gain_phase(double sigma_rho, double sigma_phi_deg,
                               const UlaConfig& config, uint64_t seed) {
  config.validate();
  if (sigma_rho < 0 || sigma_phi_deg < 0) {
    throw std::domain_error("uncertainty std devs must be nonnegative");
  }
  if (sigma_rho >= 1.0 / kSqrt3) {
    throw std::domain_error("sigma_rho >= 1/sqrt(3): gain could reach zero");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-0.5, 0.5);
  Eigen::VectorXcd g = Eigen::VectorXcd::Ones(config.num_sensors);
  for (int m = config.num_calibrated; m < config.num_sensors; ++m) {
    const double eta = unit(rng);
    const double mu = unit(rng);
    const double rho = 1.0 + kSqrt12 * sigma_rho * eta;
    const double phi = kSqrt12 * sigma_phi_deg * mu * kDegToRad;
    g(m) = std::polar(rho, phi);
  }
  return GainPhaseTruth{std::move(g)};
}

SnapshotMatrix generate_snapshots(const SceneTruth& scene, int num_snapshots,
                                  uint64_t seed) {
  scene.validate();
  if (num_snapshots < 1) throw std::domain_error("num_snapshots must be >= 1");

  const int m = scene.ula.num_sensors;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(-0.5, 0.5);

  const double noise_scale = std::sqrt(scene.noise_var / 2.0);
  Eigen::MatrixXcd z(m, num_snapshots);
  Eigen::VectorXcd x(m);
  for (int t = 0; t < num_snapshots; ++t) {
    x.setZero();
    for (const auto& src : scene.sources) {
      const double sig_scale = std::sqrt(src.power / 2.0);
      const std::complex<double> s(gauss(rng) * sig_scale, gauss(rng) * sig_scale);
      const double path_scale = std::sqrt(1.0 / (2.0 * src.num_paths));
      Eigen::VectorXcd acc = Eigen::VectorXcd::Zero(m);
      for (int l = 0; l < src.num_paths; ++l) {
        const std::complex<double> gamma(gauss(rng) * path_scale,
                                         gauss(rng) * path_scale);
        double dev;
        if (src.deviation_law == DeviationLaw::Gaussian) {
          dev = gauss(rng) * src.spread_deg;
        } else {
          dev = unit(rng) * 2.0 * kSqrt3 * src.spread_deg;
        }
        acc += gamma * detail::steering_any(src.theta_deg + dev, m);
      }
      x += s * acc;
    }
    for (int i = 0; i < m; ++i) {
      x(i) = scene.gain_phase.g(i) * x(i) +
             std::complex<double>(gauss(rng) * noise_scale, gauss(rng) * noise_scale);
    }
    z.col(t) = x;
  }
  return SnapshotMatrix{std::move(z)};
}

}  // namespace tsdoa
