#ifndef TSDOA_SIMULATE_HPP
#define TSDOA_SIMULATE_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "tsdoa/steering.hpp"

namespace tsdoa {

enum class DeviationLaw { Gaussian, Uniform };

/// One distributed source: nominal direction plus per-path angular deviation.
struct SourceTruth {
  double theta_deg = 0.0;    ///< nominal DOA
  double spread_deg = 0.0;   ///< std dev of the per-path angular deviation
  double power = 1.0;        ///< linear source power p_k
  int num_paths = 1;         ///< L
  DeviationLaw deviation_law = DeviationLaw::Gaussian;

  void validate() const;
};

/// Multiplicative complex response per sensor; calibrated prefix is exactly 1.
struct GainPhaseTruth {
  Eigen::VectorXcd g;
};

struct SceneTruth {
  UlaConfig ula;
  std::vector<SourceTruth> sources;
  GainPhaseTruth gain_phase;
  double noise_var = 0.0;

  void validate() const;
};

struct SnapshotMatrix {
  Eigen::MatrixXcd data;  ///< M x N

  int num_sensors() const { return static_cast<int>(data.rows()); }
  int num_snapshots() const { return static_cast<int>(data.cols()); }
};

/// Draws the gain-phase vector: rho = 1 + sqrt(12)*sigma_rho*eta,
/// phi = sqrt(12)*sigma_phi*mu with eta, mu iid uniform on [-0.5, 0.5].
/// Calibrated prefix entries are exactly 1.
GainPhaseTruth draw_gain_phase(double sigma_rho, double sigma_phi_deg,
                               const UlaConfig& config, uint64_t seed);

/// Exact-model snapshots: per snapshot, per source, per path, the true
/// steering vector at (theta_k + deviation) scaled by the complex path gain,
/// summed, scaled by the source signal, gain-phase applied, noise added.
SnapshotMatrix generate_snapshots(const SceneTruth& scene, int num_snapshots,
                                  uint64_t seed);

/// Deterministic seed derivation for independent child streams.
uint64_t derive_seed(uint64_t base, uint64_t a, uint64_t b);

}  // namespace tsdoa

#endif
