#include <cmath>
#include <complex>
#include <random>

#include "doctest.h"
#include "tsdoa/covariance.hpp"
#include "tsdoa/errors.hpp"
#include "tsdoa/simulate.hpp"
#include "tsdoa/steering.hpp"

using namespace tsdoa;
using cplx = std::complex<double>;

namespace {

// analytic covariance for zero-spread sources: diag(g) A diag(p) A^H diag(g)^H + noise I
Eigen::MatrixXcd analytic_covariance(const UlaConfig& ula,
                                     const std::vector<double>& thetas,
                                     const std::vector<double>& powers,
                                     const Eigen::VectorXcd& g, double noise_var) {
  const int m = ula.num_sensors;
  Eigen::MatrixXcd r = Eigen::MatrixXcd::Zero(m, m);
  for (size_t k = 0; k < thetas.size(); ++k) {
    const Eigen::VectorXcd ga = g.cwiseProduct(steering(thetas[k], m));
    r += powers[k] * ga * ga.adjoint();
  }
  r += noise_var * Eigen::MatrixXcd::Identity(m, m);
  return r;
}

// test-only generator: snapshots synthesized from the first-order manifold
// model z = diag(g) (A s_bar + A' s_tilde) + e rather than the exact steering
SnapshotMatrix gam_model_snapshots(const SceneTruth& scene, int n, uint64_t seed) {
  const int m = scene.ula.num_sensors;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::MatrixXcd z(m, n);
  const double kDegToRad = M_PI / 180.0;
  for (int t = 0; t < n; ++t) {
    Eigen::VectorXcd x = Eigen::VectorXcd::Zero(m);
    for (const auto& src : scene.sources) {
      const double sig_scale = std::sqrt(src.power / 2.0);
      const cplx s(gauss(rng) * sig_scale, gauss(rng) * sig_scale);
      const double path_scale = std::sqrt(1.0 / (2.0 * src.num_paths));
      cplx gamma_sum = 0.0;
      cplx gamma_dev_sum = 0.0;
      for (int l = 0; l < src.num_paths; ++l) {
        const cplx gamma(gauss(rng) * path_scale, gauss(rng) * path_scale);
        const double dev_rad = gauss(rng) * src.spread_deg * kDegToRad;
        gamma_sum += gamma;
        gamma_dev_sum += gamma * dev_rad;
      }
      x += steering(src.theta_deg, m) * (s * gamma_sum) +
           steering_derivative(src.theta_deg, m) * (s * gamma_dev_sum);
    }
    const double noise_scale = std::sqrt(scene.noise_var / 2.0);
    for (int i = 0; i < m; ++i) {
      x(i) = scene.gain_phase.g(i) * x(i) +
             cplx(gauss(rng) * noise_scale, gauss(rng) * noise_scale);
    }
    z.col(t) = x;
  }
  return SnapshotMatrix{std::move(z)};
}

}  // namespace

TEST_CASE("sample covariance basics") {
  Eigen::MatrixXcd z1(2, 1);
  z1 << cplx(1, 1), cplx(0, -2);
  const auto r1 = sample_covariance(SnapshotMatrix{z1});
  const Eigen::MatrixXcd expected = z1.col(0) * z1.col(0).adjoint();
  CHECK((r1 - expected).cwiseAbs().maxCoeff() < 1e-15);

  Eigen::MatrixXcd z2(2, 2);
  z2 << cplx(1, 0), cplx(-1, 0), cplx(0, 0), cplx(0, 0);
  const auto r2 = sample_covariance(SnapshotMatrix{z2});
  CHECK(std::abs(r2(0, 0) - cplx(1, 0)) < 1e-15);
  CHECK(std::abs(r2(1, 1)) < 1e-15);
  CHECK(std::abs(r2(0, 1)) < 1e-15);
}

TEST_CASE("sample covariance is Hermitian PSD") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::MatrixXcd z(5, 9);
  for (int i = 0; i < z.size(); ++i) {
    z.data()[i] = cplx(gauss(rng), gauss(rng));
  }
  const auto r = sample_covariance(SnapshotMatrix{z});
  CHECK((r - r.adjoint()).cwiseAbs().maxCoeff() == 0.0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(r, Eigen::EigenvaluesOnly);
  CHECK(es.eigenvalues().minCoeff() > -1e-10);
}

TEST_CASE("noise variance estimation") {
  const Eigen::MatrixXcd eye = 0.7 * Eigen::MatrixXcd::Identity(5, 5);
  CHECK(estimate_noise_variance(eye, 2) == doctest::Approx(0.7).epsilon(1e-12));

  Eigen::MatrixXcd d = Eigen::MatrixXcd::Zero(4, 4);
  d.diagonal() << 5.0, 1.0, 1.0, 1.0;
  CHECK(estimate_noise_variance(d, 1) == doctest::Approx(1.0).epsilon(1e-12));

  CHECK_THROWS_AS(estimate_noise_variance(d, 4), std::domain_error);
  CHECK_THROWS_AS(estimate_noise_variance(d, 0), std::domain_error);
}

TEST_CASE("noise variance from a simulated scene") {
  const UlaConfig ula{16, 8};
  SceneTruth s;
  s.ula = ula;
  s.sources = {SourceTruth{10.0, 1.5, 1.0, 20, DeviationLaw::Gaussian},
               SourceTruth{20.0, 1.5, 1.0, 20, DeviationLaw::Gaussian}};
  s.gain_phase = draw_gain_phase(0.1, 40.0, ula, 8);
  s.noise_var = 1.0;  // SNR = 0 dB
  const auto z = generate_snapshots(s, 10000, 77);
  const auto r = sample_covariance(z);
  const double est = estimate_noise_variance(r, 4);
  CHECK(std::abs(est - s.noise_var) < 0.1 * s.noise_var);
}

TEST_CASE("extract_rc on analytic covariances") {
  {
    const UlaConfig ula{6, 4};
    const auto r = analytic_covariance(ula, {0.0}, {1.0},
                                       Eigen::VectorXcd::Ones(6), 0.0);
    const auto rc = extract_rc(r, ula, 0.0);
    REQUIRE(rc.size() == 4);
    CHECK((rc - Eigen::VectorXcd::Ones(4)).cwiseAbs().maxCoeff() < 1e-12);
  }
  {
    const UlaConfig ula{2, 2};
    const auto r = analytic_covariance(ula, {0.0, 90.0}, {1.0, 1.0},
                                       Eigen::VectorXcd::Ones(2), 0.3);
    const auto rc = extract_rc(r, ula, 0.3);
    CHECK(std::abs(rc(0) - cplx(2, 0)) < 1e-12);
    CHECK(std::abs(rc(1)) < 1e-12);  // 1 + e^{-j pi} = 0
  }
}

TEST_CASE("extract_rc finite-N oracle with spread") {
  const UlaConfig ula{16, 8};
  SceneTruth s;
  s.ula = ula;
  s.sources = {SourceTruth{10.0, 1.5, 1.0, 20, DeviationLaw::Gaussian},
               SourceTruth{20.0, 1.5, 1.0, 20, DeviationLaw::Gaussian}};
  s.gain_phase = draw_gain_phase(0.1, 40.0, ula, 4);
  s.noise_var = 0.1;  // SNR = 10 dB
  const auto z = generate_snapshots(s, 10000, 13);
  const auto r = sample_covariance(z);
  const auto rc = extract_rc(r, ula, estimate_noise_variance(r, 4));

  Eigen::VectorXcd target = Eigen::VectorXcd::Zero(8);
  target += steering(10.0, 16).head(8);
  target += steering(20.0, 16).head(8);
  CHECK((rc - target).norm() / target.norm() < 0.1);
}

TEST_CASE("augment_r1") {
  Eigen::VectorXcd rc(2);
  rc << cplx(1, 0), cplx(0, 1);
  const auto r1 = augment_r1(rc);
  REQUIRE(r1.size() == 3);
  CHECK(std::abs(r1(0) - cplx(0, -1)) < 1e-15);
  CHECK(std::abs(r1(1) - cplx(1, 0)) < 1e-15);
  CHECK(std::abs(r1(2) - cplx(0, 1)) < 1e-15);

  Eigen::VectorXcd real_sym(2);
  real_sym << cplx(2, 0), cplx(0, 0);
  const auto r1b = augment_r1(real_sym);
  CHECK(std::abs(r1b(0)) < 1e-15);
  CHECK(std::abs(r1b(1) - cplx(2, 0)) < 1e-15);
  CHECK(std::abs(r1b(2)) < 1e-15);

  CHECK_THROWS_AS(augment_r1(Eigen::VectorXcd::Ones(1)), std::domain_error);
}

TEST_CASE("augmented vectors satisfy the structural identities") {
  const UlaConfig ula{16, 8};
  const std::vector<double> thetas = {-20.0, 10.0, 20.0};
  const Eigen::Vector3d p(2.0, 3.0, 0.5);

  // r_c = A_c p exactly -> r_1 = B p to 1e-12
  Eigen::VectorXcd rc = Eigen::VectorXcd::Zero(8);
  for (int k = 0; k < 3; ++k) rc += p(k) * steering(thetas[k], 16).head(8);
  const auto r1 = augment_r1(rc);
  Eigen::VectorXcd bp = Eigen::VectorXcd::Zero(15);
  for (int k = 0; k < 3; ++k) bp += p(k) * augmented_steering_b(thetas[k], 8);
  CHECK((r1 - bp).cwiseAbs().maxCoeff() < 1e-12);

  // r_3 = A p exactly -> r_4 = C p to 1e-12
  Eigen::VectorXcd r3 = Eigen::VectorXcd::Zero(16);
  for (int k = 0; k < 3; ++k) r3 += p(k) * steering(thetas[k], 16);
  const auto r4 = augment_r4(r3);
  Eigen::VectorXcd cp = Eigen::VectorXcd::Zero(31);
  for (int k = 0; k < 3; ++k) cp += p(k) * augmented_steering_c(thetas[k], 16);
  CHECK((r4 - cp).cwiseAbs().maxCoeff() < 1e-12);

  // conjugate symmetry of both augmented vectors
  for (int i = 0; i < r1.size(); ++i) {
    CHECK(std::abs(r1(i) - std::conj(r1(r1.size() - 1 - i))) < 1e-12);
  }
  for (int i = 0; i < r4.size(); ++i) {
    CHECK(std::abs(r4(i) - std::conj(r4(r4.size() - 1 - i))) < 1e-12);
  }

  // center spike: first basis vector maps to a centered unit spike
  Eigen::VectorXcd e1 = Eigen::VectorXcd::Zero(16);
  e1(0) = 1.0;
  const auto spike = augment_r4(e1);
  for (int i = 0; i < spike.size(); ++i) {
    CHECK(std::abs(spike(i) - (i == 15 ? cplx(1, 0) : cplx(0, 0))) < 1e-15);
  }
}

TEST_CASE("extract_r2 and gain recovery") {
  const UlaConfig ula{6, 3};
  Eigen::VectorXcd g = Eigen::VectorXcd::Ones(6);
  const double phi = 0.9;
  for (int m = 3; m < 6; ++m) g(m) = std::polar(1.0, phi);

  {  // single source at 0 deg, unit power: r_2 tail entries equal e^{j phi}
    const auto r = analytic_covariance(ula, {0.0}, {1.0}, g, 0.2);
    const auto r2 = extract_r2(r, 0.2);
    for (int m = 3; m < 6; ++m) {
      CHECK(std::abs(r2(m) - std::polar(1.0, phi)) < 1e-12);
    }
    // consistency: first M_c entries match extract_rc exactly
    const auto rc = extract_rc(r, ula, 0.2);
    CHECK((r2.head(3) - rc).cwiseAbs().maxCoeff() == 0.0);
  }

  {  // elementwise division by A p recovers an arbitrary drawn g
    const auto gp = draw_gain_phase(0.1, 40.0, ula, 21);
    const auto r = analytic_covariance(ula, {12.0, -31.0}, {1.5, 0.7}, gp.g, 0.0);
    const auto r2 = extract_r2(r, 0.0);
    Eigen::VectorXcd ap = 1.5 * steering(12.0, 6) + 0.7 * steering(-31.0, 6);
    for (int m = 0; m < 6; ++m) {
      CHECK(std::abs(r2(m) / ap(m) - gp.g(m)) < 1e-6);
    }
  }
}

TEST_CASE("compensate") {
  Eigen::VectorXcd r2(3);
  r2 << cplx(1, 1), cplx(2, 0), cplx(0, -1);

  const auto same = compensate(r2, Eigen::VectorXcd::Ones(3));
  CHECK((same - r2).cwiseAbs().maxCoeff() == 0.0);

  // exact cancellation with the true gains
  Eigen::VectorXcd g(3);
  g << cplx(1, 0), std::polar(1.2, 0.3), std::polar(0.8, -1.0);
  const Eigen::VectorXcd prod = g.cwiseProduct(r2);
  CHECK((compensate(prod, g) - r2).cwiseAbs().maxCoeff() < 1e-14);

  // first-order sensitivity: 1% gain error -> about 1% output error
  const Eigen::VectorXcd g_pert = g * cplx(1.01, 0.0);
  const Eigen::VectorXcd r3 = compensate(prod, g_pert);
  CHECK((r3 - r2).norm() / r2.norm() < 0.011);

  Eigen::VectorXcd bad = g;
  bad(1) = cplx(1e-10, 0);
  CHECK_THROWS_AS(compensate(prod, bad), DegenerateGainError);
}

TEST_CASE("spread immunity of the first covariance column") {
  // GAM-model data: the derivative term is zero-mean in column 0, so r_c with
  // and without spread agree up to sampling error
  const UlaConfig ula{16, 8};
  SceneTruth base;
  base.ula = ula;
  base.sources = {SourceTruth{10.0, 0.0, 1.0, 10, DeviationLaw::Gaussian},
                  SourceTruth{-25.0, 0.0, 1.0, 10, DeviationLaw::Gaussian}};
  base.gain_phase = draw_gain_phase(0.1, 40.0, ula, 6);
  base.noise_var = 0.0;

  SceneTruth spread = base;
  spread.sources[0].spread_deg = 2.0;
  spread.sources[1].spread_deg = 2.0;

  const int n = 100000;
  const auto r_no = sample_covariance(gam_model_snapshots(base, n, 99));
  const auto r_sp = sample_covariance(gam_model_snapshots(spread, n, 99));
  const auto rc_no = extract_rc(r_no, ula, 0.0);
  const auto rc_sp = extract_rc(r_sp, ula, 0.0);
  CHECK((rc_no - rc_sp).norm() / rc_no.norm() < 0.02);
}

TEST_CASE("build_covariance_products wiring") {
  const UlaConfig ula{8, 4};
  SceneTruth s;
  s.ula = ula;
  s.sources = {SourceTruth{15.0, 0.0, 1.0, 1, DeviationLaw::Gaussian}};
  s.gain_phase = draw_gain_phase(0.05, 20.0, ula, 2);
  s.noise_var = 0.5;
  const auto z = generate_snapshots(s, 2000, 3);
  const auto prod = build_covariance_products(z, ula, -1.0, 2);
  CHECK(prod.noise_var > 0.0);
  CHECK(prod.r_c.size() == 4);
  CHECK(prod.r_1.size() == 7);
  CHECK(prod.r_2.size() == 8);
  CHECK((prod.r_2.head(4) - prod.r_c).cwiseAbs().maxCoeff() == 0.0);
  // explicit noise variance is honored
  const auto prod2 = build_covariance_products(z, ula, 0.5, 2);
  CHECK(prod2.noise_var == 0.5);
}
