#include <doctest.h>

#include <cmath>

#include "robustcov/elliptical.hpp"
#include "robustcov/norms.hpp"
#include "robustcov/pipeline.hpp"
#include "robustcov/rng.hpp"
#include "robustcov/scale.hpp"
#include "support/test_support.hpp"

using namespace robustcov;

TEST_SUITE("scale") {

TEST_CASE("huber function clamps") {
  CHECK(huber(0.5, 1.0) == 0.5);
  CHECK(huber(3.0, 1.0) == 1.0);
  CHECK(huber(-3.0, 1.0) == -1.0);
}

TEST_CASE("mahalanobis radii") {
  DataMatrix x(2, 2);
  x << 3, 4, 1, 1;
  Vector radii = mahalanobis_radii(x, Vector::Zero(2), Matrix::Identity(2, 2));
  CHECK(radii(0) == doctest::Approx(12.5));
  CHECK(radii(1) == doctest::Approx(1.0));

  Vector mu = x.row(0).transpose();
  Vector at_center =
      mahalanobis_radii(x.topRows(1), mu, Matrix::Identity(2, 2));
  CHECK(at_center(0) == 0.0);
}

TEST_CASE("huber scale on constant radii") {
  Vector radii = Vector::Constant(5, 4.0);
  HuberScale hs = huber_scale(radii, 10.0);
  CHECK(hs.theta_hat == doctest::Approx(4.0));
}

TEST_CASE("huber scale piecewise-linear root by hand") {
  Vector radii(3);
  radii << 1.0, 2.0, 9.0;
  HuberScale hs = huber_scale(radii, 3.0);
  // H_3(1-3) + H_3(2-3) + H_3(9-3) = -2 - 1 + 3 = 0 at theta = 3.
  CHECK(hs.theta_hat == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("huber scale with a huge h is the mean") {
  RngStream rng(81, 0);
  Vector radii(20);
  for (int i = 0; i < 20; ++i) radii(i) = 5.0 * rng.uniform01();
  HuberScale hs = huber_scale(radii, 1e6);
  CHECK(hs.theta_hat == doctest::Approx(radii.mean()).epsilon(1e-10));
}

TEST_CASE("estimating equation residual is tiny at the root") {
  RngStream rng(82, 0);
  for (int rep = 0; rep < 20; ++rep) {
    const int n = 3 + static_cast<int>(rng.uniform_int(40));
    Vector radii(n);
    for (int i = 0; i < n; ++i) radii(i) = 10.0 * rng.uniform01();
    const double h = 0.5 + 4.0 * rng.uniform01();
    HuberScale hs = huber_scale(radii, h);
    double residual = 0.0;
    for (int i = 0; i < n; ++i) residual += huber(radii(i) - hs.theta_hat, h);
    CHECK(std::abs(residual) <= 1e-9 * n * h);
  }
}

TEST_CASE("translation monotonicity") {
  RngStream rng(83, 0);
  Vector radii(15);
  for (int i = 0; i < 15; ++i) radii(i) = 8.0 * rng.uniform01();
  const double h = 2.0;
  const double base = huber_scale(radii, h).theta_hat;
  const double delta = 0.75;
  Vector shifted = radii.array() + delta;
  CHECK(huber_scale(shifted, h).theta_hat ==
        doctest::Approx(base + delta).epsilon(1e-9));
}

TEST_CASE("bounded influence of a single outlier") {
  RngStream rng(84, 0);
  Vector radii(30);
  for (int i = 0; i < 30; ++i) radii(i) = 3.0 + rng.uniform01();
  const double h = 1.5;
  const double base = huber_scale(radii, h).theta_hat;
  Vector contaminated = radii;
  contaminated(7) = 1e6;
  const double shifted = huber_scale(contaminated, h).theta_hat;
  CHECK(std::abs(shifted - base) <= 2.0 * h / 30.0 + 1e-9);
}

TEST_CASE("default truncation level") {
  CHECK(default_h(256, 2.0, 1.0) == doctest::Approx(16.0));
  CHECK(default_h(256, 2.0, 2.0) == doctest::Approx(32.0));
  // epsilon -> 0 approaches n.
  CHECK(default_h(100, 1e-9, 1.0) == doctest::Approx(100.0).epsilon(1e-6));
  CHECK_THROWS_AS(default_h(100, 2.5, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(default_h(100, 1.0, 0.0), std::invalid_argument);
}

TEST_CASE("covariance_from_scatter scales") {
  RngStream rng(85, 0);
  Matrix scatter = test_support::random_spd(rng, 4, 0.5);
  HuberScale unit;
  unit.theta_hat = 1.0;
  CHECK(max_norm(covariance_from_scatter(scatter, unit) - scatter) == 0.0);
  HuberScale zero;
  zero.theta_hat = 0.0;
  CHECK(max_norm(covariance_from_scatter(scatter, zero)) == 0.0);
}

TEST_CASE("calibrated covariance is consistent on Gaussian data") {
  // Full pipeline on a no-spike model: spatial-sign POET initializer, Tyler
  // plug-in, Huber radial calibration. Strong spikes bias the spatial-sign
  // eigenvalues (visible in the radial scale), so the consistency check runs
  // on the pure idiosyncratic case.
  FactorModelSpec model;
  model.d = 50;
  model.m = 0;
  model.idiosyncratic_cov = ar1_matrix(50, 0.5);
  model.seed = 4242;

  const GroundTruth gt =
      ground_truth(Matrix(50, 0), model.idiosyncratic_cov);
  const DataMatrix x = sample(model, TailFamily::gaussian(), 2000);

  PipelineSpec spec;
  spec.name = "tme";
  spec.scatter_kind = ScatterKind::TylerPlugin;
  PoetSettings poet;
  poet.rule = ThresholdRule::hard();
  poet.c = 0.5;
  poet.pd_repair = true;
  spec.poet = poet;
  spec.factor_count.method = FactorCountPolicy::Method::Known;
  spec.factor_count.known_m = 0;
  spec.scale_calibration = true;

  PipelineRunner runner(x, {});
  PipelineResult result = runner.run_spec(spec);
  REQUIRE(result.cov_x.has_value());
  CHECK(result.scale->theta_hat == doctest::Approx(1.0).epsilon(0.1));
  // Gaussian scenario: the data covariance equals sigma0.
  const double rel =
      frobenius(*result.cov_x - gt.sigma0) / frobenius(gt.sigma0);
  CHECK(rel < 0.10);
}

}  // TEST_SUITE
