#include <doctest.h>

#include <cmath>

#include <nlohmann/json.hpp>

#include "robustcov/elliptical.hpp"
#include "robustcov/norms.hpp"
#include "robustcov/scatter.hpp"

using namespace robustcov;

namespace {

FactorModelSpec three_factor_spec(int d, std::uint64_t seed) {
  FactorModelSpec spec;
  spec.d = d;
  spec.m = 3;
  spec.loading_variances = {1.0, 0.75 * 0.75, 0.5 * 0.5};
  spec.idiosyncratic_cov = ar1_matrix(d, 0.9);
  spec.seed = seed;
  return spec;
}

}  // namespace

TEST_SUITE("elliptical") {

TEST_CASE("loading columns have the configured variances") {
  FactorModelSpec spec = three_factor_spec(500, 99);
  Matrix b = build_loadings(spec);
  REQUIRE(b.rows() == 500);
  REQUIRE(b.cols() == 3);
  const double expected[] = {1.0, 0.5625, 0.25};
  for (int j = 0; j < 3; ++j) {
    const double mean = b.col(j).mean();
    const double var =
        (b.col(j).array() - mean).square().sum() / (b.rows() - 1);
    CHECK(std::abs(var - expected[j]) < 0.15 * expected[j]);
  }
}

TEST_CASE("zero factors give an empty loading matrix") {
  FactorModelSpec spec;
  spec.d = 4;
  spec.m = 0;
  spec.idiosyncratic_cov = Matrix::Identity(4, 4);
  spec.seed = 7;
  Matrix b = build_loadings(spec);
  CHECK(b.rows() == 4);
  CHECK(b.cols() == 0);
}

TEST_CASE("loadings and samples are deterministic in the seed") {
  FactorModelSpec spec = three_factor_spec(20, 1234);
  Matrix b1 = build_loadings(spec);
  Matrix b2 = build_loadings(spec);
  CHECK(b1 == b2);

  DataMatrix x1 = sample(spec, TailFamily::student_t(4.0), 15);
  DataMatrix x2 = sample(spec, TailFamily::student_t(4.0), 15);
  CHECK(x1 == x2);

  spec.seed = 1235;
  DataMatrix x3 = sample(spec, TailFamily::student_t(4.0), 15);
  CHECK(max_norm(x1 - x3) > 1e-8);
}

TEST_CASE("spec validation") {
  FactorModelSpec spec = three_factor_spec(10, 1);
  spec.loading_variances[1] = -0.5;
  CHECK_THROWS_AS(build_loadings(spec), std::invalid_argument);

  spec = three_factor_spec(10, 1);
  spec.m = 11;
  CHECK_THROWS_AS(spec.validate(), std::invalid_argument);

  CHECK_THROWS_AS(TailFamily::student_t(2.0).validate(), std::invalid_argument);
  CHECK_THROWS_AS(TailFamily::mixture_normal(1.5, 10.0).validate(),
                  std::invalid_argument);
}

TEST_CASE("ground truth identity case") {
  Matrix b(3, 0);
  GroundTruth gt = ground_truth(b, Matrix::Identity(3, 3));
  CHECK(max_norm(gt.sigma0 - Matrix::Identity(3, 3)) < 1e-12);
  CHECK(max_norm(gt.v0 - Matrix::Identity(3, 3)) < 1e-12);
  CHECK(max_norm(gt.v0_u - Matrix::Identity(3, 3)) < 1e-12);
}

TEST_CASE("ground truth by direct arithmetic on a rank-one model") {
  Matrix b(3, 1);
  b << 1, 1, 1;
  GroundTruth gt = ground_truth(b, Matrix::Identity(3, 3));
  // tr(B B' + I) = 6, c = 0.5, sigma0 = 0.5 * (ones + I).
  Matrix expected = 0.5 * (Matrix::Ones(3, 3) + Matrix::Identity(3, 3));
  CHECK(max_norm(gt.sigma0 - expected) < 1e-12);
  CHECK(max_norm(gt.cov_x - (b * b.transpose() + Matrix::Identity(3, 3))) <
        1e-12);
  CHECK(gt.lambda_m.size() == 1);
  // Eigenvalues of 0.5(J + I): 0.5 * (3 + 1) = 2 on the ones direction.
  CHECK(gt.lambda_m(0) == doctest::Approx(2.0));
}

TEST_CASE("ground truth invariants on a random model") {
  FactorModelSpec spec = three_factor_spec(30, 5);
  Matrix b = build_loadings(spec);
  GroundTruth gt = ground_truth(b, spec.idiosyncratic_cov);

  CHECK(std::abs(gt.sigma0.trace() - 30.0) < 1e-10 * 30.0);
  Matrix rebuilt = gt.gamma_m * gt.lambda_m.asDiagonal() *
                       gt.gamma_m.transpose() +
                   gt.sigma0_u;
  CHECK(max_norm(rebuilt - gt.sigma0) < 1e-10);
  CHECK(max_norm(gt.v0 * gt.sigma0 - Matrix::Identity(30, 30)) < 1e-8);
}

TEST_CASE("law of large numbers for the Gaussian family") {
  FactorModelSpec spec;
  spec.d = 5;
  spec.m = 0;
  spec.idiosyncratic_cov = Matrix::Identity(5, 5);
  spec.seed = 2024;
  DataMatrix x = sample(spec, TailFamily::gaussian(), 20000);
  ScatterEstimate cov = sample_covariance(x, false);
  // c = d / tr(I) = 1, so the sample covariance should be near the identity.
  CHECK(max_norm(cov.matrix - Matrix::Identity(5, 5)) < 0.05);
}

TEST_CASE("student-t draws have heavy tails") {
  FactorModelSpec spec;
  spec.d = 2;
  spec.m = 0;
  spec.idiosyncratic_cov = Matrix::Identity(2, 2);
  spec.seed = 77;
  DataMatrix x = sample(spec, TailFamily::student_t(4.0), 50000);
  for (int j = 0; j < 2; ++j) {
    const double mean = x.col(j).mean();
    const double var = (x.col(j).array() - mean).square().mean();
    const double fourth = (x.col(j).array() - mean).pow(4).mean();
    const double excess_kurtosis = fourth / (var * var) - 3.0;
    CHECK(excess_kurtosis > 0.5);
  }
}

TEST_CASE("student-t covariance matches the base matrix") {
  FactorModelSpec spec;
  spec.d = 3;
  spec.m = 0;
  spec.idiosyncratic_cov = ar1_matrix(3, 0.5);
  spec.seed = 91;
  DataMatrix x = sample(spec, TailFamily::student_t(6.0), 100000);
  ScatterEstimate cov = sample_covariance(x, false);
  const double c = 3.0 / spec.idiosyncratic_cov.trace();
  CHECK(max_norm(cov.matrix - c * spec.idiosyncratic_cov) < 0.08);
}

TEST_CASE("mixture scenario inflates the covariance by 0.8 + 0.2 * 10") {
  FactorModelSpec spec;
  spec.d = 3;
  spec.m = 0;
  spec.idiosyncratic_cov = Matrix::Identity(3, 3);
  spec.seed = 404;
  TailFamily tail = TailFamily::mixture_normal(0.2, 10.0);
  CHECK(covariance_inflation(tail) == doctest::Approx(2.8));

  DataMatrix x = sample(spec, tail, 100000);
  ScatterEstimate cov = sample_covariance(x, false);
  for (int j = 0; j < 3; ++j)
    CHECK(cov.matrix(j, j) == doctest::Approx(2.8).epsilon(0.1));
}

TEST_CASE("spatial-sign statistics agree across elliptical families") {
  // Directions of centered draws are distribution-free across the
  // elliptical families sharing a scatter matrix.
  FactorModelSpec spec;
  spec.d = 4;
  spec.m = 0;
  spec.idiosyncratic_cov = ar1_matrix(4, 0.5);
  const int n = 10000;

  spec.seed = 555;
  DataMatrix xg = sample(spec, TailFamily::gaussian(), n);
  spec.seed = 556;
  DataMatrix xt = sample(spec, TailFamily::student_t(4.0), n);

  const Vector zero = Vector::Zero(4);
  Matrix sg = spatial_sign_covariance(xg, zero).matrix;
  Matrix st = spatial_sign_covariance(xt, zero).matrix;

  // Entrywise Monte-Carlo standard error of the difference of means of
  // d * u u' terms: bounded by d / sqrt(n) per family.
  const double se_bound = 2.0 * 4.0 / std::sqrt(static_cast<double>(n));
  CHECK(max_norm(sg - st) < 3.0 * se_bound);
}

TEST_CASE("ar1 helpers") {
  Matrix a = ar1_matrix(3, 0.5);
  CHECK(a(0, 0) == 1.0);
  CHECK(a(0, 1) == 0.5);
  CHECK(a(0, 2) == 0.25);

  Matrix cov = ar1_precision_cov(4, 0.4);
  Matrix product = cov * ar1_matrix(4, 0.4);
  CHECK(max_norm(product - Matrix::Identity(4, 4)) < 1e-10);
}

TEST_CASE("scenario JSON round trip") {
  nlohmann::json j = {
      {"n", 100},
      {"d", 12},
      {"m", 3},
      {"loading_variances", {1.0, 0.5625, 0.25}},
      {"seed", 42},
      {"sigma_u", {{"kind", "ar1"}, {"rho", 0.9}}},
      {"tail", {{"family", "student_t"}, {"nu", 2.2}}},
  };
  ScenarioSpec spec = scenario_from_json(j);
  CHECK(spec.n == 100);
  CHECK(spec.model.d == 12);
  CHECK(spec.tail.kind == TailFamily::Kind::StudentT);
  CHECK(spec.tail.nu == doctest::Approx(2.2));
  CHECK(max_norm(spec.model.idiosyncratic_cov - ar1_matrix(12, 0.9)) == 0.0);

  nlohmann::json round = scenario_to_json(spec);
  ScenarioSpec again = scenario_from_json(round);
  CHECK(again.model.d == spec.model.d);
  CHECK(again.tail.nu == spec.tail.nu);
  CHECK(max_norm(again.model.idiosyncratic_cov -
                 spec.model.idiosyncratic_cov) == 0.0);
}

}  // TEST_SUITE
