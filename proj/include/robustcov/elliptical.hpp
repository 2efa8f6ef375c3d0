#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "robustcov/types.hpp"

namespace robustcov {

/// Spiked factor model: d-dimensional observations driven by m factors with
/// loading column variances s_1..s_m plus idiosyncratic noise.
struct FactorModelSpec {
  int d = 0;
  int m = 0;
  std::vector<double> loading_variances;  // s_1..s_m, all positive
  Matrix idiosyncratic_cov;               // d x d symmetric positive definite
  std::uint64_t seed = 0;

  void validate() const;
};

struct TailFamily {
  enum class Kind { Gaussian, StudentT, MixtureNormal };

  Kind kind = Kind::Gaussian;
  double nu = 4.0;          // StudentT degrees of freedom, > 2
  double weight = 0.2;      // MixtureNormal contamination probability
  double inflation = 10.0;  // MixtureNormal covariance multiplier

  static TailFamily gaussian() { return {}; }
  static TailFamily student_t(double nu) {
    TailFamily t;
    t.kind = Kind::StudentT;
    t.nu = nu;
    return t;
  }
  static TailFamily mixture_normal(double weight, double inflation) {
    TailFamily t;
    t.kind = Kind::MixtureNormal;
    t.weight = weight;
    t.inflation = inflation;
    return t;
  }

  void validate() const;
};

/// Population quantities the estimators are scored against.
struct GroundTruth {
  Matrix sigma0;    // scatter matrix, trace d
  Matrix sigma0_u;  // spectral-split residual of sigma0 at rank m
  Matrix gamma_m;   // d x m leading eigenvectors of sigma0
  Vector lambda_m;  // m leading eigenvalues of sigma0
  Matrix v0;        // sigma0^{-1}
  Matrix v0_u;      // inverse of the scaled idiosyncratic covariance
  Matrix cov_x;     // B B' + Sigma_u
};

/// Draws the d x m loading matrix; column j is i.i.d. N(0, s_j).
/// Deterministic given spec.seed.
Matrix build_loadings(const FactorModelSpec& spec);

GroundTruth ground_truth(const Matrix& loadings, const Matrix& sigma_u);

/// Draws n rows y = B f + u with (f, u) jointly elliptical with base
/// covariance c * diag(I_m, Sigma_u), c = d / tr(B B' + Sigma_u). The factor
/// and idiosyncratic parts share the radial variable of the tail family
/// (joint draw). Gaussian and Student-t draws have covariance exactly equal
/// to the base; the mixture family inflates it by covariance_inflation.
/// Deterministic given spec.seed.
DataMatrix sample(const FactorModelSpec& spec, const TailFamily& tail, int n);

/// Ratio of the covariance of a tail-family draw to its base matrix:
/// 1 for Gaussian and Student-t, (1 - weight) + weight * inflation for the
/// normal mixture.
double covariance_inflation(const TailFamily& tail);

/// AR(1)-type matrix (rho^{|i-j|}).
Matrix ar1_matrix(int d, double rho);

/// Covariance whose inverse is the AR(1) matrix (rho^{|i-j|}); used by the
/// sparse-precision designs.
Matrix ar1_precision_cov(int d, double rho);

/// Factory descriptor for the idiosyncratic covariance, kept alongside the
/// built matrix so scenario configurations round-trip through JSON.
struct SigmaUSpec {
  enum class Kind { Identity, ScaledIdentity, Ar1, Ar1Precision, Explicit };

  Kind kind = Kind::Identity;
  double rho = 0.0;
  double scale = 1.0;
  Matrix explicit_matrix;

  Matrix build(int d) const;
};

/// Full description of a synthetic data-generating process.
struct ScenarioSpec {
  FactorModelSpec model;
  SigmaUSpec sigma_u;
  TailFamily tail;
  int n = 0;

  void validate() const;
};

ScenarioSpec scenario_from_json(const nlohmann::json& j);
nlohmann::json scenario_to_json(const ScenarioSpec& spec);

}  // namespace robustcov
