#pragma once

#include <vector>

#include "robustcov/spectral.hpp"
#include "robustcov/types.hpp"

namespace robustcov {

enum class PrecisionMethod { Clime, Glasso };

struct PrecisionEstimate {
  Matrix v0;    // full precision after the low-rank correction
  Matrix v0_u;  // residual precision
  double tau = 0.0;
  PrecisionMethod method = PrecisionMethod::Clime;
};

struct ClimeResult {
  Matrix v;                              // symmetrized estimate
  std::vector<double> column_objectives; // l1 objective per column program
};

/// Entrywise symmetrization keeping the smaller-magnitude of each
/// (i,j)/(j,i) pair.
Matrix symmetrize_smaller_magnitude(const Matrix& m);

/// Constrained l1 minimization: per column j,
///   min ||v||_1  s.t.  ||sigma_u v - e_j||_max <= tau,
/// solved as a linear program, then symmetrized entrywise by keeping the
/// smaller-magnitude of the (i,j)/(j,i) pair.
ClimeResult clime(const Matrix& sigma_u, double tau);

struct GlassoResult {
  Matrix v;                       // positive definite estimate
  std::vector<double> objective;  // penalized objective after each sweep
  int sweeps = 0;
};

/// l1-penalized Gaussian likelihood (penalty on all entries, diagonal
/// included):
///   min_{V > 0} tr(sigma_u V) - log det(V) + tau ||V||_{1,1},
/// by block coordinate descent over columns with a soft-threshold inner
/// loop. `tol` bounds the max entry change of the working covariance across
/// a sweep. Inputs with an eigenvalue below -1e-8 are rejected; run
/// pd_repair first.
GlassoResult glasso(const Matrix& sigma_u, double tau, double tol = 1e-6,
                    int max_iter = 500);

/// Low-rank downdate
///   v_u - v_u G (diag(lambda)^{-1} + G' v_u G)^{-1} G' v_u,
/// the inverse of (G diag(lambda) G' + v_u^{-1}) by the Woodbury identity.
Matrix woodbury_correct(const Matrix& v_u, const Matrix& gamma_m,
                        const Vector& lambda_m);

/// Runs CLIME or GLASSO on the thresholded residual and applies the low-rank
/// correction from the split.
PrecisionEstimate estimate_precision(const Matrix& sigma_u_tau,
                                     const SpectralSplit& split,
                                     PrecisionMethod method, double tau);

}  // namespace robustcov
