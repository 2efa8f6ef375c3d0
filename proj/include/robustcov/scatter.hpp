#pragma once

#include <functional>
#include <vector>

#include "robustcov/types.hpp"

namespace robustcov {

enum class ScatterKind { Sample, SpatialSign, TylerPlugin, RegTyler };

struct ScatterEstimate {
  Matrix matrix;
  ScatterKind kind = ScatterKind::Sample;
  Vector center;          // location used; empty when none applies
  int skipped_rows = 0;   // rows excluded for a near-zero radius
  double alpha = 0.0;     // RegTyler regularization level
  int iterations = 0;
  double final_residual = 0.0;
  std::vector<double> residual_history;  // RegTyler relative changes
};

/// Mean-centered covariance with divisor n; optionally rescaled to trace d.
ScatterEstimate sample_covariance(const DataMatrix& x,
                                  bool normalize_to_scatter);

/// Spatial-sign covariance (d/n) sum_i U(X_i - mu) U(X_i - mu)'. Rows within
/// 1e-14 (relative) of mu are skipped and counted in `skipped_rows`.
ScatterEstimate spatial_sign_covariance(const DataMatrix& x, const Vector& mu);

/// Hook for refining intermediate plug-in estimates between passes.
using RefineCallback = std::function<Matrix(const Matrix&)>;

/// Tyler-type plug-in scatter:
///   (d/n) sum_i (X_i-mu)(X_i-mu)' / ((X_i-mu)' V (X_i-mu)),
/// rescaled to trace d. With iterations > 1 each pass inverts the previous
/// (optionally refined) estimate and re-applies the formula.
ScatterEstimate tyler_plugin(const DataMatrix& x, const Vector& mu,
                             const Matrix& v_init, int iterations = 1,
                             const RefineCallback& refine = nullptr);

/// Regularized Tyler M-estimator on pre-centered (symmetrized) data:
/// fixed point of
///   S -> (1/(1+alpha)) (d/n) sum_i x_i x_i' / (x_i' S^{-1} x_i)
///        + (alpha/(1+alpha)) I,
/// iterated from the identity until the relative Frobenius change drops
/// below `tol`. The converged matrix is rescaled to trace d.
ScatterEstimate reg_tyler(const DataMatrix& x_sym, double alpha,
                          double tol = 1e-8, int max_iter = 200);

/// Pairwise differences of consecutive rows: floor(n/2) rows of
/// x_{2j} - x_{2j+1}.
DataMatrix symmetrize(const DataMatrix& x);

/// max(0.1, 1.1 (gamma - 1 + s_max (1 + sqrt(gamma))^2)).
double regtyler_alpha(double gamma, double s_max);

/// Default regularization level for reg_tyler on symmetrized data, using
/// gamma = d / (2n) and s_max the spectral norm of the sample covariance of
/// the input.
double regtyler_alpha_default(const DataMatrix& x_sym);

}  // namespace robustcov
