#pragma once

#include <optional>

#include "robustcov/types.hpp"

namespace robustcov {

/// Entrywise maximum absolute value.
double max_norm(const Matrix& m);

/// Frobenius norm.
double frobenius(const Matrix& m);

/// Spectral norm (largest singular value).
double spectral(const Matrix& m);

/// Operator 1-norm: maximum column absolute sum.
double l1_op(const Matrix& m);

/// Operator infinity-norm: maximum row absolute sum.
double linf_op(const Matrix& m);

/// Relative Frobenius norm d^{-1/2} ||Sigma^{-1/2} M Sigma^{-1/2}||_F.
/// Sigma must be symmetric positive definite.
double rel_frobenius(const Matrix& m, const Matrix& sigma);

/// max_j |lambda_hat_j / lambda_j - 1|. All true eigenvalues must be nonzero.
double ratio_error(const Vector& lambda_hat, const Vector& lambda);

/// sqrt(d) * entrywise max absolute difference between eigenvector matrices,
/// after normalizing both to have a positive first nonzero entry per column.
double eigvec_error(const Matrix& gamma_hat, const Matrix& gamma);

/// Flips the sign of each column so its first entry above `zero_tol` in
/// absolute value is positive.
Matrix normalize_eigvec_signs(Matrix gamma, double zero_tol = 1e-12);

struct ErrorReport {
  std::optional<double> max_norm;
  std::optional<double> frobenius;
  std::optional<double> spectral;
  std::optional<double> rel_frobenius;
  std::optional<double> l1_op;
  std::optional<double> linf_op;
};

struct ErrorReportRequest {
  bool max_norm = true;
  bool frobenius = true;
  bool spectral = true;
  bool rel_frobenius = false;
  bool l1_op = false;
  bool linf_op = false;
};

/// Evaluates the requested norms of `m`. `sigma` is required only when the
/// relative Frobenius norm is requested.
ErrorReport error_report(const Matrix& m, const ErrorReportRequest& request,
                         const Matrix* sigma = nullptr);

}  // namespace robustcov
