#pragma once

#include "robustcov/scatter.hpp"
#include "robustcov/types.hpp"

namespace robustcov {

/// Huber function min(h, max(-h, x)).
double huber(double x, double h);

struct HuberScale {
  double theta_hat = 0.0;  // estimate of d^{-1} E(r^2)
  double h = 0.0;          // truncation level
  Vector radii;            // the n values d^{-1} r_i^2 fed to the solver
};

/// Squared Mahalanobis radii over d: d^{-1} (X_i - mu)' V (X_i - mu) per row.
Vector mahalanobis_radii(const DataMatrix& x, const Vector& mu,
                         const Matrix& v_s);

/// Solves sum_i H_h(radii_i - theta) = 0 exactly via the breakpoints of the
/// piecewise-linear estimating equation. When the root set is an interval
/// its midpoint is returned.
HuberScale huber_scale(const Vector& radii, double h);

/// h = c * n^{2 / (2 + epsilon)}.
double default_h(int n, double epsilon = 1.0, double c = 1.0);

/// Covariance-scale estimate theta * scatter.
Matrix covariance_from_scatter(const Matrix& scatter, const HuberScale& theta);
Matrix covariance_from_scatter(const ScatterEstimate& scatter,
                               const HuberScale& theta);

}  // namespace robustcov
